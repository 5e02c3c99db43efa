#pragma once

#include <string>
#include <vector>

#include "splatedit/container.hpp"
#include "splatedit/deformation.hpp"
#include "splatedit/gaussian_cloud.hpp"

namespace splatedit {

/// Complete scene state: canonical Gaussians, deformation field, and the
/// training-camera extent used to scale densification and learning rates.
/// Times are normalized to [0,1] everywhere.
template <typename T>
struct SceneSnapshot {
    GaussianCloud<T> cloud;
    DeformationField<T> field;
    T scene_extent = T(1);
    int frame_count = 0;

    template <typename U>
    SceneSnapshot<U> cast() const {
        SceneSnapshot<U> out;
        out.cloud = cloud.template cast<U>();
        out.field = field.template cast<U>();
        out.scene_extent = U(scene_extent);
        out.frame_count = frame_count;
        return out;
    }
};

// Snapshot sections, all payloads f64/i64 little-endian:
//   "scene_meta"  i64: N, hidden_layers(D), width(W), L_x, L_t, frame_count
//   "scene_dims"  i64: full MLP dims vector
//   "extent"      f64: scene_extent
//   "positions"   f64: N*3      "rotations" f64: N*4 (w,x,y,z)
//   "scales"      f64: N*3      "opacities" f64: N
//   "colors"      f64: N*3      "field"     f64: MLP parameters
template <typename T>
void save_snapshot(const SceneSnapshot<T>& scene, const std::string& path) {
    scene.cloud.check_consistent();
    const std::size_t n = scene.cloud.size();
    std::vector<ContainerSection> sections;

    {
        ContainerSection s{"scene_meta", {}};
        const std::int64_t meta[6] = {std::int64_t(n),
                                      std::int64_t(scene.field.mlp.dims.size()) - 2,
                                      scene.field.mlp.dims.size() > 2 ? scene.field.mlp.dims[1] : 0,
                                      scene.field.encoding.levels_position,
                                      scene.field.encoding.levels_time,
                                      scene.frame_count};
        pack_i64(s.bytes, meta, 6);
        sections.push_back(std::move(s));
    }
    {
        ContainerSection s{"scene_dims", {}};
        std::vector<std::int64_t> dims(scene.field.mlp.dims.begin(), scene.field.mlp.dims.end());
        pack_i64(s.bytes, dims.data(), dims.size());
        sections.push_back(std::move(s));
    }
    {
        ContainerSection s{"extent", {}};
        const double e = double(scene.scene_extent);
        pack_f64(s.bytes, &e, 1);
        sections.push_back(std::move(s));
    }

    auto pack_vec3 = [&](const char* name, const std::vector<Vec3<T>>& v) {
        ContainerSection s{name, {}};
        std::vector<double> flat;
        flat.reserve(v.size() * 3);
        for (const auto& x : v) {
            flat.push_back(double(x.x));
            flat.push_back(double(x.y));
            flat.push_back(double(x.z));
        }
        pack_f64(s.bytes, flat.data(), flat.size());
        sections.push_back(std::move(s));
    };
    pack_vec3("positions", scene.cloud.positions);
    {
        ContainerSection s{"rotations", {}};
        std::vector<double> flat;
        flat.reserve(n * 4);
        for (const auto& q : scene.cloud.rotations_raw) {
            flat.push_back(double(q.w));
            flat.push_back(double(q.x));
            flat.push_back(double(q.y));
            flat.push_back(double(q.z));
        }
        pack_f64(s.bytes, flat.data(), flat.size());
        sections.push_back(std::move(s));
    }
    pack_vec3("scales", scene.cloud.scales_raw);
    {
        ContainerSection s{"opacities", {}};
        std::vector<double> flat(scene.cloud.opacities_raw.begin(), scene.cloud.opacities_raw.end());
        pack_f64(s.bytes, flat.data(), flat.size());
        sections.push_back(std::move(s));
    }
    pack_vec3("colors", scene.cloud.colors_raw);
    {
        ContainerSection s{"field", {}};
        std::vector<double> flat(scene.field.mlp.params.begin(), scene.field.mlp.params.end());
        pack_f64(s.bytes, flat.data(), flat.size());
        sections.push_back(std::move(s));
    }

    write_container(path, sections);
}

template <typename T>
SceneSnapshot<T> load_snapshot(const std::string& path) {
    const auto sections = read_container(path);
    const auto meta = unpack_i64(find_section(sections, "scene_meta"));
    if (meta.size() != 6) throw ContainerFormatError("snapshot: bad scene_meta");
    const std::size_t n = std::size_t(meta[0]);

    SceneSnapshot<T> scene;
    scene.frame_count = int(meta[5]);
    scene.field.encoding.levels_position = int(meta[3]);
    scene.field.encoding.levels_time = int(meta[4]);

    const auto dims64 = unpack_i64(find_section(sections, "scene_dims"));
    std::vector<int> dims(dims64.begin(), dims64.end());

    const auto extent = unpack_f64(find_section(sections, "extent"));
    if (extent.size() != 1) throw ContainerFormatError("snapshot: bad extent");
    scene.scene_extent = T(extent[0]);

    auto unpack_vec3 = [&](const char* name, std::vector<Vec3<T>>& out) {
        const auto flat = unpack_f64(find_section(sections, name));
        if (flat.size() != n * 3)
            throw ContainerFormatError(std::string("snapshot: bad section size: ") + name);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = {T(flat[i * 3]), T(flat[i * 3 + 1]), T(flat[i * 3 + 2])};
    };
    unpack_vec3("positions", scene.cloud.positions);
    {
        const auto flat = unpack_f64(find_section(sections, "rotations"));
        if (flat.size() != n * 4) throw ContainerFormatError("snapshot: bad section size: rotations");
        scene.cloud.rotations_raw.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            scene.cloud.rotations_raw[i] = {T(flat[i * 4]), T(flat[i * 4 + 1]), T(flat[i * 4 + 2]),
                                            T(flat[i * 4 + 3])};
    }
    unpack_vec3("scales", scene.cloud.scales_raw);
    {
        const auto flat = unpack_f64(find_section(sections, "opacities"));
        if (flat.size() != n) throw ContainerFormatError("snapshot: bad section size: opacities");
        scene.cloud.opacities_raw.assign(flat.begin(), flat.end());
    }
    unpack_vec3("colors", scene.cloud.colors_raw);

    {
        const auto flat = unpack_f64(find_section(sections, "field"));
        scene.field.mlp.dims = dims;
        scene.field.mlp.layer_offsets.clear();
        std::size_t total = 0;
        for (int l = 0; l + 1 < int(dims.size()); ++l) {
            scene.field.mlp.layer_offsets.push_back(total);
            total += std::size_t(dims[l + 1]) * dims[l] + dims[l + 1];
        }
        if (flat.size() != total) throw ContainerFormatError("snapshot: bad section size: field");
        scene.field.mlp.params.assign(flat.begin(), flat.end());
    }

    scene.cloud.check_consistent();
    return scene;
}

}  // namespace splatedit
