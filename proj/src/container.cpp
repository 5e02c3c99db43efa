#include "splatedit/container.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace splatedit {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'L', 'T', 'C', 'N', 'T', '1'};
constexpr std::size_t kNameBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

struct Cursor {
    const std::uint8_t* p;
    std::size_t remaining;

    void need(std::size_t n) {
        if (n > remaining) throw ContainerTruncatedError("container: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
        p += 8;
        remaining -= 8;
        return v;
    }
};

std::uint32_t payload_crc(const std::vector<std::uint8_t>& bytes) {
    return std::uint32_t(::crc32(0L, bytes.empty() ? Z_NULL : bytes.data(), uInt(bytes.size())));
}

}  // namespace

void write_container(const std::string& path, const std::vector<ContainerSection>& sections) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32(out, kContainerVersion);
    put_u32(out, std::uint32_t(sections.size()));
    for (const auto& s : sections) {
        if (s.name.size() > kNameBytes)
            throw ContainerFormatError("container: section name too long: " + s.name);
        char name[kNameBytes] = {};
        std::memcpy(name, s.name.data(), s.name.size());
        out.insert(out.end(), name, name + kNameBytes);
        put_u64(out, s.bytes.size());
        put_u32(out, payload_crc(s.bytes));
        out.insert(out.end(), s.bytes.begin(), s.bytes.end());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ContainerError("container: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f) throw ContainerError("container: write failed: " + path);
}

std::vector<ContainerSection> read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContainerError("container: cannot open: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Cursor c{buf.data(), buf.size()};
    c.need(8);
    if (std::memcmp(c.p, kMagic, 8) != 0) throw ContainerFormatError("container: bad magic");
    c.p += 8;
    c.remaining -= 8;
    const std::uint32_t version = c.u32();
    if (version != kContainerVersion)
        throw ContainerVersionError("container: unsupported version " + std::to_string(version));
    const std::uint32_t count = c.u32();

    std::vector<ContainerSection> sections;
    sections.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        c.need(kNameBytes);
        const char* name_p = reinterpret_cast<const char*>(c.p);
        std::size_t name_len = 0;
        while (name_len < kNameBytes && name_p[name_len] != '\0') ++name_len;
        ContainerSection s;
        s.name.assign(name_p, name_len);
        c.p += kNameBytes;
        c.remaining -= kNameBytes;
        const std::uint64_t len = c.u64();
        const std::uint32_t crc = c.u32();
        c.need(len);
        s.bytes.assign(c.p, c.p + len);
        c.p += len;
        c.remaining -= len;
        if (payload_crc(s.bytes) != crc)
            throw ContainerChecksumError("container: checksum mismatch in section '" + s.name + "'");
        sections.push_back(std::move(s));
    }
    return sections;
}

const ContainerSection& find_section(const std::vector<ContainerSection>& sections,
                                     const std::string& name) {
    for (const auto& s : sections)
        if (s.name == name) return s;
    throw ContainerFormatError("container: missing section '" + name + "'");
}

void pack_f64(std::vector<std::uint8_t>& out, const double* values, std::size_t count) {
    const std::size_t base = out.size();
    out.resize(base + count * 8);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        for (int b = 0; b < 8; ++b) out[base + i * 8 + b] = std::uint8_t(bits >> (8 * b));
    }
}

std::vector<double> unpack_f64(const ContainerSection& section) {
    if (section.bytes.size() % 8 != 0)
        throw ContainerFormatError("container: section '" + section.name + "' is not f64 data");
    std::vector<double> out(section.bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t(section.bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&out[i], &bits, 8);
    }
    return out;
}

void pack_i64(std::vector<std::uint8_t>& out, const std::int64_t* values, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t v = std::uint64_t(values[i]);
        for (int b = 0; b < 8; ++b) out.push_back(std::uint8_t(v >> (8 * b)));
    }
}

std::vector<std::int64_t> unpack_i64(const ContainerSection& section) {
    if (section.bytes.size() % 8 != 0)
        throw ContainerFormatError("container: section '" + section.name + "' is not i64 data");
    std::vector<std::int64_t> out(section.bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b) v |= std::uint64_t(section.bytes[i * 8 + b]) << (8 * b);
        out[i] = std::int64_t(v);
    }
    return out;
}

}  // namespace splatedit
