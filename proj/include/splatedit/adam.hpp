#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatedit {

template <typename T>
struct AdamHyper {
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-15);
};

/// Adam over named parameter groups. Moment buffers track parameter-array
/// rows through densification via remap_rows; each group keeps its own
/// monotone step counter so frozen groups stay untouched.
template <typename T>
class Adam {
public:
    explicit Adam(AdamHyper<T> hyper = {}) : hyper_(hyper) {}

    int add_group(const std::string& name, T lr, std::size_t size) {
        groups_.push_back({name, lr, 0, std::vector<T>(size, T(0)), std::vector<T>(size, T(0))});
        return int(groups_.size()) - 1;
    }

    T learning_rate(int group) const { return groups_[group].lr; }
    void set_learning_rate(int group, T lr) { groups_[group].lr = lr; }
    std::int64_t step_count(int group) const { return groups_[group].step; }
    std::size_t size(int group) const { return groups_[group].m.size(); }
    const std::vector<T>& first_moment(int group) const { return groups_[group].m; }
    const std::vector<T>& second_moment(int group) const { return groups_[group].v; }

    /// One bias-corrected Adam update over the group's flattened parameters.
    void step(int group, T* params, const T* grads, std::size_t n) {
        auto& g = groups_[group];
        if (n != g.m.size())
            throw std::invalid_argument("adam: shape mismatch for group '" + g.name + "' (" +
                                        std::to_string(n) + " vs " + std::to_string(g.m.size()) + ")");
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(grads[i]))
                throw std::runtime_error("adam: non-finite gradient in group '" + g.name + "'");
        g.step += 1;
        const T b1 = hyper_.beta1, b2 = hyper_.beta2;
        const T corr1 = T(1) - std::pow(b1, T(g.step));
        const T corr2 = T(1) - std::pow(b2, T(g.step));
        for (std::size_t i = 0; i < n; ++i) {
            g.m[i] = b1 * g.m[i] + (T(1) - b1) * grads[i];
            g.v[i] = b2 * g.v[i] + (T(1) - b2) * grads[i] * grads[i];
            const T mhat = g.m[i] / corr1;
            const T vhat = g.v[i] / corr2;
            params[i] -= g.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
        }
    }

    /// Rebuilds the moment buffers after a cloud edit. old_of_new[j] is the
    /// previous row of new row j, or -1 for freshly inserted rows (moments
    /// start at zero). components is the flat width of one row.
    void remap_rows(int group, const std::vector<int>& old_of_new, std::size_t components) {
        auto& g = groups_[group];
        std::vector<T> m(old_of_new.size() * components, T(0));
        std::vector<T> v(old_of_new.size() * components, T(0));
        for (std::size_t j = 0; j < old_of_new.size(); ++j) {
            const int src = old_of_new[j];
            if (src < 0) continue;
            for (std::size_t c = 0; c < components; ++c) {
                m[j * components + c] = g.m[std::size_t(src) * components + c];
                v[j * components + c] = g.v[std::size_t(src) * components + c];
            }
        }
        g.m = std::move(m);
        g.v = std::move(v);
    }

private:
    struct Group {
        std::string name;
        T lr;
        std::int64_t step;
        std::vector<T> m, v;
    };

    AdamHyper<T> hyper_;
    std::vector<Group> groups_;
};

}  // namespace splatedit
