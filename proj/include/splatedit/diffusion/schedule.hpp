#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "splatedit/image.hpp"

namespace splatedit {
namespace diffusion {

/// DDPM noise schedule: T steps with linearly increasing per-step variances
/// and cached cumulative products alpha_bar, with alpha_bar[0] = 1.
template <typename T>
struct NoiseSchedule {
    int timesteps = 200;
    std::vector<T> betas;       // 1-indexed conceptually; betas[t-1] is beta_t
    std::vector<T> alpha_bars;  // alpha_bars[t] = prod_{s<=t} (1 - beta_s), alpha_bars[0] = 1

    static NoiseSchedule linear(int steps = 200, double beta_start = 1e-4, double beta_end = 0.02) {
        if (steps < 1) throw std::invalid_argument("schedule: timesteps must be >= 1");
        NoiseSchedule s;
        s.timesteps = steps;
        s.betas.resize(steps);
        s.alpha_bars.resize(steps + 1);
        s.alpha_bars[0] = T(1);
        for (int t = 0; t < steps; ++t) {
            const double b =
                steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / double(steps - 1);
            s.betas[t] = T(b);
            s.alpha_bars[t + 1] = s.alpha_bars[t] * (T(1) - s.betas[t]);
        }
        s.validate();
        return s;
    }

    void validate() const {
        if (int(betas.size()) != timesteps || int(alpha_bars.size()) != timesteps + 1)
            throw std::invalid_argument("schedule: inconsistent sizes");
        for (int t = 0; t < timesteps; ++t) {
            if (!(betas[t] > T(0) && betas[t] < T(1)))
                throw std::invalid_argument("schedule: betas must lie in (0,1)");
            if (t > 0 && !(betas[t] > betas[t - 1]))
                throw std::invalid_argument("schedule: betas must be strictly increasing");
            if (!(alpha_bars[t + 1] < alpha_bars[t]))
                throw std::invalid_argument("schedule: alpha_bar must be strictly decreasing");
        }
    }

    T alpha_bar(int t) const {
        if (t < 0 || t > timesteps) throw std::invalid_argument("schedule: t out of range");
        return alpha_bars[t];
    }
};

/// z_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
template <typename T>
Image<T> forward_diffuse(const Image<T>& x0, int t, const Image<T>& eps,
                         const NoiseSchedule<T>& schedule) {
    if (t < 1 || t > schedule.timesteps)
        throw std::invalid_argument("forward_diffuse: t out of range [1, T]");
    require_same_shape(x0, eps, "forward_diffuse");
    const T ab = schedule.alpha_bar(t);
    const T a = std::sqrt(ab);
    const T b = std::sqrt(T(1) - ab);
    Image<T> z(x0.height, x0.width, x0.channels);
    for (std::size_t i = 0; i < x0.data.size(); ++i) z.data[i] = a * x0.data[i] + b * eps.data[i];
    return z;
}

}  // namespace diffusion
}  // namespace splatedit
