#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"

namespace cdal::diffusion {

// Variance schedule for the few-step forward process. All quantities are kept
// in double regardless of the network precision. Immutable after construction.
//
// Indexing convention: betas/alphas/posterior_vars are 1-based over t=1..T
// (index 0 unused); alpha_bars is 0-based with alpha_bars[0] = 1 so that
// "step t-1" at t=1 is the identity.
struct NoiseSchedule {
    int T = 0;
    double beta_min = 0.0;
    double beta_max = 0.0;
    std::vector<double> betas;           // betas[t], t in 1..T, strictly increasing
    std::vector<double> alphas;          // 1 - betas[t]
    std::vector<double> alpha_bars;      // prod_{s<=t} alphas[s], alpha_bars[0] = 1
    std::vector<double> posterior_vars;  // (1 - abar_{t-1}) / (1 - abar_t) * beta_t

    void check_t(int t) const {
        if (t < 1 || t > T)
            throw std::out_of_range("timestep t=" + std::to_string(t) + " outside 1.." + std::to_string(T));
    }

    double sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bars[static_cast<size_t>(t)]); }
    double sqrt_one_minus_alpha_bar(int t) const { return std::sqrt(1.0 - alpha_bars[static_cast<size_t>(t)]); }

    // Coefficients of the posterior mean q(x_{t-1} | x_t, x0):
    //   mean = c_cur * x_t + c_pred * x0
    double posterior_coef_current(int t) const {
        check_t(t);
        return std::sqrt(alphas[static_cast<size_t>(t)]) * (1.0 - alpha_bars[static_cast<size_t>(t - 1)]) /
               (1.0 - alpha_bars[static_cast<size_t>(t)]);
    }
    double posterior_coef_predicted(int t) const {
        check_t(t);
        return std::sqrt(alpha_bars[static_cast<size_t>(t - 1)]) * betas[static_cast<size_t>(t)] /
               (1.0 - alpha_bars[static_cast<size_t>(t)]);
    }
};

// Closed-form schedule: beta_t = 1 - exp(-bmin/T - (bmax-bmin)/2 * (2t-1)/T^2).
// The exponents telescope, so alpha_bar_T = exp(-(bmin+bmax)/2) for every T.
inline NoiseSchedule build_schedule(int T, double beta_min, double beta_max) {
    if (T < 1) throw ConfigError("build_schedule: T must be >= 1, got " + std::to_string(T));
    if (!(beta_min > 0.0) || !(beta_max > 0.0))
        throw ConfigError("build_schedule: beta bounds must be positive");
    if (beta_min > beta_max) throw ConfigError("build_schedule: beta_min must not exceed beta_max");

    NoiseSchedule s;
    s.T = T;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.betas.assign(static_cast<size_t>(T) + 1, 0.0);
    s.alphas.assign(static_cast<size_t>(T) + 1, 0.0);
    s.alpha_bars.assign(static_cast<size_t>(T) + 1, 0.0);
    s.posterior_vars.assign(static_cast<size_t>(T) + 1, 0.0);

    const double Td = static_cast<double>(T);
    s.alpha_bars[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double expo = -beta_min / Td - 0.5 * (beta_max - beta_min) * (2.0 * t - 1.0) / (Td * Td);
        const double beta = -std::expm1(expo);  // 1 - e^expo
        s.betas[static_cast<size_t>(t)] = beta;
        s.alphas[static_cast<size_t>(t)] = 1.0 - beta;
        s.alpha_bars[static_cast<size_t>(t)] = s.alpha_bars[static_cast<size_t>(t - 1)] * (1.0 - beta);
        s.posterior_vars[static_cast<size_t>(t)] = (1.0 - s.alpha_bars[static_cast<size_t>(t - 1)]) /
                                                   (1.0 - s.alpha_bars[static_cast<size_t>(t)]) * beta;
    }
    return s;
}

}  // namespace cdal::diffusion
