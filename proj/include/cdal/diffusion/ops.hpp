#pragma once

#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/diffusion/schedule.hpp"

namespace cdal::diffusion {

// Marginal sample x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps.
// t = 0 is allowed and returns x0 unchanged (abar_0 = 1).
template <typename Real>
inline Tensor<Real> forward_sample(const Tensor<Real>& x0, int t, const Tensor<Real>& eps,
                                   const NoiseSchedule& s) {
    if (t < 0 || t > s.T)
        throw std::out_of_range("forward_sample: t=" + std::to_string(t) + " outside 0.." + std::to_string(s.T));
    check_same_shape(x0, eps, "forward_sample");
    const Real a = static_cast<Real>(s.sqrt_alpha_bar(t));
    const Real b = static_cast<Real>(s.sqrt_one_minus_alpha_bar(t));
    Tensor<Real> out = x0;
    Real* op = out.ptr();
    const Real* ep = eps.ptr();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) op[i] = a * op[i] + b * ep[i];
    return out;
}

// The previous-step marginal used for both real and generated pairs:
// q(x0, t-1, eps). At t = 1 this is the identity on x0.
template <typename Real>
inline Tensor<Real> forward_reparam_prev(const Tensor<Real>& x0, int t, const Tensor<Real>& eps,
                                         const NoiseSchedule& s) {
    s.check_t(t);
    return forward_sample(x0, t - 1, eps, s);
}

// Deterministic posterior-mean step: c_cur * x_t + c_pred * x0_hat.
// At t = 1 this collapses to x0_hat exactly (c_cur = 0, c_pred = 1).
// When add_noise is set, sqrt(posterior_var) Gaussian noise is mixed in for
// t > 1; default keeps the reverse update noise-free.
template <typename Real>
inline Tensor<Real> posterior_step(const Tensor<Real>& x_t, const Tensor<Real>& x0_hat, int t,
                                   const NoiseSchedule& s, bool add_noise = false, Rng* rng = nullptr) {
    s.check_t(t);
    check_same_shape(x_t, x0_hat, "posterior_step");
    const Real c_cur = static_cast<Real>(s.posterior_coef_current(t));
    const Real c_pred = static_cast<Real>(s.posterior_coef_predicted(t));
    Tensor<Real> out = x0_hat;
    Real* op = out.ptr();
    const Real* xp = x_t.ptr();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) op[i] = c_cur * xp[i] + c_pred * op[i];
    if (add_noise && t > 1) {
        if (rng == nullptr) throw ConfigError("posterior_step: add_noise requires an Rng");
        const Real sigma = static_cast<Real>(std::sqrt(s.posterior_vars[static_cast<size_t>(t)]));
        for (int64_t i = 0, n = out.numel(); i < n; ++i)
            op[i] += sigma * static_cast<Real>(rng->normal());
    }
    return out;
}

// Label value-space conversions. {0,1} <-> {-1,1} round-trips exactly.
template <typename Real>
inline Tensor<Real> label_to_diffusion(const Tensor<Real>& prob) {
    Tensor<Real> out = prob;
    for (auto& v : out.data) v = Real(2) * v - Real(1);
    return out;
}

template <typename Real>
inline Tensor<Real> label_to_probability(const Tensor<Real>& diff) {
    Tensor<Real> out = diff;
    for (auto& v : out.data) {
        v = (v + Real(1)) / Real(2);
        if (v < Real(0)) v = Real(0);
        if (v > Real(1)) v = Real(1);
    }
    return out;
}

}  // namespace cdal::diffusion
