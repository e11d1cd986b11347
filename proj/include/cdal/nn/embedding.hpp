#pragma once

#include <cmath>

#include "cdal/core/errors.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/nn/layers.hpp"

namespace cdal::nn {

// Sinusoidal position code for the timestep: first half sin(t*w_k), second
// half cos(t*w_k), frequencies geometric from 1 down to 1/10000.
template <typename Real>
inline Tensor<Real> sinusoidal_embed(int t, int dim) {
    if (dim <= 0 || dim % 2 != 0) throw ConfigError("sinusoidal_embed: dim must be positive and even");
    if (t < 0) throw ConfigError("sinusoidal_embed: t must be >= 0");
    const int half = dim / 2;
    Tensor<Real> e({dim});
    for (int k = 0; k < half; ++k) {
        const double frac = (half > 1) ? static_cast<double>(k) / (half - 1) : 0.0;
        const double omega = std::pow(10000.0, -frac);
        e[k] = static_cast<Real>(std::sin(t * omega));
        e[half + k] = static_cast<Real>(std::cos(t * omega));
    }
    return e;
}

// Two-layer MLP used for both the timestep and the latent pathway.
template <typename Real>
struct CondMlp {
    Linear<Real> fc1, fc2;
    SiLU<Real> act;

    void configure(int in_dim, int out_dim) {
        fc1.configure(in_dim, out_dim);
        fc2.configure(out_dim, out_dim);
    }

    void init(Rng& rng) {
        fc1.init(rng);
        fc2.init(rng);
    }

    Tensor<Real> forward(const Tensor<Real>& x) { return fc2.forward(act.forward(fc1.forward(x))); }

    Tensor<Real> backward(const Tensor<Real>& gy) {
        return fc1.backward(act.backward(fc2.backward(gy)));
    }

    void collect(const std::string& prefix, ParamList<Real>& out) {
        fc1.collect(prefix + ".fc1", out);
        fc2.collect(prefix + ".fc2", out);
    }
};

}  // namespace cdal::nn
