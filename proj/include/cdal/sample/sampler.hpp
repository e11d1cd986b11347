#pragma once

#include <cstdint>

#include "cdal/core/errors.hpp"
#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/diffusion/ops.hpp"
#include "cdal/diffusion/schedule.hpp"
#include "cdal/nn/generator.hpp"

namespace cdal::sample {

using cdal::ConfigError;
using cdal::Rng;
using cdal::Tensor;

struct InferenceConfig {
    int n_instances = 5;
    double threshold = 0.5;  // binary rule; multi-class uses per-pixel argmax
    uint64_t seed = 0;
    bool add_noise = false;  // optional stochastic reverse steps for t > 1

    void validate() const {
        if (n_instances < 1) throw ConfigError("inference: n_instances must be >= 1");
        if (!(threshold > 0.0 && threshold < 1.0))
            throw ConfigError("inference: threshold must lie in (0,1)");
    }
};

// One reverse chain: start from pure noise, repeatedly predict the clean
// label with a fresh latent, and move along the posterior mean. Returns the
// final label in probability space [0,1], shape [N, label_channels, R, R].
template <typename Real>
Tensor<Real> sample_once(nn::Generator<Real>& gen, const diffusion::NoiseSchedule& sched,
                         const Tensor<Real>& img, uint64_t seed, bool add_noise = false) {
    const int n = img.size(0);
    Rng rng(seed);
    Tensor<Real> x({n, gen.cfg.label_channels, gen.cfg.resolution, gen.cfg.resolution});
    rng.fill_normal(x);
    Tensor<Real> z({n, gen.cfg.latent_dim});
    for (int t = sched.T; t >= 1; --t) {
        rng.fill_normal(z);
        Tensor<Real> x0_hat = gen.forward(x, t, z, img);
        if (t > 1)
            x = diffusion::posterior_step(x, x0_hat, t, sched, add_noise, add_noise ? &rng : nullptr);
        else
            x = std::move(x0_hat);  // the t=1 posterior collapses onto the prediction
    }
    return diffusion::label_to_probability(x);
}

template <typename Real>
struct Prediction {
    Tensor<Real> mean_map;  // [N, label_channels, R, R] in [0,1]
    Tensor<int> hard_mask;  // [N, 1, R, R] class ids
};

// Multi-instance inference: average several independent chains in
// probability space, then harden by threshold (binary) or argmax.
template <typename Real>
Prediction<Real> predict(nn::Generator<Real>& gen, const diffusion::NoiseSchedule& sched,
                         const Tensor<Real>& img, const InferenceConfig& cfg) {
    cfg.validate();
    const int n = img.size(0);
    Prediction<Real> out;
    out.mean_map = Tensor<Real>({n, gen.cfg.label_channels, gen.cfg.resolution, gen.cfg.resolution});
    const Real w = Real(1) / static_cast<Real>(cfg.n_instances);
    for (int i = 0; i < cfg.n_instances; ++i) {
        Tensor<Real> prob = sample_once(gen, sched, img,
                                        derive_seed(cfg.seed, 0x696e7374ULL + static_cast<uint64_t>(i)),
                                        cfg.add_noise);
        axpy(w, prob, out.mean_map);
    }
    out.hard_mask = Tensor<int>({n, 1, gen.cfg.resolution, gen.cfg.resolution});
    const int ch = gen.cfg.label_channels;
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < gen.cfg.resolution; ++y)
            for (int x = 0; x < gen.cfg.resolution; ++x) {
                if (ch == 1) {
                    out.hard_mask.at(i, 0, y, x) =
                        static_cast<double>(out.mean_map.at(i, 0, y, x)) >= cfg.threshold ? 1 : 0;
                } else {
                    int best = 0;
                    Real bv = out.mean_map.at(i, 0, y, x);
                    for (int c = 1; c < ch; ++c)
                        if (out.mean_map.at(i, c, y, x) > bv) {
                            bv = out.mean_map.at(i, c, y, x);
                            best = c;
                        }
                    out.hard_mask.at(i, 0, y, x) = best;
                }
            }
    return out;
}

}  // namespace cdal::sample
