#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/nn/layers.hpp"

namespace cdal::nn {

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename Real>
double clip_global_norm(ParamList<Real>& params, double max_norm) {
    double sq = 0.0;
    for (auto& p : params)
        for (Real g : p.grad->data) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const Real k = static_cast<Real>(max_norm / norm);
        for (auto& p : params)
            for (Real& g : p.grad->data) g *= k;
    }
    return norm;
}

template <typename Real>
void zero_grads(ParamList<Real>& params) {
    for (auto& p : params) p.grad->zero();
}

// Adam with the GAN-style betas used for both networks. Moment buffers are
// allocated per parameter on first use and are exposed by name so training
// can resume exactly from a checkpoint.
template <typename Real>
struct Adam {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;
    int64_t t = 0;

    std::vector<Tensor<Real>> m, v;
    std::vector<std::string> names;  // parallel to m/v, fixed after first step

    void attach(ParamList<Real>& params) {
        if (!m.empty()) {
            if (m.size() != params.size())
                throw ConfigError("adam: parameter list changed size");
            return;
        }
        m.reserve(params.size());
        v.reserve(params.size());
        for (auto& p : params) {
            m.emplace_back(p.value->shape);
            v.emplace_back(p.value->shape);
            names.push_back(p.name);
        }
    }

    void step(ParamList<Real>& params) {
        attach(params);
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            Real* w = params[i].value->ptr();
            const Real* g = params[i].grad->ptr();
            Real* mi = m[i].ptr();
            Real* vi = v[i].ptr();
            const int64_t nel = params[i].value->numel();
            for (int64_t j = 0; j < nel; ++j) {
                const double gj = static_cast<double>(g[j]);
                const double mj = beta1 * static_cast<double>(mi[j]) + (1.0 - beta1) * gj;
                const double vj = beta2 * static_cast<double>(vi[j]) + (1.0 - beta2) * gj * gj;
                mi[j] = static_cast<Real>(mj);
                vi[j] = static_cast<Real>(vj);
                const double mhat = mj / bc1;
                const double vhat = vj / bc2;
                w[j] = static_cast<Real>(static_cast<double>(w[j]) - lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

}  // namespace cdal::nn
