#pragma once

#include <string>
#include <vector>

#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/nn/kernels.hpp"

namespace cdal::nn {

// Named view of one trainable tensor; networks expose a flat list of these
// for the optimizer, serialization and freeze checks.
template <typename Real>
struct Param {
    std::string name;
    Tensor<Real>* value = nullptr;
    Tensor<Real>* grad = nullptr;
};

template <typename Real>
using ParamList = std::vector<Param<Real>>;

template <typename Real>
inline int64_t param_count(const ParamList<Real>& params) {
    int64_t n = 0;
    for (const auto& p : params) n += p.value->numel();
    return n;
}

// ---------------------------------------------------------------------------
// Conv2d: square kernel, zero padding, im2col + GEMM. Weights are stored
// GEMM-ready as [out_ch, in_ch*k*k].
// ---------------------------------------------------------------------------
template <typename Real>
struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
    Tensor<Real> w, b, gw, gb;
    Tensor<Real> x_cache;
    std::vector<Real> col_;  // per-sample scratch

    void configure(int in_channels, int out_channels, int k, int str, int padding) {
        in_ch = in_channels;
        out_ch = out_channels;
        ksize = k;
        stride = str;
        pad = padding;
        w = Tensor<Real>({out_ch, in_ch * ksize * ksize});
        b = Tensor<Real>({out_ch});
        gw = Tensor<Real>(w.shape);
        gb = Tensor<Real>(b.shape);
    }

    // Fan-in scaled normal init; zero_out for final projections.
    void init(Rng& rng, bool zero_out = false) {
        if (zero_out) {
            w.zero();
            b.zero();
            return;
        }
        const Real std = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(in_ch * ksize * ksize)));
        rng.fill_normal(w, std);
        b.zero();
    }

    int out_size(int in) const { return (in + 2 * pad - ksize) / stride + 1; }

    Tensor<Real> forward(const Tensor<Real>& x) {
        const int n = x.size(0), h = x.size(2), wd = x.size(3);
        if (x.size(1) != in_ch) throw ShapeError("Conv2d: expected " + std::to_string(in_ch) + " input channels");
        const int oh = out_size(h), ow = out_size(wd);
        const int kk = in_ch * ksize * ksize;
        const int64_t opix = static_cast<int64_t>(oh) * ow;
        x_cache = x;
        col_.resize(static_cast<size_t>(kk) * opix);
        Tensor<Real> y({n, out_ch, oh, ow});
        for (int i = 0; i < n; ++i) {
            im2col(x.ptr() + static_cast<int64_t>(i) * in_ch * h * wd, in_ch, h, wd, ksize, stride, pad,
                   col_.data());
            Real* yp = y.ptr() + static_cast<int64_t>(i) * out_ch * opix;
            gemm(false, false, out_ch, static_cast<int>(opix), kk, Real(1), w.ptr(), kk, col_.data(),
                 static_cast<int>(opix), Real(0), yp, static_cast<int>(opix));
            for (int c = 0; c < out_ch; ++c) {
                const Real bias = b[c];
                Real* row = yp + static_cast<int64_t>(c) * opix;
                for (int64_t p = 0; p < opix; ++p) row[p] += bias;
            }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& gy) {
        const Tensor<Real>& x = x_cache;
        const int n = x.size(0), h = x.size(2), wd = x.size(3);
        const int oh = gy.size(2), ow = gy.size(3);
        const int kk = in_ch * ksize * ksize;
        const int64_t opix = static_cast<int64_t>(oh) * ow;
        Tensor<Real> gx(x.shape);
        std::vector<Real> gcol(static_cast<size_t>(kk) * opix);
        col_.resize(static_cast<size_t>(kk) * opix);
        for (int i = 0; i < n; ++i) {
            const Real* gyp = gy.ptr() + static_cast<int64_t>(i) * out_ch * opix;
            // re-derive the column matrix rather than caching it per sample
            im2col(x.ptr() + static_cast<int64_t>(i) * in_ch * h * wd, in_ch, h, wd, ksize, stride, pad,
                   col_.data());
            gemm(false, true, out_ch, kk, static_cast<int>(opix), Real(1), gyp, static_cast<int>(opix),
                 col_.data(), static_cast<int>(opix), Real(1), gw.ptr(), kk);
            for (int c = 0; c < out_ch; ++c) {
                const Real* row = gyp + static_cast<int64_t>(c) * opix;
                Real s = 0;
                for (int64_t p = 0; p < opix; ++p) s += row[p];
                gb[c] += s;
            }
            gemm(true, false, kk, static_cast<int>(opix), out_ch, Real(1), w.ptr(), kk, gyp,
                 static_cast<int>(opix), Real(0), gcol.data(), static_cast<int>(opix));
            col2im(gcol.data(), in_ch, h, wd, ksize, stride, pad,
                   gx.ptr() + static_cast<int64_t>(i) * in_ch * h * wd);
        }
        return gx;
    }

    void collect(const std::string& prefix, ParamList<Real>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

// ---------------------------------------------------------------------------
// Linear on [B, in] batches.
// ---------------------------------------------------------------------------
template <typename Real>
struct Linear {
    int in_f = 0, out_f = 0;
    Tensor<Real> w, b, gw, gb;  // w: [out, in]
    Tensor<Real> x_cache;

    void configure(int in_features, int out_features) {
        in_f = in_features;
        out_f = out_features;
        w = Tensor<Real>({out_f, in_f});
        b = Tensor<Real>({out_f});
        gw = Tensor<Real>(w.shape);
        gb = Tensor<Real>(b.shape);
    }

    void init(Rng& rng, bool zero_out = false) {
        if (zero_out) {
            w.zero();
            b.zero();
            return;
        }
        const Real std = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(in_f)));
        rng.fill_normal(w, std);
        b.zero();
    }

    Tensor<Real> forward(const Tensor<Real>& x) {
        const int n = x.size(0);
        if (x.size(1) != in_f) throw ShapeError("Linear: expected " + std::to_string(in_f) + " features");
        x_cache = x;
        Tensor<Real> y({n, out_f});
        gemm(false, true, n, out_f, in_f, Real(1), x.ptr(), in_f, w.ptr(), in_f, Real(0), y.ptr(), out_f);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < out_f; ++c) y[static_cast<int64_t>(i) * out_f + c] += b[c];
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& gy) {
        const int n = x_cache.size(0);
        gemm(true, false, out_f, in_f, n, Real(1), gy.ptr(), out_f, x_cache.ptr(), in_f, Real(1),
             gw.ptr(), in_f);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < out_f; ++c) gb[c] += gy[static_cast<int64_t>(i) * out_f + c];
        Tensor<Real> gx({n, in_f});
        gemm(false, false, n, in_f, out_f, Real(1), gy.ptr(), out_f, w.ptr(), in_f, Real(0), gx.ptr(), in_f);
        return gx;
    }

    void collect(const std::string& prefix, ParamList<Real>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

// ---------------------------------------------------------------------------
// GroupNorm with per-channel affine. Group count is the largest power of two
// <= 32 that divides the channel count, so toy widths stay valid.
// ---------------------------------------------------------------------------
inline int groupnorm_groups(int channels) {
    int g = 32;
    while (g > 1 && channels % g != 0) g /= 2;
    return g;
}

template <typename Real>
struct GroupNorm {
    int channels = 0, groups = 1;
    Real eps = static_cast<Real>(1e-5);
    Tensor<Real> gamma, beta, ggamma, gbeta;
    Tensor<Real> xhat_cache;       // normalized input
    std::vector<Real> rstd_cache;  // [B*groups]

    void configure(int ch) {
        channels = ch;
        groups = groupnorm_groups(ch);
        gamma = Tensor<Real>({channels}, Real(1));
        beta = Tensor<Real>({channels});
        ggamma = Tensor<Real>({channels});
        gbeta = Tensor<Real>({channels});
    }

    Tensor<Real> forward(const Tensor<Real>& x) {
        const int n = x.size(0), h = x.size(2), w = x.size(3);
        const int cpg = channels / groups;
        const int64_t gsize = static_cast<int64_t>(cpg) * h * w;
        const int64_t plane = static_cast<int64_t>(h) * w;
        xhat_cache = Tensor<Real>(x.shape);
        rstd_cache.assign(static_cast<size_t>(n) * groups, Real(0));
        Tensor<Real> y(x.shape);
        for (int i = 0; i < n; ++i) {
            for (int g = 0; g < groups; ++g) {
                const Real* xp = x.ptr() + (static_cast<int64_t>(i) * channels + g * cpg) * plane;
                double mean = 0;
                for (int64_t j = 0; j < gsize; ++j) mean += xp[j];
                mean /= static_cast<double>(gsize);
                double var = 0;
                for (int64_t j = 0; j < gsize; ++j) {
                    const double d = xp[j] - mean;
                    var += d * d;
                }
                var /= static_cast<double>(gsize);
                const Real r = static_cast<Real>(1.0 / std::sqrt(var + static_cast<double>(eps)));
                rstd_cache[static_cast<size_t>(i) * groups + g] = r;
                Real* xh = xhat_cache.ptr() + (static_cast<int64_t>(i) * channels + g * cpg) * plane;
                Real* yp = y.ptr() + (static_cast<int64_t>(i) * channels + g * cpg) * plane;
                for (int c = 0; c < cpg; ++c) {
                    const Real gm = gamma[g * cpg + c], bt = beta[g * cpg + c];
                    for (int64_t p = 0; p < plane; ++p) {
                        const Real v = (xp[c * plane + p] - static_cast<Real>(mean)) * r;
                        xh[c * plane + p] = v;
                        yp[c * plane + p] = gm * v + bt;
                    }
                }
            }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& gy) {
        const int n = gy.size(0), h = gy.size(2), w = gy.size(3);
        const int cpg = channels / groups;
        const int64_t gsize = static_cast<int64_t>(cpg) * h * w;
        const int64_t plane = static_cast<int64_t>(h) * w;
        Tensor<Real> gx(gy.shape);
        for (int i = 0; i < n; ++i) {
            for (int g = 0; g < groups; ++g) {
                const int64_t base = (static_cast<int64_t>(i) * channels + g * cpg) * plane;
                const Real* gp = gy.ptr() + base;
                const Real* xh = xhat_cache.ptr() + base;
                const Real r = rstd_cache[static_cast<size_t>(i) * groups + g];
                double sum_dxhat = 0, sum_dxhat_xhat = 0;
                for (int c = 0; c < cpg; ++c) {
                    const Real gm = gamma[g * cpg + c];
                    double dg = 0, db = 0;
                    for (int64_t p = 0; p < plane; ++p) {
                        const Real go = gp[c * plane + p];
                        dg += static_cast<double>(go) * xh[c * plane + p];
                        db += go;
                        const double dxh = static_cast<double>(go) * gm;
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * xh[c * plane + p];
                    }
                    ggamma[g * cpg + c] += static_cast<Real>(dg);
                    gbeta[g * cpg + c] += static_cast<Real>(db);
                }
                const double m = static_cast<double>(gsize);
                const double mean_dxhat = sum_dxhat / m;
                const double mean_dxhat_xhat = sum_dxhat_xhat / m;
                Real* gxp = gx.ptr() + base;
                for (int c = 0; c < cpg; ++c) {
                    const Real gm = gamma[g * cpg + c];
                    for (int64_t p = 0; p < plane; ++p) {
                        const double dxh = static_cast<double>(gp[c * plane + p]) * gm;
                        gxp[c * plane + p] = static_cast<Real>(
                            r * (dxh - mean_dxhat - xh[c * plane + p] * mean_dxhat_xhat));
                    }
                }
            }
        }
        return gx;
    }

    void collect(const std::string& prefix, ParamList<Real>& out) {
        out.push_back({prefix + ".gamma", &gamma, &ggamma});
        out.push_back({prefix + ".beta", &beta, &gbeta});
    }
};

// ---------------------------------------------------------------------------
// SiLU x * sigmoid(x); the sigmoid is cached for the backward pass.
// ---------------------------------------------------------------------------
template <typename Real>
struct SiLU {
    Tensor<Real> x_cache, sig_cache;

    Tensor<Real> forward(const Tensor<Real>& x) {
        x_cache = x;
        sig_cache = Tensor<Real>(x.shape);
        Tensor<Real> y(x.shape);
        for (int64_t i = 0, n = x.numel(); i < n; ++i) {
            const Real s = sigmoid(x[i]);
            sig_cache[i] = s;
            y[i] = x[i] * s;
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& gy) {
        Tensor<Real> gx(gy.shape);
        for (int64_t i = 0, n = gy.numel(); i < n; ++i) {
            const Real s = sig_cache[i];
            gx[i] = gy[i] * s * (Real(1) + x_cache[i] * (Real(1) - s));
        }
        return gx;
    }
};

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x upsample; backward sum-pools the gradient.
// ---------------------------------------------------------------------------
template <typename Real>
struct Upsample2x {
    Tensor<Real> forward(const Tensor<Real>& x) {
        const int n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
        Tensor<Real> y({n, c, 2 * h, 2 * w});
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        const Real v = x.at(i, ch, yy, xx);
                        y.at(i, ch, 2 * yy, 2 * xx) = v;
                        y.at(i, ch, 2 * yy, 2 * xx + 1) = v;
                        y.at(i, ch, 2 * yy + 1, 2 * xx) = v;
                        y.at(i, ch, 2 * yy + 1, 2 * xx + 1) = v;
                    }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& gy) {
        const int n = gy.size(0), c = gy.size(1), h = gy.size(2) / 2, w = gy.size(3) / 2;
        Tensor<Real> gx({n, c, h, w});
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx)
                        gx.at(i, ch, yy, xx) = gy.at(i, ch, 2 * yy, 2 * xx) + gy.at(i, ch, 2 * yy, 2 * xx + 1) +
                                               gy.at(i, ch, 2 * yy + 1, 2 * xx) +
                                               gy.at(i, ch, 2 * yy + 1, 2 * xx + 1);
        return gx;
    }
};

// ---------------------------------------------------------------------------
// Spatial mean pool to [B, C].
// ---------------------------------------------------------------------------
template <typename Real>
struct GlobalAvgPool {
    int h_ = 0, w_ = 0;

    Tensor<Real> forward(const Tensor<Real>& x) {
        const int n = x.size(0), c = x.size(1);
        h_ = x.size(2);
        w_ = x.size(3);
        const int64_t plane = static_cast<int64_t>(h_) * w_;
        Tensor<Real> y({n, c});
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const Real* p = x.ptr() + (static_cast<int64_t>(i) * c + ch) * plane;
                double s = 0;
                for (int64_t j = 0; j < plane; ++j) s += p[j];
                y[static_cast<int64_t>(i) * c + ch] = static_cast<Real>(s / static_cast<double>(plane));
            }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& gy) {
        const int n = gy.size(0), c = gy.size(1);
        const int64_t plane = static_cast<int64_t>(h_) * w_;
        Tensor<Real> gx({n, c, h_, w_});
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const Real g = gy[static_cast<int64_t>(i) * c + ch] / static_cast<Real>(plane);
                Real* p = gx.ptr() + (static_cast<int64_t>(i) * c + ch) * plane;
                for (int64_t j = 0; j < plane; ++j) p[j] = g;
            }
        return gx;
    }
};

}  // namespace cdal::nn
