#pragma once

#include "cdal/nn/layers.hpp"

namespace cdal::nn {

// Residual block: GN -> SiLU -> conv, then adaptive normalization whose
// per-channel scale/shift comes from the conditioning vector, SiLU -> conv,
// plus a 1x1 projection shortcut when the channel count changes. cond_dim = 0
// builds an unconditioned block (used by the image encoder).
template <typename Real>
struct ResBlock {
    int in_ch = 0, out_ch = 0, cond_dim = 0;
    GroupNorm<Real> gn1, gn2;
    SiLU<Real> act1, act2;
    Conv2d<Real> conv1, conv2;
    Linear<Real> cond_proj;  // cond_dim -> 2*out_ch (scale, shift)
    Conv2d<Real> shortcut;   // 1x1, only when in_ch != out_ch
    Tensor<Real> norm_cache;   // gn2 output before modulation
    Tensor<Real> scale_cache;  // [B, out_ch]

    void configure(int in_channels, int out_channels, int conditioning_dim) {
        in_ch = in_channels;
        out_ch = out_channels;
        cond_dim = conditioning_dim;
        gn1.configure(in_ch);
        conv1.configure(in_ch, out_ch, 3, 1, 1);
        gn2.configure(out_ch);
        conv2.configure(out_ch, out_ch, 3, 1, 1);
        if (cond_dim > 0) cond_proj.configure(cond_dim, 2 * out_ch);
        if (in_ch != out_ch) shortcut.configure(in_ch, out_ch, 1, 1, 0);
    }

    void init(Rng& rng) {
        conv1.init(rng);
        conv2.init(rng);
        if (cond_dim > 0) cond_proj.init(rng);
        if (in_ch != out_ch) shortcut.init(rng);
    }

    Tensor<Real> forward(const Tensor<Real>& x, const Tensor<Real>& cond) {
        Tensor<Real> h = conv1.forward(act1.forward(gn1.forward(x)));
        Tensor<Real> y = gn2.forward(h);
        if (cond_dim > 0) {
            Tensor<Real> st = cond_proj.forward(cond);  // [B, 2*out_ch]
            const int n = y.size(0), hh = y.size(2), ww = y.size(3);
            const int64_t plane = static_cast<int64_t>(hh) * ww;
            norm_cache = y;
            scale_cache = Tensor<Real>({n, out_ch});
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < out_ch; ++c) {
                    const Real s = st[static_cast<int64_t>(i) * 2 * out_ch + c];
                    const Real b = st[static_cast<int64_t>(i) * 2 * out_ch + out_ch + c];
                    scale_cache[static_cast<int64_t>(i) * out_ch + c] = s;
                    Real* row = y.ptr() + (static_cast<int64_t>(i) * out_ch + c) * plane;
                    for (int64_t p = 0; p < plane; ++p) row[p] = row[p] * (Real(1) + s) + b;
                }
        }
        Tensor<Real> out = conv2.forward(act2.forward(y));
        if (in_ch != out_ch) {
            Tensor<Real> sc = shortcut.forward(x);
            axpy(Real(1), sc, out);
        } else {
            axpy(Real(1), x, out);
        }
        return out;
    }

    // gcond accumulates the gradient w.r.t. the conditioning vector.
    Tensor<Real> backward(const Tensor<Real>& gy, Tensor<Real>* gcond) {
        Tensor<Real> gskip = (in_ch != out_ch) ? shortcut.backward(gy) : gy;
        Tensor<Real> gmod = act2.backward(conv2.backward(gy));
        if (cond_dim > 0) {
            const int n = gmod.size(0), hh = gmod.size(2), ww = gmod.size(3);
            const int64_t plane = static_cast<int64_t>(hh) * ww;
            Tensor<Real> gst({n, 2 * out_ch});
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < out_ch; ++c) {
                    const Real s = scale_cache[static_cast<int64_t>(i) * out_ch + c];
                    const Real* grow = gmod.ptr() + (static_cast<int64_t>(i) * out_ch + c) * plane;
                    const Real* yrow = norm_cache.ptr() + (static_cast<int64_t>(i) * out_ch + c) * plane;
                    double gs = 0, gb = 0;
                    for (int64_t p = 0; p < plane; ++p) {
                        gs += static_cast<double>(grow[p]) * yrow[p];
                        gb += grow[p];
                    }
                    gst[static_cast<int64_t>(i) * 2 * out_ch + c] = static_cast<Real>(gs);
                    gst[static_cast<int64_t>(i) * 2 * out_ch + out_ch + c] = static_cast<Real>(gb);
                    Real* wrow = gmod.ptr() + (static_cast<int64_t>(i) * out_ch + c) * plane;
                    for (int64_t p = 0; p < plane; ++p) wrow[p] *= (Real(1) + s);
                }
            Tensor<Real> gc = cond_proj.backward(gst);
            if (gcond != nullptr) axpy(Real(1), gc, *gcond);
        }
        Tensor<Real> gx = gn1.backward(act1.backward(conv1.backward(gn2.backward(gmod))));
        axpy(Real(1), gskip, gx);
        return gx;
    }

    void collect(const std::string& prefix, ParamList<Real>& out) {
        gn1.collect(prefix + ".gn1", out);
        conv1.collect(prefix + ".conv1", out);
        gn2.collect(prefix + ".gn2", out);
        conv2.collect(prefix + ".conv2", out);
        if (cond_dim > 0) cond_proj.collect(prefix + ".cond", out);
        if (in_ch != out_ch) shortcut.collect(prefix + ".shortcut", out);
    }
};

}  // namespace cdal::nn
