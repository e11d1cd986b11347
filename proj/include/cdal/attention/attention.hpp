#pragma once

#include <algorithm>
#include <cmath>

#include "cdal/core/errors.hpp"
#include "cdal/core/tensor.hpp"

namespace cdal::attn {

using cdal::ShapeError;
using cdal::Tensor;

// Collapses a feature stack to one channel by averaging: A = (1/C) sum_c F_c.
template <typename Real>
Tensor<Real> attention_map(const Tensor<Real>& features) {
    if (features.rank() != 4) throw ShapeError("attention_map: expected NCHW, got " + features.shape_str());
    const int n = features.size(0), c = features.size(1), h = features.size(2), w = features.size(3);
    Tensor<Real> out({n, 1, h, w});
    const Real inv_c = Real(1) / static_cast<Real>(c);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const Real* src = features.ptr() + ((static_cast<int64_t>(i) * c + ch) * h) * w;
            Real* dst = out.ptr() + (static_cast<int64_t>(i) * h) * w;
            for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p) dst[p] += src[p] * inv_c;
        }
    return out;
}

// Per-sample min-max rescale to [0, 1]. A constant map carries no spatial
// preference, so it becomes the neutral all-ones mask.
template <typename Real>
Tensor<Real> normalize_map(const Tensor<Real>& map) {
    if (map.rank() != 4 || map.size(1) != 1)
        throw ShapeError("normalize_map: expected [N,1,H,W], got " + map.shape_str());
    const int n = map.size(0);
    const int64_t hw = static_cast<int64_t>(map.size(2)) * map.size(3);
    Tensor<Real> out(map.shape);
    for (int i = 0; i < n; ++i) {
        const Real* src = map.ptr() + i * hw;
        Real* dst = out.ptr() + i * hw;
        Real lo = src[0], hi = src[0];
        for (int64_t p = 1; p < hw; ++p) {
            lo = std::min(lo, src[p]);
            hi = std::max(hi, src[p]);
        }
        const Real range = hi - lo;
        if (range > Real(0)) {
            for (int64_t p = 0; p < hw; ++p) dst[p] = (src[p] - lo) / range;
        } else {
            for (int64_t p = 0; p < hw; ++p) dst[p] = Real(1);
        }
    }
    return out;
}

// Corner-aligned bilinear resize of a one-channel map to out_res x out_res.
template <typename Real>
Tensor<Real> upsample_bilinear(const Tensor<Real>& map, int out_res) {
    if (map.rank() != 4 || map.size(1) != 1)
        throw ShapeError("upsample_bilinear: expected [N,1,H,W], got " + map.shape_str());
    if (out_res < 1) throw ShapeError("upsample_bilinear: output resolution must be positive");
    const int n = map.size(0), in_h = map.size(2), in_w = map.size(3);
    if (in_h == out_res && in_w == out_res) return map;
    Tensor<Real> out({n, 1, out_res, out_res});
    const double sy = out_res > 1 ? static_cast<double>(in_h - 1) / (out_res - 1) : 0.0;
    const double sx = out_res > 1 ? static_cast<double>(in_w - 1) / (out_res - 1) : 0.0;
    for (int i = 0; i < n; ++i) {
        const Real* src = map.ptr() + static_cast<int64_t>(i) * in_h * in_w;
        for (int y = 0; y < out_res; ++y) {
            const double fy = y * sy;
            const int y0 = std::min(static_cast<int>(fy), in_h - 1);
            const int y1 = std::min(y0 + 1, in_h - 1);
            const double wy = fy - y0;
            for (int x = 0; x < out_res; ++x) {
                const double fx = x * sx;
                const int x0 = std::min(static_cast<int>(fx), in_w - 1);
                const int x1 = std::min(x0 + 1, in_w - 1);
                const double wx = fx - x0;
                const double v00 = src[static_cast<int64_t>(y0) * in_w + x0];
                const double v01 = src[static_cast<int64_t>(y0) * in_w + x1];
                const double v10 = src[static_cast<int64_t>(y1) * in_w + x0];
                const double v11 = src[static_cast<int64_t>(y1) * in_w + x1];
                const double top = v00 + wx * (v01 - v00);
                const double bot = v10 + wx * (v11 - v10);
                out.at(i, 0, y, x) = static_cast<Real>(top + wy * (bot - top));
            }
        }
    }
    return out;
}

// Elementwise product, broadcasting the one-channel mask over x's channels.
template <typename Real>
Tensor<Real> apply_attention(const Tensor<Real>& x, const Tensor<Real>& map) {
    if (x.rank() != 4 || map.rank() != 4 || map.size(1) != 1)
        throw ShapeError("apply_attention: expected NCHW input and [N,1,H,W] mask");
    if (x.size(0) != map.size(0) || x.size(2) != map.size(2) || x.size(3) != map.size(3))
        throw ShapeError("apply_attention: shape mismatch " + x.shape_str() + " vs " + map.shape_str());
    const int n = x.size(0), c = x.size(1);
    const int64_t hw = static_cast<int64_t>(x.size(2)) * x.size(3);
    Tensor<Real> out(x.shape);
    for (int i = 0; i < n; ++i) {
        const Real* msk = map.ptr() + i * hw;
        for (int ch = 0; ch < c; ++ch) {
            const Real* src = x.ptr() + (static_cast<int64_t>(i) * c + ch) * hw;
            Real* dst = out.ptr() + (static_cast<int64_t>(i) * c + ch) * hw;
            for (int64_t p = 0; p < hw; ++p) dst[p] = src[p] * msk[p];
        }
    }
    return out;
}

// Full pipeline from raw critic features to a label-resolution mask in [0,1]:
// channel mean, per-sample min-max normalization, bilinear resize.
template <typename Real>
Tensor<Real> attention_from_features(const Tensor<Real>& features, int out_res) {
    return upsample_bilinear(normalize_map(attention_map(features)), out_res);
}

}  // namespace cdal::attn
