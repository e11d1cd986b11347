#pragma once

#include <cblas.h>

#include <cmath>

#include "cdal/core/tensor.hpp"

namespace cdal::nn {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// Unrolls one sample [C,H,W] into columns [C*k*k, oh*ow] for GEMM convolution.
// Out-of-image taps are zero (zero padding).
template <typename Real>
inline void im2col(const Real* img, int channels, int height, int width, int ksize, int stride,
                   int pad, Real* col) {
    const int oh = (height + 2 * pad - ksize) / stride + 1;
    const int ow = (width + 2 * pad - ksize) / stride + 1;
    const int64_t out_plane = static_cast<int64_t>(oh) * ow;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                Real* dst = col + ((static_cast<int64_t>(c) * ksize + ky) * ksize + kx) * out_plane;
                const Real* src = img + static_cast<int64_t>(c) * height * width;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= height) {
                        for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = Real(0);
                        continue;
                    }
                    const int ix0 = kx - pad;
                    if (stride == 1) {
                        // contiguous run; clip the edges
                        int ox = 0;
                        for (; ox < ow && ix0 + ox < 0; ++ox) dst[oy * ow + ox] = Real(0);
                        const int run_end = std::min(ow, width - ix0);
                        for (; ox < run_end; ++ox) dst[oy * ow + ox] = src[iy * width + ix0 + ox];
                        for (; ox < ow; ++ox) dst[oy * ow + ox] = Real(0);
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride + ix0;
                            dst[oy * ow + ox] = (ix >= 0 && ix < width) ? src[iy * width + ix] : Real(0);
                        }
                    }
                }
            }
        }
    }
}

// Scatter-adds columns back onto the image; the adjoint of im2col.
template <typename Real>
inline void col2im(const Real* col, int channels, int height, int width, int ksize, int stride,
                   int pad, Real* img) {
    const int oh = (height + 2 * pad - ksize) / stride + 1;
    const int ow = (width + 2 * pad - ksize) / stride + 1;
    const int64_t out_plane = static_cast<int64_t>(oh) * ow;
    for (int64_t i = 0, n = static_cast<int64_t>(channels) * height * width; i < n; ++i) img[i] = Real(0);
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                const Real* src = col + ((static_cast<int64_t>(c) * ksize + ky) * ksize + kx) * out_plane;
                Real* dst = img + static_cast<int64_t>(c) * height * width;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= height) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < width) dst[iy * width + ix] += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

template <typename Real>
inline Real sigmoid(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

// Numerically stable softplus log(1 + e^x), used by the logistic losses.
template <typename Real>
inline Real softplus(Real x) {
    if (x > Real(0)) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace cdal::nn
