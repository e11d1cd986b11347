#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"

namespace cdal {

// Dense row-major tensor. Layout for 4-d data is NCHW; lower ranks drop
// leading axes. Value semantics throughout, no views.
template <typename Real>
struct Tensor {
    std::vector<int> shape;
    std::vector<Real> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), Real(0)) {}
    Tensor(std::vector<int> s, Real fill) : shape(std::move(s)), data(count(shape), fill) {}

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int size(int i) const { return shape.at(static_cast<size_t>(i)); }
    bool empty() const { return data.empty(); }

    Real* ptr() { return data.data(); }
    const Real* ptr() const { return data.data(); }

    Real& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const Real& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // NCHW accessors.
    Real& at(int n, int c, int h, int w) {
        return data[((static_cast<int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const Real& at(int n, int c, int h, int w) const {
        return data[((static_cast<int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    Real& at(int c, int h, int w) {
        return data[(static_cast<int64_t>(c) * shape[1] + h) * shape[2] + w];
    }
    const Real& at(int c, int h, int w) const {
        return data[(static_cast<int64_t>(c) * shape[1] + h) * shape[2] + w];
    }
    Real& at(int h, int w) { return data[static_cast<int64_t>(h) * shape[1] + w]; }
    const Real& at(int h, int w) const { return data[static_cast<int64_t>(h) * shape[1] + w]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(Real v) { std::fill(data.begin(), data.end(), v); }
    void zero() { fill(Real(0)); }

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
        return out;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << "]";
        return os.str();
    }
};

template <typename Real>
inline void check_same_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// y += alpha * x
template <typename Real>
inline void axpy(Real alpha, const Tensor<Real>& x, Tensor<Real>& y) {
    check_same_shape(x, y, "axpy");
    const Real* xp = x.ptr();
    Real* yp = y.ptr();
    for (int64_t i = 0, n = x.numel(); i < n; ++i) yp[i] += alpha * xp[i];
}

template <typename Real>
inline void scale(Tensor<Real>& x, Real alpha) {
    for (auto& v : x.data) v *= alpha;
}

template <typename Real>
inline Real max_abs_diff(const Tensor<Real>& a, const Tensor<Real>& b) {
    check_same_shape(a, b, "max_abs_diff");
    Real m = 0;
    for (int64_t i = 0, n = a.numel(); i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <typename Real>
inline bool bitwise_equal(const Tensor<Real>& a, const Tensor<Real>& b) {
    return a.shape == b.shape && a.data == b.data;
}

template <typename Real>
inline bool all_finite(const Tensor<Real>& t) {
    for (Real v : t.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

// Concatenate along the channel axis of NCHW tensors.
template <typename Real>
inline Tensor<Real> concat_channels(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 4 || b.rank() != 4) throw ShapeError("concat_channels: rank-4 tensors required");
    if (a.size(0) != b.size(0) || a.size(2) != b.size(2) || a.size(3) != b.size(3))
        throw ShapeError("concat_channels: incompatible shapes " + a.shape_str() + " vs " + b.shape_str());
    const int n = a.size(0), ca = a.size(1), cb = b.size(1), h = a.size(2), w = a.size(3);
    Tensor<Real> out({n, ca + cb, h, w});
    const int64_t plane = static_cast<int64_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::copy_n(a.ptr() + static_cast<int64_t>(i) * ca * plane, ca * plane,
                    out.ptr() + static_cast<int64_t>(i) * (ca + cb) * plane);
        std::copy_n(b.ptr() + static_cast<int64_t>(i) * cb * plane, cb * plane,
                    out.ptr() + (static_cast<int64_t>(i) * (ca + cb) + ca) * plane);
    }
    return out;
}

// Inverse of concat_channels for the gradient path.
template <typename Real>
inline void split_channels(const Tensor<Real>& g, int ca, Tensor<Real>& ga, Tensor<Real>& gb) {
    const int n = g.size(0), c = g.size(1), h = g.size(2), w = g.size(3);
    const int cb = c - ca;
    ga = Tensor<Real>({n, ca, h, w});
    gb = Tensor<Real>({n, cb, h, w});
    const int64_t plane = static_cast<int64_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::copy_n(g.ptr() + static_cast<int64_t>(i) * c * plane, ca * plane,
                    ga.ptr() + static_cast<int64_t>(i) * ca * plane);
        std::copy_n(g.ptr() + (static_cast<int64_t>(i) * c + ca) * plane, cb * plane,
                    gb.ptr() + static_cast<int64_t>(i) * cb * plane);
    }
}

}  // namespace cdal
