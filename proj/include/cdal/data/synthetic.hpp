#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"
#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"

namespace cdal::data {

using cdal::ConfigError;
using cdal::Rng;
using cdal::Tensor;

// One image/label pair. Images live in [-1,1]; labels are hard class ids
// ([0,1] probability space at rest) and only move to [-1,1] for diffusion.
template <typename Real>
struct Sample {
    Tensor<Real> image;  // [channels, H, W]
    Tensor<int> label;   // [H, W], values in [0, num_classes)
    std::string id;
};

template <typename Real>
struct Dataset {
    std::vector<Sample<Real>> samples;
    int num_classes = 2;  // including background

    int size() const { return static_cast<int>(samples.size()); }
};

struct SyntheticSpec {
    int resolution = 64;
    int min_objects = 1;
    int max_objects = 3;
    bool ellipses = true;
    bool blobs = true;
    double contrast = 0.8;      // foreground/background intensity separation
    double noise_level = 0.08;  // per-pixel Gaussian sigma
    int foreground_classes = 1; // 1 = binary, 2 = split-object classes
    uint64_t seed = 0;

    void validate() const {
        if (resolution < 8) throw ConfigError("synthetic: resolution too small");
        if (min_objects < 0 || max_objects < min_objects)
            throw ConfigError("synthetic: bad object count range");
        if (!ellipses && !blobs) throw ConfigError("synthetic: no shape family enabled");
        if (foreground_classes != 1 && foreground_classes != 2)
            throw ConfigError("synthetic: foreground_classes must be 1 or 2");
        if (noise_level < 0) throw ConfigError("synthetic: negative noise level");
    }
};

namespace detail {

// Silhouette test for a rotated ellipse whose radius is optionally modulated
// by low-order angular harmonics (the "blob" family).
struct Shape {
    double cx, cy, a, b, rot;
    double amp2 = 0, ph2 = 0, amp3 = 0, ph3 = 0;  // zero for pure ellipses
    int cls = 1;
    double brightness = 0;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double c = std::cos(rot), s = std::sin(rot);
        const double u = dx * c + dy * s;
        const double v = -dx * s + dy * c;
        const double phi = std::atan2(v / b, u / a);
        const double mod = 1.0 + amp2 * std::sin(2 * phi + ph2) + amp3 * std::sin(3 * phi + ph3);
        const double r2 = (u * u) / (a * a) + (v * v) / (b * b);
        return r2 <= mod * mod;
    }
};

}  // namespace detail

// Deterministic per (spec.seed, index). Objects are clipped at the canvas
// border, never wrapped, because shape membership is a pure point test.
template <typename Real>
Sample<Real> generate_sample(const SyntheticSpec& spec, int index) {
    const int res = spec.resolution;
    Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(index)));

    // Smooth background texture: two random sinusoidal gratings plus noise.
    Tensor<Real> image({1, res, res});
    struct Wave {
        double kx, ky, phase, amp;
    };
    Wave waves[2];
    for (auto& wv : waves) {
        const double wavelength = res / (2.0 + 4.0 * rng.uniform());
        const double dir = 2.0 * M_PI * rng.uniform();
        wv.kx = 2.0 * M_PI * std::cos(dir) / wavelength;
        wv.ky = 2.0 * M_PI * std::sin(dir) / wavelength;
        wv.phase = 2.0 * M_PI * rng.uniform();
        wv.amp = 0.10 + 0.08 * rng.uniform();
    }
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            double v = -0.45;
            for (const auto& wv : waves) v += wv.amp * std::sin(wv.kx * x + wv.ky * y + wv.phase);
            image.at(0, y, x) = static_cast<Real>(v);
        }

    // Foreground shapes.
    const int count = rng.uniform_int(spec.min_objects, spec.max_objects);
    std::vector<detail::Shape> shapes;
    for (int i = 0; i < count; ++i) {
        detail::Shape sh;
        const bool blob = spec.blobs && (!spec.ellipses || rng.uniform() < 0.5);
        const double r_lo = res / 7.0, r_hi = res / 5.0;
        sh.a = r_lo + (r_hi - r_lo) * rng.uniform();
        sh.b = blob ? sh.a : r_lo + (r_hi - r_lo) * rng.uniform();
        sh.rot = 2.0 * M_PI * rng.uniform();
        if (blob) {
            sh.amp2 = 0.12 * rng.uniform();
            sh.ph2 = 2.0 * M_PI * rng.uniform();
            sh.amp3 = 0.12 * rng.uniform();
            sh.ph3 = 2.0 * M_PI * rng.uniform();
        }
        const double margin = 1.3 * std::max(sh.a, sh.b);
        const double lo = std::min(margin, res / 2.0 - 1.0);
        sh.cx = lo + (res - 2.0 * lo) * rng.uniform();
        sh.cy = lo + (res - 2.0 * lo) * rng.uniform();
        sh.cls = 1;
        sh.brightness = 0.85 + 0.3 * (rng.uniform() - 0.5);
        shapes.push_back(sh);
    }

    // Labels: later shapes overwrite earlier ones. Two-class mode slices each
    // object along a random diameter into two adjacent regions.
    Sample<Real> out;
    out.label = Tensor<int>({res, res});
    std::vector<double> split_dx(shapes.size()), split_dy(shapes.size());
    for (size_t i = 0; i < shapes.size(); ++i) {
        const double ang = 2.0 * M_PI * rng.uniform();
        split_dx[i] = std::cos(ang);
        split_dy[i] = std::sin(ang);
    }
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            for (size_t i = 0; i < shapes.size(); ++i) {
                if (!shapes[i].contains(px, py)) continue;
                int cls = 1;
                if (spec.foreground_classes == 2) {
                    const double side =
                        (px - shapes[i].cx) * split_dx[i] + (py - shapes[i].cy) * split_dy[i];
                    cls = side >= 0 ? 1 : 2;
                }
                out.label.at(y, x) = cls;
                image.at(0, y, x) = static_cast<Real>(
                    -0.45 + spec.contrast * shapes[i].brightness * (cls == 2 ? 0.72 : 1.0));
            }
        }

    // Pixel noise and clamp.
    for (int64_t i = 0; i < image.numel(); ++i) {
        double v = static_cast<double>(image.data[static_cast<size_t>(i)]) +
                   spec.noise_level * rng.normal();
        image.data[static_cast<size_t>(i)] = static_cast<Real>(std::clamp(v, -1.0, 1.0));
    }

    out.image = std::move(image);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%04d", index);
    out.id = buf;
    return out;
}

template <typename Real>
Dataset<Real> generate_synthetic(const SyntheticSpec& spec, int n) {
    spec.validate();
    if (n < 1) throw ConfigError("synthetic: need n >= 1 samples");
    Dataset<Real> ds;
    ds.num_classes = spec.foreground_classes + 1;
    ds.samples.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ds.samples.push_back(generate_sample<Real>(spec, i));
    return ds;
}

// Foreground pixel fraction of one label map; handy for sanity checks.
inline double foreground_fraction(const Tensor<int>& label) {
    int64_t fg = 0;
    for (int v : label.data) fg += v > 0 ? 1 : 0;
    return static_cast<double>(fg) / static_cast<double>(label.numel());
}

}  // namespace cdal::data
