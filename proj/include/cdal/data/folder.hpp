#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"
#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/data/png_io.hpp"
#include "cdal/data/synthetic.hpp"

namespace cdal::data {

namespace fs = std::filesystem;

// ---- resampling ---------------------------------------------------------

// Corner-aligned bilinear resize per channel ([C,H,W] -> [C,R,R]).
template <typename Real>
Tensor<Real> resize_bilinear(const Tensor<Real>& img, int out_res) {
    const int c = img.size(0), in_h = img.size(1), in_w = img.size(2);
    if (in_h == out_res && in_w == out_res) return img;
    Tensor<Real> out({c, out_res, out_res});
    const double sy = out_res > 1 ? static_cast<double>(in_h - 1) / (out_res - 1) : 0.0;
    const double sx = out_res > 1 ? static_cast<double>(in_w - 1) / (out_res - 1) : 0.0;
    for (int ch = 0; ch < c; ++ch)
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
                const double top = (1 - wx) * img.at(ch, y0, x0) + wx * img.at(ch, y0, x1);
                const double bot = (1 - wx) * img.at(ch, y1, x0) + wx * img.at(ch, y1, x1);
                out.at(ch, y, x) = static_cast<Real>((1 - wy) * top + wy * bot);
            }
        }
    return out;
}

// Nearest-neighbor resize for hard label maps ([H,W] -> [R,R]).
inline Tensor<int> resize_nearest(const Tensor<int>& label, int out_res) {
    const int in_h = label.size(0), in_w = label.size(1);
    if (in_h == out_res && in_w == out_res) return label;
    Tensor<int> out({out_res, out_res});
    for (int y = 0; y < out_res; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * in_h / out_res), in_h - 1);
        for (int x = 0; x < out_res; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * in_w / out_res), in_w - 1);
            out.at(y, x) = label.at(sy, sx);
        }
    }
    return out;
}

// ---- label space conversions --------------------------------------------

// Hard class map -> diffusion-space tensor in [-1,1]. Binary labels use one
// channel (2v-1); multi-class labels use one-hot channels including
// background, likewise mapped to {-1,+1}.
template <typename Real>
Tensor<Real> label_to_x0(const Tensor<int>& label, int num_classes) {
    const int h = label.size(0), w = label.size(1);
    const int ch = num_classes == 2 ? 1 : num_classes;
    Tensor<Real> x0({ch, h, w});
    x0.fill(Real(-1));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int v = label.at(y, x);
            if (v < 0 || v >= num_classes)
                throw ShapeError("label_to_x0: class id " + std::to_string(v) + " out of range");
            if (ch == 1) {
                if (v == 1) x0.at(0, y, x) = Real(1);
            } else {
                x0.at(v, y, x) = Real(1);
            }
        }
    return x0;
}

// Inverse hardening of a diffusion-space prediction: threshold for binary,
// argmax over channels for one-hot. Exact inverse of label_to_x0 on hard inputs.
template <typename Real>
Tensor<int> x0_to_label(const Tensor<Real>& x0, double threshold = 0.5) {
    const int ch = x0.size(0), h = x0.size(1), w = x0.size(2);
    Tensor<int> label({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (ch == 1) {
                label.at(y, x) = (static_cast<double>(x0.at(0, y, x)) + 1.0) / 2.0 >= threshold ? 1 : 0;
            } else {
                int best = 0;
                Real bv = x0.at(0, y, x);
                for (int c = 1; c < ch; ++c)
                    if (x0.at(c, y, x) > bv) {
                        bv = x0.at(c, y, x);
                        best = c;
                    }
                label.at(y, x) = best;
            }
        }
    return label;
}

// ---- folder ingestion ---------------------------------------------------

// Decoded image -> [-1,1] tensor with the requested channel count (RGB
// collapses to luma when one channel is wanted).
template <typename Real>
Tensor<Real> image_from_png(const PngImage& img, int image_channels) {
    Tensor<Real> t({image_channels, img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (image_channels == 1) {
                double v;
                if (img.channels >= 3)
                    v = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
                else
                    v = img.at(y, x, 0);
                t.at(0, y, x) = static_cast<Real>(v / 255.0 * 2.0 - 1.0);
            } else {
                for (int c = 0; c < image_channels; ++c) {
                    const int src = img.channels >= image_channels ? c : 0;
                    t.at(c, y, x) = static_cast<Real>(img.at(y, x, src) / 255.0 * 2.0 - 1.0);
                }
            }
        }
    return t;
}

struct LoadedMask {
    Tensor<int> label;
    bool from_palette = false;
    int max_class = 1;
};

// Decoded mask -> hard class ids: palette index directly, or gray >= 128.
inline LoadedMask mask_from_png(const PngImage& msk) {
    if (msk.channels != 1) throw IoError("mask is not single-channel");
    LoadedMask out;
    out.label = Tensor<int>({msk.height, msk.width});
    out.from_palette = msk.from_palette;
    for (int y = 0; y < msk.height; ++y)
        for (int x = 0; x < msk.width; ++x) {
            const int v = msk.at(y, x);
            if (msk.from_palette) {
                out.label.at(y, x) = v;
                out.max_class = std::max(out.max_class, v);
            } else {
                out.label.at(y, x) = v >= 128 ? 1 : 0;
            }
        }
    return out;
}

// Loads root/images/*.png without masks (inference inputs). Labels are left
// empty; samples are ordered by identifier.
template <typename Real>
std::vector<Sample<Real>> load_images_only(const std::string& root, int resolution,
                                           int image_channels = 1) {
    const fs::path images_dir = fs::path(root) / "images";
    if (!fs::is_directory(images_dir))
        throw IoError("load_images_only: expected directory " + images_dir.string());
    std::vector<Sample<Real>> out;
    for (const auto& e : fs::directory_iterator(images_dir)) {
        if (e.path().extension() != ".png") continue;
        Sample<Real> s;
        s.id = e.path().stem().string();
        s.image = resize_bilinear(image_from_png<Real>(read_png(e.path().string()), image_channels),
                                  resolution);
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

// Expects root/images/*.png and root/masks/*.png with matching stems.
// 8-bit grayscale masks binarize at 128; palette masks use the palette index
// as the class id. Any malformed pair is reported, and the whole load fails
// so silent partial datasets cannot happen.
template <typename Real>
Dataset<Real> load_folder(const std::string& root, int resolution, int image_channels = 1) {
    const fs::path images_dir = fs::path(root) / "images";
    const fs::path masks_dir = fs::path(root) / "masks";
    if (!fs::is_directory(images_dir) || !fs::is_directory(masks_dir))
        throw IoError("load_folder: expected " + images_dir.string() + " and " + masks_dir.string());

    std::map<std::string, fs::path> image_files, mask_files;
    for (const auto& e : fs::directory_iterator(images_dir))
        if (e.path().extension() == ".png") image_files[e.path().stem().string()] = e.path();
    for (const auto& e : fs::directory_iterator(masks_dir))
        if (e.path().extension() == ".png") mask_files[e.path().stem().string()] = e.path();

    std::vector<std::string> problems;
    for (const auto& [stem, p] : image_files)
        if (!mask_files.count(stem)) problems.push_back("image without mask: " + p.string());
    for (const auto& [stem, p] : mask_files)
        if (!image_files.count(stem)) problems.push_back("mask without image: " + p.string());

    Dataset<Real> ds;
    bool any_palette = false, any_gray = false;
    int max_class = 1;
    struct Pending {
        std::string id;
        Tensor<Real> image;
        Tensor<int> label;
    };
    std::vector<Pending> pending;

    for (const auto& [stem, img_path] : image_files) {
        if (!mask_files.count(stem)) continue;
        try {
            PngImage img = read_png(img_path.string(), /*keep_palette_indices=*/false);
            PngImage msk = read_png(mask_files[stem].string(), /*keep_palette_indices=*/true);
            LoadedMask lm = mask_from_png(msk);
            (lm.from_palette ? any_palette : any_gray) = true;
            max_class = std::max(max_class, lm.max_class);

            Pending s;
            s.id = stem;
            s.image = resize_bilinear(image_from_png<Real>(img, image_channels), resolution);
            s.label = resize_nearest(lm.label, resolution);
            pending.push_back(std::move(s));
        } catch (const std::exception& e) {
            problems.push_back(stem + ": " + e.what());
        }
    }

    if (any_palette && any_gray)
        problems.push_back("mixed palette and grayscale masks; cannot infer class count");
    if (!problems.empty()) {
        std::string msg = "load_folder: rejected " + std::to_string(problems.size()) + " problem(s):";
        for (const auto& p : problems) msg += "\n  " + p;
        throw IoError(msg);
    }
    if (pending.empty())
        std::cerr << "warning: no image/mask pairs found under " << root << "\n";

    ds.num_classes = any_palette ? max_class + 1 : 2;
    for (auto& p : pending) {
        Sample<Real> s;
        s.id = std::move(p.id);
        s.image = std::move(p.image);
        s.label = std::move(p.label);
        ds.samples.push_back(std::move(s));
    }
    std::sort(ds.samples.begin(), ds.samples.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    return ds;
}

// Writes a dataset in the same images/ + masks/ layout the loader reads.
// Binary masks become 0/255 grayscale; multi-class masks become palette PNGs.
template <typename Real>
void save_dataset(const Dataset<Real>& ds, const std::string& root) {
    const fs::path images_dir = fs::path(root) / "images";
    const fs::path masks_dir = fs::path(root) / "masks";
    fs::create_directories(images_dir);
    fs::create_directories(masks_dir);
    for (const auto& s : ds.samples) {
        const int h = s.image.size(1), w = s.image.size(2);
        std::vector<uint8_t> img_bytes(static_cast<size_t>(h) * w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = (static_cast<double>(s.image.at(0, y, x)) + 1.0) / 2.0 * 255.0;
                img_bytes[static_cast<size_t>(y) * w + x] =
                    static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        write_png_gray((images_dir / (s.id + ".png")).string(), img_bytes.data(), w, h);

        std::vector<uint8_t> msk_bytes(static_cast<size_t>(h) * w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                msk_bytes[static_cast<size_t>(y) * w + x] = static_cast<uint8_t>(
                    ds.num_classes == 2 ? (s.label.at(y, x) ? 255 : 0) : s.label.at(y, x));
        if (ds.num_classes == 2)
            write_png_gray((masks_dir / (s.id + ".png")).string(), msk_bytes.data(), w, h);
        else
            write_png_palette((masks_dir / (s.id + ".png")).string(), msk_bytes.data(), w, h,
                              ds.num_classes);
    }
}

// ---- fold splitting -----------------------------------------------------

struct FoldSplit {
    std::vector<int> train, val;
};

// Deterministic shuffle, then contiguous folds. The first (n mod k) folds
// take the extra sample, so every index validates exactly once across folds.
inline FoldSplit kfold_split(int n, int k, int fold, uint64_t seed) {
    if (k < 2) throw ConfigError("kfold: need k >= 2");
    if (fold < 0 || fold >= k) throw ConfigError("kfold: fold index out of range");
    if (n < k) throw ConfigError("kfold: fewer samples than folds");
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(derive_seed(seed, 0x6b666f6c64ULL));  // tag: "kfold"
    rng.shuffle(order);

    const int base = n / k, rem = n % k;
    int start = 0;
    FoldSplit out;
    for (int f = 0; f < k; ++f) {
        const int len = base + (f < rem ? 1 : 0);
        if (f == fold)
            out.val.assign(order.begin() + start, order.begin() + start + len);
        else
            out.train.insert(out.train.end(), order.begin() + start, order.begin() + start + len);
        start += len;
    }
    return out;
}

}  // namespace cdal::data
