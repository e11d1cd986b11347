#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdal/core/errors.hpp"
#include "cdal/core/tensor.hpp"

namespace cdal::metrics {

using cdal::ShapeError;
using cdal::Tensor;

// Per-class pixel counts. tn is implied by the pixel total but stored so the
// invariant tp+fp+fn+tn == pixels can be asserted cheaply.
struct ClassCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct ConfusionCounts {
    std::vector<ClassCounts> per_class;
    int64_t pixels = 0;

    int num_classes() const { return static_cast<int>(per_class.size()); }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        if (per_class.empty()) per_class.resize(o.per_class.size());
        if (per_class.size() != o.per_class.size())
            throw ShapeError("confusion: class count mismatch in accumulation");
        for (size_t c = 0; c < per_class.size(); ++c) {
            per_class[c].tp += o.per_class[c].tp;
            per_class[c].fp += o.per_class[c].fp;
            per_class[c].fn += o.per_class[c].fn;
            per_class[c].tn += o.per_class[c].tn;
        }
        pixels += o.pixels;
        return *this;
    }
};

// Hard label maps are integer tensors; any value outside [0, num_classes)
// is rejected, which also catches accidentally-soft inputs.
inline ConfusionCounts confusion(const Tensor<int>& pred, const Tensor<int>& gt, int num_classes) {
    check_same_shape(pred, gt, "confusion");
    if (num_classes < 2) throw ShapeError("confusion: need at least 2 classes");
    ConfusionCounts out;
    out.per_class.resize(static_cast<size_t>(num_classes));
    out.pixels = pred.numel();
    const int* p = pred.ptr();
    const int* g = gt.ptr();
    for (int64_t i = 0; i < pred.numel(); ++i) {
        if (p[i] < 0 || p[i] >= num_classes)
            throw ShapeError("confusion: prediction label " + std::to_string(p[i]) + " out of range");
        if (g[i] < 0 || g[i] >= num_classes)
            throw ShapeError("confusion: ground-truth label " + std::to_string(g[i]) + " out of range");
        if (p[i] == g[i]) {
            out.per_class[static_cast<size_t>(p[i])].tp++;
        } else {
            out.per_class[static_cast<size_t>(p[i])].fp++;
            out.per_class[static_cast<size_t>(g[i])].fn++;
        }
    }
    for (auto& c : out.per_class) c.tn = out.pixels - c.tp - c.fp - c.fn;
    return out;
}

// All scores are percentages in [0, 100].
struct ClassMetrics {
    double dice = 0, iou = 0, precision = 0, recall = 0;
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    ClassMetrics mean;  // over foreground classes (class 0 = background excluded)
    // Populated by fold/image aggregation; zero for a single evaluation.
    std::vector<ClassMetrics> per_class_sd;
    ClassMetrics mean_sd;
    int folds = 1;

    int num_classes() const { return static_cast<int>(per_class.size()); }
};

// Degenerate denominators follow the empty-class convention: a class absent
// from both maps (or with a 0/0 precision/recall) scores 100.
inline ClassMetrics metrics_from_counts(const ClassCounts& c) {
    ClassMetrics m;
    m.dice = (c.tp + c.fp + c.fn == 0) ? 100.0 : 100.0 * 2.0 * c.tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
    m.iou = (c.tp + c.fp + c.fn == 0) ? 100.0 : 100.0 * c.tp / static_cast<double>(c.tp + c.fp + c.fn);
    m.precision = (c.tp + c.fp == 0) ? 100.0 : 100.0 * c.tp / static_cast<double>(c.tp + c.fp);
    m.recall = (c.tp + c.fn == 0) ? 100.0 : 100.0 * c.tp / static_cast<double>(c.tp + c.fn);
    return m;
}

inline MetricsReport compute_metrics(const ConfusionCounts& counts) {
    if (counts.num_classes() < 2) throw ShapeError("compute_metrics: need at least 2 classes");
    MetricsReport r;
    for (const auto& c : counts.per_class) r.per_class.push_back(metrics_from_counts(c));
    r.per_class_sd.resize(r.per_class.size());
    const int fg = counts.num_classes() - 1;
    for (int c = 1; c < counts.num_classes(); ++c) {
        r.mean.dice += r.per_class[static_cast<size_t>(c)].dice / fg;
        r.mean.iou += r.per_class[static_cast<size_t>(c)].iou / fg;
        r.mean.precision += r.per_class[static_cast<size_t>(c)].precision / fg;
        r.mean.recall += r.per_class[static_cast<size_t>(c)].recall / fg;
    }
    return r;
}

// Arithmetic mean and population standard deviation per metric across
// reports. Used both for cross-fold tables and per-image dataset averaging.
inline MetricsReport aggregate_reports(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw ShapeError("aggregate: empty report list");
    const int k = reports[0].num_classes();
    for (const auto& r : reports)
        if (r.num_classes() != k) throw ShapeError("aggregate: reports disagree on class count");
    const double n = static_cast<double>(reports.size());
    constexpr double ClassMetrics::* kFields[] = {&ClassMetrics::dice, &ClassMetrics::iou,
                                                  &ClassMetrics::precision, &ClassMetrics::recall};

    MetricsReport out;
    out.per_class.resize(static_cast<size_t>(k));
    out.per_class_sd.resize(static_cast<size_t>(k));
    out.folds = static_cast<int>(reports.size());
    auto aggregate_one = [&](auto&& get, ClassMetrics& mean, ClassMetrics& sd) {
        for (auto pm : kFields) {
            double s = 0, s2 = 0;
            for (const auto& r : reports) {
                const double v = get(r).*pm;
                s += v;
                s2 += v * v;
            }
            const double mu = s / n;
            mean.*pm = mu;
            sd.*pm = std::sqrt(std::max(0.0, s2 / n - mu * mu));
        }
    };
    for (int c = 0; c < k; ++c)
        aggregate_one([&](const MetricsReport& r) -> const ClassMetrics& { return r.per_class[static_cast<size_t>(c)]; },
                      out.per_class[static_cast<size_t>(c)], out.per_class_sd[static_cast<size_t>(c)]);
    aggregate_one([](const MetricsReport& r) -> const ClassMetrics& { return r.mean; }, out.mean, out.mean_sd);
    return out;
}

// Dataset evaluation. per_image=true scores each pair separately and averages
// the scores; otherwise confusion counts are pooled before scoring.
inline MetricsReport evaluate_set(const std::vector<Tensor<int>>& preds,
                                  const std::vector<Tensor<int>>& gts, int num_classes,
                                  bool per_image = true) {
    if (preds.size() != gts.size() || preds.empty())
        throw ShapeError("evaluate_set: need matching non-empty prediction/target lists");
    if (per_image) {
        std::vector<MetricsReport> reports;
        reports.reserve(preds.size());
        for (size_t i = 0; i < preds.size(); ++i)
            reports.push_back(compute_metrics(confusion(preds[i], gts[i], num_classes)));
        return aggregate_reports(reports);
    }
    ConfusionCounts total;
    for (size_t i = 0; i < preds.size(); ++i) total += confusion(preds[i], gts[i], num_classes);
    return compute_metrics(total);
}

// ---- hardening helpers --------------------------------------------------

// Probability map [N,1,H,W] (or [1,H,W]) -> {0,1} labels at the threshold.
template <typename Real>
Tensor<int> threshold_mask(const Tensor<Real>& prob, double threshold) {
    Tensor<int> out(prob.shape);
    for (int64_t i = 0; i < prob.numel(); ++i)
        out.data[static_cast<size_t>(i)] = static_cast<double>(prob.data[static_cast<size_t>(i)]) >= threshold ? 1 : 0;
    return out;
}

// Class-probability map [N,K,H,W] -> argmax labels [N,1,H,W] (ties -> lowest id).
template <typename Real>
Tensor<int> argmax_mask(const Tensor<Real>& prob) {
    if (prob.rank() != 4) throw ShapeError("argmax_mask: expected NCHW, got " + prob.shape_str());
    const int n = prob.size(0), k = prob.size(1), h = prob.size(2), w = prob.size(3);
    Tensor<int> out({n, 1, h, w});
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int best = 0;
                Real bv = prob.at(i, 0, y, x);
                for (int c = 1; c < k; ++c)
                    if (prob.at(i, c, y, x) > bv) {
                        bv = prob.at(i, c, y, x);
                        best = c;
                    }
                out.at(i, 0, y, x) = best;
            }
    return out;
}

// ---- emission -----------------------------------------------------------

inline nlohmann::json class_metrics_json(const ClassMetrics& m) {
    return {{"dice", m.dice}, {"iou", m.iou}, {"precision", m.precision}, {"recall", m.recall}};
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["folds"] = r.folds;
    j["mean"] = class_metrics_json(r.mean);
    j["mean_sd"] = class_metrics_json(r.mean_sd);
    j["per_class"] = nlohmann::json::array();
    for (int c = 0; c < r.num_classes(); ++c) {
        nlohmann::json jc = class_metrics_json(r.per_class[static_cast<size_t>(c)]);
        jc["class"] = c;
        jc["sd"] = class_metrics_json(r.per_class_sd[static_cast<size_t>(c)]);
        j["per_class"].push_back(jc);
    }
    return j;
}

inline std::string metrics_csv_header() {
    return "fold,class,dice,iou,precision,recall";
}

// One row per class plus a "mean" row; fold_label names the fold or "all".
inline void metrics_csv_rows(std::ostream& os, const MetricsReport& r, const std::string& fold_label) {
    for (int c = 0; c < r.num_classes(); ++c) {
        const auto& m = r.per_class[static_cast<size_t>(c)];
        os << fold_label << ',' << c << ',' << m.dice << ',' << m.iou << ',' << m.precision << ','
           << m.recall << '\n';
    }
    os << fold_label << ",mean," << r.mean.dice << ',' << r.mean.iou << ',' << r.mean.precision
       << ',' << r.mean.recall << '\n';
}

}  // namespace cdal::metrics
