// Segmentation-metric tests. The reference implementation below recomputes
// every count with independent nested loops and simple formulas, so the
// library must agree with it to near machine precision on random inputs.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cdal/core/rng.hpp"
#include "cdal/metrics/metrics.hpp"

using Catch::Matchers::WithinAbs;
using cdal::Rng;
using cdal::Tensor;
namespace met = cdal::metrics;

namespace {

Tensor<int> random_mask(Rng& rng, int h, int w, int num_classes) {
    Tensor<int> m({h, w});
    for (auto& v : m.data) v = rng.uniform_int(0, num_classes - 1);
    return m;
}

// Brute-force reference: one full pass over the image per class and metric.
struct RefMetrics {
    double dice, iou, precision, recall;
};

RefMetrics reference_class_metrics(const Tensor<int>& pred, const Tensor<int>& gt, int cls) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const bool p = pred.data[static_cast<size_t>(i)] == cls;
        const bool g = gt.data[static_cast<size_t>(i)] == cls;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    RefMetrics r{};
    r.dice = (tp + fp + fn == 0) ? 100.0 : 100.0 * 2.0 * tp / double(2 * tp + fp + fn);
    r.iou = (tp + fp + fn == 0) ? 100.0 : 100.0 * tp / double(tp + fp + fn);
    r.precision = (tp + fp == 0) ? 100.0 : 100.0 * tp / double(tp + fp);
    r.recall = (tp + fn == 0) ? 100.0 : 100.0 * tp / double(tp + fn);
    return r;
}

}  // namespace

TEST_CASE("metrics on 1000 random mask pairs match the brute-force reference", "[metrics]") {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = rng.uniform_int(2, 4);
        const Tensor<int> pred = random_mask(rng, 16, 16, k);
        const Tensor<int> gt = random_mask(rng, 16, 16, k);
        const met::MetricsReport rep = met::compute_metrics(met::confusion(pred, gt, k));

        double mean_dice = 0, mean_iou = 0, mean_prec = 0, mean_rec = 0;
        for (int c = 0; c < k; ++c) {
            const RefMetrics ref = reference_class_metrics(pred, gt, c);
            const met::ClassMetrics& got = rep.per_class[static_cast<size_t>(c)];
            REQUIRE_THAT(got.dice, WithinAbs(ref.dice, 1e-12));
            REQUIRE_THAT(got.iou, WithinAbs(ref.iou, 1e-12));
            REQUIRE_THAT(got.precision, WithinAbs(ref.precision, 1e-12));
            REQUIRE_THAT(got.recall, WithinAbs(ref.recall, 1e-12));
            if (c > 0) {  // background never enters the mean
                mean_dice += ref.dice;
                mean_iou += ref.iou;
                mean_prec += ref.precision;
                mean_rec += ref.recall;
            }
        }
        REQUIRE_THAT(rep.mean.dice, WithinAbs(mean_dice / (k - 1), 1e-12));
        REQUIRE_THAT(rep.mean.iou, WithinAbs(mean_iou / (k - 1), 1e-12));
        REQUIRE_THAT(rep.mean.precision, WithinAbs(mean_prec / (k - 1), 1e-12));
        REQUIRE_THAT(rep.mean.recall, WithinAbs(mean_rec / (k - 1), 1e-12));
    }
}

TEST_CASE("confusion counts on a hand-checked example", "[metrics]") {
    //   gt:   0 0 1 1      pred: 0 1 1 0
    // class 1: tp=1 (pos 2), fp=1 (pos 1), fn=1 (pos 3), tn=1 (pos 0)
    Tensor<int> gt({1, 4}), pred({1, 4});
    gt.data = {0, 0, 1, 1};
    pred.data = {0, 1, 1, 0};
    const met::ConfusionCounts c = met::confusion(pred, gt, 2);
    CHECK(c.per_class[1].tp == 1);
    CHECK(c.per_class[1].fp == 1);
    CHECK(c.per_class[1].fn == 1);
    CHECK(c.per_class[1].tn == 1);
    const met::MetricsReport r = met::compute_metrics(c);
    CHECK_THAT(r.per_class[1].dice, WithinAbs(50.0, 1e-12));       // 2/(2+1+1)
    CHECK_THAT(r.per_class[1].iou, WithinAbs(100.0 / 3.0, 1e-12)); // 1/3
    CHECK_THAT(r.per_class[1].precision, WithinAbs(50.0, 1e-12));
    CHECK_THAT(r.per_class[1].recall, WithinAbs(50.0, 1e-12));
}

TEST_CASE("per-class count quadruples always sum to the pixel count", "[metrics]") {
    Rng rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = rng.uniform_int(2, 5);
        const met::ConfusionCounts c =
            met::confusion(random_mask(rng, 9, 13, k), random_mask(rng, 9, 13, k), k);
        for (int cls = 0; cls < k; ++cls) {
            const auto& q = c.per_class[static_cast<size_t>(cls)];
            CHECK(q.tp + q.fp + q.fn + q.tn == 9 * 13);
        }
    }
}

TEST_CASE("overlap score identity: dice = 2*iou/(1+iou)", "[metrics]") {
    Rng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        const met::MetricsReport r = met::compute_metrics(
            met::confusion(random_mask(rng, 12, 12, 3), random_mask(rng, 12, 12, 3), 3));
        for (const auto& m : r.per_class) {
            const double i = m.iou / 100.0;
            CHECK_THAT(m.dice / 100.0, WithinAbs(2.0 * i / (1.0 + i), 1e-12));
        }
    }
}

TEST_CASE("swapping prediction and truth swaps precision and recall", "[metrics]") {
    Rng rng(34);
    const Tensor<int> a = random_mask(rng, 10, 10, 2), b = random_mask(rng, 10, 10, 2);
    const met::MetricsReport ab = met::compute_metrics(met::confusion(a, b, 2));
    const met::MetricsReport ba = met::compute_metrics(met::confusion(b, a, 2));
    CHECK_THAT(ab.per_class[1].dice, WithinAbs(ba.per_class[1].dice, 1e-12));
    CHECK_THAT(ab.per_class[1].iou, WithinAbs(ba.per_class[1].iou, 1e-12));
    CHECK_THAT(ab.per_class[1].precision, WithinAbs(ba.per_class[1].recall, 1e-12));
    CHECK_THAT(ab.per_class[1].recall, WithinAbs(ba.per_class[1].precision, 1e-12));
}

TEST_CASE("perfect and disjoint predictions hit the scale endpoints", "[metrics]") {
    Rng rng(35);
    const Tensor<int> gt = random_mask(rng, 8, 8, 3);
    const met::MetricsReport perfect = met::compute_metrics(met::confusion(gt, gt, 3));
    CHECK_THAT(perfect.mean.dice, WithinAbs(100.0, 1e-12));
    CHECK_THAT(perfect.mean.iou, WithinAbs(100.0, 1e-12));

    Tensor<int> all0({4, 4}), all1({4, 4});
    all0.fill(0);
    all1.fill(1);
    const met::MetricsReport r = met::compute_metrics(met::confusion(all0, all1, 2));
    CHECK_THAT(r.per_class[1].dice, WithinAbs(0.0, 1e-12));
    CHECK_THAT(r.per_class[1].recall, WithinAbs(0.0, 1e-12));
    CHECK_THAT(r.per_class[1].precision, WithinAbs(100.0, 1e-12));  // nothing predicted: vacuous
}

TEST_CASE("a class absent from both masks scores 100 everywhere", "[metrics]") {
    Tensor<int> a({3, 3}), b({3, 3});
    a.fill(0);
    b.fill(0);
    a.data[0] = 1;
    b.data[0] = 1;
    const met::MetricsReport r = met::compute_metrics(met::confusion(a, b, 3));  // class 2 unused
    CHECK_THAT(r.per_class[2].dice, WithinAbs(100.0, 1e-12));
    CHECK_THAT(r.per_class[2].iou, WithinAbs(100.0, 1e-12));
    CHECK_THAT(r.per_class[2].precision, WithinAbs(100.0, 1e-12));
    CHECK_THAT(r.per_class[2].recall, WithinAbs(100.0, 1e-12));
    // And it still contributes to the foreground mean.
    CHECK_THAT(r.mean.dice, WithinAbs((r.per_class[1].dice + 100.0) / 2.0, 1e-12));
}

TEST_CASE("fold aggregation reports mean and population spread", "[metrics]") {
    met::MetricsReport a, b;
    a.per_class.resize(2);
    b.per_class.resize(2);
    a.per_class_sd.resize(2);
    b.per_class_sd.resize(2);
    a.per_class[1] = {90.0, 82.0, 88.0, 92.0};
    b.per_class[1] = {94.0, 88.0, 92.0, 96.0};
    a.mean = a.per_class[1];
    b.mean = b.per_class[1];
    const met::MetricsReport agg = met::aggregate_reports({a, b});
    CHECK(agg.folds == 2);
    CHECK_THAT(agg.mean.dice, WithinAbs(92.0, 1e-12));
    CHECK_THAT(agg.mean_sd.dice, WithinAbs(2.0, 1e-12));  // population SD of {90, 94}
    CHECK_THAT(agg.per_class[1].iou, WithinAbs(85.0, 1e-12));
    CHECK_THAT(agg.per_class_sd[1].iou, WithinAbs(3.0, 1e-12));
    // A single report aggregates to itself with zero spread.
    const met::MetricsReport one = met::aggregate_reports({a});
    CHECK_THAT(one.mean.dice, WithinAbs(90.0, 1e-12));
    CHECK_THAT(one.mean_sd.dice, WithinAbs(0.0, 1e-12));
}

TEST_CASE("per-image and pooled evaluation differ as documented", "[metrics]") {
    // Image A: perfect. Image B: half the foreground missed.
    Tensor<int> gt({2, 2}), miss({2, 2});
    gt.data = {1, 1, 0, 0};
    miss.data = {1, 0, 0, 0};
    const met::MetricsReport per_image = met::evaluate_set({gt, miss}, {gt, gt}, 2, true);
    const met::MetricsReport pooled = met::evaluate_set({gt, miss}, {gt, gt}, 2, false);
    // Per-image: mean of 100 and 2*1/(2+1) = 66.67 -> 83.33.
    CHECK_THAT(per_image.mean.dice, WithinAbs((100.0 + 200.0 / 3.0) / 2.0, 1e-12));
    // Pooled: tp=3, fn=1, fp=0 -> 2*3/(6+1).
    CHECK_THAT(pooled.mean.dice, WithinAbs(100.0 * 6.0 / 7.0, 1e-12));
    CHECK(per_image.folds == 2);
}

TEST_CASE("probability thresholding is a half-open decision at the cut", "[metrics]") {
    Tensor<double> p({1, 1, 1, 4});
    p.data = {0.49999, 0.5, 0.50001, 1.0};
    const Tensor<int> m = met::threshold_mask(p, 0.5);
    CHECK(m.data == std::vector<int>({0, 1, 1, 1}));
}

TEST_CASE("argmax labeling breaks ties toward the lower class id", "[metrics]") {
    Tensor<double> p({1, 3, 1, 2});
    // Pixel 0: classes {0.2, 0.5, 0.3} -> 1. Pixel 1: tie {0.4, 0.4, 0.2} -> 0.
    p.at(0, 0, 0, 0) = 0.2;
    p.at(0, 1, 0, 0) = 0.5;
    p.at(0, 2, 0, 0) = 0.3;
    p.at(0, 0, 0, 1) = 0.4;
    p.at(0, 1, 0, 1) = 0.4;
    p.at(0, 2, 0, 1) = 0.2;
    const Tensor<int> m = met::argmax_mask(p);
    CHECK(m.at(0, 0, 0, 0) == 1);
    CHECK(m.at(0, 0, 0, 1) == 0);
}

TEST_CASE("metric computation validates its inputs", "[metrics]") {
    Tensor<int> a({2, 2}), b({2, 3}), wild({2, 2});
    a.fill(0);
    wild.fill(7);
    CHECK_THROWS_AS(met::confusion(a, b, 2), cdal::ShapeError);
    CHECK_THROWS_AS(met::confusion(wild, a, 2), cdal::ShapeError);
    CHECK_THROWS_AS(met::confusion(a, wild, 2), cdal::ShapeError);
    CHECK_THROWS_AS(met::aggregate_reports({}), cdal::ShapeError);
    CHECK_THROWS_AS(met::evaluate_set({}, {}, 2, true), cdal::ShapeError);
}
