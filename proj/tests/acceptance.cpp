// Acceptance suite: one test case per release criterion, each tagged [cN]
// and printed as a single PASS/FAIL line by the registered listener. The
// numeric tolerances here are the contract; they must not be loosened to
// make a failing build pass.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "cdal/cdal.hpp"

using Catch::Matchers::WithinAbs;
using cdal::Rng;
using cdal::Tensor;
namespace nn = cdal::nn;
namespace attn = cdal::attn;
namespace data = cdal::data;
namespace diffusion = cdal::diffusion;
namespace metrics = cdal::metrics;
namespace sample = cdal::sample;
namespace train = cdal::train;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// ---- shared fixtures ----------------------------------------------------

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cdal_acc_" + std::to_string(std::rand()) +
                                            std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

struct RunResult {
    int code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(CDAL_CLI_PATH) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    while (size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// 8x8 double-precision toy models for the finite-difference checks.
nn::GeneratorConfig toy_gen_config() {
    nn::GeneratorConfig g;
    g.resolution = 8;
    g.label_channels = 1;
    g.image_channels = 1;
    g.base_channels = 4;
    g.channel_multipliers = {1, 2};
    g.blocks_per_scale = 1;
    g.time_embed_dim = 8;
    g.latent_dim = 4;
    g.condition_channels = 2;
    return g;
}

nn::DiscriminatorConfig toy_disc_config() {
    nn::DiscriminatorConfig d;
    d.resolution = 8;
    d.label_channels = 1;
    d.base_channels = 4;
    d.channel_multipliers = {1, 2};
    d.blocks_per_scale = 1;
    d.time_embed_dim = 8;
    return d;
}

// Compact 32x32 models for the studies that train several runs.
nn::GeneratorConfig compact_gen_config() {
    nn::GeneratorConfig g;
    g.resolution = 32;
    g.label_channels = 1;
    g.image_channels = 1;
    g.base_channels = 16;
    g.channel_multipliers = {1, 2};
    g.blocks_per_scale = 1;
    g.time_embed_dim = 32;
    g.latent_dim = 16;
    g.condition_channels = 8;
    return g;
}

nn::DiscriminatorConfig compact_disc_config() {
    nn::DiscriminatorConfig d;
    d.resolution = 32;
    d.label_channels = 1;
    d.base_channels = 16;
    d.channel_multipliers = {1, 2};
    d.blocks_per_scale = 1;
    d.time_embed_dim = 32;
    return d;
}

template <typename Real>
void perturb_params(nn::ParamList<Real>& params, Rng& rng) {
    for (auto& p : params)
        for (auto& v : p.value->data) v += Real(0.2) * static_cast<Real>(rng.normal());
}

// Mean foreground dice (percent) of thresholded multi-instance predictions
// over a slice [lo, hi) of a dataset, computed through the metrics module.
double predicted_mean_dice(nn::Generator<float>& gen, const diffusion::NoiseSchedule& sched,
                           const data::Dataset<float>& ds, int lo, int hi, uint64_t seed) {
    const int n = hi - lo;
    const int res = gen.cfg.resolution;
    Tensor<float> img({n, gen.cfg.image_channels, res, res});
    for (int i = 0; i < n; ++i)
        std::copy_n(ds.samples[static_cast<size_t>(lo + i)].image.ptr(),
                    ds.samples[static_cast<size_t>(lo + i)].image.numel(),
                    img.ptr() + static_cast<int64_t>(i) *
                                    ds.samples[static_cast<size_t>(lo + i)].image.numel());
    sample::InferenceConfig icfg;
    icfg.n_instances = 5;
    icfg.seed = seed;
    auto pred = sample::predict(gen, sched, img, icfg);

    std::vector<Tensor<int>> hard, gt;
    for (int i = 0; i < n; ++i) {
        Tensor<int> h({res, res});
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) h.at(y, x) = pred.hard_mask.at(i, 0, y, x);
        hard.push_back(std::move(h));
        gt.push_back(ds.samples[static_cast<size_t>(lo + i)].label);
    }
    return metrics::evaluate_set(hard, gt, ds.num_classes, /*per_image=*/true).mean.dice;
}

}  // namespace

// ---- criterion 1: schedule closed form ----------------------------------

TEST_CASE("noise schedule matches its closed form to 1e-9", "[acceptance][c1]") {
    // Closed-form values evaluated independently at 50-digit precision.
    const auto s2 = diffusion::build_schedule(2, 0.1, 20.0);
    REQUIRE_THAT(s2.betas[1], WithinAbs(0.92093618754683934, 1e-9));
    REQUIRE_THAT(s2.betas[2], WithinAbs(0.99945378615424186, 1e-9));

    const double alpha_bar_final = 4.3185749060341303e-5;  // e^{-10.05}
    for (int T : {1, 2, 4, 8}) {
        const auto s = diffusion::build_schedule(T, 0.1, 20.0);
        REQUIRE_THAT(s.alpha_bars[static_cast<size_t>(T)],
                     WithinAbs(alpha_bar_final, 1e-9));
        REQUIRE(std::abs(s.alpha_bars[static_cast<size_t>(T)] - alpha_bar_final) /
                    alpha_bar_final <
                1e-9);
    }
}

// ---- criterion 2: marginal consistency ----------------------------------

TEST_CASE("stepwise noising composes to the closed-form marginal", "[acceptance][c2]") {
    const auto s = diffusion::build_schedule(4, 0.1, 20.0);
    const int N = 100000;
    Rng rng(2468);
    for (double x0 : {1.0, -0.4}) {
        double sum = 0, sumsq = 0;
        for (int i = 0; i < N; ++i) {
            double x = x0;
            for (int t = 1; t <= 4; ++t)
                x = std::sqrt(1.0 - s.betas[static_cast<size_t>(t)]) * x +
                    std::sqrt(s.betas[static_cast<size_t>(t)]) * rng.normal();
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / N;
        const double var = sumsq / N - mean * mean;
        const double want_mean = s.sqrt_alpha_bar(4) * x0;
        const double want_var = 1.0 - s.alpha_bars[4];
        CAPTURE(x0, mean, want_mean, var, want_var);
        REQUIRE(std::abs(mean - want_mean) < 0.01);
        REQUIRE(std::abs(var - want_var) < 0.02);
    }
}

// ---- criterion 3: posterior collapse at the last step -------------------

TEST_CASE("the final reverse step adopts the prediction exactly", "[acceptance][c3]") {
    Rng rng(135);
    for (int T : {2, 4}) {
        const auto s = diffusion::build_schedule(T, 0.1, 20.0);
        for (int i = 0; i < 50; ++i) {
            Tensor<float> x_t({1, 1, 3, 3}), x0_hat({1, 1, 3, 3});
            rng.fill_normal(x_t);
            rng.fill_normal(x0_hat);
            const bool stochastic = i % 2 == 1;
            Tensor<float> out =
                diffusion::posterior_step(x_t, x0_hat, 1, s, stochastic, stochastic ? &rng : nullptr);
            double max_diff = 0;
            for (int64_t k = 0; k < out.numel(); ++k)
                max_diff = std::max(max_diff,
                                    std::abs(static_cast<double>(out.data[static_cast<size_t>(k)]) -
                                             static_cast<double>(x0_hat.data[static_cast<size_t>(k)])));
            REQUIRE(max_diff == 0.0);
        }
    }
}

// ---- criterion 4: finite-difference gradient checks ---------------------

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-3;

void check_gradients(nn::ParamList<double>& params, const std::function<double()>& loss,
                     const std::vector<Tensor<double>>& analytic, Rng& pick, int per_tensor) {
    REQUIRE(params.size() == analytic.size());
    int checked = 0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<double>& value = *params[pi].value;
        const int64_t n = value.numel();
        for (int probe = 0; probe < per_tensor && probe < n; ++probe) {
            const int64_t idx =
                n == 1 ? 0 : static_cast<int64_t>(pick.uniform_int(0, static_cast<int>(n - 1)));
            const double saved = value.data[static_cast<size_t>(idx)];
            value.data[static_cast<size_t>(idx)] = saved + kFdStep;
            const double up = loss();
            value.data[static_cast<size_t>(idx)] = saved - kFdStep;
            const double down = loss();
            value.data[static_cast<size_t>(idx)] = saved;
            const double fd = (up - down) / (2.0 * kFdStep);
            const double an = analytic[pi].data[static_cast<size_t>(idx)];
            const double denom = std::max(std::abs(fd), std::abs(an));
            if (denom < 1e-10) continue;  // flat in both views
            INFO(params[pi].name << "[" << idx << "]: fd=" << fd << " analytic=" << an);
            REQUIRE(std::abs(fd - an) / denom < kFdRelTol);
            ++checked;
        }
    }
    REQUIRE(checked > static_cast<int>(params.size()));
}

std::vector<Tensor<double>> snapshot_grads(const nn::ParamList<double>& params) {
    std::vector<Tensor<double>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(*p.grad);
    return out;
}

}  // namespace

TEST_CASE("training losses backpropagate true gradients", "[acceptance][c4]") {
    const auto started = Clock::now();
    Rng rng(404);

    SECTION("generator masked-regression loss") {
        nn::Generator<double> gen(toy_gen_config());
        gen.init(rng);
        {
            auto params = gen.params();
            perturb_params(params, rng);
        }
        const auto sched = diffusion::build_schedule(4, 0.1, 20.0);
        Tensor<double> x0({2, 1, 8, 8}), img({2, 1, 8, 8}), z({2, 4}), mask({2, 1, 8, 8}),
            eps({2, 1, 8, 8});
        for (auto& v : x0.data) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
        rng.fill_normal(img);
        rng.fill_normal(z);
        rng.fill_normal(eps);
        for (auto& v : mask.data) v = rng.uniform();  // attention-like weights in [0,1]
        const int t = 3;
        Tensor<double> x_att = attn::apply_attention(x0, mask);
        Tensor<double> x_t = diffusion::forward_sample(x_att, t, eps, sched);

        auto loss = [&]() {
            Tensor<double> gpred;
            return train::mse_loss(gen.forward(x_t, t, z, img), x0, gpred);
        };
        Tensor<double> gpred;
        train::mse_loss(gen.forward(x_t, t, z, img), x0, gpred);
        auto params = gen.params();
        nn::zero_grads(params);
        gen.backward(gpred);
        const auto analytic = snapshot_grads(params);
        Rng pick(405);
        check_gradients(params, loss, analytic, pick, 3);
    }

    SECTION("discriminator cross-entropy, both targets") {
        nn::Discriminator<double> disc(toy_disc_config());
        disc.init(rng);
        {
            auto params = disc.params();
            perturb_params(params, rng);
        }
        Tensor<double> x_t({2, 1, 8, 8}), x_prev({2, 1, 8, 8});
        rng.fill_normal(x_t);
        rng.fill_normal(x_prev);
        for (double target : {1.0, 0.0}) {
            auto loss = [&]() {
                Tensor<double> gl;
                return train::bce_with_logits(disc.forward(x_t, x_prev, 2), target, gl);
            };
            Tensor<double> gl;
            train::bce_with_logits(disc.forward(x_t, x_prev, 2), target, gl);
            auto params = disc.params();
            nn::zero_grads(params);
            disc.backward(gl);
            const auto analytic = snapshot_grads(params);
            Rng pick(static_cast<uint64_t>(406 + target));
            check_gradients(params, loss, analytic, pick, 3);
        }
    }

    REQUIRE(std::chrono::duration<double>(Clock::now() - started).count() < 120.0);
}

// ---- criterion 5: attention algebra -------------------------------------

TEST_CASE("attention maps obey their defining algebra", "[acceptance][c5]") {
    Rng rng(505);
    Tensor<float> feat({2, 5, 4, 4});
    rng.fill_normal(feat);

    // Channel mean, against a direct tally in the same accumulation order.
    Tensor<float> map = attn::attention_map(feat);
    REQUIRE(map.shape == std::vector<int>{2, 1, 4, 4});
    const float inv_c = 1.0f / 5.0f;
    for (int n = 0; n < 2; ++n)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                float acc = 0;
                for (int c = 0; c < 5; ++c) acc += feat.at(n, c, y, x) * inv_c;
                REQUIRE(map.at(n, 0, y, x) == acc);
            }

    Tensor<float> norm = attn::normalize_map(map);
    for (float v : norm.data) {
        REQUIRE(v >= 0.0f);
        REQUIRE(v <= 1.0f);
    }

    // An all-ones map must be the exact identity.
    Tensor<float> x({2, 3, 8, 8}), ones({2, 1, 8, 8});
    rng.fill_normal(x);
    for (auto& v : ones.data) v = 1.0f;
    Tensor<float> same = attn::apply_attention(x, ones);
    REQUIRE(same.data == x.data);
}

// ---- criterion 6: metrics oracle ----------------------------------------

namespace {

struct RefClassMetrics {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double dice = 0, iou = 0, precision = 0, recall = 0;
};

// Independent per-class double-loop tally with the same empty-class rules.
std::vector<RefClassMetrics> reference_metrics(const Tensor<int>& pred, const Tensor<int>& gt,
                                               int k) {
    std::vector<RefClassMetrics> out(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
        auto& m = out[static_cast<size_t>(c)];
        for (int64_t i = 0; i < pred.numel(); ++i) {
            const bool p = pred.data[static_cast<size_t>(i)] == c;
            const bool g = gt.data[static_cast<size_t>(i)] == c;
            m.tp += p && g;
            m.fp += p && !g;
            m.fn += !p && g;
            m.tn += !p && !g;
        }
        m.dice = (2 * m.tp + m.fp + m.fn) == 0
                     ? 100.0
                     : 100.0 * 2.0 * m.tp / static_cast<double>(2 * m.tp + m.fp + m.fn);
        m.iou = (m.tp + m.fp + m.fn) == 0
                    ? 100.0
                    : 100.0 * m.tp / static_cast<double>(m.tp + m.fp + m.fn);
        m.precision = (m.tp + m.fp) == 0 ? 100.0 : 100.0 * m.tp / static_cast<double>(m.tp + m.fp);
        m.recall = (m.tp + m.fn) == 0 ? 100.0 : 100.0 * m.tp / static_cast<double>(m.tp + m.fn);
    }
    return out;
}

}  // namespace

TEST_CASE("segmentation metrics match an independent tally", "[acceptance][c6]") {
    Rng rng(606);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 2 + trial % 3;
        Tensor<int> pred({16, 16}), gt({16, 16});
        for (auto& v : pred.data) v = rng.uniform_int(0, k - 1);
        for (auto& v : gt.data) v = rng.uniform_int(0, k - 1);

        const auto counts = metrics::confusion(pred, gt, k);
        const auto report = metrics::compute_metrics(counts);
        const auto ref = reference_metrics(pred, gt, k);
        for (int c = 0; c < k; ++c) {
            const auto& got_c = counts.per_class[static_cast<size_t>(c)];
            const auto& ref_c = ref[static_cast<size_t>(c)];
            REQUIRE(got_c.tp == ref_c.tp);
            REQUIRE(got_c.fp == ref_c.fp);
            REQUIRE(got_c.fn == ref_c.fn);
            REQUIRE(got_c.tn == ref_c.tn);
            const auto& m = report.per_class[static_cast<size_t>(c)];
            REQUIRE_THAT(m.dice, WithinAbs(ref_c.dice, 1e-12));
            REQUIRE_THAT(m.iou, WithinAbs(ref_c.iou, 1e-12));
            REQUIRE_THAT(m.precision, WithinAbs(ref_c.precision, 1e-12));
            REQUIRE_THAT(m.recall, WithinAbs(ref_c.recall, 1e-12));
            // Dice and IoU are locked together by algebra (percent scale).
            REQUIRE_THAT(m.dice, WithinAbs(2.0 * m.iou / (1.0 + m.iou / 100.0), 1e-12));
        }
    }
}

// ---- criterion 7: few-step overfit integration --------------------------

TEST_CASE("few-step training overfits a small set to high dice", "[acceptance][c7]") {
    data::SyntheticSpec spec;  // 64x64 binary shapes, default texture
    spec.seed = 2024;
    auto ds = data::generate_synthetic<float>(spec, 16);

    nn::GeneratorConfig gcfg;  // default full-size architecture
    nn::DiscriminatorConfig dcfg;
    train::TrainConfig tcfg;
    tcfg.T = 2;
    tcfg.seed = 7;
    tcfg.max_steps = 5000;
    tcfg.eval_interval = 100;

    train::Trainer<float> tr(tcfg, gcfg, dcfg);
    double best_dice = 0;
    json history = json::array();
    const auto started = Clock::now();
    tr.stop_check = [&](train::Trainer<float>& t) {
        const double dice = predicted_mean_dice(t.gen, t.sched, ds, 0, ds.size(), 1234);
        best_dice = std::max(best_dice, dice);
        history.push_back({{"step", t.step}, {"dice", dice}});
        std::printf("  [c7] step %lld  train dice %.2f\n", static_cast<long long>(t.step), dice);
        std::fflush(stdout);
        return dice >= 90.0;
    };
    tr.train(ds);

    json report;
    report["steps"] = tr.step;
    report["best_dice"] = best_dice;
    report["wall_seconds"] = std::chrono::duration<double>(Clock::now() - started).count();
    report["history"] = history;
    std::ofstream out("acceptance_overfit.json");
    out << report.dump(2) << "\n";

    REQUIRE(tr.step <= 5000);
    REQUIRE(best_dice >= 90.0);
}

// ---- criterion 8: attention ablation direction (soft) -------------------

TEST_CASE("attention direction study on held-out data", "[acceptance][c8]") {
    // A low-contrast, noisy, multi-object task trained briefly keeps the
    // models in the mid-learning regime where masking can matter; on easy
    // data every variant saturates and the comparison reads only noise.
    data::SyntheticSpec spec;
    spec.resolution = 32;
    spec.seed = 555;
    spec.contrast = 0.35;
    spec.noise_level = 0.18;
    spec.min_objects = 2;
    spec.max_objects = 4;
    auto all = data::generate_synthetic<float>(spec, 80);
    data::Dataset<float> train_ds;
    train_ds.num_classes = all.num_classes;
    for (int i = 0; i < 64; ++i) train_ds.samples.push_back(all.samples[static_cast<size_t>(i)]);

    auto run_variant = [&](bool attention, uint64_t seed) {
        train::TrainConfig c;
        c.T = 2;
        c.attn_scale = 16;
        c.use_attention = attention;
        c.seed = seed;
        c.max_steps = 250;
        train::Trainer<float> tr(c, compact_gen_config(), compact_disc_config());
        tr.train(train_ds);
        return predicted_mean_dice(tr.gen, tr.sched, all, 64, 80, 99);
    };

    std::vector<double> full, bare;
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        full.push_back(run_variant(true, seed));
        bare.push_back(run_variant(false, seed));
        std::printf("  [c8] seed %llu  with attention %.2f  without %.2f\n",
                    static_cast<unsigned long long>(seed), full.back(), bare.back());
        std::fflush(stdout);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    const double med_full = median(full);
    const double med_bare = median(bare);

    json report;
    report["validation_dice_with_attention"] = full;
    report["validation_dice_without_attention"] = bare;
    report["median_with_attention"] = med_full;
    report["median_without_attention"] = med_bare;
    report["trend_holds"] = med_full >= med_bare;
    std::ofstream out("acceptance_ablation.json");
    out << report.dump(2) << "\n";
    std::printf("  [c8] median with %.2f  without %.2f  trend %s\n", med_full, med_bare,
                med_full >= med_bare ? "holds" : "REVERSED");
    std::fflush(stdout);

    REQUIRE(fs::exists("acceptance_ablation.json"));  // the report always lands
    for (double v : full) REQUIRE(v > 0.0);
    for (double v : bare) REQUIRE(v > 0.0);
    // The direction itself is soft: a reversal is flagged in the report and
    // in the output below, but does not fail the build.
    CHECK_NOFAIL(med_full >= med_bare);
}

// ---- criterion 9: discriminator learnability ----------------------------

TEST_CASE("the critic learns to separate real from generated pairs", "[acceptance][c9]") {
    data::SyntheticSpec spec;
    spec.resolution = 16;
    spec.seed = 909;
    auto all = data::generate_synthetic<float>(spec, 80);  // 64 train + 16 held out

    nn::GeneratorConfig gcfg = toy_gen_config();
    gcfg.resolution = 16;
    nn::DiscriminatorConfig dcfg = toy_disc_config();
    dcfg.resolution = 16;
    dcfg.base_channels = 8;

    // Frozen generator, exactly as initialized.
    nn::Generator<float> gen(gcfg);
    Rng grng(910);
    gen.init(grng);

    nn::Discriminator<float> disc(dcfg);
    Rng drng(911);
    disc.init(drng);
    // The two critic substeps push nearly-opposite gradients through almost
    // identical features, so the net signal is small; a higher rate than the
    // adversarial-training default keeps this standalone fit inside budget.
    nn::Adam<float> opt;
    opt.lr = 3e-3;
    const auto sched = diffusion::build_schedule(4, 0.1, 20.0);
    Rng rng(912);

    auto make_pairs = [&](int lo, int hi, int t, Rng& r, Tensor<float>& x_t, Tensor<float>& x_prev,
                          Tensor<float>& xhat_prev) {
        const int b = hi - lo;
        Tensor<float> x0({b, 1, 16, 16}), img({b, 1, 16, 16});
        for (int i = 0; i < b; ++i) {
            const auto& s = all.samples[static_cast<size_t>(lo + i)];
            Tensor<float> lx = data::label_to_x0<float>(s.label, all.num_classes);
            std::copy_n(lx.ptr(), lx.numel(), x0.ptr() + static_cast<int64_t>(i) * lx.numel());
            std::copy_n(s.image.ptr(), s.image.numel(),
                        img.ptr() + static_cast<int64_t>(i) * s.image.numel());
        }
        Tensor<float> eps(x0.shape), z({b, gen.cfg.latent_dim});
        r.fill_normal(eps);
        r.fill_normal(z);
        x_t = diffusion::forward_sample(x0, t, eps, sched);
        x_prev = diffusion::forward_reparam_prev(x0, t, eps, sched);
        Tensor<float> x0_hat = gen.forward(x_t, t, z, img);
        xhat_prev = diffusion::forward_reparam_prev(x0_hat, t, eps, sched);
    };

    // Fixed held-out evaluation pairs, four timestep groups of four images.
    std::vector<std::tuple<int, Tensor<float>, Tensor<float>, Tensor<float>>> eval_pairs;
    {
        Rng eval_rng(913);
        for (int g = 0; g < 4; ++g) {
            Tensor<float> x_t, x_prev, xhat_prev;
            make_pairs(64 + 4 * g, 64 + 4 * (g + 1), g + 1, eval_rng, x_t, x_prev, xhat_prev);
            eval_pairs.emplace_back(g + 1, std::move(x_t), std::move(x_prev), std::move(xhat_prev));
        }
    }
    auto held_out_accuracy = [&]() {
        int correct = 0, total = 0;
        for (auto& [t, x_t, x_prev, xhat_prev] : eval_pairs) {
            Tensor<float> lr = disc.forward(x_t, x_prev, t);
            Tensor<float> lf = disc.forward(x_t, xhat_prev, t);
            for (int64_t i = 0; i < lr.numel(); ++i) {
                correct += lr.data[static_cast<size_t>(i)] > 0;
                correct += lf.data[static_cast<size_t>(i)] < 0;
                total += 2;
            }
        }
        return static_cast<double>(correct) / total;
    };

    int reached_at = -1;
    double acc = 0;
    for (int step = 1; step <= 1000; ++step) {
        const int lo = 8 * ((step - 1) % 8);
        const int t = rng.uniform_int(1, 4);
        Tensor<float> x_t, x_prev, xhat_prev, gl;
        make_pairs(lo, lo + 8, t, rng, x_t, x_prev, xhat_prev);

        auto dp = disc.params();
        train::bce_with_logits(disc.forward(x_t, x_prev, t), 1.0, gl);
        nn::zero_grads(dp);
        disc.backward(gl);
        nn::clip_global_norm(dp, 1.0);
        opt.step(dp);
        train::bce_with_logits(disc.forward(x_t, xhat_prev, t), 0.0, gl);
        nn::zero_grads(dp);
        disc.backward(gl);
        nn::clip_global_norm(dp, 1.0);
        opt.step(dp);

        if (step % 25 == 0) {
            acc = held_out_accuracy();
            if (acc > 0.8) {
                reached_at = step;
                break;
            }
        }
    }
    std::printf("  [c9] held-out accuracy %.3f at step %d\n", acc, reached_at);
    REQUIRE(reached_at > 0);
    REQUIRE(reached_at <= 1000);
    REQUIRE(acc > 0.8);
}

// ---- criterion 10: end-to-end determinism through the CLI ---------------

TEST_CASE("the command-line pipeline is seed-deterministic", "[acceptance][c10]") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "tiny.cfg";
    {
        std::ofstream out(cfg);
        out << "seed = 11\n[data]\nresolution = 16\n[synth]\ncount = 4\nresolution = 16\n"
            << "[model]\nbase_channels = 8\nchannel_multipliers = 1,2\nblocks_per_scale = 1\n"
            << "time_embed_dim = 16\nlatent_dim = 8\ncondition_channels = 4\n"
            << "[disc]\nbase_channels = 8\nchannel_multipliers = 1,2\nblocks_per_scale = 1\n"
            << "[train]\nT = 2\nattn_scale = 8\nbatch_size = 2\nmax_steps = 3\n"
            << "[infer]\ninstances = 2\n";
    }
    const fs::path ds = tmp.path / "ds";
    REQUIRE(run_cli("synth --config " + cfg.string() + " --out " + ds.string()).code == 0);

    // Two independent train->predict->evaluate pipelines from one seed.
    std::array<fs::path, 2> run_dirs = {tmp.path / "runA", tmp.path / "runB"};
    std::array<fs::path, 2> pred_dirs = {tmp.path / "predA", tmp.path / "predB"};
    std::array<fs::path, 2> eval_dirs = {tmp.path / "evalA", tmp.path / "evalB"};
    for (int i = 0; i < 2; ++i) {
        REQUIRE(run_cli("train --config " + cfg.string() + " --data " + ds.string() + " --out " +
                        run_dirs[static_cast<size_t>(i)].string())
                    .code == 0);
        REQUIRE(run_cli("predict --config " + cfg.string() + " --checkpoint " +
                        (run_dirs[static_cast<size_t>(i)] / "model.ckpt").string() + " --data " +
                        ds.string() + " --out " + pred_dirs[static_cast<size_t>(i)].string())
                    .code == 0);
        REQUIRE(run_cli("evaluate --config " + cfg.string() + " --pred " +
                        pred_dirs[static_cast<size_t>(i)].string() + " --data " + ds.string() +
                        " --out " + eval_dirs[static_cast<size_t>(i)].string())
                    .code == 0);
    }

    REQUIRE(read_file(run_dirs[0] / "model.ckpt") == read_file(run_dirs[1] / "model.ckpt"));
    for (int i = 0; i < 4; ++i) {
        const std::string stem = "synth_000" + std::to_string(i);
        REQUIRE(read_file(pred_dirs[0] / (stem + ".pred.png")) ==
                read_file(pred_dirs[1] / (stem + ".pred.png")));
        REQUIRE(read_file(pred_dirs[0] / (stem + ".prob.png")) ==
                read_file(pred_dirs[1] / (stem + ".prob.png")));
    }
    REQUIRE(read_file(eval_dirs[0] / "metrics.json") == read_file(eval_dirs[1] / "metrics.json"));
    REQUIRE(read_file(eval_dirs[0] / "metrics.csv") == read_file(eval_dirs[1] / "metrics.csv"));
}

// ---- criterion 11: few-step sampling cost -------------------------------

TEST_CASE("sampling costs exactly one model call per step", "[acceptance][c11]") {
    nn::GeneratorConfig gcfg = toy_gen_config();
    gcfg.resolution = 16;
    Tensor<float> img({1, 1, 16, 16});
    Rng rng(1111);
    rng.fill_normal(img);

    for (int T : {2, 4}) {
        nn::Generator<float> gen(gcfg);
        Rng init(1112);
        gen.init(init);
        const auto sched = diffusion::build_schedule(T, 0.1, 20.0);
        gen.eval_count = 0;
        (void)sample::sample_once(gen, sched, img, 3);
        REQUIRE(gen.eval_count == T);

        // Averaged inference scales linearly in the instance count.
        sample::InferenceConfig icfg;
        icfg.n_instances = 5;
        gen.eval_count = 0;
        (void)sample::predict(gen, sched, img, icfg);
        REQUIRE(gen.eval_count == 5 * T);
    }
}
