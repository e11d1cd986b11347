#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdal/attention/attention.hpp"
#include "cdal/core/errors.hpp"
#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/data/folder.hpp"
#include "cdal/data/synthetic.hpp"
#include "cdal/diffusion/ops.hpp"
#include "cdal/diffusion/schedule.hpp"
#include "cdal/nn/adam.hpp"
#include "cdal/nn/checkpoint.hpp"
#include "cdal/nn/discriminator.hpp"
#include "cdal/nn/generator.hpp"
#include "cdal/nn/kernels.hpp"
#include "cdal/train/serialize.hpp"

namespace cdal::train {

using cdal::ConfigError;
using cdal::Rng;
using cdal::Tensor;

struct TrainConfig {
    int T = 4;             // diffusion steps (4 for fine structures, 2 for large ones)
    int attn_scale = 32;   // critic tap resolution feeding the attention mask
    bool use_attention = true;
    bool use_latent = true;
    bool fresh_noise = false;  // draw new noise per use instead of reusing one draw
    double lr_g = 1e-4;
    double lr_d = 1e-4;
    double clip_norm = 1.0;
    int batch_size = 8;
    int max_steps = 5000;
    int checkpoint_interval = 0;  // 0 = final checkpoint only
    int eval_interval = 0;        // 0 = never run the stop-check hook
    uint64_t seed = 0;
    double beta_min = 0.1;
    double beta_max = 20.0;

    void validate() const {
        if (T < 1) throw ConfigError("train: T must be >= 1");
        if (lr_g <= 0 || lr_d <= 0) throw ConfigError("train: learning rates must be positive");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (max_steps < 1) throw ConfigError("train: max_steps must be >= 1");
        if (attn_scale < 1) throw ConfigError("train: attn_scale must be positive");
    }
};

struct TrainLogRecord {
    int64_t step = 0;
    int t = 0;
    double g_loss = 0;
    double d_real_loss = 0;
    double d_fake_loss = 0;
    double d_accuracy = 0;
    double wall_ms = 0;
};

inline void to_json(nlohmann::json& j, const TrainLogRecord& r) {
    j = {{"step", r.step},           {"t", r.t},
         {"g_loss", r.g_loss},       {"d_real_loss", r.d_real_loss},
         {"d_fake_loss", r.d_fake_loss}, {"d_accuracy", r.d_accuracy},
         {"wall_ms", r.wall_ms}};
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"T", c.T},
         {"attn_scale", c.attn_scale},
         {"use_attention", c.use_attention},
         {"use_latent", c.use_latent},
         {"fresh_noise", c.fresh_noise},
         {"lr_g", c.lr_g},
         {"lr_d", c.lr_d},
         {"clip_norm", c.clip_norm},
         {"batch_size", c.batch_size},
         {"max_steps", c.max_steps},
         {"checkpoint_interval", c.checkpoint_interval},
         {"eval_interval", c.eval_interval},
         {"seed", c.seed},
         {"beta_min", c.beta_min},
         {"beta_max", c.beta_max}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("T").get_to(c.T);
    j.at("attn_scale").get_to(c.attn_scale);
    j.at("use_attention").get_to(c.use_attention);
    j.at("use_latent").get_to(c.use_latent);
    j.at("fresh_noise").get_to(c.fresh_noise);
    j.at("lr_g").get_to(c.lr_g);
    j.at("lr_d").get_to(c.lr_d);
    j.at("clip_norm").get_to(c.clip_norm);
    j.at("batch_size").get_to(c.batch_size);
    j.at("max_steps").get_to(c.max_steps);
    j.at("checkpoint_interval").get_to(c.checkpoint_interval);
    j.at("eval_interval").get_to(c.eval_interval);
    j.at("seed").get_to(c.seed);
    j.at("beta_min").get_to(c.beta_min);
    j.at("beta_max").get_to(c.beta_max);
}

// ---- losses -------------------------------------------------------------

// Mean binary cross-entropy from logits against a constant 0/1 target;
// fills glogits with d(loss)/d(logit).
template <typename Real>
double bce_with_logits(const Tensor<Real>& logits, double target, Tensor<Real>& glogits) {
    glogits = Tensor<Real>(logits.shape);
    const int64_t n = logits.numel();
    double loss = 0;
    for (int64_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(logits.data[static_cast<size_t>(i)]);
        loss += nn::softplus(x) - target * x;  // -[y log s + (1-y) log(1-s)]
        glogits.data[static_cast<size_t>(i)] =
            static_cast<Real>((nn::sigmoid(x) - target) / static_cast<double>(n));
    }
    return loss / static_cast<double>(n);
}

// Mean squared error; fills gpred with d(loss)/d(pred).
template <typename Real>
double mse_loss(const Tensor<Real>& pred, const Tensor<Real>& target, Tensor<Real>& gpred) {
    check_same_shape(pred, target, "mse");
    gpred = Tensor<Real>(pred.shape);
    const int64_t n = pred.numel();
    double loss = 0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pred.data[static_cast<size_t>(i)]) -
                         static_cast<double>(target.data[static_cast<size_t>(i)]);
        loss += d * d;
        gpred.data[static_cast<size_t>(i)] = static_cast<Real>(2.0 * d / static_cast<double>(n));
    }
    return loss / static_cast<double>(n);
}

// ---- trainer ------------------------------------------------------------

template <typename Real>
struct Trainer {
    TrainConfig cfg;
    diffusion::NoiseSchedule sched;
    nn::Generator<Real> gen;
    nn::Discriminator<Real> disc;
    nn::Adam<Real> opt_g, opt_d;
    Rng rng;  // single stream driving batch choice, noise, latents, and t
    int64_t step = 0;
    std::vector<TrainLogRecord> log;
    std::ostream* log_stream = nullptr;  // optional line-delimited JSON sink

    // Called every eval_interval steps; returning true stops training early.
    std::function<bool(Trainer&)> stop_check;

    Trainer(const TrainConfig& config, const nn::GeneratorConfig& gcfg,
            const nn::DiscriminatorConfig& dcfg)
        : cfg(config),
          sched(diffusion::build_schedule(config.T, config.beta_min, config.beta_max)),
          gen(gcfg),
          disc(dcfg),
          rng(derive_seed(config.seed, 0x747261696eULL)) {  // tag: "train"
        cfg.validate();
        if (gcfg.resolution != dcfg.resolution || gcfg.label_channels != dcfg.label_channels)
            throw ConfigError("train: generator/discriminator disagree on label geometry");
        if (cfg.use_attention) {
            const auto taps = dcfg.tap_resolutions();
            if (std::find(taps.begin(), taps.end(), cfg.attn_scale) == taps.end()) {
                std::string s;
                for (int r : taps) s += (s.empty() ? "" : ",") + std::to_string(r);
                throw ConfigError("train: attn_scale " + std::to_string(cfg.attn_scale) +
                                  " is not a critic tap resolution (available: " + s + ")");
            }
        }
        opt_g.lr = cfg.lr_g;
        opt_d.lr = cfg.lr_d;
        Rng init_rng(derive_seed(config.seed, 0x696e6974ULL));  // tag: "init"
        gen.init(init_rng);
        disc.init(init_rng);
    }

    // Assembles a batch by uniform draws with replacement, converting labels
    // to diffusion space.
    void draw_batch(const data::Dataset<Real>& ds, Tensor<Real>& x0, Tensor<Real>& img) {
        const int b = cfg.batch_size;
        const int res = gen.cfg.resolution;
        x0 = Tensor<Real>({b, gen.cfg.label_channels, res, res});
        img = Tensor<Real>({b, gen.cfg.image_channels, res, res});
        for (int i = 0; i < b; ++i) {
            const auto& s = ds.samples[static_cast<size_t>(rng.uniform_int(0, ds.size() - 1))];
            Tensor<Real> lx = data::label_to_x0<Real>(s.label, ds.num_classes);
            std::copy_n(lx.ptr(), lx.numel(), x0.ptr() + static_cast<int64_t>(i) * lx.numel());
            std::copy_n(s.image.ptr(), s.image.numel(),
                        img.ptr() + static_cast<int64_t>(i) * s.image.numel());
        }
    }

    struct StepStats {
        int t = 0;
        double g_loss = 0, d_real_loss = 0, d_fake_loss = 0, d_accuracy = 0;
    };

    // One Algorithm-1 iteration: two critic updates (real pair, fake pair),
    // attention mask off the fake pass, then one masked-regression update of
    // the generator. The same noise draw builds x_t, x_{t-1}, the fake
    // x̂_{t-1}, and x_t^att unless fresh_noise asks otherwise.
    StepStats train_step(const Tensor<Real>& x0, const Tensor<Real>& img) {
        StepStats st;
        const int b = x0.size(0);
        const int t = rng.uniform_int(1, cfg.T);
        st.t = t;

        Tensor<Real> eps(x0.shape);
        rng.fill_normal(eps);
        Tensor<Real> z({b, gen.cfg.latent_dim});
        if (cfg.use_latent) rng.fill_normal(z);

        // Critic, real pair: (x_t, x_{t-1}) from the true label.
        Tensor<Real> x_t = diffusion::forward_sample(x0, t, eps, sched);
        Tensor<Real> x_prev = diffusion::forward_reparam_prev(x0, t, eps, sched);
        Tensor<Real> glogits;
        Tensor<Real> logits_real = disc.forward(x_t, x_prev, t);
        st.d_real_loss = bce_with_logits(logits_real, 1.0, glogits);
        nn::ParamList<Real> dp = disc.params();
        nn::zero_grads(dp);
        disc.backward(glogits);
        nn::clip_global_norm(dp, cfg.clip_norm);
        opt_d.step(dp);
        ++disc.step;

        // Generator proposes a clean label; its parameters stay frozen here.
        Tensor<Real> x0_hat = gen.forward(x_t, t, z, img);
        Tensor<Real>* eps_fake = &eps;
        Tensor<Real> eps2;
        if (cfg.fresh_noise) {
            eps2 = Tensor<Real>(x0.shape);
            rng.fill_normal(eps2);
            eps_fake = &eps2;
        }
        Tensor<Real> xhat_prev = diffusion::forward_reparam_prev(x0_hat, t, *eps_fake, sched);

        // Critic, fake pair: (x_t, x̂_{t-1}).
        Tensor<Real> logits_fake = disc.forward(x_t, xhat_prev, t);
        st.d_fake_loss = bce_with_logits(logits_fake, 0.0, glogits);
        nn::zero_grads(dp);
        disc.backward(glogits);
        nn::clip_global_norm(dp, cfg.clip_norm);
        opt_d.step(dp);
        ++disc.step;

        int correct = 0;
        for (int i = 0; i < b; ++i) {
            if (logits_real.data[static_cast<size_t>(i)] > 0) ++correct;
            if (logits_fake.data[static_cast<size_t>(i)] < 0) ++correct;
        }
        st.d_accuracy = static_cast<double>(correct) / (2.0 * b);

        // Attention mask from the fake pass features; the critic is a fixed
        // feature extractor for this part, so no gradient flows through it.
        Tensor<Real> x0_att;
        if (cfg.use_attention) {
            const Tensor<Real>& feat = disc.taps.at(cfg.attn_scale);
            Tensor<Real> mask = attn::attention_from_features(feat, gen.cfg.resolution);
            x0_att = attn::apply_attention(x0, mask);
        } else {
            x0_att = x0;
        }

        // Generator update: regress the true x0 from the attention-weighted
        // noisy label.
        Tensor<Real>* eps_g = &eps;
        Tensor<Real> eps3;
        if (cfg.fresh_noise) {
            eps3 = Tensor<Real>(x0.shape);
            rng.fill_normal(eps3);
            eps_g = &eps3;
        }
        Tensor<Real> x_t_att = diffusion::forward_sample(x0_att, t, *eps_g, sched);
        Tensor<Real> pred = gen.forward(x_t_att, t, z, img);
        Tensor<Real> gpred;
        st.g_loss = mse_loss(pred, x0, gpred);
        nn::ParamList<Real> gp = gen.params();
        nn::zero_grads(gp);
        gen.backward(gpred);
        nn::clip_global_norm(gp, cfg.clip_norm);
        opt_g.step(gp);
        ++gen.step;

        if (!std::isfinite(st.g_loss) || !std::isfinite(st.d_real_loss) ||
            !std::isfinite(st.d_fake_loss))
            throw std::runtime_error("training aborted: non-finite loss at step " +
                                     std::to_string(step + 1) + " (t=" + std::to_string(t) +
                                     ", g=" + std::to_string(st.g_loss) +
                                     ", d_real=" + std::to_string(st.d_real_loss) +
                                     ", d_fake=" + std::to_string(st.d_fake_loss) + ")");
        return st;
    }

    // Full loop with logging, optional checkpoints, and the optional early
    // stop hook. Runs up to cfg.max_steps more steps (on top of any resumed
    // progress).
    void train(const data::Dataset<Real>& ds, const std::string& checkpoint_prefix = "") {
        if (ds.samples.empty()) throw ConfigError("train: empty dataset");
        const int64_t target = step + cfg.max_steps;
        while (step < target) {
            const auto t0 = std::chrono::steady_clock::now();
            Tensor<Real> x0, img;
            draw_batch(ds, x0, img);
            StepStats st = train_step(x0, img);
            ++step;
            const auto t1 = std::chrono::steady_clock::now();

            TrainLogRecord rec;
            rec.step = step;
            rec.t = st.t;
            rec.g_loss = st.g_loss;
            rec.d_real_loss = st.d_real_loss;
            rec.d_fake_loss = st.d_fake_loss;
            rec.d_accuracy = st.d_accuracy;
            rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            log.push_back(rec);
            if (log_stream) *log_stream << nlohmann::json(rec).dump() << "\n";

            if (!checkpoint_prefix.empty() && cfg.checkpoint_interval > 0 &&
                step % cfg.checkpoint_interval == 0)
                save_checkpoint(checkpoint_prefix + "_step" + std::to_string(step) + ".ckpt");
            if (cfg.eval_interval > 0 && stop_check && step % cfg.eval_interval == 0 &&
                stop_check(*this))
                break;
        }
        if (!checkpoint_prefix.empty()) save_checkpoint(checkpoint_prefix + ".ckpt");
    }

    // ---- checkpointing --------------------------------------------------

    // Binary container with every parameter, both optimizers' moments, the
    // RNG stream, and the step counter; JSON sidecar with the exact configs.
    void save_checkpoint(const std::string& path) {
        nn::CheckpointWriter w(path);
        nn::ParamList<Real> gp = gen.params();
        nn::ParamList<Real> dp = disc.params();
        nn::save_params(w, "gen", gp);
        nn::save_params(w, "disc", dp);
        opt_g.attach(gp);
        opt_d.attach(dp);
        nn::save_adam(w, "gen", opt_g);
        nn::save_adam(w, "disc", opt_d);
        w.add_blob("rng", rng.serialize());
        w.add_i64("step", step);
        w.close();

        nlohmann::json side;
        side["format_version"] = 1;
        side["step"] = step;
        side["train"] = cfg;
        side["generator"] = gen.cfg;
        side["discriminator"] = disc.cfg;
        std::ofstream out(path + ".json");
        if (!out) throw IoError("checkpoint: cannot write sidecar for " + path);
        out << side.dump(2) << "\n";
    }

    void load_checkpoint(const std::string& path) {
        nn::Checkpoint ckpt(path);
        nn::ParamList<Real> gp = gen.params();
        nn::ParamList<Real> dp = disc.params();
        nn::load_params(ckpt, "gen", gp);
        nn::load_params(ckpt, "disc", dp);
        nn::load_adam(ckpt, "gen", opt_g, gp);
        nn::load_adam(ckpt, "disc", opt_d, dp);
        rng.deserialize(ckpt.at("rng").as_blob());
        step = ckpt.at("step").as_i64();
        gen.step = step;
        disc.step = 2 * step;
    }
};

// Rebuild a trainer exactly as recorded in a checkpoint sidecar.
template <typename Real>
Trainer<Real> trainer_from_checkpoint(const std::string& ckpt_path) {
    std::ifstream in(ckpt_path + ".json");
    if (!in) throw IoError("checkpoint: missing sidecar " + ckpt_path + ".json");
    nlohmann::json side = nlohmann::json::parse(in);
    Trainer<Real> tr(side.at("train").get<TrainConfig>(),
                     side.at("generator").get<nn::GeneratorConfig>(),
                     side.at("discriminator").get<nn::DiscriminatorConfig>());
    tr.load_checkpoint(ckpt_path);
    return tr;
}

}  // namespace cdal::train
