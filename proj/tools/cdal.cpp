// cdal command-line tool: synthetic data generation, training, inference,
// evaluation, and the attention-scale ablation sweep.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cdal/cdal.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using Real = float;

using cdal::ConfigError;
using cdal::IoError;
using cdal::Tensor;
using cdal::config::KeyValueConfig;

// ---- shared options -----------------------------------------------------

struct Opts {
    std::string config_path;
    std::string out_dir;
    std::string data_root;       // overrides data.root
    std::string checkpoint;      // predict/evaluate model mode
    std::string pred_root;       // evaluate model-free mode
    std::string seed_str;        // empty = not set on the command line
    int timesteps = -1;
    int attn_scale = -1;
    int instances = -1;
    double threshold = -1.0;
    int count = -1;              // synth sample count
    bool no_attention = false;
    bool no_latent = false;
    std::vector<std::string> overrides;
};

static void add_common(CLI::App* c, Opts& o) {
    c->add_option("--config", o.config_path, "key-value config file (INI-style sections)");
    c->add_option("--out", o.out_dir, "output directory (created if absent)")->required();
    c->add_option("--seed", o.seed_str, "master seed (overrides config key 'seed')");
    c->add_option("--set", o.overrides, "config override as dotted-key=value (repeatable)");
}

static KeyValueConfig resolve_config(const Opts& o) {
    KeyValueConfig cfg = o.config_path.empty() ? KeyValueConfig{}
                                               : KeyValueConfig::parse_file(o.config_path);
    for (const auto& kv : o.overrides) cfg.apply_override(kv);
    if (!o.seed_str.empty()) cfg.apply_override("seed=" + o.seed_str);
    if (!o.data_root.empty()) cfg.apply_override("data.root=" + o.data_root);
    if (o.timesteps > 0) cfg.apply_override("train.T=" + std::to_string(o.timesteps));
    if (o.attn_scale > 0) cfg.apply_override("train.attn_scale=" + std::to_string(o.attn_scale));
    if (o.no_attention) cfg.apply_override("train.use_attention=false");
    if (o.no_latent) cfg.apply_override("train.use_latent=false");
    if (o.instances > 0) cfg.apply_override("infer.instances=" + std::to_string(o.instances));
    if (o.threshold > 0) cfg.apply_override("infer.threshold=" + std::to_string(o.threshold));
    return cfg;
}

// ---- config -> typed structs --------------------------------------------

// Every key the tool understands. A config file may be shared across
// subcommands, so each command accepts the full set and the unknown-key
// check only fires for keys no command recognizes.
static void mark_shared_keys(KeyValueConfig& cfg) {
    static const char* kKnown[] = {
        "seed",
        "data.root", "data.resolution", "data.image_channels", "data.kfold", "data.fold",
        "model.base_channels", "model.channel_multipliers", "model.blocks_per_scale",
        "model.time_embed_dim", "model.latent_dim", "model.condition_channels",
        "disc.base_channels", "disc.channel_multipliers", "disc.blocks_per_scale",
        "train.T", "train.attn_scale", "train.use_attention", "train.use_latent",
        "train.fresh_noise", "train.lr_g", "train.lr_d", "train.clip_norm",
        "train.batch_size", "train.max_steps", "train.checkpoint_interval",
        "train.eval_interval", "train.target_dice", "train.beta_min", "train.beta_max",
        "infer.checkpoint", "infer.instances", "infer.threshold", "infer.add_noise",
        "synth.resolution", "synth.count", "synth.min_objects", "synth.max_objects",
        "synth.ellipses", "synth.blobs", "synth.contrast", "synth.noise",
        "synth.classes", "synth.seed",
        "eval.per_image", "eval.pred_root",
    };
    for (const char* k : kKnown) cfg.get_string(k);
}

static cdal::nn::GeneratorConfig generator_config(KeyValueConfig& cfg, int resolution,
                                                  int label_channels, int image_channels) {
    cdal::nn::GeneratorConfig g;
    g.resolution = resolution;
    g.label_channels = label_channels;
    g.image_channels = image_channels;
    g.base_channels = cfg.get_int("model.base_channels", 64);
    g.channel_multipliers = cfg.get_int_list("model.channel_multipliers", {1, 2, 4});
    g.blocks_per_scale = cfg.get_int("model.blocks_per_scale", 2);
    g.time_embed_dim = cfg.get_int("model.time_embed_dim", 128);
    g.latent_dim = cfg.get_int("model.latent_dim", 100);
    g.condition_channels = cfg.get_int("model.condition_channels", 32);
    return g;
}

static cdal::nn::DiscriminatorConfig discriminator_config(KeyValueConfig& cfg, int resolution,
                                                          int label_channels) {
    cdal::nn::DiscriminatorConfig d;
    d.resolution = resolution;
    d.label_channels = label_channels;
    d.base_channels = cfg.get_int("disc.base_channels", 64);
    d.channel_multipliers = cfg.get_int_list("disc.channel_multipliers", {1, 2, 4});
    d.blocks_per_scale = cfg.get_int("disc.blocks_per_scale", 1);
    d.time_embed_dim = cfg.get_int("model.time_embed_dim", 128);
    return d;
}

static cdal::train::TrainConfig train_config(KeyValueConfig& cfg) {
    cdal::train::TrainConfig t;
    t.T = cfg.get_int("train.T", 4);
    t.attn_scale = cfg.get_int("train.attn_scale", 32);
    t.use_attention = cfg.get_bool("train.use_attention", true);
    t.use_latent = cfg.get_bool("train.use_latent", true);
    t.fresh_noise = cfg.get_bool("train.fresh_noise", false);
    t.lr_g = cfg.get_double("train.lr_g", 1e-4);
    t.lr_d = cfg.get_double("train.lr_d", 1e-4);
    t.clip_norm = cfg.get_double("train.clip_norm", 1.0);
    t.batch_size = cfg.get_int("train.batch_size", 8);
    t.max_steps = cfg.get_int("train.max_steps", 5000);
    t.checkpoint_interval = cfg.get_int("train.checkpoint_interval", 0);
    t.eval_interval = cfg.get_int("train.eval_interval", 0);
    t.seed = cfg.get_u64("seed", 0);
    t.beta_min = cfg.get_double("train.beta_min", 0.1);
    t.beta_max = cfg.get_double("train.beta_max", 20.0);
    return t;
}

static cdal::sample::InferenceConfig inference_config(KeyValueConfig& cfg) {
    cdal::sample::InferenceConfig ic;
    ic.n_instances = cfg.get_int("infer.instances", 5);
    ic.threshold = cfg.get_double("infer.threshold", 0.5);
    ic.add_noise = cfg.get_bool("infer.add_noise", false);
    ic.seed = cfg.get_u64("seed", 0);
    return ic;
}

// ---- manifest -----------------------------------------------------------

static std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("manifest: cannot hash missing file " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw IoError("manifest: EVP context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

static void write_manifest(const fs::path& out_dir, const std::string& command,
                           const KeyValueConfig& cfg, uint64_t seed,
                           const std::vector<std::string>& artifacts) {
    json m;
    m["command"] = command;
    m["seed"] = seed;
    m["config"] = cfg.values();  // resolved file + override + flag values
    json arts = json::object();
    for (const auto& a : artifacts)
        arts[fs::relative(a, out_dir).string()] = sha256_file(a);
    m["artifacts"] = arts;
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw IoError("manifest: cannot write " + (out_dir / "manifest.json").string());
    out << m.dump(2) << "\n";
}

// ---- prediction output --------------------------------------------------

// Writes <stem>.pred.png (hard mask) and <stem>.prob.png (16-bit mean map;
// for multi-class, the confidence of the winning class). Returns the paths.
static std::vector<std::string> write_prediction(const fs::path& out_dir, const std::string& stem,
                                                 const Tensor<Real>& mean_map,
                                                 const Tensor<int>& hard_mask, int num_classes) {
    const int res = mean_map.size(2);
    const fs::path pred_path = out_dir / (stem + ".pred.png");
    const fs::path prob_path = out_dir / (stem + ".prob.png");

    std::vector<uint8_t> mask_bytes(static_cast<size_t>(res) * res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            const int v = hard_mask.at(0, 0, y, x);
            mask_bytes[static_cast<size_t>(y) * res + x] =
                static_cast<uint8_t>(num_classes == 2 ? (v ? 255 : 0) : v);
        }
    if (num_classes == 2)
        cdal::data::write_png_gray(pred_path.string(), mask_bytes.data(), res, res);
    else
        cdal::data::write_png_palette(pred_path.string(), mask_bytes.data(), res, res, num_classes);

    std::vector<uint16_t> prob_bytes(static_cast<size_t>(res) * res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            double p;
            if (mean_map.size(1) == 1) {
                p = mean_map.at(0, 0, y, x);
            } else {
                p = mean_map.at(0, hard_mask.at(0, 0, y, x), y, x);
            }
            prob_bytes[static_cast<size_t>(y) * res + x] =
                static_cast<uint16_t>(std::lround(std::clamp(p, 0.0, 1.0) * 65535.0));
        }
    cdal::data::write_png_gray16(prob_path.string(), prob_bytes.data(), res, res);
    return {pred_path.string(), prob_path.string()};
}

// Runs the multi-instance sampler one image at a time with a per-image seed,
// so results do not depend on batching.
static std::vector<cdal::sample::Prediction<Real>> predict_all(
    cdal::nn::Generator<Real>& gen, const cdal::diffusion::NoiseSchedule& sched,
    const std::vector<cdal::data::Sample<Real>>& samples, cdal::sample::InferenceConfig icfg) {
    std::vector<cdal::sample::Prediction<Real>> out;
    out.reserve(samples.size());
    const uint64_t base_seed = icfg.seed;
    for (size_t i = 0; i < samples.size(); ++i) {
        Tensor<Real> img(samples[i].image.shape);
        img.shape.insert(img.shape.begin(), 1);  // [C,H,W] -> [1,C,H,W]
        img.data = samples[i].image.data;
        icfg.seed = cdal::derive_seed(base_seed, 0x70726564ULL + i);  // per-image stream
        out.push_back(cdal::sample::predict(gen, sched, img, icfg));
    }
    return out;
}

static double mean_dice_against_labels(const std::vector<cdal::sample::Prediction<Real>>& preds,
                                       const std::vector<cdal::data::Sample<Real>>& samples,
                                       int num_classes) {
    std::vector<Tensor<int>> hard, gt;
    for (size_t i = 0; i < preds.size(); ++i) {
        Tensor<int> p = preds[i].hard_mask;
        p.shape = {p.size(2), p.size(3)};
        hard.push_back(std::move(p));
        gt.push_back(samples[i].label);
    }
    const auto report = cdal::metrics::evaluate_set(hard, gt, num_classes, /*per_image=*/true);
    return report.mean.dice;
}

// ---- synth --------------------------------------------------------------

static int run_synth(Opts& o) {
    KeyValueConfig cfg = resolve_config(o);
    cdal::data::SyntheticSpec spec;
    spec.resolution = cfg.get_int("synth.resolution", cfg.get_int("data.resolution", 64));
    spec.min_objects = cfg.get_int("synth.min_objects", 1);
    spec.max_objects = cfg.get_int("synth.max_objects", 3);
    spec.ellipses = cfg.get_bool("synth.ellipses", true);
    spec.blobs = cfg.get_bool("synth.blobs", true);
    spec.contrast = cfg.get_double("synth.contrast", 0.8);
    spec.noise_level = cfg.get_double("synth.noise", 0.08);
    spec.foreground_classes = cfg.get_int("synth.classes", 1);
    spec.seed = cfg.get_u64("synth.seed", cfg.get_u64("seed", 0));
    const int n = o.count > 0 ? o.count : cfg.get_int("synth.count", 16);
    mark_shared_keys(cfg);
    cfg.check_all_consumed();

    fs::create_directories(o.out_dir);
    auto ds = cdal::data::generate_synthetic<Real>(spec, n);
    cdal::data::save_dataset(ds, o.out_dir);

    std::vector<std::string> artifacts;
    for (const auto& s : ds.samples) {
        artifacts.push_back((fs::path(o.out_dir) / "images" / (s.id + ".png")).string());
        artifacts.push_back((fs::path(o.out_dir) / "masks" / (s.id + ".png")).string());
    }
    write_manifest(o.out_dir, "synth", cfg, spec.seed, artifacts);
    std::cout << "wrote " << n << " samples to " << o.out_dir << "\n";
    return 0;
}

// ---- train --------------------------------------------------------------

static int run_train(Opts& o) {
    KeyValueConfig cfg = resolve_config(o);
    const std::string root = cfg.require_string("data.root");
    const int resolution = cfg.get_int("data.resolution", 64);
    const int image_channels = cfg.get_int("data.image_channels", 1);
    const int kfold = cfg.get_int("data.kfold", 0);
    const int fold = cfg.get_int("data.fold", 0);
    const double target_dice = cfg.get_double("train.target_dice", 0.0);

    auto ds = cdal::data::load_folder<Real>(root, resolution, image_channels);
    if (ds.samples.empty()) throw ConfigError("data.root: no image/mask pairs under " + root);
    const int label_channels = ds.num_classes == 2 ? 1 : ds.num_classes;

    cdal::train::TrainConfig tcfg = train_config(cfg);
    cdal::nn::GeneratorConfig gcfg = generator_config(cfg, resolution, label_channels, image_channels);
    cdal::nn::DiscriminatorConfig dcfg = discriminator_config(cfg, resolution, label_channels);
    cdal::sample::InferenceConfig icfg = inference_config(cfg);
    mark_shared_keys(cfg);
    cfg.check_all_consumed();

    cdal::data::Dataset<Real> train_ds = ds;
    if (kfold >= 2) {
        const auto split = cdal::data::kfold_split(ds.size(), kfold, fold, tcfg.seed);
        train_ds.samples.clear();
        for (int idx : split.train) train_ds.samples.push_back(ds.samples[static_cast<size_t>(idx)]);
    }

    fs::create_directories(o.out_dir);
    cdal::train::Trainer<Real> tr(tcfg, gcfg, dcfg);
    std::ofstream log_file(fs::path(o.out_dir) / "train_log.jsonl");
    if (!log_file) throw IoError("train: cannot open log file in " + o.out_dir);
    tr.log_stream = &log_file;

    double last_eval_dice = -1.0;
    if (target_dice > 0 && tcfg.eval_interval > 0) {
        tr.stop_check = [&](cdal::train::Trainer<Real>& t) {
            auto preds = predict_all(t.gen, t.sched, train_ds.samples, icfg);
            last_eval_dice = mean_dice_against_labels(preds, train_ds.samples, ds.num_classes);
            std::cerr << "step " << t.step << ": train dice " << last_eval_dice << "\n";
            return last_eval_dice >= target_dice * 100.0;
        };
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::string ckpt_prefix = (fs::path(o.out_dir) / "model").string();
    tr.train(train_ds, ckpt_prefix);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json summary;
    summary["steps"] = tr.step;
    summary["wall_seconds"] = wall_s;
    summary["train_samples"] = train_ds.size();
    summary["num_classes"] = ds.num_classes;
    if (!tr.log.empty()) {
        const auto& last = tr.log.back();
        summary["final"] = {{"g_loss", last.g_loss},
                            {"d_real_loss", last.d_real_loss},
                            {"d_fake_loss", last.d_fake_loss},
                            {"d_accuracy", last.d_accuracy}};
    }
    if (last_eval_dice >= 0) summary["train_dice"] = last_eval_dice;
    summary["stopped_early"] = tr.step < tcfg.max_steps;
    std::ofstream sum_file(fs::path(o.out_dir) / "summary.json");
    sum_file << summary.dump(2) << "\n";
    sum_file.close();
    log_file.close();

    std::vector<std::string> artifacts = {ckpt_prefix + ".ckpt", ckpt_prefix + ".ckpt.json",
                                          (fs::path(o.out_dir) / "train_log.jsonl").string(),
                                          (fs::path(o.out_dir) / "summary.json").string()};
    write_manifest(o.out_dir, "train", cfg, tcfg.seed, artifacts);
    std::cout << "trained " << tr.step << " steps in " << wall_s << " s\n";
    return 0;
}

// ---- predict ------------------------------------------------------------

// Loads the generator recorded in a checkpoint, refusing a --timesteps value
// that contradicts the training-time schedule.
static cdal::train::Trainer<Real> load_trained(const std::string& ckpt, int requested_T) {
    std::ifstream side_in(ckpt + ".json");
    if (!side_in) throw IoError("predict: missing checkpoint sidecar " + ckpt + ".json");
    json side = json::parse(side_in);
    const int trained_T = side.at("train").at("T").get<int>();
    if (requested_T > 0 && requested_T != trained_T)
        throw ConfigError("checkpoint was trained with T=" + std::to_string(trained_T) +
                          "; refusing --timesteps " + std::to_string(requested_T) +
                          " (the reverse chain must match the training schedule)");
    return cdal::train::trainer_from_checkpoint<Real>(ckpt);
}

static int run_predict(Opts& o) {
    KeyValueConfig cfg = resolve_config(o);
    const std::string ckpt = !o.checkpoint.empty() ? o.checkpoint : cfg.require_string("infer.checkpoint");
    const std::string root = cfg.require_string("data.root");
    const int resolution = cfg.get_int("data.resolution", 64);
    const int image_channels = cfg.get_int("data.image_channels", 1);
    cdal::sample::InferenceConfig icfg = inference_config(cfg);
    mark_shared_keys(cfg);
    cfg.check_all_consumed();

    cdal::train::Trainer<Real> tr = load_trained(ckpt, o.timesteps);
    auto samples = cdal::data::load_images_only<Real>(root, resolution, image_channels);
    if (samples.empty()) throw ConfigError("data.root: no images under " + root);

    fs::create_directories(o.out_dir);
    const int num_classes = tr.gen.cfg.label_channels == 1 ? 2 : tr.gen.cfg.label_channels;
    auto preds = predict_all(tr.gen, tr.sched, samples, icfg);
    std::vector<std::string> artifacts;
    for (size_t i = 0; i < samples.size(); ++i) {
        auto paths = write_prediction(o.out_dir, samples[i].id, preds[i].mean_map,
                                      preds[i].hard_mask, num_classes);
        artifacts.insert(artifacts.end(), paths.begin(), paths.end());
    }
    write_manifest(o.out_dir, "predict", cfg, icfg.seed, artifacts);
    std::cout << "wrote " << artifacts.size() << " files for " << samples.size() << " images\n";
    return 0;
}

// ---- evaluate -----------------------------------------------------------

static void emit_metrics(const fs::path& out_dir, const cdal::metrics::MetricsReport& report,
                         std::vector<std::string>& artifacts) {
    const fs::path json_path = out_dir / "metrics.json";
    const fs::path csv_path = out_dir / "metrics.csv";
    std::ofstream jf(json_path);
    jf << cdal::metrics::metrics_to_json(report).dump(2) << "\n";
    jf.close();
    std::ofstream cf(csv_path);
    cf << cdal::metrics::metrics_csv_header() << "\n";
    cdal::metrics::metrics_csv_rows(cf, report, "all");
    cf.close();
    artifacts.push_back(json_path.string());
    artifacts.push_back(csv_path.string());
    std::cout << "mean dice " << report.mean.dice << ", mean iou " << report.mean.iou << "\n";
}

// Model-free mode: compare a folder of predicted masks against ground truth.
// Prediction for stem S is looked up as S.pred.png, then S.png.
static int run_evaluate_folder(Opts& o, KeyValueConfig& cfg) {
    const std::string root = cfg.require_string("data.root");
    const int resolution = cfg.get_int("data.resolution", 64);
    const int image_channels = cfg.get_int("data.image_channels", 1);
    const bool per_image = cfg.get_bool("eval.per_image", true);
    mark_shared_keys(cfg);
    cfg.check_all_consumed();

    auto ds = cdal::data::load_folder<Real>(root, resolution, image_channels);
    if (ds.samples.empty()) throw ConfigError("data.root: no image/mask pairs under " + root);

    std::vector<Tensor<int>> preds, gts;
    std::vector<std::string> missing;
    for (const auto& s : ds.samples) {
        fs::path p = fs::path(o.pred_root) / (s.id + ".pred.png");
        if (!fs::exists(p)) p = fs::path(o.pred_root) / (s.id + ".png");
        if (!fs::exists(p)) {
            missing.push_back(s.id);
            continue;
        }
        auto lm = cdal::data::mask_from_png(cdal::data::read_png(p.string(), true));
        preds.push_back(cdal::data::resize_nearest(lm.label, resolution));
        gts.push_back(s.label);
    }
    if (!missing.empty()) {
        std::string msg = "evaluate: no prediction for " + std::to_string(missing.size()) + " stem(s):";
        for (const auto& m : missing) msg += " " + m;
        throw IoError(msg);
    }

    fs::create_directories(o.out_dir);
    const auto report = cdal::metrics::evaluate_set(preds, gts, ds.num_classes, per_image);
    std::vector<std::string> artifacts;
    emit_metrics(o.out_dir, report, artifacts);
    write_manifest(o.out_dir, "evaluate", cfg, cfg.get_u64("seed", 0), artifacts);
    return 0;
}

// Model mode: run inference on the (optionally k-fold validation) split and
// score it in one go.
static int run_evaluate_model(Opts& o, KeyValueConfig& cfg) {
    const std::string ckpt = !o.checkpoint.empty() ? o.checkpoint : cfg.require_string("infer.checkpoint");
    const std::string root = cfg.require_string("data.root");
    const int resolution = cfg.get_int("data.resolution", 64);
    const int image_channels = cfg.get_int("data.image_channels", 1);
    const int kfold = cfg.get_int("data.kfold", 0);
    const int fold = cfg.get_int("data.fold", 0);
    const bool per_image = cfg.get_bool("eval.per_image", true);
    cdal::sample::InferenceConfig icfg = inference_config(cfg);
    mark_shared_keys(cfg);
    cfg.check_all_consumed();

    cdal::train::Trainer<Real> tr = load_trained(ckpt, o.timesteps);
    auto ds = cdal::data::load_folder<Real>(root, resolution, image_channels);
    if (ds.samples.empty()) throw ConfigError("data.root: no image/mask pairs under " + root);

    std::vector<cdal::data::Sample<Real>> subset;
    if (kfold >= 2) {
        const auto split = cdal::data::kfold_split(ds.size(), kfold, fold, tr.cfg.seed);
        for (int idx : split.val) subset.push_back(ds.samples[static_cast<size_t>(idx)]);
    } else {
        subset = ds.samples;
    }

    auto predictions = predict_all(tr.gen, tr.sched, subset, icfg);
    std::vector<Tensor<int>> preds, gts;
    for (size_t i = 0; i < subset.size(); ++i) {
        Tensor<int> p = predictions[i].hard_mask;
        p.shape = {p.size(2), p.size(3)};
        preds.push_back(std::move(p));
        gts.push_back(subset[i].label);
    }

    fs::create_directories(o.out_dir);
    const auto report = cdal::metrics::evaluate_set(preds, gts, ds.num_classes, per_image);
    std::vector<std::string> artifacts;
    emit_metrics(o.out_dir, report, artifacts);
    write_manifest(o.out_dir, "evaluate", cfg, icfg.seed, artifacts);
    return 0;
}

static int run_evaluate(Opts& o) {
    KeyValueConfig cfg = resolve_config(o);
    if (o.pred_root.empty()) o.pred_root = cfg.get_string("eval.pred_root");
    if (!o.pred_root.empty()) return run_evaluate_folder(o, cfg);
    return run_evaluate_model(o, cfg);
}

// ---- ablate -------------------------------------------------------------

// Trains one model per attention scale on a train/validation split and
// reports validation metrics per scale.
static int run_ablate(Opts& o) {
    KeyValueConfig cfg = resolve_config(o);
    const std::string root = cfg.require_string("data.root");
    const int resolution = cfg.get_int("data.resolution", 64);
    const int image_channels = cfg.get_int("data.image_channels", 1);
    const int kfold = cfg.get_int("data.kfold", 4);
    const int fold = cfg.get_int("data.fold", 0);

    auto ds = cdal::data::load_folder<Real>(root, resolution, image_channels);
    if (ds.samples.empty()) throw ConfigError("data.root: no image/mask pairs under " + root);
    const int label_channels = ds.num_classes == 2 ? 1 : ds.num_classes;

    cdal::train::TrainConfig base = train_config(cfg);
    cdal::nn::GeneratorConfig gcfg = generator_config(cfg, resolution, label_channels, image_channels);
    cdal::nn::DiscriminatorConfig dcfg = discriminator_config(cfg, resolution, label_channels);
    cdal::sample::InferenceConfig icfg = inference_config(cfg);
    mark_shared_keys(cfg);
    cfg.check_all_consumed();

    const auto split = cdal::data::kfold_split(ds.size(), kfold, fold, base.seed);
    cdal::data::Dataset<Real> train_ds = ds, val_ds = ds;
    train_ds.samples.clear();
    val_ds.samples.clear();
    for (int idx : split.train) train_ds.samples.push_back(ds.samples[static_cast<size_t>(idx)]);
    for (int idx : split.val) val_ds.samples.push_back(ds.samples[static_cast<size_t>(idx)]);

    std::vector<int> scales;
    for (int s : {16, 32, 64}) {
        const auto taps = dcfg.tap_resolutions();
        if (std::find(taps.begin(), taps.end(), s) != taps.end()) scales.push_back(s);
    }
    if (scales.empty()) throw ConfigError("ablate: no tap resolution in {16,32,64} for this config");

    fs::create_directories(o.out_dir);
    json rows = json::array();
    std::ofstream csv(fs::path(o.out_dir) / "ablation.csv");
    csv << "attn_scale," << cdal::metrics::metrics_csv_header() << "\n";
    for (int scale : scales) {
        cdal::train::TrainConfig tcfg = base;
        tcfg.attn_scale = scale;
        cdal::train::Trainer<Real> tr(tcfg, gcfg, dcfg);
        tr.train(train_ds);

        auto predictions = predict_all(tr.gen, tr.sched, val_ds.samples, icfg);
        std::vector<Tensor<int>> preds, gts;
        for (size_t i = 0; i < val_ds.samples.size(); ++i) {
            Tensor<int> p = predictions[i].hard_mask;
            p.shape = {p.size(2), p.size(3)};
            preds.push_back(std::move(p));
            gts.push_back(val_ds.samples[i].label);
        }
        const auto report = cdal::metrics::evaluate_set(preds, gts, ds.num_classes, true);
        json row = cdal::metrics::metrics_to_json(report);
        row["attn_scale"] = scale;
        rows.push_back(row);
        std::ostringstream line;
        cdal::metrics::metrics_csv_rows(line, report, "all");
        std::istringstream lines(line.str());
        std::string l;
        while (std::getline(lines, l)) csv << scale << "," << l << "\n";
        std::cout << "attn_scale " << scale << ": val dice " << report.mean.dice << "\n";
    }
    csv.close();
    std::ofstream jf(fs::path(o.out_dir) / "ablation.json");
    jf << rows.dump(2) << "\n";
    jf.close();

    std::vector<std::string> artifacts = {(fs::path(o.out_dir) / "ablation.csv").string(),
                                          (fs::path(o.out_dir) / "ablation.json").string()};
    write_manifest(o.out_dir, "ablate", cfg, base.seed, artifacts);
    return 0;
}

// ---- main ---------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"cdal: conditional diffusion segmentation with adversarial attention"};
    app.require_subcommand(1);
    Opts o;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, o);
    synth->add_option("--count", o.count, "number of samples (default 16)");

    CLI::App* train = app.add_subcommand("train", "train on an images/+masks/ folder");
    add_common(train, o);
    train->add_option("--data", o.data_root, "dataset root (equals config key data.root)");
    train->add_option("--timesteps", o.timesteps, "diffusion steps T");
    train->add_option("--attn-scale", o.attn_scale, "attention tap resolution (16|32|64)")->check(CLI::IsMember({16, 32, 64}));
    train->add_flag("--no-attention", o.no_attention, "disable the attention mask");
    train->add_flag("--no-latent", o.no_latent, "disable the latent pathway (z = 0)");

    CLI::App* predict = app.add_subcommand("predict", "write masks for a folder of images");
    add_common(predict, o);
    predict->add_option("--checkpoint", o.checkpoint, "trained model checkpoint");
    predict->add_option("--data", o.data_root, "dataset root with images/");
    predict->add_option("--timesteps", o.timesteps, "must match the checkpoint's T");
    predict->add_option("--instances", o.instances, "reverse chains to average (default 5)");
    predict->add_option("--threshold", o.threshold, "binary decision threshold (default 0.5)");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
    add_common(evaluate, o);
    evaluate->add_option("--checkpoint", o.checkpoint, "model checkpoint (model mode)");
    evaluate->add_option("--pred", o.pred_root, "folder of predicted masks (model-free mode)");
    evaluate->add_option("--data", o.data_root, "dataset root with images/ and masks/");
    evaluate->add_option("--timesteps", o.timesteps, "must match the checkpoint's T");
    evaluate->add_option("--instances", o.instances, "reverse chains to average (default 5)");
    evaluate->add_option("--threshold", o.threshold, "binary decision threshold (default 0.5)");

    CLI::App* ablate = app.add_subcommand("ablate", "sweep the attention scale and report metrics");
    add_common(ablate, o);
    ablate->add_option("--data", o.data_root, "dataset root (equals config key data.root)");
    ablate->add_option("--timesteps", o.timesteps, "diffusion steps T");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // malformed command line is a config error
    }

    try {
        if (synth->parsed()) return run_synth(o);
        if (train->parsed()) return run_train(o);
        if (predict->parsed()) return run_predict(o);
        if (evaluate->parsed()) return run_evaluate(o);
        if (ablate->parsed()) return run_ablate(o);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
