#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"
#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/nn/embedding.hpp"
#include "cdal/nn/resblock.hpp"

namespace cdal::nn {

struct GeneratorConfig {
    int resolution = 64;
    int label_channels = 1;  // 1 for binary masks, K for one-hot multi-class
    int image_channels = 1;
    int base_channels = 64;
    std::vector<int> channel_multipliers = {1, 2, 4};
    int blocks_per_scale = 2;
    int time_embed_dim = 128;
    int latent_dim = 100;
    int condition_channels = 32;

    int scales() const { return static_cast<int>(channel_multipliers.size()); }
    int channels_at(int s) const { return base_channels * channel_multipliers[static_cast<size_t>(s)]; }

    void validate() const {
        if (resolution < 4) throw ConfigError("generator: resolution too small");
        const int down_factor = 1 << (scales() - 1);
        if (channel_multipliers.empty()) throw ConfigError("generator: channel_multipliers empty");
        if (resolution % down_factor != 0)
            throw ConfigError("generator: resolution must be divisible by " + std::to_string(down_factor));
        if (label_channels < 1) throw ConfigError("generator: label_channels must be >= 1");
        if (image_channels < 1) throw ConfigError("generator: image_channels must be >= 1");
        if (base_channels < 1) throw ConfigError("generator: base_channels must be >= 1");
        if (blocks_per_scale < 1) throw ConfigError("generator: blocks_per_scale must be >= 1");
        if (latent_dim < 1) throw ConfigError("generator: latent_dim must be >= 1");
        if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
            throw ConfigError("generator: time_embed_dim must be even and >= 2");
        if (condition_channels < 1) throw ConfigError("generator: condition_channels must be >= 1");
    }
};

// Lightweight residual encoder for the conditioning image. Runs at input
// resolution; its output is concatenated with the noisy label at the stem.
template <typename Real>
struct ConditionEncoder {
    Conv2d<Real> stem;
    ResBlock<Real> rb1, rb2;

    void configure(int image_channels, int out_channels) {
        stem.configure(image_channels, out_channels, 3, 1, 1);
        rb1.configure(out_channels, out_channels, 0);
        rb2.configure(out_channels, out_channels, 0);
    }

    void init(Rng& rng) {
        stem.init(rng);
        rb1.init(rng);
        rb2.init(rng);
    }

    Tensor<Real> forward(const Tensor<Real>& img) {
        Tensor<Real> none;
        return rb2.forward(rb1.forward(stem.forward(img), none), none);
    }

    void backward(const Tensor<Real>& gy) {
        stem.backward(rb1.backward(rb2.backward(gy, nullptr), nullptr));
    }

    void collect(const std::string& prefix, ParamList<Real>& out) {
        stem.collect(prefix + ".stem", out);
        rb1.collect(prefix + ".rb1", out);
        rb2.collect(prefix + ".rb2", out);
    }
};

// U-shaped clean-label predictor x0_hat = f(x_t, t, z, image). The latent and
// timestep embeddings are summed into one conditioning vector that modulates
// the normalization of every residual block.
template <typename Real>
struct Generator {
    GeneratorConfig cfg;
    int64_t step = 0;        // training steps applied to these weights
    int64_t eval_count = 0;  // forward invocations, for sampling-cost checks

    ConditionEncoder<Real> cond_enc;
    CondMlp<Real> t_mlp, z_mlp;
    Conv2d<Real> stem;
    std::vector<std::vector<ResBlock<Real>>> enc_blocks;  // [scale][block]
    std::vector<Conv2d<Real>> down;                       // stride-2, scale s -> s+1
    ResBlock<Real> mid;
    std::vector<std::vector<ResBlock<Real>>> dec_blocks;  // [scale][block], block 0 eats the skip concat
    std::vector<Upsample2x<Real>> up_nn;                  // scale s -> s-1, stored at s-1
    std::vector<Conv2d<Real>> up_conv;
    GroupNorm<Real> head_gn;
    SiLU<Real> head_act;
    Conv2d<Real> head_conv;

    std::vector<Tensor<Real>> skip_cache;

    explicit Generator(const GeneratorConfig& config) : cfg(config) {
        cfg.validate();
        const int S = cfg.scales();
        cond_enc.configure(cfg.image_channels, cfg.condition_channels);
        t_mlp.configure(cfg.time_embed_dim, cfg.time_embed_dim);
        z_mlp.configure(cfg.latent_dim, cfg.time_embed_dim);
        stem.configure(cfg.label_channels + cfg.condition_channels, cfg.channels_at(0), 3, 1, 1);
        enc_blocks.resize(static_cast<size_t>(S));
        dec_blocks.resize(static_cast<size_t>(S));
        for (int s = 0; s < S; ++s) {
            const int ch = cfg.channels_at(s);
            enc_blocks[static_cast<size_t>(s)].resize(static_cast<size_t>(cfg.blocks_per_scale));
            dec_blocks[static_cast<size_t>(s)].resize(static_cast<size_t>(cfg.blocks_per_scale));
            for (int b = 0; b < cfg.blocks_per_scale; ++b) {
                enc_blocks[static_cast<size_t>(s)][static_cast<size_t>(b)].configure(ch, ch, cfg.time_embed_dim);
                const int in = (b == 0) ? 2 * ch : ch;
                dec_blocks[static_cast<size_t>(s)][static_cast<size_t>(b)].configure(in, ch, cfg.time_embed_dim);
            }
            if (s + 1 < S) {
                down.emplace_back();
                down.back().configure(ch, cfg.channels_at(s + 1), 3, 2, 1);
            }
            if (s > 0) {
                up_nn.emplace_back();
                up_conv.emplace_back();
                up_conv.back().configure(cfg.channels_at(s), cfg.channels_at(s - 1), 3, 1, 1);
            }
        }
        mid.configure(cfg.channels_at(S - 1), cfg.channels_at(S - 1), cfg.time_embed_dim);
        head_gn.configure(cfg.channels_at(0));
        head_conv.configure(cfg.channels_at(0), cfg.label_channels, 3, 1, 1);
    }

    void init(Rng& rng) {
        cond_enc.init(rng);
        t_mlp.init(rng);
        z_mlp.init(rng);
        stem.init(rng);
        for (auto& scale : enc_blocks)
            for (auto& blk : scale) blk.init(rng);
        for (auto& d : down) d.init(rng);
        mid.init(rng);
        for (auto& scale : dec_blocks)
            for (auto& blk : scale) blk.init(rng);
        for (auto& u : up_conv) u.init(rng);
        head_conv.init(rng, /*zero_out=*/true);  // start from the zero prediction
    }

    ParamList<Real> params() {
        ParamList<Real> out;
        cond_enc.collect("cond_enc", out);
        t_mlp.collect("t_mlp", out);
        z_mlp.collect("z_mlp", out);
        stem.collect("stem", out);
        for (size_t s = 0; s < enc_blocks.size(); ++s)
            for (size_t b = 0; b < enc_blocks[s].size(); ++b)
                enc_blocks[s][b].collect("enc.s" + std::to_string(s) + ".b" + std::to_string(b), out);
        for (size_t s = 0; s < down.size(); ++s) down[s].collect("down.s" + std::to_string(s), out);
        mid.collect("mid", out);
        for (size_t s = 0; s < dec_blocks.size(); ++s)
            for (size_t b = 0; b < dec_blocks[s].size(); ++b)
                dec_blocks[s][b].collect("dec.s" + std::to_string(s) + ".b" + std::to_string(b), out);
        for (size_t s = 0; s < up_conv.size(); ++s) up_conv[s].collect("up.s" + std::to_string(s + 1), out);
        head_gn.collect("head.gn", out);
        head_conv.collect("head.conv", out);
        return out;
    }

    int64_t condition_encoder_param_count() {
        ParamList<Real> enc;
        cond_enc.collect("cond_enc", enc);
        return param_count(enc);
    }

    Tensor<Real> forward(const Tensor<Real>& x_in, int t, const Tensor<Real>& z,
                         const Tensor<Real>& img) {
        const int n = x_in.size(0);
        if (x_in.size(1) != cfg.label_channels || x_in.size(2) != cfg.resolution ||
            x_in.size(3) != cfg.resolution)
            throw ShapeError("generator: bad label input shape " + x_in.shape_str());
        if (img.size(0) != n || img.size(1) != cfg.image_channels || img.size(2) != cfg.resolution ||
            img.size(3) != cfg.resolution)
            throw ShapeError("generator: bad image shape " + img.shape_str());
        if (z.rank() != 2 || z.size(0) != n || z.size(1) != cfg.latent_dim)
            throw ShapeError("generator: latent must be [batch, " + std::to_string(cfg.latent_dim) +
                             "], got " + z.shape_str());
        ++eval_count;

        Tensor<Real> cond_feat = cond_enc.forward(img);
        Tensor<Real> te = sinusoidal_embed<Real>(t, cfg.time_embed_dim);
        Tensor<Real> temb({n, cfg.time_embed_dim});
        for (int i = 0; i < n; ++i)
            std::copy_n(te.ptr(), cfg.time_embed_dim, temb.ptr() + static_cast<int64_t>(i) * cfg.time_embed_dim);
        Tensor<Real> cond = t_mlp.forward(temb);
        axpy(Real(1), z_mlp.forward(z), cond);

        const int S = cfg.scales();
        skip_cache.assign(static_cast<size_t>(S), Tensor<Real>{});
        Tensor<Real> h = stem.forward(concat_channels(x_in, cond_feat));
        for (int s = 0; s < S; ++s) {
            for (auto& blk : enc_blocks[static_cast<size_t>(s)]) h = blk.forward(h, cond);
            skip_cache[static_cast<size_t>(s)] = h;
            if (s + 1 < S) h = down[static_cast<size_t>(s)].forward(h);
        }
        h = mid.forward(h, cond);
        for (int s = S - 1; s >= 0; --s) {
            h = concat_channels(skip_cache[static_cast<size_t>(s)], h);
            for (auto& blk : dec_blocks[static_cast<size_t>(s)]) h = blk.forward(h, cond);
            if (s > 0) h = up_conv[static_cast<size_t>(s - 1)].forward(up_nn[static_cast<size_t>(s - 1)].forward(h));
        }
        return head_conv.forward(head_act.forward(head_gn.forward(h)));
    }

    // Accumulates parameter gradients for the most recent forward pass.
    // Gradients w.r.t. the label/noise inputs are not materialized.
    void backward(const Tensor<Real>& gy) {
        const int n = gy.size(0);
        const int S = cfg.scales();
        Tensor<Real> gcond({n, cfg.time_embed_dim});
        Tensor<Real> g = head_gn.backward(head_act.backward(head_conv.backward(gy)));

        std::vector<Tensor<Real>> gskip(static_cast<size_t>(S));
        for (int s = 0; s < S; ++s) {
            if (s > 0)
                g = up_nn[static_cast<size_t>(s - 1)].backward(up_conv[static_cast<size_t>(s - 1)].backward(g));
            auto& blocks = dec_blocks[static_cast<size_t>(s)];
            for (int b = cfg.blocks_per_scale - 1; b >= 0; --b) g = blocks[static_cast<size_t>(b)].backward(g, &gcond);
            Tensor<Real> gs, gh;
            split_channels(g, cfg.channels_at(s), gs, gh);
            gskip[static_cast<size_t>(s)] = std::move(gs);
            g = std::move(gh);
        }
        g = mid.backward(g, &gcond);
        for (int s = S - 1; s >= 0; --s) {
            axpy(Real(1), gskip[static_cast<size_t>(s)], g);
            auto& blocks = enc_blocks[static_cast<size_t>(s)];
            for (int b = cfg.blocks_per_scale - 1; b >= 0; --b) g = blocks[static_cast<size_t>(b)].backward(g, &gcond);
            if (s > 0) g = down[static_cast<size_t>(s - 1)].backward(g);
        }
        Tensor<Real> gin = stem.backward(g);
        Tensor<Real> gx, gcf;
        split_channels(gin, cfg.label_channels, gx, gcf);
        cond_enc.backward(gcf);
        t_mlp.backward(gcond);
        z_mlp.backward(gcond);
    }
};

}  // namespace cdal::nn
