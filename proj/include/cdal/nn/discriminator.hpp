#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"
#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/nn/embedding.hpp"
#include "cdal/nn/resblock.hpp"

namespace cdal::nn {

struct DiscriminatorConfig {
    int resolution = 64;
    int label_channels = 1;
    int base_channels = 64;
    std::vector<int> channel_multipliers = {1, 2, 4};
    int blocks_per_scale = 1;
    int time_embed_dim = 128;

    int scales() const { return static_cast<int>(channel_multipliers.size()); }
    int channels_at(int s) const { return base_channels * channel_multipliers[static_cast<size_t>(s)]; }

    // Spatial sizes at which intermediate features are exposed, finest first.
    std::vector<int> tap_resolutions() const {
        std::vector<int> out;
        for (int s = 0; s < scales(); ++s) out.push_back(resolution >> s);
        return out;
    }

    void validate() const {
        if (resolution < 4) throw ConfigError("discriminator: resolution too small");
        if (channel_multipliers.empty()) throw ConfigError("discriminator: channel_multipliers empty");
        const int down_factor = 1 << (scales() - 1);
        if (resolution % down_factor != 0)
            throw ConfigError("discriminator: resolution must be divisible by " + std::to_string(down_factor));
        if (label_channels < 1) throw ConfigError("discriminator: label_channels must be >= 1");
        if (base_channels < 1) throw ConfigError("discriminator: base_channels must be >= 1");
        if (blocks_per_scale < 1) throw ConfigError("discriminator: blocks_per_scale must be >= 1");
        if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
            throw ConfigError("discriminator: time_embed_dim must be even and >= 2");
    }
};

// Timestep-conditioned critic over transition pairs (x_t, x_{t-1}). An
// encoder of residual blocks downsamples to a single realness logit; the
// per-scale feature maps are kept around so attention masks can be read off
// them after a forward pass.
template <typename Real>
struct Discriminator {
    DiscriminatorConfig cfg;
    int64_t step = 0;

    CondMlp<Real> t_mlp;
    Conv2d<Real> stem;
    std::vector<std::vector<ResBlock<Real>>> blocks;  // [scale][block]
    std::vector<Conv2d<Real>> down;
    GroupNorm<Real> head_gn;
    SiLU<Real> head_act;
    GlobalAvgPool<Real> head_pool;
    Linear<Real> head_fc;

    // Feature maps from the latest forward pass, keyed by spatial size.
    std::map<int, Tensor<Real>> taps;

    explicit Discriminator(const DiscriminatorConfig& config) : cfg(config) {
        cfg.validate();
        const int S = cfg.scales();
        t_mlp.configure(cfg.time_embed_dim, cfg.time_embed_dim);
        stem.configure(2 * cfg.label_channels, cfg.channels_at(0), 3, 1, 1);
        blocks.resize(static_cast<size_t>(S));
        for (int s = 0; s < S; ++s) {
            blocks[static_cast<size_t>(s)].resize(static_cast<size_t>(cfg.blocks_per_scale));
            for (auto& blk : blocks[static_cast<size_t>(s)])
                blk.configure(cfg.channels_at(s), cfg.channels_at(s), cfg.time_embed_dim);
            if (s + 1 < S) {
                down.emplace_back();
                down.back().configure(cfg.channels_at(s), cfg.channels_at(s + 1), 3, 2, 1);
            }
        }
        head_gn.configure(cfg.channels_at(S - 1));
        head_fc.configure(cfg.channels_at(S - 1), 1);
    }

    void init(Rng& rng) {
        t_mlp.init(rng);
        stem.init(rng);
        for (auto& scale : blocks)
            for (auto& blk : scale) blk.init(rng);
        for (auto& d : down) d.init(rng);
        head_fc.init(rng, /*zero_out=*/true);  // initial logit 0 => chance-level loss
    }

    ParamList<Real> params() {
        ParamList<Real> out;
        t_mlp.collect("t_mlp", out);
        stem.collect("stem", out);
        for (size_t s = 0; s < blocks.size(); ++s)
            for (size_t b = 0; b < blocks[s].size(); ++b)
                blocks[s][b].collect("enc.s" + std::to_string(s) + ".b" + std::to_string(b), out);
        for (size_t s = 0; s < down.size(); ++s) down[s].collect("down.s" + std::to_string(s), out);
        head_gn.collect("head.gn", out);
        head_fc.collect("head.fc", out);
        return out;
    }

    // Returns realness logits [batch, 1] for the pair (x_t, x_prev) at step t.
    Tensor<Real> forward(const Tensor<Real>& x_t, const Tensor<Real>& x_prev, int t) {
        check_same_shape(x_t, x_prev, "discriminator pair");
        const int n = x_t.size(0);
        if (x_t.size(1) != cfg.label_channels || x_t.size(2) != cfg.resolution ||
            x_t.size(3) != cfg.resolution)
            throw ShapeError("discriminator: bad input shape " + x_t.shape_str());

        Tensor<Real> te = sinusoidal_embed<Real>(t, cfg.time_embed_dim);
        Tensor<Real> temb({n, cfg.time_embed_dim});
        for (int i = 0; i < n; ++i)
            std::copy_n(te.ptr(), cfg.time_embed_dim, temb.ptr() + static_cast<int64_t>(i) * cfg.time_embed_dim);
        Tensor<Real> cond = t_mlp.forward(temb);

        taps.clear();
        const int S = cfg.scales();
        Tensor<Real> h = stem.forward(concat_channels(x_t, x_prev));
        for (int s = 0; s < S; ++s) {
            for (auto& blk : blocks[static_cast<size_t>(s)]) h = blk.forward(h, cond);
            taps[h.size(2)] = h;
            if (s + 1 < S) h = down[static_cast<size_t>(s)].forward(h);
        }
        return head_fc.forward(head_pool.forward(head_act.forward(head_gn.forward(h))));
    }

    // Parameter gradients for the latest forward pass; tap copies carry none.
    void backward(const Tensor<Real>& glogits) {
        const int n = glogits.size(0);
        Tensor<Real> gcond({n, cfg.time_embed_dim});
        Tensor<Real> g =
            head_gn.backward(head_act.backward(head_pool.backward(head_fc.backward(glogits))));
        for (int s = cfg.scales() - 1; s >= 0; --s) {
            auto& scale = blocks[static_cast<size_t>(s)];
            for (int b = cfg.blocks_per_scale - 1; b >= 0; --b) g = scale[static_cast<size_t>(b)].backward(g, &gcond);
            if (s > 0) g = down[static_cast<size_t>(s - 1)].backward(g);
        }
        stem.backward(g);
        t_mlp.backward(gcond);
    }
};

}  // namespace cdal::nn
