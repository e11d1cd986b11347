#pragma once

#include <json.hpp>

#include "cdal/nn/discriminator.hpp"
#include "cdal/nn/generator.hpp"

// JSON bindings for the network configs, used by checkpoint sidecars and the
// run manifest. Free functions live in the configs' namespace for ADL.
namespace cdal::nn {

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = {{"resolution", c.resolution},
         {"label_channels", c.label_channels},
         {"image_channels", c.image_channels},
         {"base_channels", c.base_channels},
         {"channel_multipliers", c.channel_multipliers},
         {"blocks_per_scale", c.blocks_per_scale},
         {"time_embed_dim", c.time_embed_dim},
         {"latent_dim", c.latent_dim},
         {"condition_channels", c.condition_channels}};
}

inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    j.at("resolution").get_to(c.resolution);
    j.at("label_channels").get_to(c.label_channels);
    j.at("image_channels").get_to(c.image_channels);
    j.at("base_channels").get_to(c.base_channels);
    j.at("channel_multipliers").get_to(c.channel_multipliers);
    j.at("blocks_per_scale").get_to(c.blocks_per_scale);
    j.at("time_embed_dim").get_to(c.time_embed_dim);
    j.at("latent_dim").get_to(c.latent_dim);
    j.at("condition_channels").get_to(c.condition_channels);
}

inline void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = {{"resolution", c.resolution},
         {"label_channels", c.label_channels},
         {"base_channels", c.base_channels},
         {"channel_multipliers", c.channel_multipliers},
         {"blocks_per_scale", c.blocks_per_scale},
         {"time_embed_dim", c.time_embed_dim}};
}

inline void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    j.at("resolution").get_to(c.resolution);
    j.at("label_channels").get_to(c.label_channels);
    j.at("base_channels").get_to(c.base_channels);
    j.at("channel_multipliers").get_to(c.channel_multipliers);
    j.at("blocks_per_scale").get_to(c.blocks_per_scale);
    j.at("time_embed_dim").get_to(c.time_embed_dim);
}

}  // namespace cdal::nn
