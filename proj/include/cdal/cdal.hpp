#pragma once

// Umbrella header for the cdal library: conditional diffusion segmentation
// with a per-timestep critic, critic-feature attention masks, and few-step
// sampling via a latent-conditioned clean-label predictor.

#include "cdal/attention/attention.hpp"
#include "cdal/config.hpp"
#include "cdal/core/errors.hpp"
#include "cdal/core/rng.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/data/folder.hpp"
#include "cdal/data/png_io.hpp"
#include "cdal/data/synthetic.hpp"
#include "cdal/diffusion/ops.hpp"
#include "cdal/diffusion/schedule.hpp"
#include "cdal/metrics/metrics.hpp"
#include "cdal/nn/adam.hpp"
#include "cdal/nn/checkpoint.hpp"
#include "cdal/nn/discriminator.hpp"
#include "cdal/nn/embedding.hpp"
#include "cdal/nn/generator.hpp"
#include "cdal/nn/kernels.hpp"
#include "cdal/nn/layers.hpp"
#include "cdal/nn/resblock.hpp"
#include "cdal/sample/sampler.hpp"
#include "cdal/train/serialize.hpp"
#include "cdal/train/trainer.hpp"
