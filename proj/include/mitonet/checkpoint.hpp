#pragma once

#include <filesystem>
#include <optional>

#include "mitonet/train.hpp"
#include "mitonet/unet.hpp"

namespace mito {

inline constexpr int kCheckpointVersion = 1;

/// Model parameters, optimizer moments and (optionally) trainer state.
///
/// Layout: a text header
///   mitonet-checkpoint <version>
///   filters <w0> .. <w4> / input_size <n> / dropout <p>
///   adam <lr> <beta1> <beta2> <eps>
///   [train_step <n>] [train_rng <engine state>]
///   tensor <name> f32 <rank> <dims..> <adam step>   (one line per tensor)
///   end
/// followed by the little-endian float32 payload of every tensor in header
/// order; parameter tensors are followed by their two Adam moment arrays.
struct Checkpoint {
  UNet model;
  std::optional<TrainState> state;
};

void save_checkpoint(const std::filesystem::path& path, const UNet& model, const TrainState* state = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mito
