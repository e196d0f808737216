#pragma once

#include <cstdint>
#include <functional>

#include "mitonet/ops.hpp"
#include "mitonet/random.hpp"
#include "mitonet/tensor.hpp"
#include "mitonet/unet.hpp"

namespace mito {

/// One training batch: images and binary targets, both B x 1 x S x S.
struct Batch {
  Tensor images;
  Tensor masks;
};

/// Supplies training batches. Implementations draw all randomness from the
/// generator passed in, so a run is reproducible from the trainer state.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual Batch next(int batch_size, Rng& rng) = 0;
};

struct TrainSpec {
  int batch_size = 4;
  std::int64_t steps = 100'000;
  std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::uint64_t seed = 1;
  AdamHyper adam;

  void validate() const {
    if (batch_size < 1) fail(ErrorCategory::config, "batch size must be at least 1");
    if (steps < 0) fail(ErrorCategory::config, "step count must be non-negative");
    if (checkpoint_every < 0) fail(ErrorCategory::config, "checkpoint cadence must be non-negative");
    if (!(adam.learning_rate > 0.0)) fail(ErrorCategory::config, "learning rate must be positive");
  }
};

/// Everything besides the model that a resumed run needs to continue
/// bit-identically.
struct TrainState {
  std::int64_t step = 0;
  Rng rng;
};

inline TrainState initial_train_state(const TrainSpec& spec) { return {0, Rng(spec.seed)}; }

struct TrainHooks {
  std::function<void(std::int64_t step, double loss)> on_step;
  std::function<void(const UNet& model, const TrainState& state)> on_checkpoint;
};

/// Runs Adam on binary cross-entropy until `state.step == spec.steps`.
/// Throws Error{numeric} naming the step if the loss stops being finite.
void train(UNet& model, TrainState& state, const TrainSpec& spec, BatchSource& source, const TrainHooks& hooks = {});

}  // namespace mito
