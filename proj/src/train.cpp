#include "mitonet/train.hpp"

#include <cmath>
#include <string>

namespace mito {

void train(UNet& model, TrainState& state, const TrainSpec& spec, BatchSource& source, const TrainHooks& hooks) {
  spec.validate();
  model.set_optimizer(spec.adam);
  UNetTrace<float> trace;
  while (state.step < spec.steps) {
    auto batch = source.next(spec.batch_size, state.rng);
    model.zero_grad();
    const auto logits = model.forward_train(batch.images, state.rng, trace);
    const auto loss = sigmoid_bce_loss(logits, batch.masks);
    if (!std::isfinite(loss.loss))
      fail(ErrorCategory::numeric, "non-finite loss at step " + std::to_string(state.step + 1));
    model.backward(trace, loss.grad);
    model.adam_update();
    ++state.step;
    if (hooks.on_step) hooks.on_step(state.step, loss.loss);
    if (spec.checkpoint_every > 0 && state.step % spec.checkpoint_every == 0 && hooks.on_checkpoint)
      hooks.on_checkpoint(model, state);
  }
}

}  // namespace mito
