#include <gtest/gtest.h>

#include "mitonet/train.hpp"
#include "mitonet/unet.hpp"
#include "oracles.hpp"

using namespace mito;

namespace {

// Closed-form parameter counts for the paired-conv U-Net.
std::int64_t encoder_params(const std::vector<int>& f) {
  std::int64_t n = 0, in = 1;
  for (int w : f) {
    n += 9 * in * w + w + 9 * std::int64_t{w} * w + w;
    in = w;
  }
  return n;
}

std::int64_t decoder_params(const std::vector<int>& f) {
  std::int64_t n = 0;
  for (std::size_t l = 0; l + 1 < f.size(); ++l) {
    const std::int64_t cat = f[l] + f[l + 1];
    n += 9 * cat * f[l] + f[l] + 9 * std::int64_t{f[l]} * f[l] + f[l];
  }
  return n + f[0] + 1;
}

UNetConfig small_config(int size = 32) {
  UNetConfig c;
  c.filters = {4, 8, 16, 32, 64};
  c.input_size = size;
  return c;
}

}  // namespace

TEST(UNet, DefaultEncoderMatchesBudget) {
  const UNet model(UNetConfig{}, 1);
  EXPECT_EQ(model.param_count(ParamScope::encoder), 1'178'480);
  EXPECT_EQ(encoder_params(UNetConfig{}.filters), 1'178'480);
}

TEST(UNet, ParameterCountsMatchClosedFormAndLayerWalk) {
  for (const auto& f : {std::vector<int>{16, 32, 64, 128, 256}, std::vector<int>{4, 8, 16, 32, 64}}) {
    UNetConfig c;
    c.filters = f;
    const UNet model(c, 2);
    EXPECT_EQ(model.param_count(ParamScope::encoder), encoder_params(f));
    EXPECT_EQ(model.param_count(ParamScope::decoder), decoder_params(f));
    std::int64_t walked = 0;
    for (const auto& l : model.layers()) walked += l.parameters;
    EXPECT_EQ(walked, model.param_count(ParamScope::total));
  }
  EXPECT_EQ(decoder_params(UNetConfig{}.filters), 783'857);
}

TEST(UNet, UpsamplingIsParameterFreeAndNothingLearnsToUpsample) {
  const UNet model(UNetConfig{}, 1);
  int ups = 0;
  for (const auto& l : model.layers()) {
    if (l.kind == LayerKind::upsample_bilinear2x) {
      ++ups;
      EXPECT_EQ(l.parameters, 0);
      EXPECT_EQ(l.out_size, 2 * l.in_size);
    }
    if (l.parameters > 0) {
      EXPECT_EQ(l.in_size, l.out_size) << l.name;
    }
  }
  EXPECT_EQ(ups, 4);
}

TEST(UNet, ConfigValidation) {
  UNetConfig c = small_config();
  c.filters = {4, 8, 16, 32};
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.filters = {4, 8, 17, 32, 64};
  EXPECT_THROW(c.validate(), Error);
  c = small_config(40);
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(UNet, DenseOutputAndInputChecks) {
  const UNet model(small_config(), 3);
  Rng rng(1);
  const auto x = oracle::random_tensor<float>({2, 1, 32, 32}, rng, 0, 1);
  const auto y = model.forward(x);
  EXPECT_EQ(y.shape(), (Shape{2, 1, 32, 32}));
  EXPECT_EQ(model.forward(x, false, rng), y);
  EXPECT_THROW((void)model.forward(Tensor({1, 1, 16, 16})), Error);
  EXPECT_THROW((void)model.forward(Tensor({1, 2, 32, 32})), Error);
}

TEST(UNet, SameSeedSameWeights) {
  const UNet a(small_config(), 9), b(small_config(), 9), c(small_config(), 10);
  EXPECT_EQ(a.convs()[3].weight, b.convs()[3].weight);
  EXPECT_FALSE(a.convs()[3].weight == c.convs()[3].weight);
}

namespace {

// Loss plus the piecewise-linear region it was evaluated in: every ReLU
// sign and every pooling argmax.
struct Evaluation {
  double loss;
  std::vector<bool> pattern;
};

template <class T>
void append_signs(std::vector<bool>& out, const std::vector<BasicTensor<T>>& ts) {
  for (const auto& t : ts)
    for (std::size_t i = 0; i < t.size(); ++i) out.push_back(t[i] > T{0});
}

}  // namespace

TEST(UNet, EndToEndGradientMatchesFiniteDifferences) {
  UNetConfig c = small_config(32);
  BasicUNet<double> model(c, 5);
  Rng data(6);
  const auto x = oracle::random_tensor<double>({1, 1, 32, 32}, data, 0, 1);
  BasicTensor<double> t({1, 1, 32, 32});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = data.bernoulli(0.3) ? 1.0 : 0.0;
  const Rng dropout_rng(77);

  auto evaluate = [&] {
    Rng r = dropout_rng;
    UNetTrace<double> trace;
    Evaluation e{sigmoid_bce_loss(model.forward_train(x, r, trace), t).loss, {}};
    for (const auto* ts : {&trace.enc_a1, &trace.enc_a2, &trace.dec_d1, &trace.dec_d2}) append_signs(e.pattern, *ts);
    for (const auto& p : trace.pools)
      for (auto a : p.argmax)
        for (int bit = 0; bit < 32; ++bit) e.pattern.push_back((a >> bit) & 1);
    return e;
  };
  // Central difference with the step halved until both probes stay in the
  // same linear region as each other.
  auto derivative = [&](double& param) {
    const double saved = param;
    for (double h = 1e-4; h > 1e-9; h /= 2) {
      param = saved + h;
      const auto up = evaluate();
      param = saved - h;
      const auto down = evaluate();
      param = saved;
      if (up.pattern == down.pattern) return (up.loss - down.loss) / (2 * h);
    }
    ADD_FAILURE() << "no kink-free step found";
    return 0.0;
  };

  model.zero_grad();
  {
    Rng r = dropout_rng;
    UNetTrace<double> trace;
    const auto logits = model.forward_train(x, r, trace);
    model.backward(trace, sigmoid_bce_loss(logits, t).grad);
  }
  Rng pick(12);
  for (auto& conv : model.convs()) {
    const auto i = pick.below(conv.weight.size());
    EXPECT_LT(oracle::relative_error(std::as_const(conv.weight).grad()[i], derivative(conv.weight[i])), 1e-5)
        << conv.name;
    const auto j = pick.below(conv.bias.size());
    EXPECT_LT(oracle::relative_error(std::as_const(conv.bias).grad()[j], derivative(conv.bias[j])), 1e-5)
        << conv.name << ".bias";
  }
}

TEST(Utilization, CountsConstructedDeadFilters) {
  UNet model(small_config(), 1);
  std::int64_t n = 0, k = 0;
  for (auto& conv : model.convs()) {
    conv.weight.fill(0.0f);
    for (int o = 0; o < conv.out_channels(); ++o) {
      const bool dead = conv.kernel == 3 && o % 3 == 1;
      conv.bias[static_cast<std::size_t>(o)] = dead ? -1.0f : 1.0f;
      if (conv.kernel == 3) {
        ++n;
        k += dead;
      }
    }
  }
  Rng rng(2);
  const auto u = utilization(model, {oracle::random_tensor<float>({1, 1, 32, 32}, rng, 0, 1)});
  EXPECT_EQ(u.total, n);
  EXPECT_EQ(u.active, n - k);
  EXPECT_DOUBLE_EQ(u.fraction(), static_cast<double>(n - k) / static_cast<double>(n));
}

TEST(Utilization, AllBiasPositiveIsFull) {
  UNet model(small_config(), 1);
  for (auto& conv : model.convs()) {
    conv.weight.fill(0.0f);
    conv.bias.fill(0.5f);
  }
  const auto u = utilization(model, {Tensor({1, 1, 32, 32}, 0.3f)});
  EXPECT_EQ(u.active, u.total);
  EXPECT_DOUBLE_EQ(u.fraction(), 1.0);
  EXPECT_THROW((void)utilization(model, {}), Error);
}

namespace {

// Foreground is the bright left half of the image.
class HalfPlaneSource : public BatchSource {
 public:
  Batch next(int batch_size, Rng& rng) override {
    Batch b{Tensor({batch_size, 1, 32, 32}), Tensor({batch_size, 1, 32, 32})};
    for (int n = 0; n < batch_size; ++n)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const bool fg = x < 16;
          b.images.at(n, 0, y, x) = static_cast<float>((fg ? 0.8 : 0.2) + 0.05 * rng.uniform(-1, 1));
          b.masks.at(n, 0, y, x) = fg ? 1.0f : 0.0f;
        }
    return b;
  }
};


}  // namespace

TEST(Train, LossFallsOnToyProblem) {
  UNet model(small_config(), 4);
  TrainSpec spec;
  spec.batch_size = 2;
  spec.steps = 40;
  spec.adam.learning_rate = 3e-3;
  TrainState state = initial_train_state(spec);
  HalfPlaneSource source;
  std::vector<double> losses;
  train(model, state, spec, source, {[&](std::int64_t, double l) { losses.push_back(l); }, {}});
  ASSERT_EQ(losses.size(), 40u);
  EXPECT_LT(losses.back(), 0.5 * losses.front());
  EXPECT_EQ(state.step, 40);
}

TEST(Train, NonFiniteLossNamesTheStep) {
  UNet model(small_config(), 4);
  TrainSpec spec;
  spec.batch_size = 1;
  spec.steps = 3;
  TrainState state = initial_train_state(spec);
  HalfPlaneSource source;
  model.convs().back().bias[0] = NAN;
  try {
    train(model, state, spec, source);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::numeric);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}

TEST(Train, CheckpointHookFollowsCadence) {
  UNet model(small_config(), 4);
  TrainSpec spec;
  spec.batch_size = 1;
  spec.steps = 7;
  spec.checkpoint_every = 3;
  TrainState state = initial_train_state(spec);
  HalfPlaneSource source;
  std::vector<std::int64_t> at;
  train(model, state, spec, source, {{}, [&](const UNet&, const TrainState& s) { at.push_back(s.step); }});
  EXPECT_EQ(at, (std::vector<std::int64_t>{3, 6}));
}
