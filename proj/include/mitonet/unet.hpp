#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <string>
#include <vector>

#include "mitonet/error.hpp"
#include "mitonet/ops.hpp"
#include "mitonet/random.hpp"
#include "mitonet/tensor.hpp"

namespace mito {

inline constexpr int kUNetLevels = 5;
inline constexpr std::int64_t kEncoderParameterBudget = 1'178'480;

struct UNetConfig {
  /// Channel width of the two 3x3 convolutions at each resolution level,
  /// finest first. Each level doubles the previous one.
  std::vector<int> filters{16, 32, 64, 128, 256};
  int input_size = 512;
  double dropout = 0.2;

  void validate() const {
    if (filters.size() != static_cast<std::size_t>(kUNetLevels))
      fail(ErrorCategory::config, "filter plan needs exactly " + std::to_string(kUNetLevels) + " levels, got " +
                                      std::to_string(filters.size()));
    if (filters[0] < 1) fail(ErrorCategory::config, "filter plan must start at a positive width");
    for (std::size_t i = 1; i < filters.size(); ++i)
      if (filters[i] != 2 * filters[i - 1])
        fail(ErrorCategory::config, "filter plan must double at every level; level " + std::to_string(i) +
                                        " has " + std::to_string(filters[i]) + " after " +
                                        std::to_string(filters[i - 1]));
    const int step = 1 << (kUNetLevels - 1);
    if (input_size < step || input_size % step != 0)
      fail(ErrorCategory::config, "input size must be a positive multiple of " + std::to_string(step));
    if (!(dropout >= 0.0) || dropout >= 1.0) fail(ErrorCategory::config, "dropout rate must lie in [0, 1)");
  }

  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

enum class ParamScope { encoder, decoder, total };

enum class LayerKind { conv3x3, conv1x1, relu, maxpool2x2, upsample_bilinear2x, concat_skip, dropout };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::conv1x1: return "conv1x1";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::upsample_bilinear2x: return "upsample_bilinear2x";
    case LayerKind::concat_skip: return "concat_skip";
    case LayerKind::dropout: return "dropout";
  }
  return "?";
}

/// One entry of the ordered layer description.
struct LayerInfo {
  LayerKind kind;
  std::string name;
  ParamScope scope;  // encoder or decoder
  int in_channels, out_channels;
  int in_size, out_size;  // spatial extent (square)
  std::int64_t parameters;
};

template <class T>
struct ConvLayer {
  std::string name;
  ParamScope scope;
  int kernel;
  int padding;
  BasicTensor<T> weight;  // out, in, k, k
  BasicTensor<T> bias;    // out
  AdamState<T> weight_state;
  AdamState<T> bias_state;

  std::int64_t parameter_count() const { return static_cast<std::int64_t>(weight.size() + bias.size()); }
  int in_channels() const { return weight.dim(1); }
  int out_channels() const { return weight.dim(0); }
};

/// Activations kept by a training forward pass for the backward pass.
template <class T>
struct UNetTrace {
  BasicTensor<T> input;
  std::vector<BasicTensor<T>> enc_a1, enc_a2;  // post-ReLU, per level
  std::vector<PoolResult<T>> pools;            // levels 0..L-2
  std::vector<T> dropout_scale;
  BasicTensor<T> bottleneck;                   // after dropout
  std::vector<BasicTensor<T>> dec_cat, dec_d1, dec_d2;  // indexed by level 0..L-2
};

/// Called after every ReLU with the index of the producing convolution.
template <class T>
using ActivationObserver = std::function<void(int conv_index, const BasicTensor<T>& post_relu)>;

/// The slimmed 2D U-Net: five levels of paired 3x3 conv + ReLU, 2x2 max
/// pooling on the contracting path, parameter-free bilinear upsampling and
/// skip concatenation on the expanding path, and a 1x1 head producing one
/// logit per pixel at full input resolution.
///
/// Convolution order: enc0.conv1, enc0.conv2, ..., enc4.conv2, dec3.conv1,
/// dec3.conv2, ..., dec0.conv2, head.
template <class T>
class BasicUNet {
 public:
  static constexpr int kLevels = kUNetLevels;

  BasicUNet(UNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
    Rng rng(seed);
    build(rng);
  }

  BasicUNet(UNetConfig config, Rng& rng) : config_(std::move(config)) { build(rng); }

  const UNetConfig& config() const noexcept { return config_; }

  std::vector<ConvLayer<T>>& convs() noexcept { return convs_; }
  const std::vector<ConvLayer<T>>& convs() const noexcept { return convs_; }

  static int encoder_conv(int level, int which) { return 2 * level + which; }
  static int decoder_conv(int level, int which) { return 2 * kLevels + 2 * (kLevels - 2 - level) + which; }
  static int head_conv() { return 4 * kLevels - 2; }

  std::int64_t param_count(ParamScope scope) const {
    std::int64_t n = 0;
    for (const auto& c : convs_)
      if (scope == ParamScope::total || c.scope == scope) n += c.parameter_count();
    return n;
  }

  /// Ordered description of every layer in the graph, including the
  /// parameter-free ones.
  std::vector<LayerInfo> layers() const {
    std::vector<LayerInfo> out;
    const auto& f = config_.filters;
    int size = config_.input_size;
    auto conv_info = [&](int idx, int sz) {
      const auto& c = convs_[static_cast<std::size_t>(idx)];
      out.push_back({c.kernel == 3 ? LayerKind::conv3x3 : LayerKind::conv1x1, c.name, c.scope, c.in_channels(),
                     c.out_channels(), sz, sz, c.parameter_count()});
      if (c.kernel == 3)
        out.push_back({LayerKind::relu, c.name + ".relu", c.scope, c.out_channels(), c.out_channels(), sz, sz, 0});
    };
    for (int l = 0; l < kLevels; ++l) {
      conv_info(encoder_conv(l, 0), size);
      conv_info(encoder_conv(l, 1), size);
      const std::string p = "enc" + std::to_string(l);
      if (l + 1 < kLevels) {
        out.push_back({LayerKind::maxpool2x2, p + ".pool", ParamScope::encoder, f[l], f[l], size, size / 2, 0});
        size /= 2;
      } else {
        out.push_back({LayerKind::dropout, p + ".dropout", ParamScope::encoder, f[l], f[l], size, size, 0});
      }
    }
    for (int l = kLevels - 2; l >= 0; --l) {
      const std::string p = "dec" + std::to_string(l);
      out.push_back(
          {LayerKind::upsample_bilinear2x, p + ".up", ParamScope::decoder, f[l + 1], f[l + 1], size, size * 2, 0});
      size *= 2;
      out.push_back({LayerKind::concat_skip, p + ".concat", ParamScope::decoder, f[l + 1], f[l] + f[l + 1], size,
                     size, 0});
      conv_info(decoder_conv(l, 0), size);
      conv_info(decoder_conv(l, 1), size);
    }
    conv_info(head_conv(), size);
    return out;
  }

  /// Inference pass; a pure function of parameters and input.
  BasicTensor<T> forward(const BasicTensor<T>& batch, const ActivationObserver<T>& observer = {}) const {
    check_input(batch);
    std::vector<BasicTensor<T>> skips;
    BasicTensor<T> x = batch;
    for (int l = 0; l < kLevels; ++l) {
      x = conv_relu(encoder_conv(l, 0), x, observer);
      x = conv_relu(encoder_conv(l, 1), x, observer);
      if (l + 1 < kLevels) {
        auto pooled = maxpool2x2(x).output;
        skips.push_back(std::move(x));
        x = std::move(pooled);
      }
    }
    for (int l = kLevels - 2; l >= 0; --l) {
      auto cat = concat_channels(skips[static_cast<std::size_t>(l)], bilinear_upsample2x(x));
      skips.pop_back();
      x = conv_relu(decoder_conv(l, 0), cat, observer);
      x = conv_relu(decoder_conv(l, 1), x, observer);
    }
    return apply_conv(head_conv(), x);
  }

  /// Forward pass that selects training behaviour (dropout active) when
  /// `training` is set. `rng` is only drawn from in training mode.
  BasicTensor<T> forward(const BasicTensor<T>& batch, bool training, Rng& rng) const {
    if (!training) return forward(batch);
    UNetTrace<T> trace;
    return forward_train(batch, rng, trace);
  }

  BasicTensor<T> forward_train(const BasicTensor<T>& batch, Rng& rng, UNetTrace<T>& t) const {
    check_input(batch);
    const auto L = static_cast<std::size_t>(kLevels);
    t.input = batch;
    t.enc_a1.assign(L, {});
    t.enc_a2.assign(L, {});
    t.pools.assign(L - 1, {});
    t.dec_cat.assign(L - 1, {});
    t.dec_d1.assign(L - 1, {});
    t.dec_d2.assign(L - 1, {});
    const BasicTensor<T>* x = &t.input;
    for (int l = 0; l < kLevels; ++l) {
      const auto li = static_cast<std::size_t>(l);
      t.enc_a1[li] = conv_relu(encoder_conv(l, 0), *x, {});
      t.enc_a2[li] = conv_relu(encoder_conv(l, 1), t.enc_a1[li], {});
      if (l + 1 < kLevels) {
        t.pools[li] = maxpool2x2(t.enc_a2[li]);
        x = &t.pools[li].output;
      }
    }
    auto dropped = dropout(t.enc_a2[L - 1], config_.dropout, true, rng);
    t.bottleneck = std::move(dropped.output);
    t.dropout_scale = std::move(dropped.scale);
    x = &t.bottleneck;
    for (int l = kLevels - 2; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      t.dec_cat[li] = concat_channels(t.enc_a2[li], bilinear_upsample2x(*x));
      t.dec_d1[li] = conv_relu(decoder_conv(l, 0), t.dec_cat[li], {});
      t.dec_d2[li] = conv_relu(decoder_conv(l, 1), t.dec_d1[li], {});
      x = &t.dec_d2[li];
    }
    return apply_conv(head_conv(), *x);
  }

  /// Accumulates parameter gradients (weight.grad(), bias.grad()) for the
  /// loss whose gradient w.r.t. the logits is `grad_logits`.
  void backward(const UNetTrace<T>& t, const BasicTensor<T>& grad_logits) {
    const auto L = static_cast<std::size_t>(kLevels);
    BasicTensor<T> g = conv_backward(head_conv(), t.dec_d2[0], grad_logits, true);
    std::vector<BasicTensor<T>> skip_grads(L - 1);
    for (int l = 0; l <= kLevels - 2; ++l) {
      const auto li = static_cast<std::size_t>(l);
      relu_backward_inplace(g, t.dec_d2[li]);
      g = conv_backward(decoder_conv(l, 1), t.dec_d1[li], g, true);
      relu_backward_inplace(g, t.dec_d1[li]);
      g = conv_backward(decoder_conv(l, 0), t.dec_cat[li], g, true);
      auto [g_skip, g_up] = split_channels(g, config_.filters[li]);
      skip_grads[li] = std::move(g_skip);
      g = bilinear_upsample2x_backward(g_up);
    }
    g = dropout_backward(g, std::span<const T>(t.dropout_scale));
    for (int l = kLevels - 1; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      if (l + 1 < kLevels) {
        g = maxpool2x2_backward(g, std::span<const std::int32_t>(t.pools[li].argmax), t.enc_a2[li].shape());
        const auto& s = skip_grads[li];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
      }
      relu_backward_inplace(g, t.enc_a2[li]);
      g = conv_backward(encoder_conv(l, 1), t.enc_a1[li], g, true);
      relu_backward_inplace(g, t.enc_a1[li]);
      const BasicTensor<T>& in = l == 0 ? t.input : t.pools[li - 1].output;
      g = conv_backward(encoder_conv(l, 0), in, g, l > 0);
    }
  }

  void zero_grad() {
    for (auto& c : convs_) {
      c.weight.zero_grad();
      c.bias.zero_grad();
    }
  }

  void set_optimizer(const AdamHyper& hyper) {
    for (auto& c : convs_) {
      c.weight_state.hyper = hyper;
      c.bias_state.hyper = hyper;
    }
  }

  void adam_update() {
    for (auto& c : convs_) {
      adam_step(c.weight.values(), std::as_const(c.weight).grad(), c.weight_state);
      adam_step(c.bias.values(), std::as_const(c.bias).grad(), c.bias_state);
    }
  }

 private:
  void build(Rng& rng) {
    config_.validate();
    const auto& f = config_.filters;
    int in = 1;
    for (int l = 0; l < kLevels; ++l) {
      const std::string p = "enc" + std::to_string(l);
      add_conv(p + ".conv1", ParamScope::encoder, in, f[l], 3, rng);
      add_conv(p + ".conv2", ParamScope::encoder, f[l], f[l], 3, rng);
      in = f[l];
    }
    for (int l = kLevels - 2; l >= 0; --l) {
      const std::string p = "dec" + std::to_string(l);
      add_conv(p + ".conv1", ParamScope::decoder, f[l] + f[l + 1], f[l], 3, rng);
      add_conv(p + ".conv2", ParamScope::decoder, f[l], f[l], 3, rng);
    }
    add_conv("head", ParamScope::decoder, f[0], 1, 1, rng);
  }

  void add_conv(std::string name, ParamScope scope, int in, int out, int k, Rng& rng) {
    ConvLayer<T> c{std::move(name), scope, k, (k - 1) / 2, BasicTensor<T>({out, in, k, k}), BasicTensor<T>({out}),
                   {}, {}};
    // He-style uniform initialization, zero bias.
    const double bound = std::sqrt(6.0 / static_cast<double>(in * k * k));
    for (auto& w : c.weight.values()) w = static_cast<T>(rng.uniform(-bound, bound));
    c.weight_state = AdamState<T>(c.weight.size(), AdamHyper{});
    c.bias_state = AdamState<T>(c.bias.size(), AdamHyper{});
    convs_.push_back(std::move(c));
  }

  void check_input(const BasicTensor<T>& batch) const {
    require_rank(batch.shape(), 4, "unet input");
    if (batch.channels() != 1)
      fail(ErrorCategory::shape, "unet input must have 1 channel, got " + std::to_string(batch.channels()));
    if (batch.height() != config_.input_size || batch.width() != config_.input_size)
      fail(ErrorCategory::shape, "unet input must be " + std::to_string(config_.input_size) + "x" +
                                     std::to_string(config_.input_size) + ", got " + to_string(batch.shape()));
  }

  BasicTensor<T> apply_conv(int idx, const BasicTensor<T>& x) const {
    const auto& c = convs_[static_cast<std::size_t>(idx)];
    return conv2d(x, c.weight, c.bias.values(), c.padding);
  }

  BasicTensor<T> conv_relu(int idx, const BasicTensor<T>& x, const ActivationObserver<T>& observer) const {
    auto y = apply_conv(idx, x);
    relu_inplace(y);
    if (observer) observer(idx, y);
    return y;
  }

  BasicTensor<T> conv_backward(int idx, const BasicTensor<T>& input, const BasicTensor<T>& grad_out,
                               bool need_input_grad) {
    auto& c = convs_[static_cast<std::size_t>(idx)];
    const auto geo = detail::conv_geometry(input, c.weight, c.bias.size(), c.padding);
    BasicTensor<T> gin;
    if (need_input_grad) gin = BasicTensor<T>(input.shape());
    detail::conv2d_backward_into(geo, grad_out.data(), input.data(), c.weight.data(),
                                 need_input_grad ? gin.data() : nullptr, c.weight.grad().data(),
                                 c.bias.grad().data());
    return gin;
  }

  UNetConfig config_;
  std::vector<ConvLayer<T>> convs_;
};

using UNet = BasicUNet<float>;

/// Fraction of 3x3 convolution filters whose post-ReLU output is positive
/// somewhere on at least one probe input.
struct Utilization {
  std::int64_t active = 0;
  std::int64_t total = 0;
  std::vector<std::int64_t> dead_per_layer;  // indexed like convs()

  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(active) / static_cast<double>(total); }
};

template <class T>
Utilization utilization(const BasicUNet<T>& model, const std::vector<BasicTensor<T>>& probes) {
  if (probes.empty()) fail(ErrorCategory::value, "utilization needs at least one probe slice");
  const auto& convs = model.convs();
  std::vector<std::vector<char>> active(convs.size());
  for (std::size_t i = 0; i < convs.size(); ++i) active[i].assign(static_cast<std::size_t>(convs[i].out_channels()), 0);
  const ActivationObserver<T> observe = [&](int idx, const BasicTensor<T>& y) {
    auto& flags = active[static_cast<std::size_t>(idx)];
    const std::size_t plane = y.plane();
    for (int b = 0; b < y.batch(); ++b)
      for (int c = 0; c < y.channels(); ++c) {
        if (flags[static_cast<std::size_t>(c)]) continue;
        const T* p = y.data() + (static_cast<std::size_t>(b) * y.channels() + c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          if (p[i] > T{0}) {
            flags[static_cast<std::size_t>(c)] = 1;
            break;
          }
      }
  };
  for (const auto& probe : probes) (void)model.forward(probe, observe);
  Utilization u;
  u.dead_per_layer.assign(convs.size(), 0);
  for (std::size_t i = 0; i < convs.size(); ++i) {
    if (convs[i].kernel != 3) continue;
    for (char f : active[i]) {
      ++u.total;
      if (f)
        ++u.active;
      else
        ++u.dead_per_layer[i];
    }
  }
  return u;
}

}  // namespace mito
