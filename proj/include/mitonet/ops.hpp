#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "mitonet/blas.hpp"
#include "mitonet/error.hpp"
#include "mitonet/random.hpp"
#include "mitonet/tensor.hpp"

namespace mito {

// ---------------------------------------------------------------------------
// Convolution (stride 1, zero padding, square kernel of size 1 or 3).
//
// Lowered to GEMM over im2col strips. A strip covers a band of output rows so
// the column buffer stays bounded regardless of image size.
// ---------------------------------------------------------------------------

namespace detail {

struct ConvGeometry {
  int batch, in_channels, height, width;
  int out_channels, kernel, padding;
  int out_height, out_width;

  int patch() const { return in_channels * kernel * kernel; }
  std::size_t in_plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t out_plane() const { return static_cast<std::size_t>(out_height) * out_width; }
  bool pointwise() const { return kernel == 1 && padding == 0; }

  int strip_rows() const {
    constexpr std::size_t kTargetElements = std::size_t{1} << 18;
    const std::size_t per_row = static_cast<std::size_t>(patch()) * out_width;
    const std::size_t rows = std::max<std::size_t>(1, kTargetElements / std::max<std::size_t>(1, per_row));
    return static_cast<int>(std::min<std::size_t>(rows, out_height));
  }
};

template <class T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& weight, std::size_t bias_size,
                           int padding) {
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(weight.shape(), 4, "conv2d weight");
  ConvGeometry g{};
  g.batch = input.batch();
  g.in_channels = input.channels();
  g.height = input.height();
  g.width = input.width();
  g.out_channels = weight.dim(0);
  g.kernel = weight.dim(2);
  g.padding = padding;
  if (weight.dim(1) != g.in_channels)
    fail(ErrorCategory::shape, "conv2d: in-channel axis mismatch (weight expects " + std::to_string(weight.dim(1)) +
                                   ", input has " + std::to_string(g.in_channels) + ")");
  if (weight.dim(2) != weight.dim(3))
    fail(ErrorCategory::shape, "conv2d: kernel axis mismatch (kernel is " + std::to_string(weight.dim(2)) + "x" +
                                   std::to_string(weight.dim(3)) + ", must be square)");
  if (g.kernel != 1 && g.kernel != 3)
    fail(ErrorCategory::shape, "conv2d: kernel axis must be 1 or 3, got " + std::to_string(g.kernel));
  if (bias_size != static_cast<std::size_t>(g.out_channels))
    fail(ErrorCategory::shape, "conv2d: out-channel axis mismatch (bias has " + std::to_string(bias_size) +
                                   ", weight has " + std::to_string(g.out_channels) + ")");
  if (padding < 0) fail(ErrorCategory::value, "conv2d: negative padding");
  g.out_height = g.height + 2 * padding - g.kernel + 1;
  g.out_width = g.width + 2 * padding - g.kernel + 1;
  if (g.out_height <= 0 || g.out_width <= 0)
    fail(ErrorCategory::shape, "conv2d: spatial axes too small for kernel");
  return g;
}

// Fills col (patch x rows*out_width) for output rows [y0, y0+rows).
template <class T>
void im2col_strip(const ConvGeometry& g, const T* image, int y0, int rows, T* col) {
  const int k = g.kernel;
  const int ow = g.out_width;
  const std::size_t n = static_cast<std::size_t>(rows) * ow;
  for (int c = 0; c < g.in_channels; ++c) {
    const T* src = image + c * g.in_plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * n;
        const int x_lo = std::max(0, g.padding - kx);
        const int x_hi = std::min(ow, g.width + g.padding - kx);
        for (int r = 0; r < rows; ++r) {
          T* row = dst + static_cast<std::size_t>(r) * ow;
          const int iy = y0 + r + ky - g.padding;
          if (iy < 0 || iy >= g.height || x_lo >= x_hi) {
            std::fill(row, row + ow, T{0});
            continue;
          }
          std::fill(row, row + x_lo, T{0});
          std::memcpy(row + x_lo, src + static_cast<std::size_t>(iy) * g.width + (x_lo + kx - g.padding),
                      sizeof(T) * static_cast<std::size_t>(x_hi - x_lo));
          std::fill(row + x_hi, row + ow, T{0});
        }
      }
    }
  }
}

// Scatter-adds col back onto the image gradient.
template <class T>
void col2im_strip(const ConvGeometry& g, const T* col, int y0, int rows, T* image) {
  const int k = g.kernel;
  const int ow = g.out_width;
  const std::size_t n = static_cast<std::size_t>(rows) * ow;
  for (int c = 0; c < g.in_channels; ++c) {
    T* dst = image + c * g.in_plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * n;
        const int x_lo = std::max(0, g.padding - kx);
        const int x_hi = std::min(ow, g.width + g.padding - kx);
        for (int r = 0; r < rows; ++r) {
          const int iy = y0 + r + ky - g.padding;
          if (iy < 0 || iy >= g.height) continue;
          const T* row = src + static_cast<std::size_t>(r) * ow;
          T* out = dst + static_cast<std::size_t>(iy) * g.width + (kx - g.padding);
          for (int x = x_lo; x < x_hi; ++x) out[x] += row[x];
        }
      }
    }
  }
}

template <class T>
void conv2d_forward_into(const ConvGeometry& g, const T* input, const T* weight, const T* bias, T* output) {
  const std::size_t out_plane = g.out_plane();
  const int patch = g.patch();
  for (int b = 0; b < g.batch; ++b) {
    const T* image = input + static_cast<std::size_t>(b) * g.in_channels * g.in_plane();
    T* out = output + static_cast<std::size_t>(b) * g.out_channels * out_plane;
    for (int o = 0; o < g.out_channels; ++o) std::fill(out + o * out_plane, out + (o + 1) * out_plane, bias[o]);
    if (g.pointwise()) {
      blas::gemm(false, false, g.out_channels, static_cast<int>(out_plane), g.in_channels, T{1}, weight, patch,
                 image, static_cast<int>(g.in_plane()), T{1}, out, static_cast<int>(out_plane));
      continue;
    }
    const int strip = g.strip_rows();
    std::vector<T> col(static_cast<std::size_t>(patch) * strip * g.out_width);
    for (int y0 = 0; y0 < g.out_height; y0 += strip) {
      const int rows = std::min(strip, g.out_height - y0);
      const int n = rows * g.out_width;
      im2col_strip(g, image, y0, rows, col.data());
      blas::gemm(false, false, g.out_channels, n, patch, T{1}, weight, patch, col.data(), n, T{1},
                 out + static_cast<std::size_t>(y0) * g.out_width, static_cast<int>(out_plane));
    }
  }
}

// Accumulates into grad_weight / grad_bias; writes (overwrites) grad_input
// when non-null.
template <class T>
void conv2d_backward_into(const ConvGeometry& g, const T* grad_out, const T* input, const T* weight, T* grad_input,
                          T* grad_weight, T* grad_bias) {
  const std::size_t out_plane = g.out_plane();
  const int patch = g.patch();
  if (grad_input)
    std::fill(grad_input, grad_input + static_cast<std::size_t>(g.batch) * g.in_channels * g.in_plane(), T{0});
  for (int b = 0; b < g.batch; ++b) {
    const T* image = input + static_cast<std::size_t>(b) * g.in_channels * g.in_plane();
    const T* gout = grad_out + static_cast<std::size_t>(b) * g.out_channels * out_plane;
    T* gin = grad_input ? grad_input + static_cast<std::size_t>(b) * g.in_channels * g.in_plane() : nullptr;
    for (int o = 0; o < g.out_channels; ++o) {
      // Double accumulation keeps the bias gradient stable over 512x512 planes.
      double s = 0.0;
      const T* p = gout + o * out_plane;
      for (std::size_t i = 0; i < out_plane; ++i) s += p[i];
      grad_bias[o] += static_cast<T>(s);
    }
    if (g.pointwise()) {
      const int n = static_cast<int>(out_plane);
      blas::gemm(false, true, g.out_channels, g.in_channels, n, T{1}, gout, n, image, n, T{1}, grad_weight, patch);
      if (gin) blas::gemm(true, false, g.in_channels, n, g.out_channels, T{1}, weight, patch, gout, n, T{0}, gin, n);
      continue;
    }
    const int strip = g.strip_rows();
    std::vector<T> col(static_cast<std::size_t>(patch) * strip * g.out_width);
    for (int y0 = 0; y0 < g.out_height; y0 += strip) {
      const int rows = std::min(strip, g.out_height - y0);
      const int n = rows * g.out_width;
      const T* gstrip = gout + static_cast<std::size_t>(y0) * g.out_width;
      im2col_strip(g, image, y0, rows, col.data());
      blas::gemm(false, true, g.out_channels, patch, n, T{1}, gstrip, static_cast<int>(out_plane), col.data(), n,
                 T{1}, grad_weight, patch);
      if (gin) {
        blas::gemm(true, false, patch, n, g.out_channels, T{1}, weight, patch, gstrip, static_cast<int>(out_plane),
                   T{0}, col.data(), n);
        col2im_strip(g, col.data(), y0, rows, gin);
      }
    }
  }
}

}  // namespace detail

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, std::span<const T> bias,
                      int padding) {
  const auto g = detail::conv_geometry(input, weight, bias.size(), padding);
  BasicTensor<T> out({g.batch, g.out_channels, g.out_height, g.out_width});
  detail::conv2d_forward_into(g, input.data(), weight.data(), bias.data(), out.data());
  return out;
}

template <class T>
struct ConvGrads {
  BasicTensor<T> grad_input;
  BasicTensor<T> grad_weight;
  std::vector<T> grad_bias;
};

template <class T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                             const BasicTensor<T>& weight, int padding) {
  const auto g = detail::conv_geometry(input, weight, static_cast<std::size_t>(weight.dim(0)), padding);
  const Shape expected{g.batch, g.out_channels, g.out_height, g.out_width};
  if (grad_out.shape() != expected)
    fail(ErrorCategory::shape, "conv2d_backward: grad_out shape " + to_string(grad_out.shape()) +
                                   " does not match forward output " + to_string(expected));
  ConvGrads<T> r{BasicTensor<T>(input.shape()), BasicTensor<T>(weight.shape()),
                 std::vector<T>(static_cast<std::size_t>(g.out_channels), T{0})};
  detail::conv2d_backward_into(g, grad_out.data(), input.data(), weight.data(), r.grad_input.data(),
                               r.grad_weight.data(), r.grad_bias.data());
  return r;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  const T* x = input.data();
  T* y = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return out;
}

template <class T>
void relu_inplace(BasicTensor<T>& t) {
  for (auto& v : t.values()) v = v > T{0} ? v : T{0};
}

/// Gradient passes where `activation` > 0. Either the ReLU input or its
/// output may be supplied: both are positive at exactly the same positions.
template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& activation) {
  if (grad_out.shape() != activation.shape())
    fail(ErrorCategory::shape, "relu_backward: shape mismatch " + to_string(grad_out.shape()) + " vs " +
                                   to_string(activation.shape()));
  BasicTensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = activation[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <class T>
void relu_backward_inplace(BasicTensor<T>& grad, const BasicTensor<T>& activation) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(activation[i] > T{0})) grad[i] = T{0};
}

// ---------------------------------------------------------------------------
// 2x2 max pooling. Ties go to the first element in row-major window order.
// ---------------------------------------------------------------------------

template <class T>
struct PoolResult {
  BasicTensor<T> output;
  /// Flat index into the input plane of the winning element, per output.
  std::vector<std::int32_t> argmax;
};

template <class T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& input) {
  require_rank(input.shape(), 4, "maxpool2x2 input");
  const int h = input.height(), w = input.width();
  if (h % 2 != 0 || w % 2 != 0)
    fail(ErrorCategory::shape, "maxpool2x2: spatial extent must be even, got " + to_string(input.shape()));
  const int oh = h / 2, ow = w / 2;
  PoolResult<T> r{BasicTensor<T>({input.batch(), input.channels(), oh, ow}), {}};
  r.argmax.resize(r.output.size());
  const std::size_t planes = static_cast<std::size_t>(input.batch()) * input.channels();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = input.data() + p * input.plane();
    T* dst = r.output.data() + p * r.output.plane();
    std::int32_t* arg = r.argmax.data() + p * r.output.plane();
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const std::int32_t base = (2 * y) * w + 2 * x;
        const std::int32_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::int32_t best = cand[0];
        for (int i = 1; i < 4; ++i)
          if (src[cand[i]] > src[best]) best = cand[i];
        dst[y * ow + x] = src[best];
        arg[y * ow + x] = best;
      }
    }
  }
  return r;
}

template <class T>
BasicTensor<T> maxpool2x2_backward(const BasicTensor<T>& grad_out, std::span<const std::int32_t> argmax,
                                   const Shape& input_shape) {
  require_rank(input_shape, 4, "maxpool2x2_backward input");
  if (argmax.size() != grad_out.size() || grad_out.height() * 2 != input_shape[2] ||
      grad_out.width() * 2 != input_shape[3])
    fail(ErrorCategory::shape, "maxpool2x2_backward: grad_out " + to_string(grad_out.shape()) +
                                   " inconsistent with input " + to_string(input_shape));
  BasicTensor<T> g(input_shape);
  const std::size_t planes = static_cast<std::size_t>(input_shape[0]) * input_shape[1];
  const std::size_t in_plane = g.plane(), out_plane = grad_out.plane();
  for (std::size_t p = 0; p < planes; ++p) {
    T* dst = g.data() + p * in_plane;
    for (std::size_t i = 0; i < out_plane; ++i) dst[argmax[p * out_plane + i]] += grad_out[p * out_plane + i];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Parameter-free bilinear x2 upsampling with half-pixel centers: output
// index i samples input coordinate (i + 0.5) / 2 - 0.5, clamped to the valid
// range. Each axis therefore mixes neighbours with weights 3/4 and 1/4.
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void upsample_line(const T* src, int n, std::size_t src_stride, T* dst, std::size_t dst_stride) {
  const T near{0.75}, far{0.25};
  for (int k = 0; k < n; ++k) {
    const T c = src[k * src_stride];
    const T l = src[std::max(k - 1, 0) * src_stride];
    const T r = src[std::min(k + 1, n - 1) * src_stride];
    dst[(2 * k) * dst_stride] = near * c + far * l;
    dst[(2 * k + 1) * dst_stride] = near * c + far * r;
  }
}

template <class T>
void upsample_line_transpose(const T* grad, int n, std::size_t grad_stride, T* dst, std::size_t dst_stride) {
  const T near{0.75}, far{0.25};
  for (int k = 0; k < n; ++k) dst[k * dst_stride] = T{0};
  for (int k = 0; k < n; ++k) {
    const T ge = grad[(2 * k) * grad_stride];
    const T go = grad[(2 * k + 1) * grad_stride];
    dst[k * dst_stride] += near * (ge + go);
    dst[std::max(k - 1, 0) * dst_stride] += far * ge;
    dst[std::min(k + 1, n - 1) * dst_stride] += far * go;
  }
}

}  // namespace detail

template <class T>
BasicTensor<T> bilinear_upsample2x(const BasicTensor<T>& input) {
  require_rank(input.shape(), 4, "bilinear_upsample2x input");
  const int h = input.height(), w = input.width();
  BasicTensor<T> out({input.batch(), input.channels(), 2 * h, 2 * w});
  std::vector<T> rows(static_cast<std::size_t>(h) * 2 * w);
  const std::size_t planes = static_cast<std::size_t>(input.batch()) * input.channels();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = input.data() + p * input.plane();
    T* dst = out.data() + p * out.plane();
    for (int y = 0; y < h; ++y) detail::upsample_line(src + y * w, w, 1, rows.data() + y * 2 * w, 1);
    for (int x = 0; x < 2 * w; ++x) detail::upsample_line(rows.data() + x, h, 2 * w, dst + x, 2 * w);
  }
  return out;
}

template <class T>
BasicTensor<T> bilinear_upsample2x_backward(const BasicTensor<T>& grad_out) {
  require_rank(grad_out.shape(), 4, "bilinear_upsample2x_backward grad");
  if (grad_out.height() % 2 != 0 || grad_out.width() % 2 != 0)
    fail(ErrorCategory::shape, "bilinear_upsample2x_backward: odd gradient extent " + to_string(grad_out.shape()));
  const int h = grad_out.height() / 2, w = grad_out.width() / 2;
  BasicTensor<T> g({grad_out.batch(), grad_out.channels(), h, w});
  std::vector<T> rows(static_cast<std::size_t>(h) * 2 * w);
  const std::size_t planes = static_cast<std::size_t>(grad_out.batch()) * grad_out.channels();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = grad_out.data() + p * grad_out.plane();
    T* dst = g.data() + p * g.plane();
    for (int x = 0; x < 2 * w; ++x) detail::upsample_line_transpose(src + x, h, 2 * w, rows.data() + x, 2 * w);
    for (int y = 0; y < h; ++y) detail::upsample_line_transpose(rows.data() + y * 2 * w, w, 1, dst + y * w, 1);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Channel concatenation used by the skip connections.
// ---------------------------------------------------------------------------

template <class T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 4, "concat_channels");
  require_rank(b.shape(), 4, "concat_channels");
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width())
    fail(ErrorCategory::shape, "concat_channels: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  BasicTensor<T> out({a.batch(), a.channels() + b.channels(), a.height(), a.width()});
  const std::size_t sa = a.size() / a.batch(), sb = b.size() / b.batch();
  for (int n = 0; n < a.batch(); ++n) {
    T* dst = out.data() + n * (sa + sb);
    std::copy_n(a.data() + n * sa, sa, dst);
    std::copy_n(b.data() + n * sb, sb, dst + sa);
  }
  return out;
}

/// Inverse of concat_channels for gradients: first `channels` go to the
/// first result.
template <class T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& t, int channels) {
  require_rank(t.shape(), 4, "split_channels");
  if (channels < 0 || channels > t.channels()) fail(ErrorCategory::shape, "split_channels: bad channel split");
  BasicTensor<T> a({t.batch(), channels, t.height(), t.width()});
  BasicTensor<T> b({t.batch(), t.channels() - channels, t.height(), t.width()});
  const std::size_t sa = a.size() / t.batch(), sb = b.size() / t.batch();
  for (int n = 0; n < t.batch(); ++n) {
    const T* src = t.data() + n * (sa + sb);
    std::copy_n(src, sa, a.data() + n * sa);
    std::copy_n(src + sa, sb, b.data() + n * sb);
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling).
// ---------------------------------------------------------------------------

template <class T>
struct DropoutResult {
  BasicTensor<T> output;
  /// Per-element multiplier applied in the forward pass: 0 or 1/(1-rate).
  /// Empty when the op was the identity.
  std::vector<T> scale;
};

template <class T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0) || rate >= 1.0)
    fail(ErrorCategory::value, "dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return {input, {}};
  DropoutResult<T> r{BasicTensor<T>(input.shape()), std::vector<T>(input.size())};
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < input.size(); ++i) {
    r.scale[i] = rng.uniform() < rate ? T{0} : keep_scale;
    r.output[i] = input[i] * r.scale[i];
  }
  return r;
}

template <class T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_out, std::span<const T> scale) {
  if (scale.empty()) return grad_out;
  if (scale.size() != grad_out.size()) fail(ErrorCategory::shape, "dropout_backward: mask size mismatch");
  BasicTensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * scale[i];
  return g;
}

// ---------------------------------------------------------------------------
// Sigmoid + binary cross-entropy, mean over all elements.
// ---------------------------------------------------------------------------

template <class T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <class T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad;  // d loss / d logits
};

template <class T>
LossResult<T> sigmoid_bce_loss(const BasicTensor<T>& logits, const BasicTensor<T>& targets) {
  if (logits.shape() != targets.shape())
    fail(ErrorCategory::shape, "sigmoid_bce_loss: logits " + to_string(logits.shape()) + " vs targets " +
                                   to_string(targets.shape()));
  if (logits.empty()) fail(ErrorCategory::shape, "sigmoid_bce_loss: empty input");
  LossResult<T> r{0.0, BasicTensor<T>(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const T t = targets[i];
    if (t != T{0} && t != T{1})
      fail(ErrorCategory::value, "sigmoid_bce_loss: target at index " + std::to_string(i) + " is not 0 or 1");
    const double x = static_cast<double>(logits[i]);
    total += std::max(x, 0.0) - x * static_cast<double>(t) + std::log1p(std::exp(-std::abs(x)));
    r.grad[i] = static_cast<T>((static_cast<double>(sigmoid(logits[i])) - static_cast<double>(t)) * inv_n);
  }
  r.loss = total * inv_n;
  return r;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamState {
  AdamHyper hyper;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamHyper h) : hyper(h), first_moment(n, T{0}), second_moment(n, T{0}) {}
};

template <class T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state) {
  if (param.size() != grad.size())
    fail(ErrorCategory::shape, "adam_step: parameter has " + std::to_string(param.size()) + " values, gradient " +
                                   std::to_string(grad.size()));
  if (state.first_moment.empty() && state.step == 0) {
    state.first_moment.assign(param.size(), T{0});
    state.second_moment.assign(param.size(), T{0});
  }
  if (state.first_moment.size() != param.size() || state.second_moment.size() != param.size())
    fail(ErrorCategory::shape, "adam_step: moment buffers do not match parameter size");
  const auto& h = state.hyper;
  state.step += 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = h.beta1 * state.first_moment[i] + (1.0 - h.beta1) * g;
    const double v = h.beta2 * state.second_moment[i] + (1.0 - h.beta2) * g * g;
    state.first_moment[i] = static_cast<T>(m);
    state.second_moment[i] = static_cast<T>(v);
    const double update = h.learning_rate * (m / c1) / (std::sqrt(v / c2) + h.epsilon);
    param[i] = static_cast<T>(static_cast<double>(param[i]) - update);
  }
}

}  // namespace mito
