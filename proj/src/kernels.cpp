// Copyright 2026 The icefuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "icefuse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "icefuse/error.hpp"
#include "kernel_checks.hpp"

namespace icefuse::kernels {

using detail::ConvGeometry;
using detail::valid_range;

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, int dilation) {
  const ConvGeometry g = detail::check_conv(input, kernels, &bias, dilation);
  const long plane = g.h * g.w;
  Tensor out({static_cast<std::size_t>(g.cout), static_cast<std::size_t>(g.h), static_cast<std::size_t>(g.w)});
  const double* in = input.data();
  const double* wts = kernels.data();
  double* res = out.data();

#pragma omp parallel for schedule(static)
  for (long o = 0; o < g.cout; ++o) {
    double* dst = res + o * plane;
    std::fill(dst, dst + plane, bias[o]);
    for (long i = 0; i < g.cin; ++i) {
      const double* src = in + i * plane;
      const double* wk = wts + (o * g.cin + i) * g.k * g.k;
      for (long ky = 0; ky < g.k; ++ky) {
        const long dy = (ky - g.radius) * g.dilation;
        const auto [y0, y1] = valid_range(g.h, dy);
        for (long kx = 0; kx < g.k; ++kx) {
          const long dx = (kx - g.radius) * g.dilation;
          const auto [x0, x1] = valid_range(g.w, dx);
          if (y0 >= y1 || x0 >= x1) continue;
          const double wv = wk[ky * g.k + kx];
          for (long y = y0; y < y1; ++y) {
            double* orow = dst + y * g.w;
            const double* irow = src + (y + dy) * g.w + dx;
            for (long x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, int dilation, const Tensor& grad_output,
                            bool want_input_grad) {
  const ConvGeometry g = detail::check_conv(input, kernels, nullptr, dilation);
  require(grad_output.shape() == Shape{static_cast<std::size_t>(g.cout), static_cast<std::size_t>(g.h),
                                       static_cast<std::size_t>(g.w)},
          ErrorKind::kDimension, "conv2d_backward: gradient shape " + shape_string(grad_output.shape()));
  const long plane = g.h * g.w;
  const long taps = g.k * g.k;
  Conv2dGrads grads;
  grads.kernels = Tensor::zeros_like(kernels);
  grads.bias = Tensor({static_cast<std::size_t>(g.cout)});
  const double* in = input.data();
  const double* gout = grad_output.data();
  const double* wts = kernels.data();

  for (long o = 0; o < g.cout; ++o) {
    double acc = 0.0;
    const double* src = gout + o * plane;
    for (long p = 0; p < plane; ++p) acc += src[p];
    grads.bias[o] = acc;
  }

  double* gk = grads.kernels.data();
#pragma omp parallel for schedule(static)
  for (long oi = 0; oi < g.cout * g.cin; ++oi) {
    const long o = oi / g.cin;
    const long i = oi % g.cin;
    const double* gsrc = gout + o * plane;
    const double* isrc = in + i * plane;
    for (long ky = 0; ky < g.k; ++ky) {
      const long dy = (ky - g.radius) * g.dilation;
      const auto [y0, y1] = valid_range(g.h, dy);
      for (long kx = 0; kx < g.k; ++kx) {
        const long dx = (kx - g.radius) * g.dilation;
        const auto [x0, x1] = valid_range(g.w, dx);
        // Blocks of kLanes columns accumulate down the rows independently,
        // then fold into the total in a fixed order.
        constexpr long kLanes = 16;
        double total = 0.0;
        long x = x0;
        for (; x + kLanes <= x1; x += kLanes) {
          double lanes[kLanes] = {};
          for (long y = y0; y < y1; ++y) {
            const double* grow = gsrc + y * g.w + x;
            const double* irow = isrc + (y + dy) * g.w + dx + x;
            for (long j = 0; j < kLanes; ++j) lanes[j] += grow[j] * irow[j];
          }
          for (long j = 0; j < kLanes; ++j) total += lanes[j];
        }
        for (; x < x1; ++x) {
          double column = 0.0;
          for (long y = y0; y < y1; ++y) column += gsrc[y * g.w + x] * isrc[(y + dy) * g.w + dx + x];
          total += column;
        }
        gk[oi * taps + ky * g.k + kx] = total;
      }
    }
  }

  if (!want_input_grad) return grads;

  grads.input = Tensor::zeros_like(input);
  double* gin = grads.input.data();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < g.cin; ++i) {
    double* dst = gin + i * plane;
    for (long o = 0; o < g.cout; ++o) {
      const double* gsrc = gout + o * plane;
      const double* wk = wts + (o * g.cin + i) * taps;
      for (long ky = 0; ky < g.k; ++ky) {
        const long dy = (ky - g.radius) * g.dilation;
        const auto [y0, y1] = valid_range(g.h, dy);
        for (long kx = 0; kx < g.k; ++kx) {
          const long dx = (kx - g.radius) * g.dilation;
          const auto [x0, x1] = valid_range(g.w, dx);
          if (y0 >= y1 || x0 >= x1) continue;
          const double wv = wk[ky * g.k + kx];
          for (long y = y0; y < y1; ++y) {
            double* irow = dst + (y + dy) * g.w + dx;
            const double* grow = gsrc + y * g.w;
            for (long x = x0; x < x1; ++x) irow[x] += wv * grow[x];
          }
        }
      }
    }
  }
  return grads;
}

namespace {

// Separable box sum along one axis of a [rows, cols] plane, window offsets
// [lo, hi] relative to each output index, clipped to the plane.
void box_rows(const double* src, double* dst, long rows, long cols, long lo, long hi) {
  for (long y = 0; y < rows; ++y) {
    const double* s = src + y * cols;
    double* d = dst + y * cols;
    for (long x = 0; x < cols; ++x) {
      const long a = std::max(0L, x + lo);
      const long b = std::min(cols - 1, x + hi);
      double acc = 0.0;
      for (long t = a; t <= b; ++t) acc += s[t];
      d[x] = acc;
    }
  }
}

void box_cols(const double* src, double* dst, long rows, long cols, long lo, long hi) {
  for (long y = 0; y < rows; ++y) {
    const long a = std::max(0L, y + lo);
    const long b = std::min(rows - 1, y + hi);
    double* d = dst + y * cols;
    std::fill(d, d + cols, 0.0);
    for (long t = a; t <= b; ++t) {
      const double* s = src + t * cols;
      for (long x = 0; x < cols; ++x) d[x] += s[x];
    }
  }
}

}  // namespace

Tensor avg_smooth(const Tensor& input, int window) {
  detail::check_window(input, window);
  if (window == 1) return input;
  const long c = static_cast<long>(input.dim(0));
  const long h = static_cast<long>(input.dim(1));
  const long w = static_cast<long>(input.dim(2));
  const long lo = -(window / 2);
  const long hi = lo + window - 1;
  Tensor out = Tensor::zeros_like(input);

#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < c; ++ch) {
    std::vector<double> rows(static_cast<std::size_t>(h * w));
    box_rows(input.data() + ch * h * w, rows.data(), h, w, lo, hi);
    double* dst = out.data() + ch * h * w;
    box_cols(rows.data(), dst, h, w, lo, hi);
    for (long y = 0; y < h; ++y) {
      const long cy = detail::window_count(y, h, lo, hi);
      for (long x = 0; x < w; ++x) {
        dst[y * w + x] /= static_cast<double>(cy * detail::window_count(x, w, lo, hi));
      }
    }
  }
  return out;
}

Tensor avg_smooth_backward(const Tensor& grad_output, int window) {
  detail::check_window(grad_output, window);
  if (window == 1) return grad_output;
  const long c = static_cast<long>(grad_output.dim(0));
  const long h = static_cast<long>(grad_output.dim(1));
  const long w = static_cast<long>(grad_output.dim(2));
  const long lo = -(window / 2);
  const long hi = lo + window - 1;
  Tensor out = Tensor::zeros_like(grad_output);

  // Input pixel t receives from output pixels p with t - p in [lo, hi],
  // i.e. p in [t - hi, t - lo].
#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < c; ++ch) {
    const double* g = grad_output.data() + ch * h * w;
    std::vector<double> scaled(static_cast<std::size_t>(h * w));
    for (long y = 0; y < h; ++y) {
      const long cy = detail::window_count(y, h, lo, hi);
      for (long x = 0; x < w; ++x) {
        scaled[y * w + x] = g[y * w + x] / static_cast<double>(cy * detail::window_count(x, w, lo, hi));
      }
    }
    std::vector<double> rows(static_cast<std::size_t>(h * w));
    box_rows(scaled.data(), rows.data(), h, w, -hi, -lo);
    box_cols(rows.data(), out.data() + ch * h * w, h, w, -hi, -lo);
  }
  return out;
}

Tensor upsample(const Tensor& input, int factor, UpsampleMode mode) {
  require(factor >= 1, ErrorKind::kConfiguration, "upsample factor must be >= 1, got " + std::to_string(factor));
  require(input.rank() == 3, ErrorKind::kDimension, "upsample expects [C,h,w]");
  if (factor == 1) return input;
  const long c = static_cast<long>(input.dim(0));
  const long h = static_cast<long>(input.dim(1));
  const long w = static_cast<long>(input.dim(2));
  const long f = factor;
  const long fh = h * f;
  const long fw = w * f;
  Tensor out({static_cast<std::size_t>(c), static_cast<std::size_t>(fh), static_cast<std::size_t>(fw)});

  if (mode == UpsampleMode::kNearest) {
#pragma omp parallel for schedule(static)
    for (long ch = 0; ch < c; ++ch) {
      const double* src = input.data() + ch * h * w;
      double* dst = out.data() + ch * fh * fw;
      for (long y = 0; y < fh; ++y) {
        const double* srow = src + (y / f) * w;
        for (long x = 0; x < fw; ++x) dst[y * fw + x] = srow[x / f];
      }
    }
    return out;
  }

  const std::vector<detail::LerpTap> ty = detail::lerp_taps(h, f);
  const std::vector<detail::LerpTap> tx = detail::lerp_taps(w, f);
#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < c; ++ch) {
    const double* src = input.data() + ch * h * w;
    double* dst = out.data() + ch * fh * fw;
    for (long y = 0; y < fh; ++y) {
      const detail::LerpTap& a = ty[static_cast<std::size_t>(y)];
      const double* r0 = src + a.lo * w;
      const double* r1 = src + a.hi * w;
      for (long x = 0; x < fw; ++x) {
        const detail::LerpTap& b = tx[static_cast<std::size_t>(x)];
        const double top = (1.0 - b.frac) * r0[b.lo] + b.frac * r0[b.hi];
        const double bottom = (1.0 - b.frac) * r1[b.lo] + b.frac * r1[b.hi];
        dst[y * fw + x] = (1.0 - a.frac) * top + a.frac * bottom;
      }
    }
  }
  return out;
}

BatchNormState BatchNormState::identity(std::size_t channels) {
  return {Tensor({channels}, 0.0), Tensor({channels}, 1.0)};
}

BatchNormOutput batch_norm_forward(const Tensor& input, const Tensor& scale, const Tensor& shift,
                                   const BatchNormState& state, Mode mode, double epsilon) {
  const detail::NormGeometry g = detail::check_norm(input, scale, shift, state, mode, epsilon);
  BatchNormOutput res{Tensor::zeros_like(input), Tensor::zeros_like(input), Tensor({static_cast<std::size_t>(g.c)}),
                      Tensor({static_cast<std::size_t>(g.c)})};
  const double count = static_cast<double>(g.n * g.hw);

#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < g.c; ++ch) {
    double mean = state.running_mean[ch];
    double var = state.running_var[ch];
    if (mode == Mode::kTrain) {
      // Shifted by the first sample: a constant channel gets its mean exactly.
      const double first = input[ch * g.hw];
      double sum = 0.0;
      for (long b = 0; b < g.n; ++b) {
        const double* src = input.data() + (b * g.c + ch) * g.hw;
        for (long p = 0; p < g.hw; ++p) sum += src[p] - first;
      }
      mean = first + sum / count;
      double sq = 0.0;
      for (long b = 0; b < g.n; ++b) {
        const double* src = input.data() + (b * g.c + ch) * g.hw;
        for (long p = 0; p < g.hw; ++p) {
          const double dev = src[p] - mean;
          sq += dev * dev;
        }
      }
      var = sq / count;
    }
    res.mean[ch] = mean;
    res.var[ch] = var;
    const double inv = 1.0 / std::sqrt(var + epsilon);
    for (long b = 0; b < g.n; ++b) {
      const long off = (b * g.c + ch) * g.hw;
      for (long p = 0; p < g.hw; ++p) {
        const double xhat = (input[off + p] - mean) * inv;
        res.normalized[off + p] = xhat;
        res.output[off + p] = scale[ch] * xhat + shift[ch];
      }
    }
  }
  return res;
}

void update_running_stats(BatchNormState& state, const BatchNormOutput& batch, double momentum) {
  for (std::size_t ch = 0; ch < state.running_mean.size(); ++ch) {
    state.running_mean[ch] = momentum * state.running_mean[ch] + (1.0 - momentum) * batch.mean[ch];
    state.running_var[ch] = momentum * state.running_var[ch] + (1.0 - momentum) * batch.var[ch];
  }
}

Tensor batch_norm(const Tensor& input, const Tensor& scale, const Tensor& shift, BatchNormState& state, Mode mode,
                  double epsilon) {
  BatchNormOutput res = batch_norm_forward(input, scale, shift, state, mode, epsilon);
  if (mode == Mode::kTrain) update_running_stats(state, res);
  return std::move(res.output);
}

BatchNormGrads batch_norm_backward(const Tensor& grad_output, const BatchNormOutput& forward, const Tensor& scale,
                                   double epsilon) {
  require(grad_output.shape() == forward.normalized.shape(), ErrorKind::kDimension,
          "batch_norm_backward: gradient shape mismatch");
  const long c = static_cast<long>(forward.mean.size());
  const long n = grad_output.rank() == 4 ? static_cast<long>(grad_output.dim(0)) : 1;
  const long hw = static_cast<long>(grad_output.size()) / (n * c);
  const double count = static_cast<double>(n * hw);
  BatchNormGrads grads{Tensor::zeros_like(grad_output), Tensor({static_cast<std::size_t>(c)}),
                       Tensor({static_cast<std::size_t>(c)})};

#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < c; ++ch) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (long b = 0; b < n; ++b) {
      const long off = (b * c + ch) * hw;
      for (long p = 0; p < hw; ++p) {
        sum_g += grad_output[off + p];
        sum_gx += grad_output[off + p] * forward.normalized[off + p];
      }
    }
    grads.shift[ch] = sum_g;
    grads.scale[ch] = sum_gx;
    const double k = scale[ch] / (std::sqrt(forward.var[ch] + epsilon) * count);
    for (long b = 0; b < n; ++b) {
      const long off = (b * c + ch) * hw;
      for (long p = 0; p < hw; ++p) {
        grads.input[off + p] = k * (count * grad_output[off + p] - sum_g - forward.normalized[off + p] * sum_gx);
      }
    }
  }
  return grads;
}

Tensor relu(const Tensor& input) {
  Tensor out = Tensor::zeros_like(input);
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& grad_output, const Tensor& input) {
  require(grad_output.shape() == input.shape(), ErrorKind::kDimension, "relu_backward: shape mismatch");
  Tensor out = Tensor::zeros_like(input);
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
  return out;
}

Tensor sigmoid(const Tensor& input) {
  constexpr double kLow = std::numeric_limits<double>::denorm_min();
  constexpr double kHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  Tensor out = Tensor::zeros_like(input);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double x = input[i];
    double p;
    if (x >= 0.0) {
      p = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      p = e / (1.0 + e);
    }
    out[i] = std::clamp(p, kLow, kHigh);
  }
  return out;
}

void check_rate(double rate) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::kConfiguration,
          "dropout rate must lie in [0, 1), got " + std::to_string(rate));
}

Tensor dropout_mask(const Shape& shape, double rate, SeededRng rng) {
  check_rate(rate);
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

Tensor dropout(const Tensor& input, double rate, SeededRng& rng, Mode mode) {
  check_rate(rate);
  if (mode == Mode::kEval || rate == 0.0) return input;
  const double keep = 1.0 / (1.0 - rate);
  Tensor out = Tensor::zeros_like(input);
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = rng.uniform() < rate ? 0.0 : input[i] * keep;
  return out;
}

}  // namespace icefuse::kernels
