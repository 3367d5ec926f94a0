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
#include <cmath>

#include "icefuse/kernels.hpp"
#include "kernel_checks.hpp"

namespace icefuse::reference {

namespace detail = kernels::detail;

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, int dilation) {
  const auto g = detail::check_conv(input, kernels, &bias, dilation);
  Tensor out({static_cast<std::size_t>(g.cout), input.dim(1), input.dim(2)});
  for (long o = 0; o < g.cout; ++o) {
    for (long y = 0; y < g.h; ++y) {
      for (long x = 0; x < g.w; ++x) {
        double acc = bias[o];
        for (long i = 0; i < g.cin; ++i) {
          for (long ky = 0; ky < g.k; ++ky) {
            for (long kx = 0; kx < g.k; ++kx) {
              const long sy = y + (ky - g.radius) * g.dilation;
              const long sx = x + (kx - g.radius) * g.dilation;
              if (sy < 0 || sy >= g.h || sx < 0 || sx >= g.w) continue;
              acc += kernels[((o * g.cin + i) * g.k + ky) * g.k + kx] * input.at(i, sy, sx);
            }
          }
        }
        out.at(o, y, x) = acc;
      }
    }
  }
  return out;
}

kernels::Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, int dilation,
                                     const Tensor& grad_output) {
  const auto g = detail::check_conv(input, kernels, nullptr, dilation);
  kernels::Conv2dGrads grads{Tensor::zeros_like(input), Tensor::zeros_like(kernels),
                             Tensor({static_cast<std::size_t>(g.cout)})};
  for (long o = 0; o < g.cout; ++o) {
    for (long y = 0; y < g.h; ++y) {
      for (long x = 0; x < g.w; ++x) {
        const double gv = grad_output.at(o, y, x);
        grads.bias[o] += gv;
        for (long i = 0; i < g.cin; ++i) {
          for (long ky = 0; ky < g.k; ++ky) {
            for (long kx = 0; kx < g.k; ++kx) {
              const long sy = y + (ky - g.radius) * g.dilation;
              const long sx = x + (kx - g.radius) * g.dilation;
              if (sy < 0 || sy >= g.h || sx < 0 || sx >= g.w) continue;
              const long widx = ((o * g.cin + i) * g.k + ky) * g.k + kx;
              grads.kernels[widx] += gv * input.at(i, sy, sx);
              grads.input.at(i, sy, sx) += gv * kernels[widx];
            }
          }
        }
      }
    }
  }
  return grads;
}

Tensor avg_smooth(const Tensor& input, int window) {
  detail::check_window(input, window);
  const long h = static_cast<long>(input.dim(1));
  const long w = static_cast<long>(input.dim(2));
  const long lo = -(window / 2);
  const long hi = lo + window - 1;
  Tensor out = Tensor::zeros_like(input);
  for (std::size_t c = 0; c < input.dim(0); ++c) {
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        long count = 0;
        for (long dy = lo; dy <= hi; ++dy) {
          for (long dx = lo; dx <= hi; ++dx) {
            const long sy = y + dy;
            const long sx = x + dx;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
            acc += input.at(c, sy, sx);
            ++count;
          }
        }
        out.at(c, y, x) = acc / static_cast<double>(count);
      }
    }
  }
  return out;
}

Tensor avg_smooth_backward(const Tensor& grad_output, int window) {
  detail::check_window(grad_output, window);
  const long h = static_cast<long>(grad_output.dim(1));
  const long w = static_cast<long>(grad_output.dim(2));
  const long lo = -(window / 2);
  const long hi = lo + window - 1;
  Tensor out = Tensor::zeros_like(grad_output);
  for (std::size_t c = 0; c < grad_output.dim(0); ++c) {
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        const long count = detail::window_count(y, h, lo, hi) * detail::window_count(x, w, lo, hi);
        const double share = grad_output.at(c, y, x) / static_cast<double>(count);
        for (long dy = lo; dy <= hi; ++dy) {
          for (long dx = lo; dx <= hi; ++dx) {
            const long sy = y + dy;
            const long sx = x + dx;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
            out.at(c, sy, sx) += share;
          }
        }
      }
    }
  }
  return out;
}

Tensor upsample(const Tensor& input, int factor, UpsampleMode mode) {
  require(factor >= 1, ErrorKind::kConfiguration, "upsample factor must be >= 1");
  require(input.rank() == 3, ErrorKind::kDimension, "upsample expects [C,h,w]");
  const long h = static_cast<long>(input.dim(1));
  const long w = static_cast<long>(input.dim(2));
  const long f = factor;
  Tensor out({input.dim(0), static_cast<std::size_t>(h * f), static_cast<std::size_t>(w * f)});
  for (std::size_t c = 0; c < input.dim(0); ++c) {
    for (long y = 0; y < h * f; ++y) {
      for (long x = 0; x < w * f; ++x) {
        if (mode == UpsampleMode::kNearest) {
          out.at(c, y, x) = input.at(c, y / f, x / f);
          continue;
        }
        const double uy = std::clamp((y + 0.5) / static_cast<double>(f) - 0.5, 0.0, static_cast<double>(h - 1));
        const double ux = std::clamp((x + 0.5) / static_cast<double>(f) - 0.5, 0.0, static_cast<double>(w - 1));
        const long y0 = static_cast<long>(std::floor(uy));
        const long x0 = static_cast<long>(std::floor(ux));
        const long y1 = std::min(y0 + 1, h - 1);
        const long x1 = std::min(x0 + 1, w - 1);
        const double fy = uy - static_cast<double>(y0);
        const double fx = ux - static_cast<double>(x0);
        const double top = (1.0 - fx) * input.at(c, y0, x0) + fx * input.at(c, y0, x1);
        const double bottom = (1.0 - fx) * input.at(c, y1, x0) + fx * input.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

kernels::BatchNormOutput batch_norm_forward(const Tensor& input, const Tensor& scale, const Tensor& shift,
                                            const kernels::BatchNormState& state, Mode mode, double epsilon) {
  const auto g = detail::check_norm(input, scale, shift, state, mode, epsilon);
  kernels::BatchNormOutput res{Tensor::zeros_like(input), Tensor::zeros_like(input),
                               Tensor({static_cast<std::size_t>(g.c)}), Tensor({static_cast<std::size_t>(g.c)})};
  const double count = static_cast<double>(g.n * g.hw);
  for (long ch = 0; ch < g.c; ++ch) {
    double mean = state.running_mean[ch];
    double var = state.running_var[ch];
    if (mode == Mode::kTrain) {
      const double first = input[ch * g.hw];
      double sum = 0.0;
      for (long b = 0; b < g.n; ++b)
        for (long p = 0; p < g.hw; ++p) sum += input[(b * g.c + ch) * g.hw + p] - first;
      mean = first + sum / count;
      double sq = 0.0;
      for (long b = 0; b < g.n; ++b)
        for (long p = 0; p < g.hw; ++p) {
          const double dev = input[(b * g.c + ch) * g.hw + p] - mean;
          sq += dev * dev;
        }
      var = sq / count;
    }
    res.mean[ch] = mean;
    res.var[ch] = var;
    for (long b = 0; b < g.n; ++b)
      for (long p = 0; p < g.hw; ++p) {
        const long idx = (b * g.c + ch) * g.hw + p;
        res.normalized[idx] = (input[idx] - mean) / std::sqrt(var + epsilon);
        res.output[idx] = scale[ch] * res.normalized[idx] + shift[ch];
      }
  }
  return res;
}

}  // namespace icefuse::reference
