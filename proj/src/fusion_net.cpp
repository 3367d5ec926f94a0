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
#include "icefuse/fusion_net.hpp"

#include <cmath>

#include "icefuse/error.hpp"

namespace icefuse {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kSmall: return "small";
    case Variant::kLarge: return "large";
    case Variant::kCustom: return "custom";
  }
  return "custom";
}

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "linear"; }

std::string to_string(UpsampleMode m) { return m == UpsampleMode::kNearest ? "nearest" : "bilinear"; }

Variant parse_variant(const std::string& s) {
  if (s == "small") return Variant::kSmall;
  if (s == "large") return Variant::kLarge;
  if (s == "custom") return Variant::kCustom;
  fail(ErrorKind::kUsage, "unknown variant '" + s + "' (expected small or large)");
}

Activation parse_activation(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "relu") return Activation::kRelu;
  fail(ErrorKind::kUsage, "unknown mixing activation '" + s + "' (expected linear or relu)");
}

UpsampleMode parse_upsample_mode(const std::string& s) {
  if (s == "nearest") return UpsampleMode::kNearest;
  if (s == "bilinear") return UpsampleMode::kBilinear;
  fail(ErrorKind::kUsage, "unknown upsample mode '" + s + "' (expected nearest or bilinear)");
}

std::string scale_group_name(int dilation) { return "scale-" + std::to_string(dilation); }

ModelConfig ModelConfig::small() { return ModelConfig{}; }

ModelConfig ModelConfig::large() {
  ModelConfig cfg;
  cfg.variant = Variant::kLarge;
  cfg.branch_width = 28;
  return cfg;
}

ModelConfig ModelConfig::for_variant(Variant v) {
  require(v != Variant::kCustom, ErrorKind::kConfiguration, "custom variant has no preset");
  return v == Variant::kSmall ? small() : large();
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorKind::kConfiguration, msg); };
  if (scale0_width == 0 || branch_width == 0 || mwr_channels == 0 || sar_channels == 0) bad("group widths must be positive");
  if (variant == Variant::kSmall && (scale0_width != 14 || branch_width != 14 || mwr_channels != 14))
    bad("small variant requires every group width to be 14");
  if (variant == Variant::kLarge && (scale0_width != 14 || branch_width != 28 || mwr_channels != 14))
    bad("large variant requires widths 14 (scale-0, btemp) and 28 (dilated scales)");
  if (dilation_rates.empty()) bad("at least one dilation rate is required");
  for (std::size_t i = 0; i < dilation_rates.size(); ++i) {
    if (dilation_rates[i] < 2) bad("dilation rates must be >= 2");
    if (i > 0 && dilation_rates[i] <= dilation_rates[i - 1]) bad("dilation rates must be strictly increasing");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) bad("kernel size must be odd and positive");
  if (stem_depth < 1) bad("stem depth must be >= 1");
  if (branch_depth < 2 || branch_depth % 2 != 0) bad("branch depth must be a positive even number");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad("dropout rate must lie in [0, 1)");
  if (mwr_factor < 1) bad("mwr factor must be >= 1");
}

std::vector<InputGroup> ModelConfig::groups() const {
  std::vector<InputGroup> out;
  std::size_t start = 0;
  out.push_back({kScale0Group, start, scale0_width});
  start += scale0_width;
  for (int d : dilation_rates) {
    out.push_back({scale_group_name(d), start, branch_width});
    start += branch_width;
  }
  out.push_back({kBtempGroup, start, mwr_channels});
  return out;
}

std::size_t ModelConfig::mixing_width() const {
  return scale0_width + dilation_rates.size() * branch_width + mwr_channels;
}

std::vector<std::pair<std::string, Tensor*>> NetworkParameters::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t l = 0; l < stem.size(); ++l) {
    out.emplace_back("stem." + std::to_string(l) + ".weight", &stem[l].weight);
    out.emplace_back("stem." + std::to_string(l) + ".bias", &stem[l].bias);
  }
  for (auto& b : branches) {
    const std::string prefix = "branch.d" + std::to_string(b.dilation);
    for (std::size_t l = 0; l < b.convs.size(); ++l) {
      out.emplace_back(prefix + ".conv." + std::to_string(l) + ".weight", &b.convs[l].weight);
      out.emplace_back(prefix + ".conv." + std::to_string(l) + ".bias", &b.convs[l].bias);
    }
    for (std::size_t p = 0; p < b.norms.size(); ++p) {
      out.emplace_back(prefix + ".norm." + std::to_string(p) + ".scale", &b.norms[p].scale);
      out.emplace_back(prefix + ".norm." + std::to_string(p) + ".shift", &b.norms[p].shift);
    }
  }
  out.emplace_back("mixing.coefficients", &mixing_coefficients);
  out.emplace_back("mixing.bias", &mixing_bias);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> NetworkParameters::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<NetworkParameters*>(this)->named_tensors()) out.emplace_back(name, t);
  return out;
}

NetworkParameters NetworkParameters::zeros_like() const {
  NetworkParameters z = *this;
  for (auto& [name, t] : z.named_tensors()) t->fill(0.0);
  return z;
}

std::size_t NetworkParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_tensors()) n += t->size();
  return n;
}

const InputGroup& FusionNetwork::group(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return g;
  fail(ErrorKind::kUsage, "no input group named '" + name + "'");
}

namespace {

// Stable per-layer stream ids, so inserting layers never shifts the draws of
// existing ones.
constexpr std::uint64_t kMixingStream = 1;
std::uint64_t stem_stream(std::size_t layer) { return 100 + layer; }
std::uint64_t branch_stream(std::size_t branch, std::size_t layer) { return 1000 + 100 * branch + layer; }
std::uint64_t dropout_stream(std::size_t branch, std::size_t pair) { return 50000 + 100 * branch + pair; }

ConvLayer init_conv(std::size_t cout, std::size_t cin, int k, SeededRng rng) {
  const auto kk = static_cast<std::size_t>(k);
  ConvLayer layer{Tensor({cout, cin, kk, kk}), Tensor({cout})};
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * kk * kk));
  for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
  return layer;
}

Tensor apply_activation(const Tensor& x, Activation a) { return a == Activation::kRelu ? kernels::relu(x) : x; }

void check_inputs(const FusionNetwork& net, const Tensor& sar, const Tensor& mwr) {
  const ModelConfig& cfg = net.config;
  require(sar.rank() == 3 && sar.dim(0) == cfg.sar_channels, ErrorKind::kDimension,
          "sar must be [" + std::to_string(cfg.sar_channels) + ",H,W], got " + shape_string(sar.shape()));
  require(mwr.rank() == 3 && mwr.dim(0) == cfg.mwr_channels, ErrorKind::kDimension,
          "mwr must be [" + std::to_string(cfg.mwr_channels) + ",h,w], got " + shape_string(mwr.shape()));
  const auto f = static_cast<std::size_t>(cfg.mwr_factor);
  require(sar.dim(1) == mwr.dim(1) * f && sar.dim(2) == mwr.dim(2) * f, ErrorKind::kDimension,
          "grid mismatch: sar " + shape_string(sar.shape()) + " vs mwr " + shape_string(mwr.shape()) +
              " at factor " + std::to_string(f));
}

}  // namespace

FusionNetwork build(const ModelConfig& config, const SeededRng& rng) {
  config.validate();
  FusionNetwork net;
  net.config = config;
  net.groups = config.groups();
  const int k = config.kernel_size;

  std::size_t cin = config.sar_channels;
  for (int l = 0; l < config.stem_depth; ++l) {
    net.params.stem.push_back(init_conv(config.scale0_width, cin, k, rng.derive(stem_stream(l))));
    cin = config.scale0_width;
  }

  for (std::size_t b = 0; b < config.dilation_rates.size(); ++b) {
    BranchParameters branch;
    branch.dilation = config.dilation_rates[b];
    std::size_t in = config.scale0_width;
    for (int l = 0; l < config.branch_depth; ++l) {
      branch.convs.push_back(init_conv(config.branch_width, in, k, rng.derive(branch_stream(b, l))));
      in = config.branch_width;
    }
    std::vector<kernels::BatchNormState> states;
    for (int p = 0; p < config.branch_depth / 2; ++p) {
      branch.norms.push_back({Tensor({config.branch_width}, 1.0), Tensor({config.branch_width}, 0.0)});
      states.push_back(kernels::BatchNormState::identity(config.branch_width));
    }
    net.params.branches.push_back(std::move(branch));
    net.norm_state.push_back(std::move(states));
  }

  const std::size_t d = config.mixing_width();
  net.params.mixing_coefficients = Tensor({d});
  SeededRng mix_rng = rng.derive(kMixingStream);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& c : net.params.mixing_coefficients.values()) c = mix_rng.uniform(-bound, bound);
  net.params.mixing_bias = Tensor({1});
  return net;
}

Tensor stem_forward(const FusionNetwork& net, const Tensor& sar) {
  Tensor x = sar;
  for (const auto& layer : net.params.stem) x = kernels::conv2d(x, layer.weight, layer.bias, 1);
  return x;
}

namespace {

Tensor run_branch(const FusionNetwork& net, std::size_t b, const Tensor& stem_out, Mode mode, const SeededRng& rng,
                  bool keep, BranchCache& bc) {
  const ModelConfig& cfg = net.config;
  const BranchParameters& branch = net.params.branches[b];
  Tensor a = kernels::avg_smooth(stem_out, branch.dilation);
  if (keep) bc.smoothed = a;
  for (std::size_t p = 0; p < branch.norms.size(); ++p) {
    PairCache pc;
    const ConvLayer& c1 = branch.convs[2 * p];
    const ConvLayer& c2 = branch.convs[2 * p + 1];
    Tensor mid = kernels::conv2d(a, c1.weight, c1.bias, branch.dilation);
    Tensor pre = kernels::conv2d(mid, c2.weight, c2.bias, branch.dilation);
    Tensor act = kernels::relu(pre);
    kernels::BatchNormOutput norm =
        kernels::batch_norm_forward(act, branch.norms[p].scale, branch.norms[p].shift, net.norm_state[b][p], mode);
    Tensor out = norm.output;
    if (mode == Mode::kTrain && cfg.dropout_rate > 0.0) {
      pc.dropout_mask = kernels::dropout_mask(out.shape(), cfg.dropout_rate, rng.derive(dropout_stream(b, p)));
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pc.dropout_mask[i];
    }
    if (keep) {
      pc.input = std::move(a);
      pc.mid = std::move(mid);
      pc.pre_relu = std::move(pre);
      pc.norm = std::move(norm);
    } else if (mode == Mode::kTrain) {
      pc.norm.mean = std::move(norm.mean);
      pc.norm.var = std::move(norm.var);
    }
    bc.pairs.push_back(std::move(pc));
    a = std::move(out);
  }
  Tensor result = apply_activation(a, cfg.mixing_activation);
  if (keep) bc.pre_activation = std::move(a);
  return result;
}

ForwardResult run_forward(const FusionNetwork& net, const Tensor& sar, const Tensor& mwr, Mode mode,
                          const SeededRng& rng, bool keep) {
  check_inputs(net, sar, mwr);
  const ModelConfig& cfg = net.config;
  ForwardResult res;
  ForwardCache& cache = res.cache;
  cache.mode = mode;
  cache.revision = net.revision;

  Tensor x = sar;
  for (const auto& layer : net.params.stem) {
    if (keep) cache.stem_inputs.push_back(x);
    x = kernels::conv2d(x, layer.weight, layer.bias, 1);
  }
  const Tensor stem_out = std::move(x);

  std::vector<Tensor> branch_outputs;
  for (std::size_t b = 0; b < net.params.branches.size(); ++b) {
    BranchCache bc;
    branch_outputs.push_back(run_branch(net, b, stem_out, mode, rng, keep, bc));
    cache.branches.push_back(std::move(bc));
  }

  const Tensor btemp = kernels::upsample(mwr, cfg.mwr_factor, cfg.upsample_mode);
  std::vector<const Tensor*> parts{&stem_out};
  for (const auto& t : branch_outputs) parts.push_back(&t);
  parts.push_back(&btemp);
  res.mixing_inputs = concat_channels(parts);

  const std::size_t h = sar.dim(1);
  const std::size_t w = sar.dim(2);
  const std::size_t plane = h * w;
  Tensor logit({1, h, w}, net.params.mixing_bias[0]);
  for (std::size_t i = 0; i < net.mixing_width(); ++i) {
    const double c = net.params.mixing_coefficients[i];
    const double* m = res.mixing_inputs.data() + i * plane;
    for (std::size_t p = 0; p < plane; ++p) logit[p] += c * m[p];
  }
  res.prob = kernels::sigmoid(logit);

  if (keep) {
    cache.stem_output = stem_out;
    cache.mixing_inputs = res.mixing_inputs;
    cache.prob = res.prob;
    cache.valid = true;
  }
  return res;
}

}  // namespace

ForwardResult forward(const FusionNetwork& net, const Tensor& sar, const Tensor& mwr, Mode mode, const SeededRng& rng) {
  return run_forward(net, sar, mwr, mode, rng, true);
}

ForwardResult forward_eval(const FusionNetwork& net, const Tensor& sar, const Tensor& mwr) {
  return run_forward(net, sar, mwr, Mode::kEval, SeededRng(0), false);
}

Tensor branch_forward(const FusionNetwork& net, std::size_t branch, const Tensor& stem_output, Mode mode,
                      const SeededRng& rng) {
  require(branch < net.params.branches.size(), ErrorKind::kUsage, "branch index out of range");
  BranchCache bc;
  return run_branch(net, branch, stem_output, mode, rng, false, bc);
}

void apply_running_stats(FusionNetwork& net, const ForwardCache& cache) {
  require(cache.mode == Mode::kTrain, ErrorKind::kUsage, "running statistics come from train-mode passes only");
  require(cache.branches.size() == net.norm_state.size(), ErrorKind::kUsage, "cache does not match network");
  for (std::size_t b = 0; b < cache.branches.size(); ++b)
    for (std::size_t p = 0; p < cache.branches[b].pairs.size(); ++p)
      kernels::update_running_stats(net.norm_state[b][p], cache.branches[b].pairs[p].norm);
}

ParameterGradients backward(const FusionNetwork& net, const ForwardCache& cache, const Tensor& grad_prob) {
  require(cache.valid, ErrorKind::kUsage, "backward called without a forward cache");
  require(grad_prob.shape() == cache.prob.shape(), ErrorKind::kDimension, "grad_prob shape mismatch");
  Tensor grad_logit = Tensor::zeros_like(grad_prob);
  for (std::size_t i = 0; i < grad_prob.size(); ++i) {
    const double p = cache.prob[i];
    grad_logit[i] = grad_prob[i] * p * (1.0 - p);
  }
  return backward_logit(net, cache, grad_logit);
}

ParameterGradients backward_logit(const FusionNetwork& net, const ForwardCache& cache, const Tensor& grad_logit) {
  require(cache.valid, ErrorKind::kUsage, "backward called without a forward cache");
  require(cache.mode == Mode::kTrain, ErrorKind::kUsage, "backward requires a train-mode forward cache");
  require(cache.revision == net.revision, ErrorKind::kUsage, "forward cache is stale: parameters changed since forward");
  require(grad_logit.shape() == cache.prob.shape(), ErrorKind::kDimension, "gradient shape mismatch");

  const ModelConfig& cfg = net.config;
  ParameterGradients grads = net.params.zeros_like();
  const std::size_t h = cache.prob.dim(1);
  const std::size_t w = cache.prob.dim(2);
  const std::size_t plane = h * w;
  const std::size_t d = net.mixing_width();

  double db = 0.0;
  for (std::size_t p = 0; p < plane; ++p) db += grad_logit[p];
  grads.mixing_bias[0] = db;

  Tensor grad_mix({d, h, w});
  for (std::size_t i = 0; i < d; ++i) {
    const double* m = cache.mixing_inputs.data() + i * plane;
    const double c = net.params.mixing_coefficients[i];
    double* gm = grad_mix.data() + i * plane;
    double acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
      acc += grad_logit[p] * m[p];
      gm[p] = c * grad_logit[p];
    }
    grads.mixing_coefficients[i] = acc;
  }

  const InputGroup& scale0 = net.groups.front();
  Tensor grad_stem = slice_channels(grad_mix, scale0.start, scale0.width);

  for (std::size_t b = 0; b < net.params.branches.size(); ++b) {
    const BranchParameters& branch = net.params.branches[b];
    const BranchCache& bc = cache.branches[b];
    BranchParameters& gb = grads.branches[b];
    const InputGroup& grp = net.groups[b + 1];
    Tensor g = slice_channels(grad_mix, grp.start, grp.width);
    if (cfg.mixing_activation == Activation::kRelu) g = kernels::relu_backward(g, bc.pre_activation);

    for (std::size_t p = branch.norms.size(); p-- > 0;) {
      const PairCache& pc = bc.pairs[p];
      if (!pc.dropout_mask.empty())
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= pc.dropout_mask[i];
      kernels::BatchNormGrads ng = kernels::batch_norm_backward(g, pc.norm, branch.norms[p].scale);
      gb.norms[p].scale = std::move(ng.scale);
      gb.norms[p].shift = std::move(ng.shift);
      g = kernels::relu_backward(ng.input, pc.pre_relu);
      kernels::Conv2dGrads c2 = kernels::conv2d_backward(pc.mid, branch.convs[2 * p + 1].weight, branch.dilation, g);
      gb.convs[2 * p + 1] = {std::move(c2.kernels), std::move(c2.bias)};
      kernels::Conv2dGrads c1 = kernels::conv2d_backward(pc.input, branch.convs[2 * p].weight, branch.dilation, c2.input);
      gb.convs[2 * p] = {std::move(c1.kernels), std::move(c1.bias)};
      g = std::move(c1.input);
    }
    const Tensor gs = kernels::avg_smooth_backward(g, branch.dilation);
    for (std::size_t i = 0; i < gs.size(); ++i) grad_stem[i] += gs[i];
  }

  Tensor g = std::move(grad_stem);
  for (std::size_t l = net.params.stem.size(); l-- > 0;) {
    kernels::Conv2dGrads cg = kernels::conv2d_backward(cache.stem_inputs[l], net.params.stem[l].weight, 1, g, l > 0);
    grads.stem[l] = {std::move(cg.kernels), std::move(cg.bias)};
    g = std::move(cg.input);
  }
  return grads;
}

}  // namespace icefuse
