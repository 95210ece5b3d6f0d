#include "vinet/msm.hpp"

#include "vinet/errors.hpp"
#include "vinet/random.hpp"

namespace vinet {

namespace {

constexpr std::size_t kStagePool = 2;
constexpr std::size_t kResnextKernel = 7;
constexpr std::size_t kResnextPool = 3;
constexpr std::size_t kResnextPoolStride = 2;

ConvBlock make_block(std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t stride, std::size_t padding,
                     std::size_t groups, Rng& rng) {
  ConvBlock b;
  b.weight = fan_in_uniform({out_c, in_c / groups, k, k}, in_c / groups * k * k, rng);
  b.gamma = Tensor::full({out_c}, 1.0, true);
  b.beta = Tensor::zeros({out_c}, true);
  b.state = BatchNormState(out_c);
  b.stride = stride;
  b.padding = padding;
  b.groups = groups;
  return b;
}

std::size_t conv_out(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
  if (n + 2 * pad < k) return 0;
  return (n + 2 * pad - k) / stride + 1;
}

std::size_t pool_out(std::size_t n, std::size_t window, std::size_t stride) {
  if (n < window) return 0;
  return (n - window) / stride + 1;
}

void add_block_params(ParameterList& p, const std::string& prefix, const ConvBlock& b) {
  p.push_back({prefix + ".conv.weight", b.weight});
  p.push_back({prefix + ".bn.gamma", b.gamma});
  p.push_back({prefix + ".bn.beta", b.beta});
}

std::string stage_prefix(std::size_t s, std::size_t d) {
  return "msm.stage" + std::to_string(s + 1) + ".block" + std::to_string(d + 1);
}

}  // namespace

BackboneStyle parse_backbone_style(const std::string& text) {
  if (text == "vgg-like") return BackboneStyle::vgg_like;
  if (text == "resnext-like") return BackboneStyle::resnext_like;
  if (text == "tiny") return BackboneStyle::tiny;
  throw ConfigError("unknown backbone style '" + text + "' (expected vgg-like, resnext-like or tiny)");
}

std::string to_string(BackboneStyle style) {
  switch (style) {
    case BackboneStyle::vgg_like: return "vgg-like";
    case BackboneStyle::resnext_like: return "resnext-like";
    case BackboneStyle::tiny: return "tiny";
  }
  return "?";
}

std::size_t ScorerConfig::first_width() const {
  if (first_filters != 0) return first_filters;
  return style == BackboneStyle::tiny ? 16 : 64;
}

void ScorerConfig::validate() const {
  if (input_channels == 0) throw ConfigError("scorer: input channel count must be positive");
  if (num_classes < 2) throw ConfigError("scorer: need at least 2 classes, got " + std::to_string(num_classes));
  if (stage_depth == 0 && !stage_widths.empty()) throw ConfigError("scorer: stage depth must be positive");
  for (std::size_t w : stage_widths)
    if (w == 0) throw ConfigError("scorer: stage widths must be positive");
  if (groups == 0) throw ConfigError("scorer: groups must be positive");
  if (groups > 1) {
    if (style != BackboneStyle::resnext_like) throw ConfigError("scorer: grouped stages need the resnext-like style");
    std::size_t prev = first_width();
    for (std::size_t w : stage_widths) {
      if (prev % groups != 0 || w % groups != 0) {
        throw ConfigError("scorer: stage widths " + std::to_string(prev) + "->" + std::to_string(w) +
                          " not divisible by " + std::to_string(groups) + " groups");
      }
      prev = w;
    }
  }
}

Tensor ConvBlock::forward(const Tensor& x, Mode mode) {
  return relu(batchnorm2d(conv2d(x, weight, Tensor{}, stride, padding, groups), gamma, beta, state, mode));
}

Scorer::Scorer(ScorerConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const std::size_t j = config_.input_channels;
  const std::size_t width = config_.first_width();
  if (config_.style == BackboneStyle::resnext_like) {
    first = make_block(j, width, kResnextKernel, 2, 3, 1, rng);
  } else {
    first = make_block(j, width, 3, 1, 1, 1, rng);
  }
  std::size_t prev = width;
  const std::size_t g = config_.style == BackboneStyle::resnext_like ? config_.groups : 1;
  for (std::size_t w : config_.stage_widths) {
    std::vector<ConvBlock> stage;
    for (std::size_t d = 0; d < config_.stage_depth; ++d) {
      stage.push_back(make_block(prev, w, 3, 1, 1, g, rng));
      prev = w;
    }
    stages.push_back(std::move(stage));
  }
  head_weight = fan_in_uniform({config_.num_classes, prev}, prev, rng);
  head_bias = Tensor::zeros({config_.num_classes}, true);
}

Tensor Scorer::forward(const Tensor& descriptors, Mode mode) {
  if (descriptors.dim() != 4 || descriptors.size(1) != config_.input_channels) {
    throw ContractViolation("msm: expected B x " + std::to_string(config_.input_channels) +
                            " x H x W descriptors, got " + shape_str(descriptors.shape()));
  }
  Tensor x;
  switch (config_.style) {
    case BackboneStyle::vgg_like:
      x = first.forward(descriptors, mode);
      break;
    case BackboneStyle::resnext_like: {
      auto y = batchnorm2d(conv2d(descriptors, first.weight, Tensor{}, first.stride, first.padding), first.gamma,
                           first.beta, first.state, mode);
      x = relu(maxpool2d(y, kResnextPool, kResnextPoolStride));
      break;
    }
    case BackboneStyle::tiny:
      x = maxpool2d(first.forward(descriptors, mode), kStagePool, kStagePool);
      break;
  }
  for (auto& stage : stages) {
    for (auto& block : stage) x = block.forward(x, mode);
    x = maxpool2d(x, kStagePool, kStagePool);
  }
  return linear(global_avg_pool(x), head_weight, head_bias);
}

std::vector<std::pair<std::string, Shape>> Scorer::layer_shapes(std::size_t height, std::size_t width) const {
  std::vector<std::pair<std::string, Shape>> out;
  std::size_t c = config_.first_width(), h = height, w = width;
  if (config_.style == BackboneStyle::resnext_like) {
    h = conv_out(h, kResnextKernel, 2, 3);
    w = conv_out(w, kResnextKernel, 2, 3);
    out.push_back({"first.conv", {c, h, w}});
    h = pool_out(h, kResnextPool, kResnextPoolStride);
    w = pool_out(w, kResnextPool, kResnextPoolStride);
    out.push_back({"first.pool", {c, h, w}});
  } else {
    out.push_back({"first.conv", {c, h, w}});
    if (config_.style == BackboneStyle::tiny) {
      h = pool_out(h, kStagePool, kStagePool);
      w = pool_out(w, kStagePool, kStagePool);
      out.push_back({"first.pool", {c, h, w}});
    }
  }
  for (std::size_t s = 0; s < config_.stage_widths.size(); ++s) {
    c = config_.stage_widths[s];
    for (std::size_t d = 0; d < config_.stage_depth; ++d) {
      out.push_back({"stage" + std::to_string(s + 1) + ".block" + std::to_string(d + 1), {c, h, w}});
    }
    h = pool_out(h, kStagePool, kStagePool);
    w = pool_out(w, kStagePool, kStagePool);
    out.push_back({"stage" + std::to_string(s + 1) + ".pool", {c, h, w}});
  }
  out.push_back({"gap", {c}});
  out.push_back({"head", {config_.num_classes}});
  return out;
}

ParameterList Scorer::parameters() const {
  ParameterList p;
  add_block_params(p, "msm.first", first);
  for (std::size_t s = 0; s < stages.size(); ++s)
    for (std::size_t d = 0; d < stages[s].size(); ++d) add_block_params(p, stage_prefix(s, d), stages[s][d]);
  p.push_back({"msm.head.weight", head_weight});
  p.push_back({"msm.head.bias", head_bias});
  return p;
}

std::vector<std::pair<std::string, BatchNormState*>> Scorer::buffers() {
  std::vector<std::pair<std::string, BatchNormState*>> b{{"msm.first.bn", &first.state}};
  for (std::size_t s = 0; s < stages.size(); ++s)
    for (std::size_t d = 0; d < stages[s].size(); ++d) b.push_back({stage_prefix(s, d) + ".bn", &stages[s][d].state});
  return b;
}

Scorer build_scorer(const ScorerConfig& config, std::uint64_t seed) { return Scorer(config, seed); }

Tensor msm_forward(const Tensor& descriptors, Scorer& scorer, Mode mode) {
  if (descriptors.dim() != 3) {
    throw ContractViolation("msm_forward: expected J x H x W descriptors, got " + shape_str(descriptors.shape()));
  }
  auto x = descriptors.reshape({1, descriptors.size(0), descriptors.size(1), descriptors.size(2)});
  auto logits = scorer.forward(x, mode);
  return logits.reshape({scorer.config().num_classes});
}

}  // namespace vinet
