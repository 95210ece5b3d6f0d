#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vinet/heatmap.hpp"
#include "vinet/ops.hpp"
#include "vinet/tensor.hpp"

namespace vinet {

enum class BackboneStyle { vgg_like, resnext_like, tiny };

BackboneStyle parse_backbone_style(const std::string& text);
std::string to_string(BackboneStyle style);

struct ScorerConfig {
  BackboneStyle style = BackboneStyle::tiny;
  std::size_t input_channels = kDefaultJoints;
  std::size_t num_classes = 5;
  // 0 picks the style default: 64 for vgg-like and resnext-like, 16 for tiny.
  std::size_t first_filters = 0;
  std::vector<std::size_t> stage_widths{32, 32};
  std::size_t stage_depth = 1;
  // Grouped 3x3 convolutions in the body; resnext-like only.
  std::size_t groups = 1;

  std::size_t first_width() const;
  void validate() const;
};

/// conv -> batch norm -> ReLU. No conv bias; the norm's shift replaces it.
struct ConvBlock {
  Tensor weight, gamma, beta;
  BatchNormState state;
  std::size_t stride = 1, padding = 1, groups = 1;

  Tensor forward(const Tensor& x, Mode mode);
};

/// Movement scorer: an adapted first layer over J descriptor channels, a
/// stack of conv stages, global average pooling and a linear head with one
/// output per score.
class Scorer {
 public:
  Scorer(ScorerConfig config, std::uint64_t seed);

  const ScorerConfig& config() const { return config_; }

  // B x J x H x W -> B x num_classes raw logits.
  Tensor forward(const Tensor& descriptors, Mode mode);

  // Output shape after every layer for a J x H x W input, head included.
  std::vector<std::pair<std::string, Shape>> layer_shapes(std::size_t height, std::size_t width) const;

  ParameterList parameters() const;
  std::vector<std::pair<std::string, BatchNormState*>> buffers();

  ConvBlock first;
  std::vector<std::vector<ConvBlock>> stages;
  Tensor head_weight, head_bias;

 private:
  ScorerConfig config_;
};

Scorer build_scorer(const ScorerConfig& config, std::uint64_t seed);

// J x H x W descriptors -> [num_classes] logits.
Tensor msm_forward(const Tensor& descriptors, Scorer& scorer, Mode mode);

}  // namespace vinet
