#include <Eigen/Core>
#include <algorithm>

#include "vinet/errors.hpp"
#include "vinet/heatmap.hpp"

namespace vinet {

void ActionConfig::validate() const {
  if (max_score < 1) throw ConfigError("action '" + name + "': max score must be at least 1");
  if (clip_length == 0) throw ConfigError("action '" + name + "': clip length must be positive");
}

HeatmapClip clip_from_frames(std::span<const float> block, std::size_t joints, std::size_t frames,
                             std::size_t height, std::size_t width) {
  if (block.size() != joints * frames * height * width) {
    throw ContractViolation("clip_from_frames: block of " + std::to_string(block.size()) + " values does not match " +
                            std::to_string(joints) + "x" + std::to_string(frames) + "x" + std::to_string(height) +
                            "x" + std::to_string(width));
  }
  HeatmapClip c;
  c.joints = joints;
  c.frames = frames;
  c.height = height;
  c.width = width;
  c.data.assign(block.begin(), block.end());
  return c;
}

std::vector<HeatmapClip> split_clips(const MovementSample& sample, std::size_t clip_length) {
  if (clip_length == 0) throw ContractViolation("split_clips: clip length must be positive");
  if (sample.frames < clip_length) {
    throw SequenceTooShort("sequence of " + std::to_string(sample.frames) + " frames is shorter than one " +
                           std::to_string(clip_length) + "-frame clip");
  }
  const std::size_t m_count = sample.frames / clip_length;
  const std::size_t frame = sample.frame_size();
  std::vector<HeatmapClip> clips;
  clips.reserve(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    HeatmapClip c;
    c.joints = sample.joints;
    c.frames = clip_length;
    c.height = sample.height;
    c.width = sample.width;
    c.index = m + 1;
    c.data.resize(sample.joints * clip_length * frame);
    for (std::size_t j = 0; j < sample.joints; ++j) {
      const float* src = sample.heatmaps.data() + (j * sample.frames + m * clip_length) * frame;
      std::copy(src, src + clip_length * frame, c.data.begin() + static_cast<std::ptrdiff_t>(j * clip_length * frame));
    }
    clips.push_back(std::move(c));
  }
  return clips;
}

HeatmapClip normalize_clip(HeatmapClip clip, NormalizationScope scope) {
  using Array = Eigen::Map<Eigen::ArrayXd>;
  if (clip.data.empty()) return clip;
  const double lowest = Array(clip.data.data(), static_cast<Eigen::Index>(clip.data.size())).minCoeff();
  if (lowest < 0.0) throw ContractViolation("normalize_clip: negative heatmap value " + std::to_string(lowest));
  const std::size_t frame = clip.height * clip.width;
  const std::size_t group = scope == NormalizationScope::clip    ? clip.data.size()
                            : scope == NormalizationScope::joint ? clip.frames * frame
                                                                 : frame;
  for (std::size_t start = 0; start < clip.data.size(); start += group) {
    double* first = clip.data.data() + start;
    const double peak = Array(first, static_cast<Eigen::Index>(group)).maxCoeff();
    if (peak <= 0.0 || peak == kClipPeak) continue;
    const double k = kClipPeak / peak;
    for (std::size_t i = 0; i < group; ++i) first[i] = first[i] == peak ? kClipPeak : first[i] * k;
  }
  return clip;
}

NormalizationScope parse_normalization_scope(const std::string& text) {
  if (text == "clip") return NormalizationScope::clip;
  if (text == "joint") return NormalizationScope::joint;
  if (text == "frame") return NormalizationScope::frame;
  throw ConfigError("unknown normalization scope '" + text + "' (expected clip, joint or frame)");
}

std::string to_string(NormalizationScope scope) {
  switch (scope) {
    case NormalizationScope::clip: return "clip";
    case NormalizationScope::joint: return "joint";
    case NormalizationScope::frame: return "frame";
  }
  return "clip";
}

}  // namespace vinet
