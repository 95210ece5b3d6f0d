#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vinet {

inline constexpr std::size_t kDefaultJoints = 15;
inline constexpr std::size_t kDefaultClipLength = 16;
inline constexpr double kClipPeak = 255.0;

struct ActionConfig {
  std::string name = "W-P";
  int max_score = 4;
  std::size_t clip_length = kDefaultClipLength;

  int num_classes() const { return max_score + 1; }
  void validate() const;
};

/// One video: J x F x H x W heatmap volume plus labels.
struct MovementSample {
  std::size_t joints = 0, frames = 0, height = 0, width = 0;
  std::vector<float> heatmaps;  // (J, F, H, W) row-major
  int score = 0;
  int subject_id = 0;
  int view_id = 0;
  std::string action_tag;

  std::size_t frame_size() const { return height * width; }
  float at(std::size_t j, std::size_t f, std::size_t y, std::size_t x) const {
    return heatmaps[((j * frames + f) * height + y) * width + x];
  }
};

/// J x T x H x W block of consecutive frames, in double precision.
struct HeatmapClip {
  std::size_t joints = 0, frames = 0, height = 0, width = 0;
  std::vector<double> data;
  std::string source_id;
  std::size_t index = 1;  // 1-based position m within the source video
};

enum class NormalizationScope { clip, joint, frame };

// Heatmap file: "VIHM", u32 version=1, J, F, H, W (little endian), then
// J*F*H*W little-endian f32 values.
inline constexpr char kHeatmapMagic[4] = {'V', 'I', 'H', 'M'};
inline constexpr std::uint32_t kHeatmapVersion = 1;
inline constexpr std::size_t kHeatmapHeaderBytes = 24;

void save_sequence(const MovementSample& sample, const std::filesystem::path& path);
// Labels are not part of the file; they come from the manifest.
MovementSample load_sequence(const std::filesystem::path& path);

/// Random access to frame ranges of a heatmap file without reading the rest.
class HeatmapFile {
 public:
  explicit HeatmapFile(std::filesystem::path path);

  std::size_t joints() const { return joints_; }
  std::size_t frames() const { return frames_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  // J x count x H x W block starting at frame `start`.
  std::vector<float> read_frames(std::size_t start, std::size_t count) const;

 private:
  std::filesystem::path path_;
  std::size_t joints_ = 0, frames_ = 0, height_ = 0, width_ = 0;
};

// Consecutive non-overlapping T-frame clips; trailing F mod T frames dropped.
std::vector<HeatmapClip> split_clips(const MovementSample& sample, std::size_t clip_length);

HeatmapClip clip_from_frames(std::span<const float> block, std::size_t joints, std::size_t frames,
                             std::size_t height, std::size_t width);

// Rescales so the maximum over `scope` maps to 255; all-zero regions are left alone.
HeatmapClip normalize_clip(HeatmapClip clip, NormalizationScope scope = NormalizationScope::clip);

NormalizationScope parse_normalization_scope(const std::string& text);
std::string to_string(NormalizationScope scope);

struct SampleInfo {
  std::string id;
  std::string path;  // relative to the manifest directory; empty for generated sources
  int subject_id = 0;
  int view_id = 0;
  int score = 0;
  std::string action_tag;
  std::size_t frames = 0;
};

struct Manifest {
  std::size_t joints = kDefaultJoints, height = 64, width = 64;
  std::vector<SampleInfo> samples;
};

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

/// A collection of videos whose frames can be fetched on demand.
class SampleSource {
 public:
  virtual ~SampleSource() = default;

  virtual const std::vector<SampleInfo>& samples() const = 0;
  virtual std::size_t joints() const = 0;
  virtual std::size_t height() const = 0;
  virtual std::size_t width() const = 0;
  // J x count x H x W frames of sample `index` starting at `start`.
  virtual std::vector<float> read_frames(std::size_t index, std::size_t start, std::size_t count) const = 0;

  std::size_t size() const { return samples().size(); }
  MovementSample load(std::size_t index) const;
};

class FileDataset final : public SampleSource {
 public:
  explicit FileDataset(const std::filesystem::path& manifest_path);

  const std::vector<SampleInfo>& samples() const override { return manifest_.samples; }
  std::size_t joints() const override { return manifest_.joints; }
  std::size_t height() const override { return manifest_.height; }
  std::size_t width() const override { return manifest_.width; }
  std::vector<float> read_frames(std::size_t index, std::size_t start, std::size_t count) const override;

 private:
  std::filesystem::path root_;
  Manifest manifest_;
};

class InMemoryDataset final : public SampleSource {
 public:
  explicit InMemoryDataset(std::vector<MovementSample> samples);

  const std::vector<SampleInfo>& samples() const override { return infos_; }
  std::size_t joints() const override { return joints_; }
  std::size_t height() const override { return height_; }
  std::size_t width() const override { return width_; }
  std::vector<float> read_frames(std::size_t index, std::size_t start, std::size_t count) const override;

 private:
  std::vector<MovementSample> samples_;
  std::vector<SampleInfo> infos_;
  std::size_t joints_ = 0, height_ = 0, width_ = 0;
};

}  // namespace vinet
