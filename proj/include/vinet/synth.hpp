#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vinet/heatmap.hpp"

namespace vinet::synth {

// Joint order of the first 15 BODY-25 keypoints.
enum Joint : std::size_t {
  kNose, kNeck, kRShoulder, kRElbow, kRWrist, kLShoulder, kLElbow, kLWrist,
  kMidHip, kRHip, kRKnee, kRAnkle, kLHip, kLKnee, kLAnkle, kJointCount
};

struct Point {
  double x = 0.0, y = 0.0;
};

enum class MotionFamily { walk, sit_stand };

MotionFamily parse_motion_family(const std::string& text);
std::string to_string(MotionFamily family);

/// Per-subject appearance and timing, drawn from a style seed.
struct SubjectStyle {
  double scale = 1.0;
  double limb = 1.0;       // leg and arm length factor
  double shoulder = 1.0;   // shoulder and hip width factor
  double period = 32.0;    // frames per movement cycle
  double phase = 0.0;
  Point offset;

  static SubjectStyle draw(MotionFamily family, std::uint64_t seed);
};

/// Joint trajectories in the canonical frame [-1, 1]^2 (x right, y down),
/// stored frame-major: point(t, j) = points[t * kJointCount + j].
struct CanonicalMotion {
  MotionFamily family = MotionFamily::walk;
  int score = 0;
  int max_score = 4;
  std::size_t frames = 0;
  std::uint64_t seed = 0;
  std::vector<Point> points;

  const Point& at(std::size_t t, std::size_t j) const { return points[t * kJointCount + j]; }
};

/// Nominal movement blended linearly towards a degraded version by q / S:
/// shorter and lopsided stride (or shallow sit), trunk lean and tremor. The
/// degraded pose and tremor depend only on `seed`, so for a fixed seed the
/// deviation from q = 0 is exactly proportional to q.
CanonicalMotion generate_canonical_motion(MotionFamily family, int score, int max_score, std::uint64_t seed,
                                          std::size_t frames);

// Mean over joints and frames of the L2 distance between two motions.
double deviation(const CanonicalMotion& motion, const CanonicalMotion& nominal);

/// p' = A p + t with A = [[a11, a12], [a21, a22]].
struct ViewTransform {
  int view_id = 1;
  std::array<double, 4> a{1.0, 0.0, 0.0, 1.0};
  std::array<double, 2> t{0.0, 0.0};

  double det() const { return a[0] * a[3] - a[1] * a[2]; }
  void validate() const;
  Point apply(Point p) const { return {a[0] * p.x + a[1] * p.y + t[0], a[2] * p.x + a[3] * p.y + t[1]}; }
  ViewTransform inverse() const;
};

inline constexpr double kMinViewDeterminant = 0.1;

// Fixed camera layout: views 1-3 frontal (small rotation, scale and shift),
// views 4-6 side (strong horizontal foreshortening plus shear).
ViewTransform default_view(int view_id);
inline constexpr int kFrontalViews[] = {1, 2, 3};
inline constexpr int kSideViews[] = {4, 5, 6};

/// Trajectories as seen from one view, same layout as CanonicalMotion.
struct ViewTrajectories {
  std::size_t frames = 0;
  std::vector<Point> points;

  const Point& at(std::size_t t, std::size_t j) const { return points[t * kJointCount + j]; }
};

ViewTrajectories apply_view_transform(const CanonicalMotion& motion, const ViewTransform& view);

// Canonical coordinate to pixel position; -1 is pixel 0 and +1 pixel n-1.
inline double to_pixel(double u, std::size_t n) { return (u + 1.0) * 0.5 * static_cast<double>(n - 1); }

/// J x F x H x W isotropic Gaussians with peak 1 centred on each projected
/// joint; only the part inside the raster is drawn.
std::vector<float> render_heatmaps(const ViewTrajectories& traj, std::size_t height, std::size_t width, double sigma);
// Frames [start, start + count) only.
std::vector<float> render_frames(const ViewTrajectories& traj, std::size_t start, std::size_t count,
                                 std::size_t height, std::size_t width, double sigma);

struct OcclusionSpec {
  bool enabled = false;
  double joint_probability = 0.1;  // chance that a joint is hidden for one frame range
  double max_fraction = 0.25;      // longest hidden range as a fraction of the video
};

struct DatasetSpec {
  std::size_t subjects = 20;
  std::size_t views = 6;
  std::size_t repetitions = 1;
  int max_score = 4;
  std::size_t min_frames = 64;
  std::size_t max_frames = 128;
  std::size_t height = 64;
  std::size_t width = 64;
  double sigma = 2.0;
  std::uint64_t seed = 0;
  MotionFamily family = MotionFamily::walk;
  std::string action_tag = "walk";
  OcclusionSpec occlusion;

  void validate(std::size_t clip_length = kDefaultClipLength) const;
  std::size_t sample_count() const { return subjects * views * repetitions * static_cast<std::size_t>(max_score + 1); }
};

// Seeds shared by every score and view of one subject repetition.
std::uint64_t motion_seed(const DatasetSpec& spec, std::size_t subject, std::size_t repetition);
std::size_t motion_frames(const DatasetSpec& spec, std::size_t subject, std::size_t repetition);

/// One rendered sample of a dataset spec, identified by its coordinates.
struct SampleKey {
  std::size_t subject = 0;  // 0-based; subject_id in the manifest is subject + 1
  int score = 0;
  std::size_t repetition = 0;
  int view = 1;

  std::string id() const;
  std::string motion_id() const;
};

std::vector<SampleKey> enumerate_samples(const DatasetSpec& spec);

/// A dataset spec rendered on demand, without touching disk.
class SyntheticDataset final : public SampleSource {
 public:
  explicit SyntheticDataset(DatasetSpec spec);

  const DatasetSpec& spec() const { return spec_; }
  const std::vector<SampleInfo>& samples() const override { return infos_; }
  std::size_t joints() const override { return kJointCount; }
  std::size_t height() const override { return spec_.height; }
  std::size_t width() const override { return spec_.width; }
  std::vector<float> read_frames(std::size_t index, std::size_t start, std::size_t count) const override;

  const CanonicalMotion& motion(std::size_t index) const { return motions_[motion_index_[index]]; }
  const ViewTrajectories& trajectories(std::size_t index) const { return views_[index]; }

 private:
  DatasetSpec spec_;
  std::vector<SampleInfo> infos_;
  std::vector<CanonicalMotion> motions_;
  std::vector<std::size_t> motion_index_;
  std::vector<ViewTrajectories> views_;
  // Hidden frame range per sample and joint; begin == end when visible.
  std::vector<std::array<std::pair<std::size_t, std::size_t>, kJointCount>> occlusion_;
};

/// Writes one heatmap file per sample, `manifest.json` and
/// `generator_metadata.json` into `out_dir`. Samples are rendered on up to
/// `jobs` threads; output does not depend on the thread count.
Manifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir, std::size_t jobs = 1);

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kMetadataName = "generator_metadata.json";

}  // namespace vinet::synth
