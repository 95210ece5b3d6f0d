#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "vinet/heatmap.hpp"
#include "vinet/ops.hpp"
#include "vinet/tensor.hpp"

namespace vinet {

class Rng;

/// 2x2 linear map (t11, t12, t21, t22) applied to the normalised base grid.
struct AffineParams {
  std::array<double, 4> theta{1.0, 0.0, 0.0, 1.0};

  static AffineParams identity() { return {}; }
  bool is_finite() const;
  // Matrix product this * rhs.
  AffineParams compose(const AffineParams& rhs) const;
};

// Corner-aligned lattice over [-1, 1]^2: x runs along width, y along height.
// Returns H' x W' x 2 values (x, y).
std::vector<double> base_grid(std::size_t height, std::size_t width);

/// Sampling grid Gamma_theta(G): theta is [4] or N x 4; result is
/// N x H' x W' x 2 holding source coordinates (x, y) in normalised space.
Tensor affine_grid(const Tensor& theta, std::size_t height, std::size_t width);

/// Bilinear sampling of `image` (N x C x H x W) at `grid` (N x H' x W' x 2).
/// Normalised -1 maps to pixel 0 and +1 to pixel H-1 (W-1); interpolation
/// taps falling outside the image read zero. Differentiable in both inputs.
Tensor bilinear_sample(const Tensor& image, const Tensor& grid);

// Per-joint temporal aggregation: T x H x W (or N x T x H x W) convolved with
// a 1 x T x 3 x 3 filter, stride 1, pad 1.
Tensor trajectory_descriptor(const Tensor& joint_volume, const Tensor& phi, const Tensor& phi_bias);

struct VtdmConfig {
  std::size_t clip_length = kDefaultClipLength;
  std::size_t height = 64;
  std::size_t width = 64;
  // Batch norm + ReLU after the aggregation filter.
  bool descriptor_norm = true;

  std::size_t loc_feature_height() const;
  std::size_t loc_feature_width() const;
  void validate() const;
};

inline constexpr std::size_t kLocFilters = 10;
inline constexpr std::size_t kLocKernel = 5;
inline constexpr std::size_t kLocHidden = 32;

/// View-invariant trajectory descriptor module: one aggregation filter and
/// one localisation network shared by every joint.
class Vtdm {
 public:
  Vtdm(VtdmConfig config, Rng& rng);

  const VtdmConfig& config() const { return config_; }

  // clips: B x J x T x H x W -> (B*J) x 1 x H x W
  Tensor descriptors(const Tensor& clips, Mode mode);
  // descriptors: N x 1 x H x W -> N x 4
  Tensor localisation(const Tensor& descriptors) const;
  // B x J x T x H x W -> B x J x H x W. With `use_stn` false the sampler is
  // bypassed and the aggregated descriptors are returned as-is.
  Tensor forward(const Tensor& clips, Mode mode, bool use_stn);

  ParameterList parameters(bool include_localisation = true) const;
  ParameterList localisation_parameters() const;
  std::vector<std::pair<std::string, BatchNormState*>> buffers();

  Tensor phi_weight, phi_bias;
  Tensor bn_gamma, bn_beta;
  BatchNormState bn_state;
  Tensor loc_conv1_w, loc_conv1_b, loc_conv2_w, loc_conv2_b;
  Tensor loc_fc1_w, loc_fc1_b, loc_fc2_w, loc_fc2_b;

 private:
  VtdmConfig config_;
};

// Single clip J x T x H x W -> J x H x W.
Tensor vtdm_forward(const HeatmapClip& clip, Vtdm& vtdm, Mode mode, bool use_stn);

}  // namespace vinet
