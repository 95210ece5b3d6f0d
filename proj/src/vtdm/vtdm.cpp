#include "vinet/vtdm.hpp"

#include "vinet/errors.hpp"
#include "vinet/random.hpp"

namespace vinet {

namespace {

std::size_t loc_extent(std::size_t n) {
  if (n < 2 * kLocKernel + 2) return 0;
  const std::size_t after_first = (n - kLocKernel + 1) / 2;
  if (after_first < kLocKernel + 1) return 0;
  return (after_first - kLocKernel + 1) / 2;
}

}  // namespace

std::size_t VtdmConfig::loc_feature_height() const { return loc_extent(height); }
std::size_t VtdmConfig::loc_feature_width() const { return loc_extent(width); }

void VtdmConfig::validate() const {
  if (clip_length == 0) throw ConfigError("vtdm: clip length must be positive");
  if (loc_feature_height() == 0 || loc_feature_width() == 0) {
    throw ConfigError("vtdm: " + std::to_string(height) + "x" + std::to_string(width) +
                      " descriptors are too small for the localisation network");
  }
}

Tensor trajectory_descriptor(const Tensor& joint_volume, const Tensor& phi, const Tensor& phi_bias) {
  if (phi.dim() != 4 || phi.size(0) != 1 || phi.size(2) != 3 || phi.size(3) != 3) {
    throw ContractViolation("trajectory_descriptor: phi must be 1 x T x 3 x 3, got " + shape_str(phi.shape()));
  }
  const std::size_t channels = joint_volume.dim() == 4 ? joint_volume.size(1) : joint_volume.size(0);
  if (channels != phi.size(1)) {
    throw ContractViolation("trajectory_descriptor: joint volume has " + std::to_string(channels) +
                            " frames, phi expects " + std::to_string(phi.size(1)));
  }
  return conv2d(joint_volume, phi, phi_bias, 1, 1);
}

Vtdm::Vtdm(VtdmConfig config, Rng& rng) : bn_state(1), config_(config) {
  config_.validate();
  const std::size_t t = config_.clip_length;
  phi_weight = fan_in_uniform({1, t, 3, 3}, t * 9, rng);
  phi_bias = Tensor::zeros({1}, true);
  bn_gamma = Tensor::full({1}, 1.0, true);
  bn_beta = Tensor::zeros({1}, true);
  loc_conv1_w = fan_in_uniform({kLocFilters, 1, kLocKernel, kLocKernel}, kLocKernel * kLocKernel, rng);
  loc_conv1_b = Tensor::zeros({kLocFilters}, true);
  loc_conv2_w = fan_in_uniform({kLocFilters, kLocFilters, kLocKernel, kLocKernel},
                               kLocFilters * kLocKernel * kLocKernel, rng);
  loc_conv2_b = Tensor::zeros({kLocFilters}, true);
  const std::size_t flat = kLocFilters * config_.loc_feature_height() * config_.loc_feature_width();
  loc_fc1_w = fan_in_uniform({kLocHidden, flat}, flat, rng);
  loc_fc1_b = Tensor::zeros({kLocHidden}, true);
  // Zero weights and identity bias: theta starts at the identity for any input.
  loc_fc2_w = Tensor::zeros({4, kLocHidden}, true);
  loc_fc2_b = Tensor::from_data({4}, {1.0, 0.0, 0.0, 1.0}, true);
}

Tensor Vtdm::descriptors(const Tensor& clips, Mode mode) {
  if (clips.dim() != 5 || clips.size(2) != config_.clip_length || clips.size(3) != config_.height ||
      clips.size(4) != config_.width) {
    throw ContractViolation("vtdm: expected B x J x " + std::to_string(config_.clip_length) + " x " +
                            std::to_string(config_.height) + " x " + std::to_string(config_.width) + " clips, got " +
                            shape_str(clips.shape()));
  }
  const std::size_t n = clips.size(0) * clips.size(1);
  auto per_joint = clips.reshape({n, config_.clip_length, config_.height, config_.width});
  auto lambda = trajectory_descriptor(per_joint, phi_weight, phi_bias);
  if (config_.descriptor_norm) lambda = relu(batchnorm2d(lambda, bn_gamma, bn_beta, bn_state, mode));
  return lambda;
}

Tensor Vtdm::localisation(const Tensor& descriptors) const {
  if (descriptors.dim() != 4 || descriptors.size(1) != 1 || descriptors.size(2) != config_.height ||
      descriptors.size(3) != config_.width) {
    throw ContractViolation("localisation: expected N x 1 x " + std::to_string(config_.height) + " x " +
                            std::to_string(config_.width) + " descriptors, got " + shape_str(descriptors.shape()));
  }
  auto x = relu(maxpool2d(conv2d(descriptors, loc_conv1_w, loc_conv1_b), 2, 2));
  x = relu(maxpool2d(conv2d(x, loc_conv2_w, loc_conv2_b), 2, 2));
  const std::size_t n = x.size(0);
  x = x.reshape({n, x.numel() / n});
  x = relu(linear(x, loc_fc1_w, loc_fc1_b));
  return linear(x, loc_fc2_w, loc_fc2_b);
}

Tensor Vtdm::forward(const Tensor& clips, Mode mode, bool use_stn) {
  const std::size_t b = clips.size(0), j = clips.size(1);
  auto lambda = descriptors(clips, mode);
  if (use_stn) {
    auto theta = localisation(lambda);
    auto grid = affine_grid(theta, config_.height, config_.width);
    lambda = bilinear_sample(lambda, grid);
  }
  return lambda.reshape({b, j, config_.height, config_.width});
}

ParameterList Vtdm::parameters(bool include_localisation) const {
  ParameterList p{{"vtdm.phi.weight", phi_weight}, {"vtdm.phi.bias", phi_bias}};
  if (config_.descriptor_norm) {
    p.push_back({"vtdm.phi_bn.gamma", bn_gamma});
    p.push_back({"vtdm.phi_bn.beta", bn_beta});
  }
  if (include_localisation) {
    for (auto& q : localisation_parameters()) p.push_back(std::move(q));
  }
  return p;
}

ParameterList Vtdm::localisation_parameters() const {
  return {{"vtdm.loc.conv1.weight", loc_conv1_w}, {"vtdm.loc.conv1.bias", loc_conv1_b},
          {"vtdm.loc.conv2.weight", loc_conv2_w}, {"vtdm.loc.conv2.bias", loc_conv2_b},
          {"vtdm.loc.fc1.weight", loc_fc1_w},     {"vtdm.loc.fc1.bias", loc_fc1_b},
          {"vtdm.loc.fc2.weight", loc_fc2_w},     {"vtdm.loc.fc2.bias", loc_fc2_b}};
}

std::vector<std::pair<std::string, BatchNormState*>> Vtdm::buffers() {
  if (!config_.descriptor_norm) return {};
  return {{"vtdm.phi_bn", &bn_state}};
}

Tensor vtdm_forward(const HeatmapClip& clip, Vtdm& vtdm, Mode mode, bool use_stn) {
  auto x = Tensor::from_data({1, clip.joints, clip.frames, clip.height, clip.width}, clip.data);
  auto y = vtdm.forward(x, mode, use_stn);
  return y.reshape({clip.joints, clip.height, clip.width});
}

}  // namespace vinet
