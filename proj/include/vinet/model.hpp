#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vinet/msm.hpp"
#include "vinet/vtdm.hpp"

namespace vinet {

struct ModelConfig {
  VtdmConfig vtdm;
  ScorerConfig scorer;
  bool stn_enabled = true;

  void validate() const;
};

/// Descriptor module followed by the scorer.
class VinetModel {
 public:
  VinetModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  // B x J x T x H x W clips -> B x (S+1) logits.
  Tensor forward(const Tensor& clips, Mode mode);

  // What SGD updates. Without the transformer the localisation network is
  // never used, so it is left out.
  ParameterList trainable_parameters() const;
  ParameterList all_parameters() const;
  std::vector<std::pair<std::string, BatchNormState*>> buffers();

  Vtdm vtdm;
  Scorer scorer;

 private:
  ModelConfig config_;
  std::uint64_t seed_;
};

// Checkpoint: "VICK", u32 version, u64 header length, JSON header (config,
// seed, epoch, array table), then every parameter and batch-norm statistic
// as little-endian f64 in array-name order.
inline constexpr char kCheckpointMagic[4] = {'V', 'I', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(VinetModel& model, std::size_t epoch, const std::filesystem::path& path);

struct LoadedCheckpoint {
  VinetModel model;
  std::size_t epoch = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Name -> values for every array a checkpoint stores, sorted by name.
std::vector<std::pair<std::string, std::vector<double>>> model_arrays(VinetModel& model);

}  // namespace vinet
