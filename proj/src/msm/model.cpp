#include <algorithm>

#include "vinet/errors.hpp"
#include "vinet/model.hpp"
#include "vinet/random.hpp"

namespace vinet {

namespace {

Vtdm make_vtdm(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(Rng::derive(seed, 1));
  return Vtdm(config.vtdm, rng);
}

}  // namespace

void ModelConfig::validate() const {
  vtdm.validate();
  scorer.validate();
}

VinetModel::VinetModel(ModelConfig config, std::uint64_t seed)
    : vtdm(make_vtdm(config, seed)), scorer(config.scorer, Rng::derive(seed, 2)), config_(std::move(config)),
      seed_(seed) {}

Tensor VinetModel::forward(const Tensor& clips, Mode mode) {
  return scorer.forward(vtdm.forward(clips, mode, config_.stn_enabled), mode);
}

ParameterList VinetModel::trainable_parameters() const {
  auto p = vtdm.parameters(config_.stn_enabled);
  for (auto& q : scorer.parameters()) p.push_back(std::move(q));
  return p;
}

ParameterList VinetModel::all_parameters() const {
  auto p = vtdm.parameters(true);
  for (auto& q : scorer.parameters()) p.push_back(std::move(q));
  return p;
}

std::vector<std::pair<std::string, BatchNormState*>> VinetModel::buffers() {
  auto b = vtdm.buffers();
  for (auto& q : scorer.buffers()) b.push_back(q);
  return b;
}

std::vector<std::pair<std::string, std::vector<double>>> model_arrays(VinetModel& model) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const auto& p : model.all_parameters()) {
    const auto v = p.tensor.values();
    out.emplace_back(p.name, std::vector<double>(v.begin(), v.end()));
  }
  for (const auto& [name, state] : model.buffers()) {
    out.emplace_back(name + ".running_mean", state->running_mean);
    out.emplace_back(name + ".running_var", state->running_var);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

}  // namespace vinet
