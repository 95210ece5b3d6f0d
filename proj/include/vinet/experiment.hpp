#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vinet/config.hpp"
#include "vinet/synth.hpp"
#include "vinet/train.hpp"

namespace vinet {

struct SplitSettings {
  SplitKind kind = SplitKind::cross_subject;
  std::size_t folds = 0;  // 0: one fold per score, S + 1
  std::size_t fold = 0;   // which fold `train` uses
  std::vector<int> train_views{2};
  bool pairs = false;  // grid over every frontal/side pair instead of train_views
};

enum class StnVariants { off, on, both };

StnVariants parse_stn_variants(const std::string& text);
std::string to_string(StnVariants v);

/// Everything one CLI run needs. `data` names a manifest; when empty the
/// synthetic `dataset` is rendered on demand.
struct ExperimentConfig {
  synth::DatasetSpec dataset;
  std::string data;
  ModelConfig model;
  TrainConfig train;
  ScoringRule rule = ScoringRule::mean_logits;
  SplitSettings split;
  StnVariants stn = StnVariants::both;
  std::size_t jobs = 1;
};

Json to_json(const SplitSettings& s);
Json to_json(const TrainConfig& t);
Json to_json(const ExperimentConfig& c);
void from_json(const Json& j, SplitSettings& s);
void from_json(const Json& j, TrainConfig& t);
void from_json(const Json& j, ExperimentConfig& c);

std::unique_ptr<SampleSource> open_source(const ExperimentConfig& config);

// Copies the shape of the data into the model and action settings (joints,
// frame size, score range) and checks the result.
void resolve(ExperimentConfig& config, const SampleSource& source);

void write_json(const Json& j, const std::filesystem::path& path);

using Logger = std::function<void(const std::string&)>;

struct FoldResult {
  SplitPlan split;
  std::vector<double> loss;
  EvalReport report;
};

struct CrossSubjectResult {
  std::vector<FoldResult> folds;
  double mean_rho = 0.0;             // mean of per-fold rho, undefined folds count as 0
  std::optional<double> pooled_rho;  // over all test predictions together
};

CrossSubjectResult run_cross_subject(const SampleSource& source, const ModelConfig& model, const TrainConfig& train,
                                     const EvalOptions& eval, std::size_t folds, std::size_t jobs,
                                     const Logger& log = {});

struct CrossViewResult {
  SplitPlan split;
  std::vector<double> loss;
  EvalReport report;
  std::vector<std::pair<int, std::optional<double>>> per_view;  // test view -> rho
  double mean_rho = 0.0;                                        // over test views, undefined counts as 0
};

CrossViewResult run_cross_view(const SampleSource& source, const SplitPlan& split, const ModelConfig& model,
                               const TrainConfig& train, const EvalOptions& eval, const Logger& log = {});

// Runs `count` independent jobs on up to `jobs` threads; the first exception
// is rethrown after all threads finish.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write_csv(const std::filesystem::path& path) const;
};

std::string format_rho(const std::optional<double>& rho);

}  // namespace vinet
