#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vinet/heatmap.hpp"
#include "vinet/model.hpp"

namespace vinet {

// ---- splits ---------------------------------------------------------------

enum class SplitKind { cross_subject, cross_view };

SplitKind parse_split_kind(const std::string& text);
std::string to_string(SplitKind kind);

/// Train and test sides as indices into a SampleSource.
struct SplitPlan {
  SplitKind kind = SplitKind::cross_subject;
  std::size_t fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<int> train_subjects, test_subjects;
  std::vector<int> train_views, test_views;

  // Throws SplitError when the sides overlap or share a subject (cross
  // subject) or a view (cross view).
  void check_hygiene(const std::vector<SampleInfo>& samples) const;
  std::string label() const;
};

// Subjects in ascending id order go to fold i mod k; every view on both sides.
std::vector<SplitPlan> make_cross_subject_splits(const std::vector<SampleInfo>& samples, std::size_t folds);

// Train on `train_views`, test on every other view present.
SplitPlan make_cross_view_split(const std::vector<SampleInfo>& samples, const std::vector<int>& train_views);

// One plan per view present, training on that view alone.
std::vector<SplitPlan> make_single_view_splits(const std::vector<SampleInfo>& samples);

// One plan per (frontal, side) pair present.
std::vector<SplitPlan> make_view_pair_splits(const std::vector<SampleInfo>& samples, const std::vector<int>& frontal,
                                             const std::vector<int>& side);

// ---- augmentation -----------------------------------------------------------

/// A contiguous frame range of one sample; whole videos and temporal crops
/// are both expressed this way.
struct VideoRange {
  std::size_t sample = 0;
  std::size_t start = 0;
  std::size_t frames = 0;
  int score = 0;
  bool augmented = false;
};

// `count` random contiguous ranges of length in [T, F] within [0, F).
// Empty with a warning on stderr when F <= T.
std::vector<std::pair<std::size_t, std::size_t>> draw_temporal_crops(std::size_t frames, std::size_t clip_length,
                                                                    std::size_t count, std::uint64_t seed);

std::vector<MovementSample> augment_temporal_crop(const MovementSample& sample, std::size_t count,
                                                  std::size_t clip_length, std::uint64_t seed);

/// Whole train-side videos plus crops of minority scores, so that every
/// score present reaches the majority count.
std::vector<VideoRange> balanced_training_set(const SampleSource& source, const std::vector<std::size_t>& train,
                                              std::size_t clip_length, std::uint64_t seed);

// ---- training ----------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 20;
  double lr = 0.001;
  std::size_t batch_size = 5;
  std::uint64_t seed = 0;
  ActionConfig action;
  NormalizationScope normalization = NormalizationScope::clip;
  bool balance = true;

  void validate() const;
};

struct ClipRef {
  std::size_t sample = 0;
  std::size_t start = 0;
  int score = 0;
};

// Consecutive non-overlapping clips of every range.
std::vector<ClipRef> clips_of(const std::vector<VideoRange>& ranges, std::size_t clip_length);

// B x J x T x H x W normalised clips.
Tensor load_clip_batch(const SampleSource& source, const std::vector<ClipRef>& clips, std::size_t clip_length,
                       NormalizationScope scope);

struct TrainResult {
  VinetModel model;
  std::vector<double> epoch_loss;  // mean clip loss per epoch
  std::size_t clips_per_epoch = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// The model seed is derived from config.seed.
VinetModel initial_model(const ModelConfig& model_config, const TrainConfig& config);

TrainResult train(const SampleSource& source, const SplitPlan& split, const ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Continues from an existing model over the given clips.
std::vector<double> train_epochs(VinetModel& model, const SampleSource& source, const std::vector<ClipRef>& clips,
                                 const TrainConfig& config, const EpochCallback& on_epoch = {});

// ---- scoring -------------------------------------------------------------------

enum class ScoringRule { mean_logits, max_clip };

ScoringRule parse_scoring_rule(const std::string& text);
std::string to_string(ScoringRule rule);

struct VideoScore {
  int predicted = 0;
  std::vector<double> mean_logits;               // average over clips
  std::vector<std::vector<double>> clip_logits;  // one row per clip
};

// Lowest index wins ties.
std::size_t argmax_lowest(const std::vector<double>& values);

// mean_logits: argmax of the clip-averaged logits. max_clip: largest of the
// per-clip argmaxes.
VideoScore score_from_clip_logits(std::vector<std::vector<double>> clip_logits, ScoringRule rule);

VideoScore video_score(VinetModel& model, const SampleSource& source, std::size_t index, std::size_t clip_length,
                       NormalizationScope scope = NormalizationScope::clip,
                       ScoringRule rule = ScoringRule::mean_logits);

// ---- evaluation ----------------------------------------------------------------

// Pearson correlation of average ranks.
double evaluate_spearman(const std::vector<double>& predictions, const std::vector<double>& ground_truth);

struct EvalRow {
  std::string sample_id;
  int subject = 0;
  int view = 0;
  int truth = 0;
  int prediction = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  // Empty when predictions are constant, where the rank correlation is undefined.
  std::optional<double> rho;
  std::string config_json;

  // rho, or 0 when undefined.
  double rho_or_zero() const { return rho.value_or(0.0); }
  void write_csv(const std::filesystem::path& path) const;
};

std::optional<double> spearman_of_rows(const std::vector<EvalRow>& rows);

struct EvalOptions {
  std::size_t clip_length = kDefaultClipLength;
  NormalizationScope normalization = NormalizationScope::clip;
  ScoringRule rule = ScoringRule::mean_logits;
  std::size_t jobs = 1;
};

EvalReport evaluate(VinetModel& model, const SampleSource& source, const std::vector<std::size_t>& indices,
                    const EvalOptions& options);

// Rows restricted to one view.
std::vector<EvalRow> rows_for_view(const std::vector<EvalRow>& rows, int view);

std::string csv_escape(const std::string& field);

}  // namespace vinet
