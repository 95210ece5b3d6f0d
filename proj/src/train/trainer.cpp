#include <cmath>
#include <stdexcept>

#include "vinet/errors.hpp"
#include "vinet/ops.hpp"
#include "vinet/random.hpp"
#include "vinet/train.hpp"

namespace vinet {

void TrainConfig::validate() const {
  action.validate();
  if (epochs > 100000) throw ConfigError("train config: implausible epoch count " + std::to_string(epochs));
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train config: learning rate must be positive");
  if (batch_size == 0) throw ConfigError("train config: batch size must be positive");
}

std::vector<ClipRef> clips_of(const std::vector<VideoRange>& ranges, std::size_t clip_length) {
  std::vector<ClipRef> clips;
  for (const auto& r : ranges)
    for (std::size_t m = 0; m + clip_length <= r.frames; m += clip_length) clips.push_back({r.sample, r.start + m, r.score});
  return clips;
}

Tensor load_clip_batch(const SampleSource& source, const std::vector<ClipRef>& clips, std::size_t clip_length,
                       NormalizationScope scope) {
  const std::size_t j = source.joints(), h = source.height(), w = source.width();
  const std::size_t per = j * clip_length * h * w;
  std::vector<double> data(clips.size() * per);
  for (std::size_t b = 0; b < clips.size(); ++b) {
    const auto block = source.read_frames(clips[b].sample, clips[b].start, clip_length);
    const auto clip = normalize_clip(clip_from_frames(block, j, clip_length, h, w), scope);
    std::copy(clip.data.begin(), clip.data.end(), data.begin() + static_cast<std::ptrdiff_t>(b * per));
  }
  return Tensor::from_data({clips.size(), j, clip_length, h, w}, std::move(data));
}

namespace {

void check_compatible(const SampleSource& source, const ModelConfig& m, const TrainConfig& t) {
  m.validate();
  t.validate();
  if (source.joints() != m.scorer.input_channels) {
    throw ConfigError("dataset has " + std::to_string(source.joints()) + " joints but the scorer expects " +
                      std::to_string(m.scorer.input_channels));
  }
  if (source.height() != m.vtdm.height || source.width() != m.vtdm.width) {
    throw ConfigError("dataset frames are " + std::to_string(source.height()) + "x" + std::to_string(source.width()) +
                      " but the model expects " + std::to_string(m.vtdm.height) + "x" + std::to_string(m.vtdm.width));
  }
  if (t.action.clip_length != m.vtdm.clip_length) throw ConfigError("action and model disagree on the clip length");
  if (static_cast<std::size_t>(t.action.num_classes()) != m.scorer.num_classes) {
    throw ConfigError("action has " + std::to_string(t.action.num_classes()) + " scores but the scorer emits " +
                      std::to_string(m.scorer.num_classes));
  }
}

}  // namespace

VinetModel initial_model(const ModelConfig& model_config, const TrainConfig& config) {
  return VinetModel(model_config, Rng::derive(config.seed, 1));
}

std::vector<double> train_epochs(VinetModel& model, const SampleSource& source, const std::vector<ClipRef>& clips,
                                 const TrainConfig& config, const EpochCallback& on_epoch) {
  const std::size_t t = config.action.clip_length;
  auto params = model.trainable_parameters();
  zero_grads(params);
  std::vector<double> curve;
  std::vector<std::size_t> order(clips.size());
  for (std::size_t e = 0; e < config.epochs; ++e) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(Rng::derive(config.seed, 3, e));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      std::vector<ClipRef> batch;
      std::vector<int> labels;
      for (std::size_t k = b; k < std::min(order.size(), b + config.batch_size); ++k) {
        batch.push_back(clips[order[k]]);
        labels.push_back(clips[order[k]].score);
      }
      const Tensor x = load_clip_batch(source, batch, t, config.normalization);
      const Tensor loss = softmax_cross_entropy(model.forward(x, Mode::train), labels);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(e + 1) + " (loss " +
                                 std::to_string(value) + ")");
      }
      loss.backward();
      sgd_step(params, config.lr);
      total += value * static_cast<double>(batch.size());
    }
    curve.push_back(order.empty() ? 0.0 : total / static_cast<double>(order.size()));
    if (on_epoch) on_epoch(e + 1, curve.back());
  }
  return curve;
}

TrainResult train(const SampleSource& source, const SplitPlan& split, const ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  check_compatible(source, model_config, config);
  if (split.train.empty()) throw ConfigError("training side of " + split.label() + " is empty");
  const std::size_t t = config.action.clip_length;
  std::vector<VideoRange> ranges;
  if (config.balance) {
    ranges = balanced_training_set(source, split.train, t, Rng::derive(config.seed, 2));
  } else {
    for (auto i : split.train) ranges.push_back({i, 0, source.samples().at(i).frames, source.samples()[i].score, false});
  }
  const auto clips = clips_of(ranges, t);
  if (clips.empty()) throw ConfigError("training side of " + split.label() + " holds no complete clip");
  for (const auto& c : clips) {
    if (c.score < 0 || c.score > config.action.max_score) {
      throw ConfigError("sample score " + std::to_string(c.score) + " outside 0.." +
                        std::to_string(config.action.max_score));
    }
  }
  TrainResult result{initial_model(model_config, config), {}, clips.size()};
  result.epoch_loss = train_epochs(result.model, source, clips, config, on_epoch);
  return result;
}

}  // namespace vinet
