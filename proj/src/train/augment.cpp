#include <map>

#include "vinet/errors.hpp"
#include "vinet/log.hpp"
#include "vinet/random.hpp"
#include "vinet/train.hpp"

namespace vinet {

std::vector<std::pair<std::size_t, std::size_t>> draw_temporal_crops(std::size_t frames, std::size_t clip_length,
                                                                    std::size_t count, std::uint64_t seed) {
  if (clip_length == 0) throw ContractViolation("temporal crop: clip length must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> crops;
  if (count == 0) return crops;
  if (frames <= clip_length) {
    warn("temporal crop skipped: " + std::to_string(frames) + " frames do not exceed the clip length " +
         std::to_string(clip_length));
    return crops;
  }
  Rng rng(seed);
  crops.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(clip_length), static_cast<std::int64_t>(frames)));
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(frames - len)));
    crops.emplace_back(start, len);
  }
  return crops;
}

std::vector<MovementSample> augment_temporal_crop(const MovementSample& sample, std::size_t count,
                                                  std::size_t clip_length, std::uint64_t seed) {
  std::vector<MovementSample> out;
  const std::size_t plane = sample.frame_size();
  for (auto [start, len] : draw_temporal_crops(sample.frames, clip_length, count, seed)) {
    MovementSample c;
    c.joints = sample.joints;
    c.frames = len;
    c.height = sample.height;
    c.width = sample.width;
    c.score = sample.score;
    c.subject_id = sample.subject_id;
    c.view_id = sample.view_id;
    c.action_tag = sample.action_tag;
    c.heatmaps.resize(c.joints * len * plane);
    for (std::size_t j = 0; j < c.joints; ++j) {
      const float* src = sample.heatmaps.data() + (j * sample.frames + start) * plane;
      std::copy(src, src + len * plane, c.heatmaps.begin() + static_cast<std::ptrdiff_t>(j * len * plane));
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<VideoRange> balanced_training_set(const SampleSource& source, const std::vector<std::size_t>& train,
                                              std::size_t clip_length, std::uint64_t seed) {
  const auto& infos = source.samples();
  std::vector<VideoRange> out;
  std::map<int, std::vector<std::size_t>> by_score;
  for (auto i : train) {
    const auto& s = infos.at(i);
    if (s.frames < clip_length) {
      warn("sample " + s.id + " is shorter than one clip and is not used for training");
      continue;
    }
    out.push_back({i, 0, s.frames, s.score, false});
    by_score[s.score].push_back(i);
  }
  std::size_t target = 0;
  for (const auto& [score, members] : by_score) target = std::max(target, members.size());

  for (const auto& [score, members] : by_score) {
    const std::size_t missing = target - members.size();
    if (missing == 0) continue;
    std::vector<std::size_t> eligible;
    for (auto i : members)
      if (infos[i].frames > clip_length) eligible.push_back(i);
    if (eligible.empty()) {
      warn("score " + std::to_string(score) + " cannot be balanced: no video is longer than one clip");
      continue;
    }
    Rng pick(Rng::derive(seed, 11, static_cast<std::uint64_t>(score)));
    for (std::size_t n = 0; n < missing; ++n) {
      const std::size_t i = eligible[static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<std::int64_t>(eligible.size()) - 1))];
      const auto crop = draw_temporal_crops(infos[i].frames, clip_length, 1,
                                            Rng::derive(seed, 12, static_cast<std::uint64_t>(score), n));
      out.push_back({i, crop[0].first, crop[0].second, score, true});
    }
  }
  return out;
}

}  // namespace vinet
