#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "vinet/config.hpp"
#include "vinet/errors.hpp"
#include "vinet/random.hpp"
#include "vinet/synth.hpp"

namespace vinet::synth {

void DatasetSpec::validate(std::size_t clip_length) const {
  auto fail = [](const std::string& what) { throw ConfigError("dataset spec: " + what); };
  if (subjects == 0 || views == 0 || repetitions == 0) fail("subjects, views and repetitions must be positive");
  if (views > 6) fail("at most 6 views are defined, got " + std::to_string(views));
  if (max_score < 1) fail("max_score must be at least 1");
  if (min_frames < clip_length) {
    fail("min_frames " + std::to_string(min_frames) + " is shorter than a clip (" + std::to_string(clip_length) + ")");
  }
  if (max_frames < min_frames) fail("max_frames is below min_frames");
  if (height == 0 || width == 0) fail("height and width must be positive");
  if (!(sigma > 0.0)) fail("sigma must be positive");
  if (action_tag.empty()) fail("action_tag must not be empty");
  if (!(occlusion.joint_probability >= 0.0 && occlusion.joint_probability <= 1.0)) {
    fail("occlusion.joint_probability must lie in [0, 1]");
  }
  if (!(occlusion.max_fraction > 0.0 && occlusion.max_fraction <= 1.0)) fail("occlusion.max_fraction must lie in (0, 1]");
}

std::uint64_t motion_seed(const DatasetSpec& spec, std::size_t subject, std::size_t repetition) {
  return Rng::derive(spec.seed, 1, subject, repetition);
}

std::size_t motion_frames(const DatasetSpec& spec, std::size_t subject, std::size_t repetition) {
  Rng rng(Rng::derive(spec.seed, 2, subject, repetition));
  return static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(spec.min_frames), static_cast<std::int64_t>(spec.max_frames)));
}

std::string SampleKey::id() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%02zu_q%d_r%zu_v%d", subject + 1, score, repetition, view);
  return buf;
}

std::string SampleKey::motion_id() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%02zu_q%d_r%zu", subject + 1, score, repetition);
  return buf;
}

std::vector<SampleKey> enumerate_samples(const DatasetSpec& spec) {
  std::vector<SampleKey> keys;
  keys.reserve(spec.sample_count());
  for (std::size_t s = 0; s < spec.subjects; ++s)
    for (std::size_t r = 0; r < spec.repetitions; ++r)
      for (int q = 0; q <= spec.max_score; ++q)
        for (std::size_t v = 1; v <= spec.views; ++v) keys.push_back({s, q, r, static_cast<int>(v)});
  return keys;
}

namespace {

using HiddenRanges = std::array<std::pair<std::size_t, std::size_t>, kJointCount>;

HiddenRanges draw_occlusion(const DatasetSpec& spec, const SampleKey& key, std::size_t frames) {
  HiddenRanges hidden{};
  if (!spec.occlusion.enabled) return hidden;
  Rng rng(Rng::derive(motion_seed(spec, key.subject, key.repetition), 3, static_cast<std::uint64_t>(key.score),
                      static_cast<std::uint64_t>(key.view)));
  const auto longest = std::max<std::size_t>(
      1, static_cast<std::size_t>(spec.occlusion.max_fraction * static_cast<double>(frames)));
  for (auto& range : hidden) {
    const bool hide = rng.uniform() < spec.occlusion.joint_probability;
    const auto len = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(longest)));
    const auto begin = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(frames - len)));
    if (hide) range = {begin, begin + len};
  }
  return hidden;
}

void apply_occlusion(std::vector<float>& block, const HiddenRanges& hidden, std::size_t start, std::size_t count,
                     std::size_t plane) {
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto [b, e] = hidden[j];
    const std::size_t lo = std::max(b, start), hi = std::min(e, start + count);
    for (std::size_t f = lo; f < hi; ++f) {
      auto it = block.begin() + static_cast<std::ptrdiff_t>((j * count + (f - start)) * plane);
      std::fill(it, it + static_cast<std::ptrdiff_t>(plane), 0.0f);
    }
  }
}

SampleInfo make_info(const DatasetSpec& spec, const SampleKey& key, std::size_t frames) {
  return {key.id(), "heatmaps/" + key.id() + ".vihm", static_cast<int>(key.subject + 1), key.view, key.score,
          spec.action_tag, frames};
}

}  // namespace

SyntheticDataset::SyntheticDataset(DatasetSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto keys = enumerate_samples(spec_);
  std::map<std::string, std::size_t> by_motion;
  for (const auto& key : keys) {
    const std::string mid = key.motion_id();
    auto it = by_motion.find(mid);
    if (it == by_motion.end()) {
      const std::size_t frames = motion_frames(spec_, key.subject, key.repetition);
      motions_.push_back(generate_canonical_motion(spec_.family, key.score, spec_.max_score,
                                                   motion_seed(spec_, key.subject, key.repetition), frames));
      it = by_motion.emplace(mid, motions_.size() - 1).first;
    }
    const CanonicalMotion& m = motions_[it->second];
    motion_index_.push_back(it->second);
    views_.push_back(apply_view_transform(m, default_view(key.view)));
    occlusion_.push_back(draw_occlusion(spec_, key, m.frames));
    infos_.push_back(make_info(spec_, key, m.frames));
    infos_.back().path.clear();
  }
}

std::vector<float> SyntheticDataset::read_frames(std::size_t index, std::size_t start, std::size_t count) const {
  const auto& traj = views_.at(index);
  if (count == 0 || start + count > traj.frames) throw ContractViolation("read_frames: frame range out of bounds");
  auto block = render_frames(traj, start, count, spec_.height, spec_.width, spec_.sigma);
  apply_occlusion(block, occlusion_[index], start, count, spec_.height * spec_.width);
  return block;
}

Manifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir, std::size_t jobs) {
  const SyntheticDataset data(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "heatmaps", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "heatmaps").string() + ": " + ec.message());

  const auto keys = enumerate_samples(spec);
  Manifest manifest;
  manifest.joints = kJointCount;
  manifest.height = spec.height;
  manifest.width = spec.width;
  for (std::size_t i = 0; i < keys.size(); ++i) manifest.samples.push_back(make_info(spec, keys[i], data.samples()[i].frames));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      try {
        MovementSample s = data.load(i);
        save_sequence(s, out_dir / manifest.samples[i].path);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = keys.size();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, keys.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  save_manifest(manifest, out_dir / kManifestName);

  // Canonical trajectories and view transforms, for the consistency checks.
  Json views = Json::array();
  for (std::size_t v = 1; v <= spec.views; ++v) {
    const auto t = default_view(static_cast<int>(v));
    views.push_back({{"view_id", t.view_id}, {"a", t.a}, {"t", t.t}});
  }
  Json motions = Json::array();
  std::set<std::string> written;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!written.insert(keys[i].motion_id()).second) continue;
    const CanonicalMotion& m = data.motion(i);
    Json pts = Json::array();
    for (const auto& p : m.points) pts.push_back({p.x, p.y});
    motions.push_back({{"id", keys[i].motion_id()},
                       {"subject_id", keys[i].subject + 1},
                       {"repetition", keys[i].repetition},
                       {"score", m.score},
                       {"seed", m.seed},
                       {"frames", m.frames},
                       {"points", std::move(pts)}});
  }
  Json samples = Json::array();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    samples.push_back({{"id", keys[i].id()}, {"motion", keys[i].motion_id()}, {"view_id", keys[i].view}});
  }
  const Json meta{{"format", "vinet-generator-metadata"},
                  {"spec", to_json(spec)},
                  {"views", std::move(views)},
                  {"motions", std::move(motions)},
                  {"samples", std::move(samples)}};
  const auto path = out_dir / kMetadataName;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << meta.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
  return manifest;
}

}  // namespace vinet::synth
