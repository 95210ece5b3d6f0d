#include <fstream>

#include "json.hpp"
#include "vinet/errors.hpp"
#include "vinet/heatmap.hpp"

namespace vinet {

using nlohmann::json;

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  json samples = json::array();
  for (const auto& s : manifest.samples) {
    samples.push_back({{"id", s.id},
                       {"path", s.path},
                       {"subject_id", s.subject_id},
                       {"view_id", s.view_id},
                       {"score", s.score},
                       {"action_tag", s.action_tag},
                       {"frames", s.frames}});
  }
  json doc{{"format", "vinet-manifest"},
           {"version", 1},
           {"joints", manifest.joints},
           {"height", manifest.height},
           {"width", manifest.width},
           {"samples", std::move(samples)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  try {
    const json doc = json::parse(in);
    m.joints = doc.value("joints", kDefaultJoints);
    m.height = doc.at("height").get<std::size_t>();
    m.width = doc.at("width").get<std::size_t>();
    for (const auto& e : doc.at("samples")) {
      SampleInfo s;
      s.path = e.at("path").get<std::string>();
      s.id = e.value("id", std::filesystem::path(s.path).stem().string());
      s.subject_id = e.at("subject_id").get<int>();
      s.view_id = e.at("view_id").get<int>();
      s.score = e.at("score").get<int>();
      s.action_tag = e.at("action_tag").get<std::string>();
      s.frames = e.value("frames", std::size_t{0});
      m.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

MovementSample SampleSource::load(std::size_t index) const {
  const auto& info = samples().at(index);
  MovementSample s;
  s.joints = joints();
  s.frames = info.frames;
  s.height = height();
  s.width = width();
  s.heatmaps = read_frames(index, 0, info.frames);
  s.score = info.score;
  s.subject_id = info.subject_id;
  s.view_id = info.view_id;
  s.action_tag = info.action_tag;
  return s;
}

FileDataset::FileDataset(const std::filesystem::path& manifest_path)
    : root_(manifest_path.parent_path()), manifest_(load_manifest(manifest_path)) {
  for (auto& s : manifest_.samples) {
    HeatmapFile f(root_ / s.path);
    if (f.joints() != manifest_.joints || f.height() != manifest_.height || f.width() != manifest_.width) {
      throw FormatError((root_ / s.path).string() + ": dims disagree with manifest", 8);
    }
    if (s.frames != 0 && s.frames != f.frames()) {
      throw FormatError((root_ / s.path).string() + ": frame count disagrees with manifest", 12);
    }
    s.frames = f.frames();
  }
}

std::vector<float> FileDataset::read_frames(std::size_t index, std::size_t start, std::size_t count) const {
  return HeatmapFile(root_ / manifest_.samples.at(index).path).read_frames(start, count);
}

InMemoryDataset::InMemoryDataset(std::vector<MovementSample> samples) : samples_(std::move(samples)) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (i == 0) {
      joints_ = s.joints;
      height_ = s.height;
      width_ = s.width;
    } else if (s.joints != joints_ || s.height != height_ || s.width != width_) {
      throw ContractViolation("InMemoryDataset: sample " + std::to_string(i) + " has different dims");
    }
    infos_.push_back({"sample_" + std::to_string(i), "", s.subject_id, s.view_id, s.score, s.action_tag, s.frames});
  }
}

std::vector<float> InMemoryDataset::read_frames(std::size_t index, std::size_t start, std::size_t count) const {
  const auto& s = samples_.at(index);
  if (count == 0 || start + count > s.frames) throw ContractViolation("read_frames: frame range out of bounds");
  const std::size_t frame = s.frame_size();
  std::vector<float> out(s.joints * count * frame);
  for (std::size_t j = 0; j < s.joints; ++j) {
    const float* src = s.heatmaps.data() + (j * s.frames + start) * frame;
    std::copy(src, src + count * frame, out.begin() + static_cast<std::ptrdiff_t>(j * count * frame));
  }
  return out;
}

}  // namespace vinet
