#include <algorithm>
#include <cstring>

#include "vinet/config.hpp"
#include "vinet/errors.hpp"

namespace vinet {

namespace detail {

void throw_bad_value(const std::string& where, const char* key, const Json& value) {
  throw ConfigError(where + ": bad value " + value.dump() + " for '" + key + "'");
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object, got " + j.dump());
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return std::strcmp(k, item.key().c_str()) == 0; });
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace detail

using detail::check_keys;
using detail::read_key;

Json to_json(const VtdmConfig& c) {
  return {{"clip_length", c.clip_length},
          {"height", c.height},
          {"width", c.width},
          {"descriptor_norm", c.descriptor_norm}};
}

void from_json(const Json& j, VtdmConfig& c) {
  const std::string where = "vtdm config";
  check_keys(j, {"clip_length", "height", "width", "descriptor_norm"}, where);
  read_key(j, "clip_length", c.clip_length, where);
  read_key(j, "height", c.height, where);
  read_key(j, "width", c.width, where);
  read_key(j, "descriptor_norm", c.descriptor_norm, where);
}

Json to_json(const ScorerConfig& c) {
  return {{"backbone", to_string(c.style)},
          {"input_channels", c.input_channels},
          {"num_classes", c.num_classes},
          {"first_filters", c.first_filters},
          {"stage_widths", c.stage_widths},
          {"stage_depth", c.stage_depth},
          {"groups", c.groups}};
}

void from_json(const Json& j, ScorerConfig& c) {
  const std::string where = "scorer config";
  check_keys(j, {"backbone", "input_channels", "num_classes", "first_filters", "stage_widths", "stage_depth", "groups"},
             where);
  if (j.contains("backbone")) {
    std::string style;
    read_key(j, "backbone", style, where);
    c.style = parse_backbone_style(style);
  }
  read_key(j, "input_channels", c.input_channels, where);
  read_key(j, "num_classes", c.num_classes, where);
  read_key(j, "first_filters", c.first_filters, where);
  if (j.contains("stage_widths")) {
    const auto& w = j.at("stage_widths");
    if (!w.is_array()) detail::throw_bad_value(where, "stage_widths", w);
    c.stage_widths.clear();
    for (const auto& v : w) {
      if (!v.is_number_unsigned()) detail::throw_bad_value(where, "stage_widths", w);
      c.stage_widths.push_back(v.get<std::size_t>());
    }
  }
  read_key(j, "stage_depth", c.stage_depth, where);
  read_key(j, "groups", c.groups, where);
}

Json to_json(const ModelConfig& c) {
  return {{"vtdm", to_json(c.vtdm)}, {"scorer", to_json(c.scorer)}, {"stn_enabled", c.stn_enabled}};
}

void from_json(const Json& j, ModelConfig& c) {
  const std::string where = "model config";
  check_keys(j, {"vtdm", "scorer", "stn_enabled"}, where);
  if (j.contains("vtdm")) from_json(j.at("vtdm"), c.vtdm);
  if (j.contains("scorer")) from_json(j.at("scorer"), c.scorer);
  read_key(j, "stn_enabled", c.stn_enabled, where);
}

Json to_json(const ActionConfig& c) {
  return {{"name", c.name}, {"max_score", c.max_score}, {"clip_length", c.clip_length}};
}

void from_json(const Json& j, ActionConfig& c) {
  const std::string where = "action config";
  check_keys(j, {"name", "max_score", "clip_length"}, where);
  read_key(j, "name", c.name, where);
  read_key(j, "max_score", c.max_score, where);
  read_key(j, "clip_length", c.clip_length, where);
}

Json to_json(const synth::DatasetSpec& c) {
  return {{"subjects", c.subjects},
          {"views", c.views},
          {"repetitions", c.repetitions},
          {"max_score", c.max_score},
          {"min_frames", c.min_frames},
          {"max_frames", c.max_frames},
          {"height", c.height},
          {"width", c.width},
          {"sigma", c.sigma},
          {"seed", c.seed},
          {"family", synth::to_string(c.family)},
          {"action_tag", c.action_tag},
          {"occlusion",
           {{"enabled", c.occlusion.enabled},
            {"joint_probability", c.occlusion.joint_probability},
            {"max_fraction", c.occlusion.max_fraction}}}};
}

void from_json(const Json& j, synth::DatasetSpec& c) {
  const std::string where = "dataset spec";
  check_keys(j,
             {"subjects", "views", "repetitions", "max_score", "min_frames", "max_frames", "height", "width", "sigma",
              "seed", "family", "action_tag", "occlusion"},
             where);
  read_key(j, "subjects", c.subjects, where);
  read_key(j, "views", c.views, where);
  read_key(j, "repetitions", c.repetitions, where);
  read_key(j, "max_score", c.max_score, where);
  read_key(j, "min_frames", c.min_frames, where);
  read_key(j, "max_frames", c.max_frames, where);
  read_key(j, "height", c.height, where);
  read_key(j, "width", c.width, where);
  read_key(j, "sigma", c.sigma, where);
  read_key(j, "seed", c.seed, where);
  if (j.contains("family")) {
    std::string family;
    read_key(j, "family", family, where);
    c.family = synth::parse_motion_family(family);
  }
  read_key(j, "action_tag", c.action_tag, where);
  if (j.contains("occlusion")) {
    const Json& o = j.at("occlusion");
    const std::string sub = where + ".occlusion";
    check_keys(o, {"enabled", "joint_probability", "max_fraction"}, sub);
    read_key(o, "enabled", c.occlusion.enabled, sub);
    read_key(o, "joint_probability", c.occlusion.joint_probability, sub);
    read_key(o, "max_fraction", c.occlusion.max_fraction, sub);
  }
}

}  // namespace vinet
