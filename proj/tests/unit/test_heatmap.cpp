#include <cstring>
#include <fstream>

#include "doctest.h"
#include "../support/temp_dir.hpp"
#include "vinet/errors.hpp"
#include "vinet/heatmap.hpp"
#include "vinet/random.hpp"

using namespace vinet;

namespace {

MovementSample random_sample(Rng& rng, std::size_t j, std::size_t f, std::size_t h, std::size_t w) {
  MovementSample s;
  s.joints = j;
  s.frames = f;
  s.height = h;
  s.width = w;
  s.heatmaps.resize(j * f * h * w);
  for (auto& v : s.heatmaps) v = static_cast<float>(rng.uniform(0.0, 3.0));
  return s;
}

void write_header(std::ofstream& out, const char* magic, std::uint32_t version, std::uint32_t j, std::uint32_t f,
                  std::uint32_t h, std::uint32_t w) {
  out.write(magic, 4);
  for (std::uint32_t v : {version, j, f, h, w}) out.write(reinterpret_cast<const char*>(&v), 4);
}

}  // namespace

TEST_CASE("heatmap file round trip is bit exact") {
  TempDir dir;
  Rng rng(1);
  auto s = random_sample(rng, 3, 5, 4, 6);
  s.heatmaps[7] = 0.0f;
  s.heatmaps[8] = 1e-30f;
  save_sequence(s, dir / "a.vihm");
  auto back = load_sequence(dir / "a.vihm");
  CHECK(back.joints == 3);
  CHECK(back.frames == 5);
  CHECK(back.height == 4);
  CHECK(back.width == 6);
  REQUIRE(back.heatmaps.size() == s.heatmaps.size());
  CHECK(std::memcmp(back.heatmaps.data(), s.heatmaps.data(), s.heatmaps.size() * 4) == 0);

  std::ifstream raw(dir / "a.vihm", std::ios::binary);
  char magic[4];
  raw.read(magic, 4);
  CHECK(std::string(magic, 4) == "VIHM");
  CHECK(std::filesystem::file_size(dir / "a.vihm") == 24 + 3 * 5 * 4 * 6 * 4);
}

TEST_CASE("malformed heatmap files are rejected with positions") {
  TempDir dir;
  {
    std::ofstream out(dir / "magic.vihm", std::ios::binary);
    write_header(out, "VIHX", 1, 1, 1, 1, 1);
    float v = 0;
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  try {
    load_sequence(dir / "magic.vihm");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  {
    std::ofstream out(dir / "short.vihm", std::ios::binary);
    write_header(out, "VIHM", 1, 15, 62, 64, 64);
    std::vector<float> payload(15 * 62 * 64 * 64 - 1, 0.0f);
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
  }
  try {
    load_sequence(dir / "short.vihm");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 24 + (15ull * 62 * 64 * 64 - 1) * 4);
    CHECK(std::string(e.what()).find("needs 3809280") != std::string::npos);
  }

  {
    std::ofstream out(dir / "long.vihm", std::ios::binary);
    write_header(out, "VIHM", 1, 1, 1, 1, 2);
    std::vector<float> payload(3, 0.0f);
    out.write(reinterpret_cast<const char*>(payload.data()), 12);
  }
  try {
    load_sequence(dir / "long.vihm");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 24 + 8);
  }

  {
    std::ofstream out(dir / "version.vihm", std::ios::binary);
    write_header(out, "VIHM", 2, 1, 1, 1, 1);
  }
  try {
    load_sequence(dir / "version.vihm");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 4);
  }

  {
    std::ofstream out(dir / "zero.vihm", std::ios::binary);
    write_header(out, "VIHM", 1, 1, 0, 1, 1);
  }
  try {
    load_sequence(dir / "zero.vihm");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 12);
  }

  {
    std::ofstream out(dir / "trunc.vihm", std::ios::binary);
    out.write("VIHM\x01\x00", 6);
  }
  CHECK_THROWS_AS(load_sequence(dir / "trunc.vihm"), FormatError);
  CHECK_THROWS_AS(load_sequence(dir / "missing.vihm"), IoError);
}

TEST_CASE("split_clips floor arithmetic") {
  Rng rng(2);
  auto s = random_sample(rng, 2, 100, 3, 3);
  auto clips = split_clips(s, 16);
  CHECK(clips.size() == 6);
  CHECK(clips.back().index == 6);
  for (const auto& c : clips) CHECK(c.data.size() == 2 * 16 * 9);

  auto one = random_sample(rng, 2, 16, 3, 3);
  auto single = split_clips(one, 16);
  REQUIRE(single.size() == 1);
  for (std::size_t i = 0; i < one.heatmaps.size(); ++i) CHECK(single[0].data[i] == static_cast<double>(one.heatmaps[i]));

  auto shorter = random_sample(rng, 2, 15, 3, 3);
  CHECK_THROWS_AS(split_clips(shorter, 16), SequenceTooShort);
}

TEST_CASE("split then concatenate reproduces the covered frames") {
  Rng rng(3);
  for (std::size_t f : {16u, 17u, 40u, 63u}) {
    auto s = random_sample(rng, 3, f, 2, 2);
    auto clips = split_clips(s, 8);
    const std::size_t m = f / 8;
    REQUIRE(clips.size() == m);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t t = 0; t < m * 8; ++t)
        for (std::size_t p = 0; p < 4; ++p) {
          const auto& c = clips[t / 8];
          CHECK(c.data[(j * 8 + t % 8) * 4 + p] == static_cast<double>(s.heatmaps[(j * f + t) * 4 + p]));
        }
  }
}

TEST_CASE("normalize_clip") {
  HeatmapClip c;
  c.joints = 1;
  c.frames = 1;
  c.height = 1;
  c.width = 3;
  c.data = {0, 0.5, 1};
  auto n = normalize_clip(c);
  CHECK(n.data == std::vector<double>{0, 127.5, 255});

  HeatmapClip zero = c;
  zero.data = {0, 0, 0};
  CHECK(normalize_clip(zero).data == zero.data);

  HeatmapClip fixed = c;
  fixed.data = {3, 255, 17.25};
  CHECK(normalize_clip(fixed).data == fixed.data);

  HeatmapClip neg = c;
  neg.data = {0, -1, 2};
  CHECK_THROWS_AS(normalize_clip(neg), ContractViolation);
}

TEST_CASE("normalize_clip is idempotent for every scope") {
  Rng rng(4);
  for (auto scope : {NormalizationScope::clip, NormalizationScope::joint, NormalizationScope::frame}) {
    for (int trial = 0; trial < 20; ++trial) {
      HeatmapClip c;
      c.joints = 3;
      c.frames = 4;
      c.height = 5;
      c.width = 5;
      c.data.resize(300);
      for (auto& v : c.data) v = rng.uniform(0.0, rng.uniform(0.01, 50.0));
      auto once = normalize_clip(c, scope);
      auto twice = normalize_clip(once, scope);
      CHECK(once.data == twice.data);
      double mx = 0;
      for (double v : once.data) mx = std::max(mx, v);
      CHECK(mx == 255.0);
    }
  }
  CHECK(parse_normalization_scope("joint") == NormalizationScope::joint);
  CHECK_THROWS_AS(parse_normalization_scope("pixel"), ConfigError);
}

TEST_CASE("manifest and file dataset") {
  TempDir dir;
  Rng rng(5);
  Manifest m;
  m.joints = 2;
  m.height = 3;
  m.width = 3;
  for (int i = 0; i < 3; ++i) {
    auto s = random_sample(rng, 2, 20 + static_cast<std::size_t>(i), 3, 3);
    const std::string name = "s" + std::to_string(i) + ".vihm";
    save_sequence(s, dir / name);
    m.samples.push_back({"s" + std::to_string(i), name, i, i + 1, i % 2, "W-P", 0});
  }
  save_manifest(m, dir / "manifest.json");
  FileDataset ds(dir / "manifest.json");
  REQUIRE(ds.size() == 3);
  CHECK(ds.samples()[2].frames == 22);
  CHECK(ds.samples()[1].view_id == 2);
  auto full = ds.load(1);
  CHECK(full.frames == 21);
  auto part = ds.read_frames(1, 5, 4);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t p = 0; p < 9; ++p) CHECK(part[(j * 4 + t) * 9 + p] == full.heatmaps[(j * 21 + 5 + t) * 9 + p]);
  CHECK_THROWS_AS(ds.read_frames(1, 20, 4), ContractViolation);
}
