#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "vinet/errors.hpp"
#include "vinet/heatmap.hpp"

namespace vinet {

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return to_le(v);
}

void floats_from_le(std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : values) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      u = __builtin_bswap32(u);
      std::memcpy(&f, &u, 4);
    }
  }
}

struct Header {
  std::size_t joints, frames, height, width;
};

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, std::uint64_t offset) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    throw FormatError("heatmap dimensions overflow", offset);
  }
  return a * b;
}

Header read_header(std::ifstream& in, const std::filesystem::path& path, std::uint64_t file_size) {
  unsigned char buf[kHeatmapHeaderBytes];
  in.read(reinterpret_cast<char*>(buf), kHeatmapHeaderBytes);
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got < 4) throw FormatError(path.string() + ": truncated magic", got);
  if (std::memcmp(buf, kHeatmapMagic, 4) != 0) throw FormatError(path.string() + ": bad magic, expected VIHM", 0);
  if (got < kHeatmapHeaderBytes) throw FormatError(path.string() + ": truncated header", got);
  const std::uint32_t version = get_u32(buf + 4);
  if (version != kHeatmapVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version), 4);
  }
  static constexpr const char* names[4] = {"J", "F", "H", "W"};
  std::uint32_t dims[4];
  for (int i = 0; i < 4; ++i) {
    dims[i] = get_u32(buf + 8 + 4 * i);
    if (dims[i] == 0) throw FormatError(path.string() + ": dimension " + names[i] + " is zero", 8 + 4 * i);
  }
  std::uint64_t expected = 4;
  for (auto d : dims) expected = checked_mul(expected, d, 8);
  const std::uint64_t payload = file_size - kHeatmapHeaderBytes;
  if (payload < expected) {
    throw FormatError(path.string() + ": payload holds " + std::to_string(payload / 4) + " values, header J=" +
                          std::to_string(dims[0]) + " F=" + std::to_string(dims[1]) + " H=" +
                          std::to_string(dims[2]) + " W=" + std::to_string(dims[3]) + " needs " +
                          std::to_string(expected / 4),
                      file_size);
  }
  if (payload > expected) {
    throw FormatError(path.string() + ": " + std::to_string(payload - expected) + " trailing bytes after payload",
                      kHeatmapHeaderBytes + expected);
  }
  return {dims[0], dims[1], dims[2], dims[3]};
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open heatmap file " + path.string());
  return in;
}

}  // namespace

void save_sequence(const MovementSample& sample, const std::filesystem::path& path) {
  const std::size_t n = sample.joints * sample.frames * sample.height * sample.width;
  if (n == 0 || sample.heatmaps.size() != n) {
    throw ContractViolation("save_sequence: volume holds " + std::to_string(sample.heatmaps.size()) +
                            " values for dims J=" + std::to_string(sample.joints) + " F=" +
                            std::to_string(sample.frames) + " H=" + std::to_string(sample.height) +
                            " W=" + std::to_string(sample.width));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write heatmap file " + path.string());
  out.write(kHeatmapMagic, 4);
  put_u32(out, kHeatmapVersion);
  for (auto d : {sample.joints, sample.frames, sample.height, sample.width}) put_u32(out, static_cast<std::uint32_t>(d));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(sample.heatmaps.data()), static_cast<std::streamsize>(n * 4));
  } else {
    for (float f : sample.heatmaps) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

MovementSample load_sequence(const std::filesystem::path& path) {
  HeatmapFile file(path);
  MovementSample s;
  s.joints = file.joints();
  s.frames = file.frames();
  s.height = file.height();
  s.width = file.width();
  s.heatmaps = file.read_frames(0, s.frames);
  return s;
}

HeatmapFile::HeatmapFile(std::filesystem::path path) : path_(std::move(path)) {
  auto in = open_binary(path_);
  const auto size = std::filesystem::file_size(path_);
  const Header h = read_header(in, path_, size);
  joints_ = h.joints;
  frames_ = h.frames;
  height_ = h.height;
  width_ = h.width;
}

std::vector<float> HeatmapFile::read_frames(std::size_t start, std::size_t count) const {
  if (count == 0 || start + count > frames_) {
    throw ContractViolation("read_frames: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                            ") outside " + std::to_string(frames_) + " frames of " + path_.string());
  }
  auto in = open_binary(path_);
  const std::size_t frame = height_ * width_;
  std::vector<float> out(joints_ * count * frame);
  for (std::size_t j = 0; j < joints_; ++j) {
    const std::uint64_t offset = kHeatmapHeaderBytes + ((j * frames_ + start) * frame) * 4;
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(out.data() + j * count * frame), static_cast<std::streamsize>(count * frame * 4));
    if (static_cast<std::size_t>(in.gcount()) != count * frame * 4) {
      throw FormatError(path_.string() + ": short read", offset + static_cast<std::uint64_t>(in.gcount()));
    }
  }
  floats_from_le(out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] >= 0.0f) || !std::isfinite(out[i])) {
      const std::size_t j = i / (count * frame), rest = i % (count * frame);
      const std::uint64_t offset = kHeatmapHeaderBytes + ((j * frames_ + start) * frame + rest) * 4;
      throw FormatError(path_.string() + ": heatmap value must be finite and non-negative", offset);
    }
  }
  return out;
}

}  // namespace vinet
