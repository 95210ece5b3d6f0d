#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "vinet/config.hpp"
#include "vinet/errors.hpp"
#include "vinet/model.hpp"

namespace vinet {

namespace {

template <typename T>
T swap_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ofstream& out, T v) {
  v = swap_le(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path, std::uint64_t& offset, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (static_cast<std::size_t>(in.gcount()) != sizeof(T)) {
    throw FormatError(path.string() + ": truncated " + what, offset + static_cast<std::uint64_t>(in.gcount()));
  }
  offset += sizeof(T);
  return swap_le(v);
}

// Every array the model stores, keyed by name, as writable views.
std::map<std::string, std::span<double>> writable_arrays(VinetModel& model) {
  std::map<std::string, std::span<double>> out;
  for (auto& p : model.all_parameters()) out.emplace(p.name, p.tensor.mutable_values());
  for (auto& [name, state] : model.buffers()) {
    out.emplace(name + ".running_mean", std::span<double>(state->running_mean));
    out.emplace(name + ".running_var", std::span<double>(state->running_var));
  }
  return out;
}

}  // namespace

void save_checkpoint(VinetModel& model, std::size_t epoch, const std::filesystem::path& path) {
  const auto arrays = model_arrays(model);
  Json table = Json::array();
  for (const auto& [name, values] : arrays) table.push_back({{"name", name}, {"size", values.size()}});
  const Json header{{"format", "vinet-checkpoint"},
                    {"config", to_json(model.config())},
                    {"seed", model.seed()},
                    {"epoch", epoch},
                    {"arrays", table}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, values] : arrays)
    for (double v : values) put<double>(out, v);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::uint64_t offset = 0;
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic, expected VICK", 0);
  }
  offset = 4;
  const auto version = get<std::uint32_t>(in, path, offset, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto header_len = get<std::uint64_t>(in, path, offset, "header length");
  std::string text(static_cast<std::size_t>(std::min<std::uint64_t>(header_len, 1u << 26)), '\0');
  if (header_len != text.size()) throw FormatError(path.string() + ": implausible header length", 8);
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != header_len) {
    throw FormatError(path.string() + ": truncated header", offset + static_cast<std::uint64_t>(in.gcount()));
  }
  Json header;
  try {
    header = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": header is not JSON (" + e.what() + ")", offset);
  }
  const std::uint64_t header_start = offset;
  offset += header_len;

  ModelConfig config;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  Json table;
  try {
    if (header.at("format") != "vinet-checkpoint") throw FormatError(path.string() + ": not a checkpoint", header_start);
    from_json(header.at("config"), config);
    seed = header.at("seed").get<std::uint64_t>();
    epoch = header.at("epoch").get<std::size_t>();
    table = header.at("arrays");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": incomplete header (" + e.what() + ")", header_start);
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what(), header_start);
  }

  LoadedCheckpoint result{VinetModel(config, seed), epoch};
  auto arrays = writable_arrays(result.model);
  if (!table.is_array() || table.size() != arrays.size()) {
    throw FormatError(path.string() + ": array table does not match the configured model", header_start);
  }
  auto it = arrays.begin();
  for (const auto& entry : table) {
    const std::string name = entry.value("name", "");
    const std::size_t size = entry.value("size", std::size_t{0});
    if (name != it->first || size != it->second.size()) {
      throw FormatError(path.string() + ": expected array " + it->first + "[" + std::to_string(it->second.size()) +
                            "], found " + name + "[" + std::to_string(size) + "]",
                        header_start);
    }
    for (double& v : it->second) v = get<double>(in, path, offset, "array data");
    ++it;
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes", offset);
  return result;
}

}  // namespace vinet
