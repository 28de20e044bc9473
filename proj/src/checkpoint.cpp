#include "sticker/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

namespace sticker::checkpoint {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'K', 'C', 'K', 'P', 'T', '1'};

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
V get(std::istream& in, const std::filesystem::path& path) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("truncated checkpoint " + path.string());
  return v;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

void save(const std::filesystem::path& path, const nn::ParameterSet<float>& params, const nlohmann::json& sidecar) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(out, params.entries().size());
    for (const auto& [name, var] : params.entries()) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::int64_t>(out, var.rows());
      put<std::int64_t>(out, var.cols());
      out.write(reinterpret_cast<const char*>(var.value().data()),
                static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(var.value().size())));
    }
    if (!out) throw CheckpointError("write failed for " + path.string());
  }
  std::ofstream side(sidecar_path(path), std::ios::trunc);
  if (!side) throw CheckpointError("cannot write " + sidecar_path(path).string());
  side << sidecar.dump(2) << '\n';
}

Archive load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint: " + path.string());
  Archive a;
  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = get<std::int64_t>(in, path);
    const auto cols = get<std::int64_t>(in, path);
    if (!in || rows < 0 || cols < 0) throw CheckpointError("corrupt tensor header in " + path.string());
    ag::Matrix<float> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
    if (!in) throw CheckpointError("truncated checkpoint " + path.string());
    a.tensors.emplace_back(std::move(name), std::move(m));
  }
  std::ifstream side(sidecar_path(path));
  if (!side) throw CheckpointError("missing sidecar " + sidecar_path(path).string());
  try {
    a.sidecar = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("bad sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  return a;
}

void restore(const Archive& archive, nn::ParameterSet<float>& params) {
  std::set<std::string> seen;
  for (const auto& [name, value] : archive.tensors) {
    auto* var = params.find(name);
    if (var == nullptr) throw CheckpointError("checkpoint tensor \"" + name + "\" has no matching parameter");
    if (var->rows() != value.rows() || var->cols() != value.cols()) {
      throw CheckpointError("shape mismatch for \"" + name + "\"");
    }
    var->mutable_value() = value;
    seen.insert(name);
  }
  for (const auto& [name, var] : params.entries()) {
    if (!seen.count(name)) throw CheckpointError("checkpoint lacks parameter \"" + name + "\"");
  }
}

}  // namespace sticker::checkpoint
