#include "tlmg/numerics/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "tlmg/error.hpp"

namespace tlmg::nn {

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0x00000000000000ffULL) << 56) | ((v & 0x000000000000ff00ULL) << 40) |
        ((v & 0x0000000000ff0000ULL) << 24) | ((v & 0x00000000ff000000ULL) << 8) |
        ((v & 0x000000ff00000000ULL) >> 8) | ((v & 0x0000ff0000000000ULL) >> 24) |
        ((v & 0x00ff000000000000ULL) >> 40) | ((v & 0xff00000000000000ULL) >> 56);
  }
  return v;
}

}  // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw ParseError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(tensors.begin(), tensors.end(),
                     [&](const NamedTensor& t) { return t.name == name; });
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = kCheckpointFormatVersion;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    header["tensors"].push_back({{"name", t.name}, {"shape", t.tensor.shape()}});
  }
  header["hyperparameters"] = ckpt.hyperparameters;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const std::string text = header.dump() + "\n";
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) {
    for (double v : t.tensor.data()) {
      std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty checkpoint " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint header is not JSON: " + std::string(e.what()));
  }
  if (header.value("format_version", 0) != kCheckpointFormatVersion) {
    throw ParseError("unsupported checkpoint format version in " + path.string());
  }
  Checkpoint ckpt;
  ckpt.hyperparameters = header.value("hyperparameters", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    std::vector<double> values(shape_size(shape));
    for (double& v : values) {
      std::uint64_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), sizeof bits);
      if (!in) throw ParseError("truncated checkpoint " + path.string());
      v = std::bit_cast<double>(to_little_endian(bits));
    }
    ckpt.tensors.push_back({entry.at("name").get<std::string>(),
                            Tensor::from(std::move(shape), std::move(values))});
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError("trailing bytes in checkpoint " + path.string());
  }
  return ckpt;
}

std::vector<NamedTensor> snapshot(const ParameterStore& store,
                                  const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (const auto& p : store.all()) {
    out.push_back({prefix + p.name, p.tensor.detach()});
  }
  return out;
}

void restore(ParameterStore& store, const Checkpoint& ckpt,
             const std::string& prefix) {
  for (auto& p : store.all()) {
    const Tensor& src = ckpt.find(prefix + p.name);
    if (src.shape() != p.tensor.shape()) {
      throw DimensionError("checkpoint tensor '" + prefix + p.name + "' has shape " +
                           shape_string(src.shape()) + ", model expects " +
                           shape_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    std::copy(src.data().begin(), src.data().end(), dst.begin());
  }
}

}  // namespace tlmg::nn
