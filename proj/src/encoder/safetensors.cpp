#include "discprobe/encoder/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::encoder {

namespace fs = std::filesystem;
using nlohmann::json;

std::int64_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

namespace {

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000) << 16;
  std::uint32_t exp = (h >> 10) & 0x1F;
  std::uint32_t mant = h & 0x3FF;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      exp = 127 - 15 + 1;
      while ((mant & 0x400) == 0) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3FF;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 31) {
    bits = sign | 0x7F800000 | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

TensorMap load_safetensors(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", file.string()));
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 8);
  const auto file_size = fs::file_size(file);
  if (!in || header_len > file_size - 8) throw ParseError(fmt::format("{}: bad safetensors header", file.string()));
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  const std::uint64_t data_start = 8 + header_len;
  json meta;
  try {
    meta = json::parse(header);
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}: {}", file.string(), e.what()));
  }
  TensorMap out;
  for (const auto& [name, info] : meta.items()) {
    if (name == "__metadata__") continue;
    Tensor t;
    t.shape = info.at("shape").get<std::vector<std::int64_t>>();
    const auto dtype = info.at("dtype").get<std::string>();
    const auto offs = info.at("data_offsets").get<std::vector<std::uint64_t>>();
    if (offs.size() != 2 || offs[1] < offs[0] || data_start + offs[1] > file_size) {
      throw ParseError(fmt::format("{}: bad offsets for '{}'", file.string(), name));
    }
    const std::size_t n = static_cast<std::size_t>(t.numel());
    const std::size_t width = dtype == "F32" ? 4 : (dtype == "F16" || dtype == "BF16") ? 2 : 0;
    if (width == 0) throw ParseError(fmt::format("{}: unsupported dtype {} for '{}'", file.string(), dtype, name));
    if (offs[1] - offs[0] != n * width) {
      throw ParseError(fmt::format("{}: size mismatch for '{}'", file.string(), name));
    }
    std::vector<char> raw(n * width);
    in.seekg(static_cast<std::streamoff>(data_start + offs[0]));
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError(fmt::format("{}: truncated data for '{}'", file.string(), name));
    t.data.resize(n);
    if (dtype == "F32") {
      std::memcpy(t.data.data(), raw.data(), raw.size());
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t h;
        std::memcpy(&h, raw.data() + 2 * i, 2);
        t.data[i] = dtype == "F16" ? half_to_float(h) : std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
      }
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

TensorMap load_checkpoint_tensors(const fs::path& dir) {
  if (fs::exists(dir / "model.safetensors")) return load_safetensors(dir / "model.safetensors");
  const auto index = dir / "model.safetensors.index.json";
  if (!fs::exists(index)) {
    throw IoError(fmt::format("'{}' has no model.safetensors or model.safetensors.index.json", dir.string()));
  }
  std::set<std::string> shards;
  for (const auto& [_, file] : io::read_json(index).at("weight_map").items()) shards.insert(file.get<std::string>());
  TensorMap out;
  for (const auto& s : shards) out.merge(load_safetensors(dir / s));
  return out;
}

std::string tensor_checksum(const TensorMap& tensors) {
  io::Sha256 h;
  for (const auto& [name, t] : tensors) {
    h.update(name);
    h.update(t.shape.data(), t.shape.size() * sizeof(std::int64_t));
    h.update(t.data.data(), t.data.size() * sizeof(float));
  }
  return h.hex_digest();
}

}  // namespace discprobe::encoder
