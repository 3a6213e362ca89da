#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace discprobe::encoder {

// A dense tensor converted to float32, row-major.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const;
};

using TensorMap = std::map<std::string, Tensor>;

// Reads a .safetensors file. F32, F16 and BF16 payloads are accepted and
// converted to float32; other dtypes raise ParseError.
TensorMap load_safetensors(const std::filesystem::path& file);

// Loads model.safetensors, or every shard listed in
// model.safetensors.index.json, from a checkpoint directory.
TensorMap load_checkpoint_tensors(const std::filesystem::path& dir);

// SHA-256 over tensor names, shapes and float32 payloads in name order.
std::string tensor_checksum(const TensorMap& tensors);

}  // namespace discprobe::encoder
