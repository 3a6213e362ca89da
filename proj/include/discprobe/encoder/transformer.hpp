#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "discprobe/encoder/safetensors.hpp"

namespace discprobe::encoder {

enum class Arch { kEnc, kDec, kEncDec };

std::string to_string(Arch a);   // "ENC", "DEC", "ENCDEC"
Arch arch_from_string(const std::string& s);

// Reads `model_type` / `is_encoder_decoder` from a config.json object.
Arch classify_arch(const nlohmann::json& config);

// Hidden states of one layer: one row per input position.
using States = Eigen::MatrixXf;

// A frozen pretrained network. All methods are const; weights are never
// modified after loading.
class TransformerModel {
 public:
  virtual ~TransformerModel() = default;

  virtual Arch arch() const = 0;
  // Total probe-able layers; for ENCDEC encoder layers come first.
  virtual int num_layers() const = 0;
  virtual int encoder_layers() const { return num_layers(); }
  virtual int hidden_dim() const = 0;
  // Longest supported input in tokens, 0 when unbounded.
  virtual int max_positions() const = 0;
  virtual std::string model_type() const = 0;

  // Per-layer hidden states [1..num_layers]. For ENCDEC models the decoder is
  // fed the input shifted right by one position (start token first), so
  // decoder row p+1 is the state after reading input token p.
  virtual std::vector<States> forward(const std::vector<int>& ids, const std::vector<int>& type_ids) const = 0;

  const std::string& weights_checksum() const { return checksum_; }

 protected:
  std::string checksum_;
};

// Loads config.json and the safetensors weights from an HF checkpoint
// directory. Supported model_type values: bert, roberta, xlm-roberta,
// camembert, electra, albert, gpt2, bart, t5.
std::unique_ptr<TransformerModel> load_transformer(const std::filesystem::path& dir);

}  // namespace discprobe::encoder
