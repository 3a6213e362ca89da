#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discprobe/encoder/transformer.hpp"

namespace discprobe::encoder {

// Resolved description of a registered model.
struct EncoderSpec {
  std::string name;
  std::filesystem::path checkpoint;  // resolved directory
  Arch arch = Arch::kEnc;
  int num_layers = 0;      // ENCDEC: encoder + decoder layers
  int encoder_layers = 0;  // equals num_layers unless ENCDEC
  int hidden_dim = 0;
  std::string model_type;  // config.json model_type
  std::string tokenizer;   // tokenizer source: "tokenizer.json" or "vocab.txt"

  // "encoder" / "decoder" for ENCDEC layers, empty otherwise.
  std::string stack_of(int layer) const;
  void check_layer(int layer) const;  // throws ValidationError outside 1..num_layers
};

// One row of a registry file: {name, checkpoint, arch?, num_layers?}.
struct RegistryEntry {
  std::string name;
  std::string checkpoint;
  std::optional<Arch> arch;
  std::optional<int> num_layers;
};

RegistryEntry registry_entry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RegistryEntry& e);

// Named models. Relative checkpoints are looked up under each search root in
// order: the registry file's directory, then `model_roots`.
class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(std::vector<std::filesystem::path> roots) : roots_(std::move(roots)) {}

  static ModelRegistry load(const std::filesystem::path& registry_json,
                            std::vector<std::filesystem::path> model_roots = {});

  void add(RegistryEntry entry);
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  std::vector<std::string> names() const;  // registry file order
  const RegistryEntry& entry(const std::string& name) const;

  // Resolves the checkpoint, classifies the architecture from config.json and
  // caches the spec. Throws IoError for an unresolvable checkpoint and
  // ValidationError when declared arch/num_layers contradict the config.
  const EncoderSpec& spec(const std::string& name);
  EncoderSpec register_model(const RegistryEntry& entry) const;

 private:
  std::filesystem::path resolve(const std::string& checkpoint) const;

  std::vector<std::filesystem::path> roots_;
  std::vector<std::string> order_;
  std::map<std::string, RegistryEntry> entries_;
  std::map<std::string, EncoderSpec> specs_;
};

// Search roots from the DISCPROBE_MODEL_DIR environment variable
// (colon-separated), if set.
std::vector<std::filesystem::path> model_roots_from_env();

}  // namespace discprobe::encoder
