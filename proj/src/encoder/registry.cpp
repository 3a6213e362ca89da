#include "discprobe/encoder/registry.hpp"

#include <cstdlib>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::encoder {

namespace fs = std::filesystem;
using nlohmann::json;

std::string EncoderSpec::stack_of(int layer) const {
  if (arch != Arch::kEncDec) return {};
  return layer <= encoder_layers ? "encoder" : "decoder";
}

void EncoderSpec::check_layer(int layer) const {
  if (layer < 1 || layer > num_layers) {
    throw ValidationError(fmt::format("layer {} out of range for '{}' (valid 1..{})", layer, name, num_layers));
  }
}

RegistryEntry registry_entry_from_json(const json& j) {
  try {
    RegistryEntry e;
    e.name = j.at("name").get<std::string>();
    e.checkpoint = j.value("checkpoint", e.name);
    if (j.contains("arch") && !j["arch"].is_null()) e.arch = arch_from_string(j["arch"].get<std::string>());
    if (j.contains("num_layers") && !j["num_layers"].is_null()) e.num_layers = j["num_layers"].get<int>();
    if (e.name.empty()) throw ValidationError("registry entry with empty name");
    return e;
  } catch (const json::exception& ex) {
    throw ParseError(fmt::format("registry entry: {}", ex.what()));
  }
}

json to_json(const RegistryEntry& e) {
  json j = {{"name", e.name}, {"checkpoint", e.checkpoint}};
  if (e.arch) j["arch"] = to_string(*e.arch);
  if (e.num_layers) j["num_layers"] = *e.num_layers;
  return j;
}

ModelRegistry ModelRegistry::load(const fs::path& registry_json, std::vector<fs::path> model_roots) {
  const json doc = io::read_json(registry_json);
  const json& list = doc.is_object() ? doc.at("models") : doc;
  if (!list.is_array()) throw ParseError(fmt::format("{}: expected a JSON list of models", registry_json.string()));
  model_roots.insert(model_roots.begin(), registry_json.parent_path());
  ModelRegistry reg(std::move(model_roots));
  for (const auto& j : list) reg.add(registry_entry_from_json(j));
  return reg;
}

void ModelRegistry::add(RegistryEntry entry) {
  if (entries_.count(entry.name)) throw ValidationError(fmt::format("model '{}' registered twice", entry.name));
  order_.push_back(entry.name);
  const std::string name = entry.name;
  entries_.emplace(name, std::move(entry));
}

std::vector<std::string> ModelRegistry::names() const { return order_; }

const RegistryEntry& ModelRegistry::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError(fmt::format("unknown model '{}'", name));
  return it->second;
}

fs::path ModelRegistry::resolve(const std::string& checkpoint) const {
  const fs::path p(checkpoint);
  if (p.is_absolute()) {
    if (fs::exists(p / "config.json")) return p;
  } else {
    for (const auto& root : roots_) {
      if (fs::exists(root / p / "config.json")) return fs::weakly_canonical(root / p);
    }
  }
  throw IoError(fmt::format("cannot resolve checkpoint '{}' (no config.json found{})", checkpoint,
                            roots_.empty() ? "" : "; set DISCPROBE_MODEL_DIR to the directory holding checkpoints"));
}

EncoderSpec ModelRegistry::register_model(const RegistryEntry& e) const {
  EncoderSpec s;
  s.name = e.name;
  s.checkpoint = resolve(e.checkpoint);
  const json cfg = io::read_json(s.checkpoint / "config.json");
  s.model_type = cfg.value("model_type", std::string());
  s.arch = classify_arch(cfg);
  auto num = [&](std::initializer_list<const char*> keys, int fallback) {
    for (const char* k : keys) {
      if (cfg.contains(k) && cfg[k].is_number()) return cfg[k].get<int>();
    }
    return fallback;
  };
  if (s.arch == Arch::kEncDec) {
    s.encoder_layers = num({"encoder_layers", "num_layers"}, 0);
    s.num_layers = s.encoder_layers + num({"decoder_layers", "num_decoder_layers", "num_layers"}, 0);
  } else {
    s.num_layers = s.encoder_layers = num({"num_hidden_layers", "n_layer"}, 0);
  }
  s.hidden_dim = num({"hidden_size", "n_embd", "d_model"}, 0);
  if (s.num_layers < 1 || s.hidden_dim < 1) {
    throw ParseError(fmt::format("{}: cannot read layer count / hidden size", s.checkpoint.string()));
  }
  if (e.arch && *e.arch != s.arch) {
    throw ValidationError(fmt::format("model '{}' declared {} but its config is {}", e.name, to_string(*e.arch),
                                      to_string(s.arch)));
  }
  if (e.num_layers && *e.num_layers != s.num_layers) {
    throw ValidationError(
        fmt::format("model '{}' declared {} layers but its config has {}", e.name, *e.num_layers, s.num_layers));
  }
  s.tokenizer = fs::exists(s.checkpoint / "tokenizer.json") ? "tokenizer.json" : "vocab.txt";
  return s;
}

const EncoderSpec& ModelRegistry::spec(const std::string& name) {
  if (auto it = specs_.find(name); it != specs_.end()) return it->second;
  return specs_.emplace(name, register_model(entry(name))).first->second;
}

std::vector<fs::path> model_roots_from_env() {
  std::vector<fs::path> out;
  if (const char* env = std::getenv("DISCPROBE_MODEL_DIR")) {
    for (const auto& part : io::split(env, ':')) {
      if (!part.empty()) out.emplace_back(part);
    }
  }
  return out;
}

}  // namespace discprobe::encoder
