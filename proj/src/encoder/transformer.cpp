#include "discprobe/encoder/transformer.hpp"

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "nn.hpp"

namespace discprobe::encoder {

std::string to_string(Arch a) {
  switch (a) {
    case Arch::kEnc:
      return "ENC";
    case Arch::kDec:
      return "DEC";
    case Arch::kEncDec:
      return "ENCDEC";
  }
  return "?";
}

Arch arch_from_string(const std::string& s) {
  if (s == "ENC") return Arch::kEnc;
  if (s == "DEC") return Arch::kDec;
  if (s == "ENCDEC") return Arch::kEncDec;
  throw ValidationError(fmt::format("unknown architecture '{}' (expected ENC, DEC or ENCDEC)", s));
}

Arch classify_arch(const nlohmann::json& config) {
  if (config.value("is_encoder_decoder", false)) return Arch::kEncDec;
  const auto type = config.value("model_type", std::string());
  if (type == "bart" || type == "t5" || type == "mbart" || type == "mt5") return Arch::kEncDec;
  if (type == "gpt2" || type == "gpt_neo" || type == "openai-gpt" || config.value("is_decoder", false)) {
    return Arch::kDec;
  }
  if (type.empty()) throw ParseError("config.json has no model_type");
  return Arch::kEnc;
}

std::unique_ptr<TransformerModel> load_transformer(const std::filesystem::path& dir) {
  const auto cfg_path = dir / "config.json";
  if (!std::filesystem::exists(cfg_path)) {
    throw IoError(fmt::format("checkpoint '{}' has no config.json", dir.string()));
  }
  const auto config = io::read_json(cfg_path);
  const auto type = config.value("model_type", std::string());
  auto tensors = load_checkpoint_tensors(dir);
  if (type == "bert" || type == "roberta" || type == "xlm-roberta" || type == "camembert" || type == "electra" ||
      type == "albert") {
    return nn::make_bert_family(config, std::move(tensors));
  }
  if (type == "gpt2") return nn::make_gpt2(config, std::move(tensors));
  if (type == "bart") return nn::make_bart(config, std::move(tensors));
  if (type == "t5") return nn::make_t5(config, std::move(tensors));
  throw ParseError(fmt::format("{}: unsupported model_type '{}'", cfg_path.string(), type));
}

}  // namespace discprobe::encoder
