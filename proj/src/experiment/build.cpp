#include "discprobe/experiment/build.hpp"

#include <algorithm>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/corpus/relation_map.hpp"
#include "discprobe/corpus/sentence_splitter.hpp"
#include "discprobe/encoder/hf_tokenizer.hpp"
#include "discprobe/experiment/config.hpp"
#include "discprobe/tasks/builders.hpp"

namespace discprobe::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using tasks::Task;

namespace {

std::map<int, std::size_t> counts_param(const json& params, std::map<int, std::size_t> defaults) {
  if (!params.contains("counts")) return defaults;
  std::map<int, std::size_t> out;
  for (const auto& [k, v] : params.at("counts").items()) out[std::stoi(k)] = v.get<std::size_t>();
  return out;
}

void require(const fs::path& p, const char* what) {
  if (p.empty()) throw ValidationError(fmt::format("{} is required", what));
  if (!fs::exists(p)) throw IoError(fmt::format("{} '{}' does not exist", what, p.string()));
}

std::string corpus_digest(const fs::path& p) {
  if (fs::is_regular_file(p)) return io::sha256_hex(io::read_file(p));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  io::Sha256 h;
  for (const auto& f : files) {
    h.update(fs::relative(f, p).string());
    h.update(io::read_file(f));
  }
  return h.hex_digest();
}

template <typename T>
BuildSummary finish(tasks::DatasetSplit<T> split, const BuildOptions& o) {
  split.provenance["corpus_sha256"] = corpus_digest(o.corpus);
  if (!o.test_corpus.empty()) split.provenance["test_corpus_sha256"] = corpus_digest(o.test_corpus);
  tasks::write_split(o.out, split);
  return {{split.train.size(), split.dev.size(), split.test.size()}, split.label_inventory.size(), o.out};
}

BuildSummary build(const BuildOptions& o) {
  if (o.out.empty()) throw ValidationError("--out is required");
  require(o.corpus, "corpus");
  const json& p = o.params;
  switch (o.task) {
    case Task::kNsp:
    case Task::kOrdering: {
      const auto splitter = corpus::make_splitter(o.language);
      const auto docs = corpus::load_documents(o.corpus, *splitter);
      if (o.task == Task::kNsp) {
        tasks::NspConfig c;
        c.seed = o.seed;
        c.counts_per_context_size = counts_param(p, c.counts_per_context_size);
        c.distractors_per_instance = p.value("distractors", c.distractors_per_instance);
        if (p.contains("distractor_scope")) {
          c.distractor_scope = tasks::distractor_scope_from_string(p.at("distractor_scope").get<std::string>());
        }
        return finish(tasks::build_nsp(docs, c), o);
      }
      tasks::OrderingConfig c;
      c.seed = o.seed;
      c.counts_per_n = counts_param(p, c.counts_per_n);
      return finish(tasks::build_ordering(docs, c), o);
    }
    case Task::kConnective: {
      tasks::ConnectiveConfig c;
      c.seed = o.seed;
      c.min_frequency = p.value("min_frequency", c.min_frequency);
      c.train_size = p.value("train_size", c.train_size);
      c.dev_size = p.value("dev_size", c.dev_size);
      c.test_size = p.value("test_size", c.test_size);
      return finish(tasks::build_connectives(tasks::read_connective_tsv(o.corpus), c), o);
    }
    case Task::kNuclearity:
    case Task::kRelation: {
      const fs::path map_path = o.relation_map.empty()
                                    ? fs::path(DISCPROBE_SOURCE_DIR) / "data" / "relation_maps" / "rstdt_en.tsv"
                                    : o.relation_map;
      require(map_path, "relation map");
      const auto map = corpus::load_relation_map(map_path, corpus::expected_relation_count(o.language));
      auto [nuc, rel] = tasks::build_rst_pairs(tasks::load_treebank_splits(o.corpus, o.seed), map);
      return finish(o.task == Task::kNuclearity ? std::move(nuc) : std::move(rel), o);
    }
    case Task::kSegmentation: {
      if (o.model.empty()) throw ValidationError("segmentation needs --model to choose the tokenizer");
      ExperimentConfig cfg;
      cfg.registry = o.registry;
      auto registry = open_registry(cfg);
      const auto tok = encoder::load_tokenizer(registry.spec(o.model).checkpoint);
      auto split = tasks::build_edu_segmentation(tasks::load_treebank_splits(o.corpus, o.seed), *tok,
                                                 p.value("max_tokens", tasks::kSegmentationMaxTokens));
      split.provenance["model"] = o.model;
      return finish(std::move(split), o);
    }
    case Task::kCloze: {
      require(o.test_corpus, "cloze test corpus");
      tasks::ClozeConfig c;
      c.seed = o.seed;
      c.train_size = p.value("train_size", c.train_size);
      return finish(tasks::build_cloze(tasks::read_cloze_csv(o.corpus), tasks::read_cloze_csv(o.test_corpus), c), o);
    }
  }
  throw ValidationError("unknown task");
}

}  // namespace

BuildSummary cmd_build(const BuildOptions& o) {
  const auto name = tasks::to_string(o.task);
  try {
    auto s = build(o);
    spdlog::info("built {}: {} train / {} dev / {} test -> {}", name, s.sizes[0], s.sizes[1], s.sizes[2], s.out.string());
    return s;
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("build {}: {}", name, e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("build {}: {}", name, e.what()));
  } catch (const IoError& e) {
    throw IoError(fmt::format("build {}: {}", name, e.what()));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("build {}: bad builder parameter: {}", name, e.what()));
  }
}

}  // namespace discprobe::experiment
