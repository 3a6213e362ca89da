#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "discprobe/tasks/instances.hpp"

namespace discprobe::experiment {

struct BuildOptions {
  tasks::Task task = tasks::Task::kNsp;
  std::filesystem::path corpus;       // documents, connective TSV, treebank dir or cloze validation CSV
  std::filesystem::path test_corpus;  // cloze test CSV
  std::filesystem::path relation_map; // nuclearity / relation; default: the shipped English map
  std::string language = "en";
  std::string model;                  // segmentation: registry model whose tokenizer labels tokens
  std::filesystem::path registry;     // segmentation: registry file (default registry if empty)
  std::uint64_t seed = 1;
  std::filesystem::path out;
  // Builder overrides, e.g. {"counts": {"2": 100}} for NSP or ordering,
  // {"distractor_scope": "same-document"}, {"min_frequency": 12},
  // {"train_size": 1683} for cloze.
  nlohmann::json params = nlohmann::json::object();
};

struct BuildSummary {
  std::array<std::size_t, 3> sizes{};  // train, dev, test
  std::size_t labels = 0;              // label inventory size, 0 if none
  std::filesystem::path out;
};

// Builds one task's dataset and writes <out>/{train,dev,test}.jsonl and
// manifest.json. Errors keep their type and gain the task name as context.
BuildSummary cmd_build(const BuildOptions& options);

}  // namespace discprobe::experiment
