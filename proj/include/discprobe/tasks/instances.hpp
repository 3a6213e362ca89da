#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace discprobe::tasks {

enum class Task { kNsp, kOrdering, kConnective, kNuclearity, kRelation, kSegmentation, kCloze };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);
const std::vector<Task>& all_tasks();

// Two-or-more-segment classification instance. NSP keeps the context
// sentences in `segments` and the four options in `candidates`; cloze keeps
// the merged story in `segments[0]` and the two endings in `candidates`.
struct PairInstance {
  Task task = Task::kNsp;
  std::vector<std::string> segments;
  std::vector<std::string> candidates;
  int label = 0;
  std::string label_name;  // class name for connective / nuclearity / relation
  std::string doc_id;

  friend bool operator==(const PairInstance&, const PairInstance&) = default;
};

struct OrderingInstance {
  std::vector<std::string> sentences;  // shuffled
  std::vector<int> gold_ranks;         // original 1-based position of each
  std::string doc_id;

  friend bool operator==(const OrderingInstance&, const OrderingInstance&) = default;
};

struct SegmentationInstance {
  std::string text;
  std::vector<int> edu_token_lengths;
  std::vector<int> boundary_labels;
  std::string doc_id;
  std::string tokenizer;

  friend bool operator==(const SegmentationInstance&, const SegmentationInstance&) = default;
};

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> dev;
  std::vector<T> test;
  std::vector<std::string> label_inventory;  // empty for tasks without named classes
  nlohmann::json provenance = nlohmann::json::object();
};

// Throws ValidationError when an instance breaks its type's invariants.
void validate(const PairInstance& inst);
void validate(const OrderingInstance& inst);
void validate(const SegmentationInstance& inst);

nlohmann::json to_json(const PairInstance& inst);
nlohmann::json to_json(const OrderingInstance& inst);
nlohmann::json to_json(const SegmentationInstance& inst);

PairInstance pair_from_json(const nlohmann::json& j, Task task);
OrderingInstance ordering_from_json(const nlohmann::json& j);
SegmentationInstance segmentation_from_json(const nlohmann::json& j);

// Writes <dir>/{train,dev,test}.jsonl and <dir>/manifest.json.
template <typename T>
void write_split(const std::filesystem::path& dir, const DatasetSplit<T>& split);

DatasetSplit<PairInstance> read_pair_split(const std::filesystem::path& dir, Task task);
DatasetSplit<OrderingInstance> read_ordering_split(const std::filesystem::path& dir);
DatasetSplit<SegmentationInstance> read_segmentation_split(const std::filesystem::path& dir);

// Reads manifest.json of a built dataset directory.
nlohmann::json read_manifest(const std::filesystem::path& dir);

}  // namespace discprobe::tasks
