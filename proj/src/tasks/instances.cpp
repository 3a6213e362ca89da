#include "discprobe/tasks/instances.hpp"

#include <numeric>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::tasks {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Task t) {
  switch (t) {
    case Task::kNsp:
      return "nsp";
    case Task::kOrdering:
      return "ordering";
    case Task::kConnective:
      return "connective";
    case Task::kNuclearity:
      return "nuclearity";
    case Task::kRelation:
      return "relation";
    case Task::kSegmentation:
      return "segmentation";
    case Task::kCloze:
      return "cloze";
  }
  return "?";
}

const std::vector<Task>& all_tasks() {
  static const std::vector<Task> tasks = {Task::kNsp,      Task::kOrdering, Task::kConnective,
                                          Task::kNuclearity, Task::kRelation, Task::kSegmentation,
                                          Task::kCloze};
  return tasks;
}

Task task_from_string(std::string_view s) {
  for (Task t : all_tasks()) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError(fmt::format("unknown task '{}'", s));
}

void validate(const PairInstance& inst) {
  const auto n_cands = inst.candidates.size();
  switch (inst.task) {
    case Task::kNsp:
      if (inst.segments.empty() || n_cands < 2) {
        throw ValidationError("NSP instance needs a context and at least 2 candidates");
      }
      break;
    case Task::kCloze:
      if (inst.segments.size() != 1 || n_cands != 2) {
        throw ValidationError("cloze instance needs one context and 2 endings");
      }
      break;
    case Task::kConnective:
    case Task::kNuclearity:
    case Task::kRelation:
      if (inst.segments.size() != 2 || n_cands != 0) {
        throw ValidationError(fmt::format("{} instance needs exactly 2 segments", to_string(inst.task)));
      }
      break;
    default:
      throw ValidationError(fmt::format("task '{}' does not use pair instances", to_string(inst.task)));
  }
  if (n_cands > 0 && (inst.label < 0 || static_cast<std::size_t>(inst.label) >= n_cands)) {
    throw ValidationError(fmt::format("label {} outside the {} candidates", inst.label, n_cands));
  }
  if (inst.task == Task::kNuclearity && (inst.label < 0 || inst.label > 2)) {
    throw ValidationError("nuclearity label outside {NN, NS, SN}");
  }
  if (inst.label < 0) throw ValidationError("negative label");
}

void validate(const OrderingInstance& inst) {
  const auto n = inst.sentences.size();
  if (n < 3 || n > 7) throw ValidationError(fmt::format("ordering instance with {} sentences", n));
  if (inst.gold_ranks.size() != n) throw ValidationError("gold_ranks length differs from sentences");
  std::vector<bool> seen(n + 1, false);
  for (int r : inst.gold_ranks) {
    if (r < 1 || static_cast<std::size_t>(r) > n || seen[r]) {
      throw ValidationError("gold_ranks is not a permutation of 1..n");
    }
    seen[r] = true;
  }
}

void validate(const SegmentationInstance& inst) {
  const int total = std::accumulate(inst.edu_token_lengths.begin(), inst.edu_token_lengths.end(), 0);
  if (static_cast<std::size_t>(total) != inst.boundary_labels.size()) {
    throw ValidationError("sum(edu_token_lengths) differs from the number of labels");
  }
  std::size_t at = 0;
  for (int len : inst.edu_token_lengths) {
    if (len < 1) throw ValidationError("EDU with no tokens");
    for (int k = 0; k < len; ++k, ++at) {
      const int want = k == len - 1 ? 1 : 0;
      if (inst.boundary_labels[at] != want) {
        throw ValidationError(fmt::format("boundary label at token {} should be {}", at, want));
      }
    }
  }
}

json to_json(const PairInstance& inst) {
  if (inst.task == Task::kCloze) {
    json j{{"context", inst.segments.at(0)}, {"endings", inst.candidates}, {"label", inst.label}};
    if (!inst.doc_id.empty()) j["id"] = inst.doc_id;
    return j;
  }
  json j{{"task", to_string(inst.task)}, {"segments", inst.segments}, {"label", inst.label}};
  if (!inst.candidates.empty()) j["candidates"] = inst.candidates;
  if (!inst.label_name.empty()) j["label_name"] = inst.label_name;
  if (!inst.doc_id.empty()) j["doc_id"] = inst.doc_id;
  return j;
}

json to_json(const OrderingInstance& inst) {
  json j{{"sentences", inst.sentences}, {"gold_ranks", inst.gold_ranks}};
  if (!inst.doc_id.empty()) j["doc_id"] = inst.doc_id;
  return j;
}

json to_json(const SegmentationInstance& inst) {
  json j{{"text", inst.text},
         {"edu_token_lengths", inst.edu_token_lengths},
         {"boundary_labels", inst.boundary_labels}};
  if (!inst.doc_id.empty()) j["doc_id"] = inst.doc_id;
  if (!inst.tokenizer.empty()) j["tokenizer"] = inst.tokenizer;
  return j;
}

PairInstance pair_from_json(const json& j, Task task) {
  try {
    PairInstance p;
    p.task = task;
    if (task == Task::kCloze) {
      p.segments = {j.at("context").get<std::string>()};
      p.candidates = j.at("endings").get<std::vector<std::string>>();
      p.doc_id = j.value("id", std::string{});
    } else {
      if (j.contains("task") && task_from_string(j["task"].get<std::string>()) != task) {
        throw ValidationError(fmt::format("instance of task '{}' where '{}' was expected",
                                          j["task"].get<std::string>(), to_string(task)));
      }
      p.segments = j.at("segments").get<std::vector<std::string>>();
      p.candidates = j.value("candidates", std::vector<std::string>{});
      p.label_name = j.value("label_name", std::string{});
      p.doc_id = j.value("doc_id", std::string{});
    }
    p.label = j.at("label").get<int>();
    validate(p);
    return p;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("malformed {} instance: {}", to_string(task), e.what()));
  }
}

OrderingInstance ordering_from_json(const json& j) {
  try {
    OrderingInstance o{j.at("sentences").get<std::vector<std::string>>(),
                       j.at("gold_ranks").get<std::vector<int>>(), j.value("doc_id", std::string{})};
    validate(o);
    return o;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("malformed ordering instance: {}", e.what()));
  }
}

SegmentationInstance segmentation_from_json(const json& j) {
  try {
    SegmentationInstance s{j.at("text").get<std::string>(), j.at("edu_token_lengths").get<std::vector<int>>(),
                           j.at("boundary_labels").get<std::vector<int>>(),
                           j.value("doc_id", std::string{}), j.value("tokenizer", std::string{})};
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("malformed segmentation instance: {}", e.what()));
  }
}

namespace {

template <typename T>
std::string dump(const std::vector<T>& items) {
  std::string out;
  for (const auto& x : items) {
    out += to_json(x).dump();
    out += '\n';
  }
  return out;
}

template <typename T, typename F>
DatasetSplit<T> read_split(const fs::path& dir, F parse) {
  DatasetSplit<T> s;
  const json manifest = read_manifest(dir);
  s.label_inventory = manifest.value("label_inventory", std::vector<std::string>{});
  s.provenance = manifest.value("provenance", json::object());
  for (auto [name, dest] : {std::pair{"train", &s.train}, {"dev", &s.dev}, {"test", &s.test}}) {
    const fs::path file = dir / (std::string(name) + ".jsonl");
    for (const auto& j : io::read_jsonl(file)) dest->push_back(parse(j));
  }
  return s;
}

}  // namespace

template <typename T>
void write_split(const fs::path& dir, const DatasetSplit<T>& split) {
  fs::create_directories(dir);
  io::write_file_atomic(dir / "train.jsonl", dump(split.train));
  io::write_file_atomic(dir / "dev.jsonl", dump(split.dev));
  io::write_file_atomic(dir / "test.jsonl", dump(split.test));
  json manifest{{"sizes", {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}}},
                {"provenance", split.provenance}};
  if (!split.label_inventory.empty()) manifest["label_inventory"] = split.label_inventory;
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

template void write_split(const fs::path&, const DatasetSplit<PairInstance>&);
template void write_split(const fs::path&, const DatasetSplit<OrderingInstance>&);
template void write_split(const fs::path&, const DatasetSplit<SegmentationInstance>&);

json read_manifest(const fs::path& dir) {
  const fs::path file = dir / "manifest.json";
  if (!fs::exists(file)) throw IoError(fmt::format("dataset '{}' has no manifest.json", dir.string()));
  return io::read_json(file);
}

DatasetSplit<PairInstance> read_pair_split(const fs::path& dir, Task task) {
  return read_split<PairInstance>(dir, [task](const json& j) { return pair_from_json(j, task); });
}

DatasetSplit<OrderingInstance> read_ordering_split(const fs::path& dir) {
  return read_split<OrderingInstance>(dir, ordering_from_json);
}

DatasetSplit<SegmentationInstance> read_segmentation_split(const fs::path& dir) {
  return read_split<SegmentationInstance>(dir, segmentation_from_json);
}

}  // namespace discprobe::tasks
