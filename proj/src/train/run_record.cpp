#include "discprobe/train/run_record.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::train {

namespace fs = std::filesystem;

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j{{"model", r.model},   {"layer", r.layer},   {"task", r.task},
                   {"seed", r.seed},     {"metric", r.metric}, {"value", r.value},
                   {"epochs", r.epochs}, {"wall_time_s", r.wall_time_s}};
  if (!r.stack.empty()) j["stack"] = r.stack;
  return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  try {
    RunRecord r;
    r.model = j.at("model").get<std::string>();
    r.layer = j.at("layer").get<int>();
    r.task = j.at("task").get<std::string>();
    r.seed = j.at("seed").get<int>();
    r.metric = j.at("metric").get<std::string>();
    r.value = j.at("value").get<double>();
    r.epochs = j.value("epochs", 0);
    r.wall_time_s = j.value("wall_time_s", 0.0);
    r.stack = j.value("stack", std::string{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("malformed run record: {}", e.what()));
  }
}

std::vector<RunRecord> read_run_records(const fs::path& jsonl) {
  std::vector<RunRecord> out;
  for (const auto& j : io::read_jsonl(jsonl)) out.push_back(run_record_from_json(j));
  return out;
}

std::vector<RunRecord> read_run_records_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError(fmt::format("records directory '{}' does not exist", dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> out;
  for (const auto& f : files) {
    auto part = read_run_records(f);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void append_run_record(const fs::path& jsonl, const RunRecord& r) {
  io::append_line(jsonl, to_json(r).dump());
}

}  // namespace discprobe::train
