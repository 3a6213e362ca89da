#include "discprobe/experiment/report.hpp"

#include <algorithm>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/experiment/figures.hpp"
#include "discprobe/train/run_record.hpp"

namespace discprobe::experiment {

namespace fs = std::filesystem;

metrics::ScoreMatrix load_scores(const fs::path& input) {
  if (!fs::exists(input)) throw IoError(fmt::format("'{}' does not exist", input.string()));
  if (fs::is_directory(input)) {
    const fs::path dir = fs::is_directory(input / "records") ? input / "records" : input;
    const auto records = train::read_run_records_dir(dir);
    return metrics::seed_stats(records);
  }
  if (input.extension() == ".csv") return metrics::read_score_csv(input);
  const auto records = train::read_run_records(input);
  return metrics::seed_stats(records);
}

std::vector<metrics::OrderingInstanceResult> load_ordering_results(const fs::path& input) {
  const fs::path dir = fs::is_directory(input / "instances") ? input / "instances" : input;
  if (!fs::is_directory(dir)) {
    if (dir.extension() != ".jsonl") {
      throw ValidationError(fmt::format("'{}' holds no per-instance ordering results", input.string()));
    }
    return metrics::read_ordering_results(dir);
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<metrics::OrderingInstanceResult> out;
  for (const auto& f : files) {
    auto part = metrics::read_ordering_results(f);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

Report make_report(const metrics::ScoreMatrix& m) {
  Report r;
  r.markdown = "# Probing report\n\n";
  r.best_layers_csv = "model,task,best_layer,mean,sd\n";
  if (m.tasks.empty()) {
    spdlog::warn("report: no run records found; writing an empty report");
    r.markdown += "No run records found.\n";
    return r;
  }
  r.empty = false;
  const auto task_names = ordered_tasks(m);
  const auto models = m.model_names();

  r.markdown += "## Best layer per task\n\nEach cell: best layer (mean ± s.d. over seeds).\n\n| model |";
  for (const auto& t : task_names) r.markdown += fmt::format(" {} |", t);
  r.markdown += "\n|---|";
  for (std::size_t i = 0; i < task_names.size(); ++i) r.markdown += "---|";
  r.markdown += "\n";
  for (const auto& model : models) {
    r.markdown += fmt::format("| {} |", model);
    for (const auto& t : task_names) {
      if (auto best = metrics::best_layer(m, t, model)) {
        r.markdown += fmt::format(" {} ({:.2f} ± {:.2f}) |", best->first, best->second.mean, best->second.sd);
        r.best_layers_csv += fmt::format("{},{},{},{:.6g},{:.6g}\n", model, t, best->first, best->second.mean, best->second.sd);
      } else {
        r.markdown += " – |";
      }
    }
    r.markdown += "\n";
  }

  r.markdown += "\n## Normalized-average ranking\n\n";
  try {
    const auto avg = metrics::aggregate(m);
    std::vector<std::pair<metrics::CellKey, double>> cells(avg.begin(), avg.end());
    std::stable_sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    r.ranking_csv = "rank,model,layer,value\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      r.ranking_csv += fmt::format("{},{},{},{:.6g}\n", i + 1, cells[i].first.first, cells[i].first.second, cells[i].second);
    }
    r.markdown += "Per-task min-max normalization over the model × layer grid, averaged over tasks.\n\n";
    r.markdown += "| rank | model | best layer | normalized average |\n|---|---|---|---|\n";
    std::vector<std::string> seen;
    for (const auto& [key, v] : cells) {
      if (std::find(seen.begin(), seen.end(), key.first) != seen.end()) continue;
      seen.push_back(key.first);
      r.markdown += fmt::format("| {} | {} | {} | {:.3f} |\n", seen.size(), key.first, key.second, v);
    }
    const auto top = metrics::argmax(avg);
    r.markdown += fmt::format("\nHighest normalized average: {} layer {} ({:.3f}).\n", top.first.first, top.first.second,
                              top.second);
  } catch (const ValidationError& e) {
    spdlog::warn("report: normalized average unavailable: {}", e.what());
    r.markdown += fmt::format("Not available: {}\n", e.what());
  }
  return r;
}

void write_report(const Report& r, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_file_atomic(dir / "report.md", r.markdown);
  io::write_file_atomic(dir / "best_layers.csv", r.best_layers_csv);
  if (!r.ranking_csv.empty()) io::write_file_atomic(dir / "ranking.csv", r.ranking_csv);
}

}  // namespace discprobe::experiment
