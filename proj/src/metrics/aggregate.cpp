#include "discprobe/metrics/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::metrics {

std::vector<std::string> ScoreMatrix::task_names() const {
  std::vector<std::string> out;
  for (const auto& [t, _] : tasks) out.push_back(t);
  return out;
}

std::vector<std::string> ScoreMatrix::model_names() const {
  std::set<std::string> names;
  for (const auto& [_, grid] : tasks) {
    for (const auto& [key, __] : grid) names.insert(key.first);
  }
  return {names.begin(), names.end()};
}

std::vector<int> ScoreMatrix::layers(const std::string& model) const {
  std::set<int> ls;
  for (const auto& [_, grid] : tasks) {
    for (const auto& [key, __] : grid) {
      if (key.first == model) ls.insert(key.second);
    }
  }
  return {ls.begin(), ls.end()};
}

SeedStat seed_stats(std::span<const double> values) {
  if (values.empty()) throw ValidationError("seed_stats on an empty cell");
  SeedStat s;
  s.count = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / values.size();
  if (values.size() == 1) {
    spdlog::warn("seed_stats: single record, standard deviation reported as 0");
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

ScoreMatrix seed_stats(std::span<const train::RunRecord> records) {
  std::map<std::string, std::map<CellKey, std::vector<double>>> groups;
  for (const auto& r : records) groups[r.task][{r.model, r.layer}].push_back(r.value);
  ScoreMatrix m;
  for (const auto& [task, grid] : groups) {
    for (const auto& [key, values] : grid) {
      const SeedStat s = seed_stats(values);
      m.tasks[task][key] = CellStat{s.mean, s.sd, s.count};
    }
  }
  return m;
}

std::map<CellKey, double> min_max_normalize(const std::map<CellKey, CellStat>& grid) {
  if (grid.empty()) throw ValidationError("min-max normalization of an empty grid");
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [_, c] : grid) {
    if (!std::isfinite(c.mean)) throw ValidationError("non-finite score in grid");
    lo = std::min(lo, c.mean);
    hi = std::max(hi, c.mean);
  }
  std::map<CellKey, double> out;
  if (hi == lo) {
    spdlog::warn("min-max normalization: constant grid ({}), every cell set to 0.5", lo);
    for (const auto& [key, _] : grid) out[key] = 0.5;
    return out;
  }
  for (const auto& [key, c] : grid) out[key] = (c.mean - lo) / (hi - lo);
  return out;
}

std::map<CellKey, double> aggregate(const ScoreMatrix& matrix) {
  if (matrix.tasks.empty()) throw ValidationError("aggregate: no tasks");
  const auto& first = matrix.tasks.begin()->second;
  for (const auto& [task, grid] : matrix.tasks) {
    bool same = grid.size() == first.size();
    for (auto a = grid.begin(), b = first.begin(); same && a != grid.end(); ++a, ++b) {
      same = a->first == b->first;
    }
    if (!same) {
      throw ValidationError(fmt::format(
          "aggregate: task '{}' covers a different model x layer grid than '{}'", task,
          matrix.tasks.begin()->first));
    }
  }
  std::map<CellKey, double> sum;
  for (const auto& [_, grid] : matrix.tasks) {
    for (const auto& [key, v] : min_max_normalize(grid)) sum[key] += v;
  }
  for (auto& [_, v] : sum) v /= static_cast<double>(matrix.tasks.size());
  return sum;
}

std::pair<CellKey, double> argmax(const std::map<CellKey, double>& grid) {
  if (grid.empty()) throw ValidationError("argmax of an empty grid");
  auto best = grid.begin();
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return *best;
}

std::optional<std::pair<int, CellStat>> best_layer(const ScoreMatrix& matrix, const std::string& task,
                                                   const std::string& model) {
  auto t = matrix.tasks.find(task);
  if (t == matrix.tasks.end()) return std::nullopt;
  std::optional<std::pair<int, CellStat>> best;
  for (const auto& [key, c] : t->second) {
    if (key.first != model) continue;
    if (!best || c.mean > best->second.mean) best = {key.second, c};
  }
  return best;
}

ScoreMatrix parse_score_csv(std::string_view csv) {
  ScoreMatrix m;
  std::size_t lineno = 0;
  bool header_seen = false;
  for (const auto& raw : io::split(csv, '\n')) {
    ++lineno;
    const auto line = io::trim(raw);
    if (line.empty()) continue;
    const auto cols = io::split(line, ',');
    if (!header_seen) {
      header_seen = true;
      if (cols.size() >= 5 && io::trim(cols[0]) == "model") continue;
    }
    if (cols.size() != 5) {
      throw ParseError(fmt::format("score CSV line {}: expected 5 columns, got {}", lineno, cols.size()));
    }
    try {
      CellStat c;
      c.mean = std::stod(std::string(io::trim(cols[3])));
      c.sd = std::stod(std::string(io::trim(cols[4])));
      c.count = 0;
      const std::string model(io::trim(cols[0]));
      const int layer = std::stoi(std::string(io::trim(cols[1])));
      const std::string task(io::trim(cols[2]));
      auto [it, inserted] = m.tasks[task].emplace(CellKey{model, layer}, c);
      if (!inserted) {
        throw ParseError(fmt::format("score CSV line {}: duplicate cell {}/{}/{}", lineno, model,
                                     layer, task));
      }
    } catch (const std::logic_error&) {
      throw ParseError(fmt::format("score CSV line {}: bad number", lineno));
    }
  }
  return m;
}

ScoreMatrix read_score_csv(const std::filesystem::path& path) { return parse_score_csv(io::read_file(path)); }

std::string score_csv(const ScoreMatrix& matrix) {
  std::string out = "model,layer,task,mean,sd\n";
  for (const auto& model : matrix.model_names()) {
    for (int layer : matrix.layers(model)) {
      for (const auto& [task, grid] : matrix.tasks) {
        auto it = grid.find({model, layer});
        if (it == grid.end()) continue;
        out += fmt::format("{},{},{},{:.6g},{:.6g}\n", model, layer, task, it->second.mean, it->second.sd);
      }
    }
  }
  return out;
}

std::string normalized_csv(const std::map<CellKey, double>& grid) {
  std::string out = "model,layer,value\n";
  for (const auto& [key, v] : grid) out += fmt::format("{},{},{:.6f}\n", key.first, key.second, v);
  return out;
}

nlohmann::json to_json(const OrderingInstanceResult& r) {
  return {{"model", r.model}, {"layer", r.layer}, {"seed", r.seed}, {"n", r.n}, {"rho", r.rho}};
}

OrderingInstanceResult ordering_result_from_json(const nlohmann::json& j) {
  try {
    return {j.at("model").get<std::string>(), j.at("layer").get<int>(), j.at("seed").get<int>(),
            j.at("n").get<int>(), j.at("rho").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("malformed ordering result: {}", e.what()));
  }
}

std::vector<OrderingInstanceResult> read_ordering_results(const std::filesystem::path& jsonl) {
  std::vector<OrderingInstanceResult> out;
  for (const auto& j : io::read_jsonl(jsonl)) out.push_back(ordering_result_from_json(j));
  return out;
}

int best_ordering_layer(std::span<const OrderingInstanceResult> results, const std::string& model) {
  std::map<int, std::pair<double, std::size_t>> per_layer;
  for (const auto& r : results) {
    if (r.model != model) continue;
    auto& [sum, n] = per_layer[r.layer];
    sum += r.rho;
    ++n;
  }
  if (per_layer.empty()) {
    throw ValidationError(fmt::format("no per-instance ordering results for model '{}'", model));
  }
  int best = per_layer.begin()->first;
  double best_mean = -INFINITY;
  for (const auto& [layer, acc] : per_layer) {
    const double m = acc.first / acc.second;
    if (m > best_mean) {
      best_mean = m;
      best = layer;
    }
  }
  return best;
}

std::map<int, BreakdownBucket> ordering_breakdown(std::span<const OrderingInstanceResult> results,
                                                  const std::string& model, std::optional<int> layer) {
  const int chosen = layer ? *layer : best_ordering_layer(results, model);
  std::map<int, BreakdownBucket> out;
  for (const auto& r : results) {
    if (r.model != model || r.layer != chosen) continue;
    auto& b = out[r.n];
    b.mean_rho += r.rho;
    ++b.count;
  }
  if (out.empty()) {
    throw ValidationError(
        fmt::format("no per-instance ordering results for model '{}' layer {}", model, chosen));
  }
  for (auto& [_, b] : out) b.mean_rho /= static_cast<double>(b.count);
  return out;
}

}  // namespace discprobe::metrics
