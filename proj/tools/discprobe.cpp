// Command-line front end: build datasets, run probing sweeps, plot and report.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/experiment/build.hpp"
#include "discprobe/experiment/config.hpp"
#include "discprobe/experiment/figures.hpp"
#include "discprobe/experiment/report.hpp"
#include "discprobe/experiment/sweep.hpp"

namespace fs = std::filesystem;
using namespace discprobe;
using namespace discprobe::experiment;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : io::split(s, ',')) {
    const std::string t(io::trim(part));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

metrics::ScoreMatrix filter(metrics::ScoreMatrix m, const std::string& tasks, const std::string& models) {
  if (!tasks.empty()) {
    const auto keep = split_list(tasks);
    std::erase_if(m.tasks, [&](const auto& kv) { return std::find(keep.begin(), keep.end(), kv.first) == keep.end(); });
  }
  if (!models.empty()) {
    const auto keep = split_list(models);
    for (auto& [t, grid] : m.tasks) {
      std::erase_if(grid, [&](const auto& kv) { return std::find(keep.begin(), keep.end(), kv.first.first) == keep.end(); });
    }
  }
  return m;
}

fs::path input_from(const std::string& input, const std::string& config) {
  if (!input.empty()) return input;
  if (!config.empty()) return load_experiment_config(config).out;
  throw ValidationError("give --input or --config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-wise discourse probing of frozen pretrained encoders"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // build
  auto* build = app.add_subcommand("build", "Build one task's dataset splits");
  BuildOptions bo;
  std::string build_task, params, build_config;
  build->add_option("--task", build_task, "nsp, ordering, connective, nuclearity, relation, segmentation, cloze")->required();
  build->add_option("--corpus", bo.corpus, "Documents (JSONL or directory), connective TSV, treebank directory or cloze validation CSV")->required();
  build->add_option("--test-corpus", bo.test_corpus, "Cloze test CSV");
  build->add_option("--relation-map", bo.relation_map, "Fine-to-coarse relation TSV");
  build->add_option("--language", bo.language, "ISO 639-1 code")->default_val("en");
  build->add_option("--model", bo.model, "Registry model whose tokenizer labels segmentation tokens");
  build->add_option("--registry", bo.registry, "Model registry JSON");
  build->add_option("--config", build_config, "Experiment config (supplies the registry)");
  build->add_option("--seed", bo.seed, "Builder seed")->default_val(1);
  build->add_option("--out", bo.out, "Output directory")->required();
  build->add_option("--params", params, "Builder overrides as JSON text or a JSON file");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate every (model, layer, task, seed) cell");
  std::string sweep_config, s_tasks, s_models, s_layers, s_seeds, s_out;
  sweep->add_option("--config", sweep_config, "Experiment config JSON")->required();
  sweep->add_option("--task", s_tasks, "Comma-separated task subset");
  sweep->add_option("--model", s_models, "Comma-separated model subset");
  sweep->add_option("--layers", s_layers, "Layer list, e.g. 1,6,12 or 1-12");
  sweep->add_option("--seeds", s_seeds, "Seed list, e.g. 1,2,3");
  sweep->add_option("--out", s_out, "Output directory");

  // plot
  auto* plot = app.add_subcommand("plot", "Render figures from run records");
  std::string p_kind = "curves", p_input, p_config, p_out, p_tasks, p_models;
  plot->add_option("--kind", p_kind, "curves, average, breakdown, compare or all")->default_val("curves");
  plot->add_option("--input", p_input, "Sweep output dir, records dir/JSONL, or score CSV");
  plot->add_option("--config", p_config, "Experiment config (reads its output dir)");
  plot->add_option("--out", p_out, "Figure directory (default <input>/figures)");
  plot->add_option("--task", p_tasks, "Comma-separated task subset");
  plot->add_option("--model", p_models, "Comma-separated model subset");

  // report
  auto* report = app.add_subcommand("report", "Summarize run records as markdown and CSV");
  std::string r_input, r_config, r_out, r_tasks, r_models;
  report->add_option("--input", r_input, "Sweep output dir, records dir/JSONL, or score CSV");
  report->add_option("--config", r_config, "Experiment config (reads its output dir)");
  report->add_option("--out", r_out, "Report directory (default <input>/report)");
  report->add_option("--task", r_tasks, "Comma-separated task subset");
  report->add_option("--model", r_models, "Comma-separated model subset");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (build->parsed()) {
      bo.task = tasks::task_from_string(build_task);
      if (!params.empty()) bo.params = fs::exists(params) ? io::read_json(params) : nlohmann::json::parse(params);
      if (!build_config.empty() && bo.registry.empty()) bo.registry = load_experiment_config(build_config).registry;
      const auto s = cmd_build(bo);
      fmt::print("{}: train {} dev {} test {}{}\n", build_task, s.sizes[0], s.sizes[1], s.sizes[2],
                 s.labels ? fmt::format(" ({} labels)", s.labels) : "");
      return 0;
    }
    if (sweep->parsed()) {
      auto cfg = load_experiment_config(sweep_config);
      if (!s_tasks.empty()) {
        cfg.tasks.clear();
        for (const auto& t : split_list(s_tasks)) cfg.tasks.push_back(tasks::task_from_string(t));
      }
      if (!s_models.empty()) cfg.models = split_list(s_models);
      if (!s_layers.empty()) cfg.layers = parse_int_list(s_layers);
      if (!s_seeds.empty()) cfg.seeds = parse_int_list(s_seeds);
      if (!s_out.empty()) cfg.out = s_out;
      const auto s = cmd_sweep(cfg);
      fmt::print("planned {} completed {} skipped {} failed {}\n", s.planned, s.completed, s.skipped, s.failed);
      return s.failed == 0 ? 0 : 2;
    }
    if (plot->parsed()) {
      const fs::path input = input_from(p_input, p_config);
      const fs::path out = p_out.empty() ? (fs::is_directory(input) ? input : input.parent_path()) / "figures" : fs::path(p_out);
      std::vector<PlotKind> kinds;
      if (p_kind == "all") {
        kinds = {PlotKind::kCurves, PlotKind::kAverage, PlotKind::kBreakdown, PlotKind::kCompare};
      } else {
        kinds = {plot_kind_from_string(p_kind)};
      }
      for (auto k : kinds) {
        Figure f;
        if (k == PlotKind::kBreakdown) {
          std::vector<metrics::OrderingInstanceResult> results;
          try {
            results = load_ordering_results(input);
          } catch (const ValidationError&) {
            if (kinds.size() == 1) throw;
          }
          if (!p_models.empty()) {
            const auto keep = split_list(p_models);
            std::erase_if(results, [&](const auto& r) { return std::find(keep.begin(), keep.end(), r.model) == keep.end(); });
          }
          if (results.empty() && kinds.size() > 1) {
            spdlog::warn("breakdown skipped: no per-instance ordering results under '{}'", input.string());
            continue;
          }
          f = breakdown_figure(results);
        } else {
          const auto m = filter(load_scores(input), p_tasks, p_models);
          if (m.tasks.empty()) throw ValidationError("no run records to plot");
          f = k == PlotKind::kCurves ? curves_figure(m) : k == PlotKind::kAverage ? average_figure(m) : compare_figure(m);
        }
        const fs::path stem = out / std::string(to_string(k));
        write_figure(f, stem);
        fmt::print("wrote {}.svg and {}.png ({} panels)\n", stem.string(), stem.string(), f.panels.size());
      }
      return 0;
    }
    if (report->parsed()) {
      const fs::path input = input_from(r_input, r_config);
      const fs::path out = r_out.empty() ? (fs::is_directory(input) ? input : input.parent_path()) / "report" : fs::path(r_out);
      metrics::ScoreMatrix m;
      if (fs::exists(input)) {
        m = filter(load_scores(input), r_tasks, r_models);
      } else {
        spdlog::warn("'{}' does not exist", input.string());
      }
      const auto r = make_report(m);
      write_report(r, out);
      std::cout << r.markdown;
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("invalid JSON: {}", e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
