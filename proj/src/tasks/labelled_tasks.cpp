// Connective and cloze builders over pre-labelled inputs.
#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/tasks/builders.hpp"

namespace discprobe::tasks {

namespace fs = std::filesystem;

std::vector<ConnectivePair> read_connective_tsv(const fs::path& path) {
  std::vector<ConnectivePair> out;
  std::size_t lineno = 0;
  for (const auto& line : io::read_lines(path)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const auto cols = io::split(line, '\t');
    if (cols.size() != 3) {
      throw ParseError(fmt::format("{}:{}: expected seg_a<TAB>seg_b<TAB>marker", path.string(), lineno));
    }
    out.push_back({std::string(io::trim(cols[0])), std::string(io::trim(cols[1])), std::string(io::trim(cols[2]))});
    if (out.back().seg_a.empty() || out.back().seg_b.empty() || out.back().marker.empty()) {
      throw ParseError(fmt::format("{}:{}: empty field", path.string(), lineno));
    }
  }
  return out;
}

DatasetSplit<PairInstance> build_connectives(const std::vector<ConnectivePair>& pairs, const ConnectiveConfig& cfg) {
  if (pairs.empty()) throw ValidationError("connectives: empty input");
  const std::size_t need = cfg.train_size + cfg.dev_size + cfg.test_size;
  if (need > pairs.size()) {
    throw ValidationError(fmt::format("connectives: {} pairs requested but only {} available", need, pairs.size()));
  }
  std::map<std::string, std::size_t> freq;
  for (const auto& p : pairs) freq[p.marker]++;
  auto label_of = [&](const std::string& marker) {
    return freq[marker] < cfg.min_frequency ? std::string(kOtherMarker) : marker;
  };

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::set<std::string> train_labels;
  for (std::size_t i = 0; i < cfg.train_size; ++i) train_labels.insert(label_of(pairs[order[i]].marker));
  const std::vector<std::string> inventory(train_labels.begin(), train_labels.end());

  DatasetSplit<PairInstance> out;
  out.label_inventory = inventory;
  auto make = [&](std::size_t idx, const char* split) {
    const auto& p = pairs[idx];
    PairInstance inst;
    inst.task = Task::kConnective;
    inst.segments = {p.seg_a, p.seg_b};
    inst.label_name = label_of(p.marker);
    auto it = std::find(inventory.begin(), inventory.end(), inst.label_name);
    if (it == inventory.end()) {
      throw ValidationError(
          fmt::format("connectives: {} split contains label '{}' absent from train", split, inst.label_name));
    }
    inst.label = static_cast<int>(it - inventory.begin());
    return inst;
  };
  std::size_t at = 0;
  for (; at < cfg.train_size; ++at) out.train.push_back(make(order[at], "train"));
  for (; at < cfg.train_size + cfg.dev_size; ++at) out.dev.push_back(make(order[at], "dev"));
  for (; at < need; ++at) out.test.push_back(make(order[at], "test"));

  std::size_t relabelled = 0;
  for (const auto& [m, c] : freq) {
    if (c < cfg.min_frequency) ++relabelled;
  }
  out.provenance = {{"builder", "connectives"},
                    {"seed", cfg.seed},
                    {"input_pairs", pairs.size()},
                    {"min_frequency", cfg.min_frequency},
                    {"markers_seen", freq.size()},
                    {"markers_relabelled_other", relabelled},
                    {"labels", inventory.size()}};
  return out;
}

namespace {

int find_column(const std::vector<std::string>& header, std::initializer_list<std::string_view> names) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (auto n : names) {
      if (io::trim(header[i]) == n) return static_cast<int>(i);
    }
  }
  return -1;
}

}  // namespace

std::vector<ClozeRecord> read_cloze_csv(const fs::path& path) {
  const auto rows = io::parse_csv(io::read_file(path));
  if (rows.empty()) throw ParseError(fmt::format("{}: empty CSV", path.string()));
  const auto& header = rows[0];
  const int id_col = find_column(header, {"InputStoryid", "id", "story_id"});
  const int answer_col = find_column(header, {"AnswerRightEnding", "answer"});
  std::vector<int> ctx_cols, end_cols;
  for (int k = 1; k <= 4; ++k) {
    const std::string a = fmt::format("InputSentence{}", k), b = fmt::format("sentence{}", k);
    const int c = find_column(header, {a, b});
    if (c < 0) throw ParseError(fmt::format("{}: missing story sentence column {}", path.string(), k));
    ctx_cols.push_back(c);
  }
  for (int k = 1;; ++k) {
    const std::string a = fmt::format("RandomFifthSentenceQuiz{}", k), b = fmt::format("ending{}", k);
    const int c = find_column(header, {a, b});
    if (c < 0) break;
    end_cols.push_back(c);
  }
  if (answer_col < 0) throw ParseError(fmt::format("{}: missing answer column", path.string()));
  std::vector<ClozeRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw ParseError(fmt::format("{}: row {} has {} fields, header has {}", path.string(), r + 1, row.size(),
                                   header.size()));
    }
    ClozeRecord rec;
    rec.id = id_col >= 0 ? row[id_col] : std::to_string(r);
    for (int c : ctx_cols) rec.context.emplace_back(io::trim(row[c]));
    for (int c : end_cols) rec.endings.emplace_back(io::trim(row[c]));
    try {
      rec.answer = std::stoi(row[answer_col]);
    } catch (const std::logic_error&) {
      throw ParseError(fmt::format("{}: row {} has a non-numeric answer", path.string(), r + 1));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

PairInstance cloze_instance(const ClozeRecord& record) {
  if (record.endings.size() != 2) {
    throw ValidationError(
        fmt::format("cloze record '{}' has {} endings, expected 2", record.id, record.endings.size()));
  }
  if (record.answer < 1 || record.answer > 2) {
    throw ValidationError(fmt::format("cloze record '{}' has answer {}", record.id, record.answer));
  }
  if (record.context.empty()) throw ValidationError(fmt::format("cloze record '{}' has no context", record.id));
  PairInstance inst;
  inst.task = Task::kCloze;
  std::string context;
  for (const auto& s : record.context) {
    if (!context.empty()) context += ' ';
    context += s;
  }
  inst.segments = {context};
  inst.candidates = record.endings;
  inst.label = record.answer - 1;
  inst.doc_id = record.id;
  return inst;
}

DatasetSplit<PairInstance> build_cloze(const std::vector<ClozeRecord>& validation, const std::vector<ClozeRecord>& test,
                                       const ClozeConfig& cfg) {
  if (validation.size() < cfg.train_size) {
    throw ValidationError(fmt::format("cloze: {} labelled records cannot supply {} training instances",
                                      validation.size(), cfg.train_size));
  }
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(validation.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  DatasetSplit<PairInstance> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < cfg.train_size ? out.train : out.dev).push_back(cloze_instance(validation[order[i]]));
  }
  for (const auto& r : test) out.test.push_back(cloze_instance(r));
  out.provenance = {{"builder", "cloze"}, {"seed", cfg.seed}, {"train_size", cfg.train_size}};
  return out;
}

}  // namespace discprobe::tasks
