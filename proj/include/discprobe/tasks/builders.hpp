#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "discprobe/common/rng.hpp"
#include "discprobe/corpus/discourse_tree.hpp"
#include "discprobe/corpus/document.hpp"
#include "discprobe/corpus/relation_map.hpp"
#include "discprobe/corpus/tree_interchange.hpp"
#include "discprobe/encoder/tokenizer.hpp"
#include "discprobe/tasks/instances.hpp"

namespace discprobe::tasks {

// Fractions of documents (or instances) assigned to train / dev / test.
struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

// Sizes per split for a total of `count`: dev and test get floor(count *
// fraction), train takes the rest.
std::array<std::size_t, 3> split_sizes(std::size_t count, const SplitFractions& f);

enum class DistractorScope { kCrossDocument, kSameDocument };

std::string_view to_string(DistractorScope s);
DistractorScope distractor_scope_from_string(std::string_view s);

struct NspConfig {
  std::map<int, std::size_t> counts_per_context_size = {{2, 2500}, {4, 2500}, {6, 2500}, {8, 2500}};
  int distractors_per_instance = 3;
  SplitFractions fractions;
  DistractorScope distractor_scope = DistractorScope::kCrossDocument;
  std::uint64_t seed = 1;
};

// Documents are assigned to train/dev/test by a seeded shuffle; each document
// yields at most one instance. Every instance has k context sentences starting
// at a random offset, the true next sentence, and distractor sentences from
// distinct other documents of the same split. Train distractors never equal a
// sentence of any test document. Throws ValidationError when the corpus runs
// out before the per-size counts are met.
DatasetSplit<PairInstance> build_nsp(const std::vector<corpus::Document>& documents, const NspConfig& config);

struct OrderingConfig {
  std::map<int, std::size_t> counts_per_n = {{3, 2000}, {4, 2000}, {5, 2000}, {6, 2000}, {7, 2000}};
  SplitFractions fractions;
  std::uint64_t seed = 1;
};

// n consecutive sentences from a random offset, shuffled by a uniformly drawn
// non-identity permutation. gold_ranks[i] is the original 1-based position of
// shuffled sentence i.
DatasetSplit<OrderingInstance> build_ordering(const std::vector<corpus::Document>& documents,
                                              const OrderingConfig& config);

// Shuffles sentences by a uniform non-identity permutation (n >= 2).
OrderingInstance shuffle_window(const std::vector<std::string>& window, Rng& rng);

struct ConnectivePair {
  std::string seg_a;
  std::string seg_b;
  std::string marker;
};

inline constexpr std::string_view kOtherMarker = "OTHER";

struct ConnectiveConfig {
  std::size_t min_frequency = 12;
  std::size_t train_size = 10000;
  std::size_t dev_size = 1000;
  std::size_t test_size = 1000;
  std::uint64_t seed = 1;
};

// TSV "seg_a<TAB>seg_b<TAB>marker".
std::vector<ConnectivePair> read_connective_tsv(const std::filesystem::path& path);

// Markers seen fewer than min_frequency times in the input become OTHER.
DatasetSplit<PairInstance> build_connectives(const std::vector<ConnectivePair>& pairs,
                                             const ConnectiveConfig& config);

struct TreebankSplits {
  std::vector<corpus::TreebankDocument> train;
  std::vector<corpus::TreebankDocument> dev;
  std::vector<corpus::TreebankDocument> test;
};

// Loads <dir>/{train,dev,test}. Without a dev directory, dev documents are
// drawn from train (dev_fraction, seeded). A directory without any of the
// three subdirectories is split 80/10/10 by document.
TreebankSplits load_treebank_splits(const std::filesystem::path& dir, std::uint64_t seed,
                                    double dev_fraction = 0.1);

const std::vector<std::string>& nuclearity_labels();  // NN, NS, SN

// One instance per internal node of each binarized tree, pre-order. The two
// returned splits are index-aligned.
std::pair<DatasetSplit<PairInstance>, DatasetSplit<PairInstance>> build_rst_pairs(
    const TreebankSplits& trees, const corpus::RelationMap& map);

// Instances of one binarized tree in pre-order (nuclearity, relation).
std::pair<std::vector<PairInstance>, std::vector<PairInstance>> rst_pairs_of(
    const corpus::BinaryDiscourseTree& tree, const corpus::RelationMap& map,
    const std::vector<std::string>& relation_inventory, const std::string& doc_id);

inline constexpr std::size_t kSegmentationMaxTokens = 512;

// Labels 1 at the last token of each EDU. Throws on a zero-length EDU.
std::vector<int> boundary_labels(const std::vector<int>& edu_token_lengths);

// Tokenizes the space-joined EDU text once and assigns each token to the EDU
// holding its first byte. Documents longer than max_tokens (including the
// tokenizer's special tokens) are split at EDU boundaries; a single EDU over
// the budget is truncated to fit.
std::vector<SegmentationInstance> segment_document(const std::vector<std::string>& edus,
                                                   const encoder::Tokenizer& tokenizer,
                                                   const std::string& doc_id,
                                                   std::size_t max_tokens = kSegmentationMaxTokens);

DatasetSplit<SegmentationInstance> build_edu_segmentation(const TreebankSplits& trees,
                                                          const encoder::Tokenizer& tokenizer,
                                                          std::size_t max_tokens = kSegmentationMaxTokens);

struct ClozeRecord {
  std::string id;
  std::vector<std::string> context;  // four story sentences
  std::vector<std::string> endings;
  int answer = 1;  // 1-based
};

// CSV with a header row: an optional id column, four story-sentence columns,
// the ending columns and a 1-based answer column. Recognised headers follow
// the Story Cloze release (InputSentence1..4, RandomFifthSentenceQuiz1..,
// AnswerRightEnding) or the short forms (sentence1..4, ending1.., answer).
std::vector<ClozeRecord> read_cloze_csv(const std::filesystem::path& path);

struct ClozeConfig {
  std::size_t train_size = 1683;  // remainder of the validation file is dev
  std::uint64_t seed = 1;
};

// The labelled validation records are shuffled and split into train and dev;
// the test records are kept in order.
DatasetSplit<PairInstance> build_cloze(const std::vector<ClozeRecord>& validation,
                                       const std::vector<ClozeRecord>& test, const ClozeConfig& config);

PairInstance cloze_instance(const ClozeRecord& record);

}  // namespace discprobe::tasks
