#include <map>
#include <numeric>

#include <fmt/core.h>
#include <set>
#include <unordered_set>

#include <gtest/gtest.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/corpus/binarize.hpp"
#include "discprobe/corpus/dis_format.hpp"
#include "discprobe/tasks/builders.hpp"
#include "test_util.hpp"

namespace dt = discprobe::tasks;
namespace dc = discprobe::corpus;
using discprobe::ValidationError;

namespace {

// Documents with 3..12 unique sentences each.
std::vector<dc::Document> synthetic_documents(std::size_t count, std::uint64_t seed) {
  discprobe::Rng rng(seed);
  std::vector<dc::Document> docs;
  for (std::size_t d = 0; d < count; ++d) {
    dc::Document doc{fmt::format("doc{:05d}", d), {}};
    const std::size_t n = 3 + rng.index(10);
    for (std::size_t s = 0; s < n; ++s) doc.sentences.push_back(fmt::format("Sentence {} of document {}.", s, d));
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::map<int, std::size_t> context_size_counts(const std::vector<dt::PairInstance>& v) {
  std::map<int, std::size_t> out;
  for (const auto& i : v) out[static_cast<int>(i.segments.size())]++;
  return out;
}

}  // namespace

TEST(SplitSizes, FloorForDevAndTest) {
  EXPECT_EQ(dt::split_sizes(2500, {}), (std::array<std::size_t, 3>{2000, 250, 250}));
  EXPECT_EQ(dt::split_sizes(4, {}), (std::array<std::size_t, 3>{4, 0, 0}));
  EXPECT_THROW(dt::split_sizes(10, {0.5, 0.5, 0.5}), ValidationError);
}

TEST(BuildNsp, PaperCountsAndDisjointness) {
  const auto docs = synthetic_documents(14000, 3);
  dt::NspConfig cfg;
  const auto split = dt::build_nsp(docs, cfg);
  EXPECT_EQ(split.train.size() + split.dev.size() + split.test.size(), 10000u);
  EXPECT_EQ(split.train.size(), 8000u);
  EXPECT_EQ(split.dev.size(), 1000u);
  EXPECT_EQ(split.test.size(), 1000u);
  std::map<int, std::size_t> per_size;
  for (const auto* part : {&split.train, &split.dev, &split.test}) {
    for (auto [k, c] : context_size_counts(*part)) per_size[k] += c;
  }
  EXPECT_EQ(per_size, (std::map<int, std::size_t>{{2, 2500}, {4, 2500}, {6, 2500}, {8, 2500}}));

  std::unordered_set<std::string> test_sentences;
  for (const auto& i : split.test) {
    for (const auto& s : i.segments) test_sentences.insert(s);
    for (const auto& s : i.candidates) test_sentences.insert(s);
  }
  std::set<std::string> used_docs;
  for (const auto* part : {&split.train, &split.dev, &split.test}) {
    for (const auto& i : *part) {
      ASSERT_NO_THROW(dt::validate(i));
      EXPECT_TRUE(used_docs.insert(i.doc_id).second) << "document reused: " << i.doc_id;
      ASSERT_EQ(i.candidates.size(), 4u);
      std::set<std::string> distinct(i.candidates.begin(), i.candidates.end());
      EXPECT_EQ(distinct.size(), 4u);
      // The true next sentence comes from the same document as the context.
      const std::string prefix = " of document " + i.doc_id.substr(3);
      EXPECT_NE(i.candidates[i.label].find(std::to_string(std::stoi(i.doc_id.substr(3))) + "."), std::string::npos);
      for (int c = 0; c < 4; ++c) {
        if (c == i.label) continue;
        EXPECT_EQ(i.candidates[c].find("document " + std::to_string(std::stoi(i.doc_id.substr(3))) + "."),
                  std::string::npos);
      }
    }
  }
  for (const auto& i : split.train) {
    for (int c = 0; c < 4; ++c) {
      if (c != i.label) EXPECT_EQ(test_sentences.count(i.candidates[c]), 0u);
    }
  }
}

TEST(BuildNsp, TrainDistractorsAvoidTestSentencesEvenWhenShared) {
  // Every document repeats one boilerplate sentence; it must never be a train distractor.
  auto docs = synthetic_documents(200, 5);
  for (auto& d : docs) d.sentences.push_back("Boilerplate footer.");
  dt::NspConfig cfg;
  cfg.counts_per_context_size = {{2, 100}};
  const auto split = dt::build_nsp(docs, cfg);
  for (const auto& i : split.train) {
    for (int c = 0; c < 4; ++c) {
      if (c != i.label) EXPECT_NE(i.candidates[c], "Boilerplate footer.");
    }
  }
}

TEST(BuildNsp, ThreeSentenceDocumentGivesOneInstance) {
  std::vector<dc::Document> docs = {{"a", {"s1", "s2", "s3"}}, {"b", {"x"}}, {"c", {"y"}}, {"d", {"z"}}};
  dt::NspConfig cfg;
  cfg.counts_per_context_size = {{2, 1}};
  cfg.fractions = {1.0, 0.0, 0.0};
  const auto split = dt::build_nsp(docs, cfg);
  ASSERT_EQ(split.train.size(), 1u);
  const auto& inst = split.train[0];
  EXPECT_EQ(inst.segments, (std::vector<std::string>{"s1", "s2"}));
  EXPECT_EQ(inst.candidates[inst.label], "s3");
  std::set<std::string> others;
  for (int c = 0; c < 4; ++c) {
    if (c != inst.label) others.insert(inst.candidates[c]);
  }
  EXPECT_EQ(others, (std::set<std::string>{"x", "y", "z"}));
}

TEST(BuildNsp, TwoSentenceDocumentGivesNothing) {
  std::vector<dc::Document> docs = {{"a", {"s1", "s2"}}, {"b", {"x"}}, {"c", {"y"}}, {"d", {"z"}}};
  dt::NspConfig cfg;
  cfg.counts_per_context_size = {{2, 1}};
  cfg.fractions = {1.0, 0.0, 0.0};
  EXPECT_THROW(dt::build_nsp(docs, cfg), ValidationError);
  cfg.counts_per_context_size = {{2, 0}};
  EXPECT_TRUE(dt::build_nsp(docs, cfg).train.empty());
}

TEST(BuildNsp, SameDocumentScope) {
  auto docs = synthetic_documents(100, 9);
  dt::NspConfig cfg;
  cfg.counts_per_context_size = {{2, 40}};
  cfg.distractor_scope = dt::DistractorScope::kSameDocument;
  const auto split = dt::build_nsp(docs, cfg);
  for (const auto& i : split.train) {
    const std::string tag = "document " + std::to_string(std::stoi(i.doc_id.substr(3))) + ".";
    for (const auto& c : i.candidates) EXPECT_NE(c.find(tag), std::string::npos);
  }
  EXPECT_EQ(dt::distractor_scope_from_string("same-document"), dt::DistractorScope::kSameDocument);
}

TEST(BuildNsp, Deterministic) {
  const auto docs = synthetic_documents(600, 1);
  dt::NspConfig cfg;
  cfg.counts_per_context_size = {{2, 100}, {4, 100}};
  cfg.seed = 17;
  const auto a = dt::build_nsp(docs, cfg), b = dt::build_nsp(docs, cfg);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  cfg.seed = 18;
  EXPECT_NE(dt::build_nsp(docs, cfg).train, a.train);
}

TEST(BuildOrdering, PaperCounts) {
  const auto docs = synthetic_documents(14000, 4);
  const auto split = dt::build_ordering(docs, {});
  std::map<int, std::size_t> per_n;
  for (const auto* part : {&split.train, &split.dev, &split.test}) {
    for (const auto& i : *part) {
      ASSERT_NO_THROW(dt::validate(i));
      per_n[static_cast<int>(i.sentences.size())]++;
      std::vector<int> identity(i.gold_ranks.size());
      std::iota(identity.begin(), identity.end(), 1);
      EXPECT_NE(i.gold_ranks, identity);
    }
  }
  EXPECT_EQ(per_n, (std::map<int, std::size_t>{{3, 2000}, {4, 2000}, {5, 2000}, {6, 2000}, {7, 2000}}));
  EXPECT_EQ(split.train.size(), 8000u);
}

TEST(BuildOrdering, GoldRanksRecoverOriginalOrder) {
  discprobe::Rng rng(12);
  const std::vector<std::string> window = {"s0", "s1", "s2"};
  for (int t = 0; t < 50; ++t) {
    auto inst = dt::shuffle_window(window, rng);
    std::vector<std::string> restored(3);
    for (int i = 0; i < 3; ++i) restored[inst.gold_ranks[i] - 1] = inst.sentences[i];
    EXPECT_EQ(restored, window);
    if (inst.sentences == std::vector<std::string>{"s2", "s0", "s1"}) {
      EXPECT_EQ(inst.gold_ranks, (std::vector<int>{3, 1, 2}));
    }
  }
}

TEST(BuildOrdering, NonIdentityShufflesAreUniform) {
  discprobe::Rng rng(21);
  std::map<std::vector<int>, int> seen;
  const std::vector<std::string> window = {"a", "b", "c"};
  for (int t = 0; t < 5000; ++t) seen[dt::shuffle_window(window, rng).gold_ranks]++;
  EXPECT_EQ(seen.size(), 5u);
  for (const auto& [_, c] : seen) EXPECT_NEAR(c, 1000, 150);
}

TEST(BuildOrdering, CorpusExhausted) {
  const auto docs = synthetic_documents(30, 2);
  dt::OrderingConfig cfg;
  cfg.counts_per_n = {{7, 100}};
  EXPECT_THROW(dt::build_ordering(docs, cfg), ValidationError);
}

namespace {

std::vector<dt::ConnectivePair> connective_pairs(const std::map<std::string, int>& freq) {
  std::vector<dt::ConnectivePair> out;
  int i = 0;
  for (const auto& [m, c] : freq) {
    for (int k = 0; k < c; ++k, ++i) out.push_back({fmt::format("a{}", i), fmt::format("b{}", i), m});
  }
  return out;
}

}  // namespace

TEST(BuildConnectives, ThresholdTwelve) {
  auto pairs = connective_pairs({{"because", 100}, {"while", 12}, {"although", 11}});
  dt::ConnectiveConfig cfg{12, 100, 10, 13, 1};
  const auto split = dt::build_connectives(pairs, cfg);
  std::set<std::string> labels;
  for (const auto* part : {&split.train, &split.dev, &split.test}) {
    for (const auto& i : *part) {
      labels.insert(i.label_name);
      EXPECT_EQ(split.label_inventory[i.label], i.label_name);
      EXPECT_NE(i.label_name, "although");
    }
  }
  EXPECT_TRUE(labels.count("while"));
  EXPECT_TRUE(labels.count("OTHER"));
  EXPECT_EQ(split.train.size(), 100u);
  EXPECT_EQ(split.dev.size(), 10u);
  EXPECT_EQ(split.test.size(), 13u);
}

TEST(BuildConnectives, DefaultSplitSizesAndErrors) {
  auto pairs = connective_pairs({{"because", 6000}, {"but", 6000}});
  const auto split = dt::build_connectives(pairs, {});
  EXPECT_EQ(split.train.size(), 10000u);
  EXPECT_EQ(split.dev.size(), 1000u);
  EXPECT_EQ(split.test.size(), 1000u);
  EXPECT_THROW(dt::build_connectives({}, {}), ValidationError);
  // A label seen only in dev/test.
  auto rare = connective_pairs({{"because", 20}, {"so", 12}});
  dt::ConnectiveConfig tiny{12, 1, 0, 31, 1};
  EXPECT_THROW(dt::build_connectives(rare, tiny), ValidationError);
}

TEST(BuildConnectives, ReadsTsv) {
  testutil::TempDir tmp;
  discprobe::io::write_file_atomic(tmp / "c.tsv", "He left\tshe stayed\tbut\nx\ty\tso\n");
  auto pairs = dt::read_connective_tsv(tmp / "c.tsv");
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].marker, "but");
  discprobe::io::write_file_atomic(tmp / "bad.tsv", "only\ttwo\n");
  EXPECT_THROW(dt::read_connective_tsv(tmp / "bad.tsv"), discprobe::ParseError);
}

namespace {

const char* kThreeEdu = R"(( Root (span 1 3)
  ( Nucleus (span 1 2) (rel2par span)
    ( Nucleus (leaf 1) (rel2par span) (text _!The company said_!) )
    ( Satellite (leaf 2) (rel2par elaboration-additional) (text _!it would expand,_!) )
  )
  ( Satellite (leaf 3) (rel2par attribution) (text _!analysts noted._!) )
))";

}  // namespace

TEST(BuildRstPairs, OneInstancePerInternalNode) {
  auto map = dc::load_relation_map(testutil::data_dir() / "relation_maps" / "rstdt_en.tsv");
  const std::vector<std::string> inv(map.inventory.begin(), map.inventory.end());
  auto tree = dc::binarize(dc::parse_dis(kThreeEdu));
  auto [nuc, rel] = dt::rst_pairs_of(tree, map, inv, "wsj_0001");
  ASSERT_EQ(nuc.size(), 2u);
  ASSERT_EQ(rel.size(), 2u);
  EXPECT_EQ(nuc[0].label_name, "NS");
  EXPECT_EQ(rel[0].label_name, "Attribution");
  EXPECT_EQ(nuc[0].segments[0], "The company said it would expand,");
  EXPECT_EQ(nuc[0].segments[1], "analysts noted.");
  EXPECT_EQ(nuc[1].label_name, "NS");
  EXPECT_EQ(rel[1].label_name, "Elaboration");
  for (std::size_t i = 0; i < nuc.size(); ++i) {
    EXPECT_EQ(nuc[i].segments, rel[i].segments);
    EXPECT_EQ(inv[rel[i].label], rel[i].label_name);
  }
}

TEST(BuildRstPairs, SplitsByDocumentAndAligns) {
  testutil::TempDir tmp;
  for (auto sub : {"train", "test"}) std::filesystem::create_directories(tmp.path() / sub);
  for (int i = 0; i < 10; ++i) {
    discprobe::io::write_file_atomic(tmp.path() / "train" / fmt::format("d{}.dis", i), kThreeEdu);
  }
  discprobe::io::write_file_atomic(tmp.path() / "test" / "t.dis", kThreeEdu);
  auto splits = dt::load_treebank_splits(tmp.path(), 1);
  EXPECT_EQ(splits.train.size(), 9u);
  EXPECT_EQ(splits.dev.size(), 1u);
  EXPECT_EQ(splits.test.size(), 1u);
  auto map = dc::load_relation_map(testutil::data_dir() / "relation_maps" / "rstdt_en.tsv");
  auto [nuc, rel] = dt::build_rst_pairs(splits, map);
  EXPECT_EQ(nuc.train.size(), 18u);
  EXPECT_EQ(rel.dev.size(), 2u);
  EXPECT_EQ(nuc.label_inventory, (std::vector<std::string>{"NN", "NS", "SN"}));
  EXPECT_EQ(rel.label_inventory.size(), 18u);
  std::set<std::string> train_docs, dev_docs;
  for (const auto& i : nuc.train) train_docs.insert(i.doc_id);
  for (const auto& i : nuc.dev) dev_docs.insert(i.doc_id);
  for (const auto& d : dev_docs) EXPECT_EQ(train_docs.count(d), 0u);
}

TEST(BuildRstPairs, UnmappedRelationIsError) {
  auto map = dc::parse_relation_map("span\tX\n");
  auto tree = dc::binarize(dc::parse_dis(kThreeEdu));
  EXPECT_THROW(dt::rst_pairs_of(tree, map, {"X"}, "d"), ValidationError);
}

TEST(Segmentation, BoundaryLabels) {
  EXPECT_EQ(dt::boundary_labels({3, 2}), (std::vector<int>{0, 0, 1, 0, 1}));
  EXPECT_EQ(dt::boundary_labels({4}), (std::vector<int>{0, 0, 0, 1}));
  EXPECT_THROW(dt::boundary_labels({2, 0}), ValidationError);
}

TEST(Segmentation, WholeDocument) {
  discprobe::encoder::WhitespaceTokenizer tok;
  auto out = dt::segment_document({"a b c", "d e"}, tok, "d1");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].text, "a b c d e");
  EXPECT_EQ(out[0].edu_token_lengths, (std::vector<int>{3, 2}));
  EXPECT_EQ(out[0].boundary_labels, (std::vector<int>{0, 0, 1, 0, 1}));
}

TEST(Segmentation, SplitsAtEduBoundaries) {
  discprobe::encoder::WhitespaceTokenizer tok;
  auto out = dt::segment_document({"a b", "c d", "e f g", "h i j k l m"}, tok, "d", 5);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].edu_token_lengths, (std::vector<int>{2, 2}));
  EXPECT_EQ(out[1].edu_token_lengths, (std::vector<int>{3}));
  EXPECT_EQ(out[2].edu_token_lengths, (std::vector<int>{5}));
  EXPECT_EQ(out[2].text, "h i j k l");
  int edus = 0;
  for (const auto& i : out) {
    ASSERT_NO_THROW(dt::validate(i));
    edus += std::accumulate(i.boundary_labels.begin(), i.boundary_labels.end(), 0);
  }
  EXPECT_EQ(edus, 4);
}

TEST(Segmentation, ZeroTokenEduIsError) {
  discprobe::encoder::WhitespaceTokenizer tok;
  EXPECT_THROW(dt::segment_document({"a", "   "}, tok, "d"), ValidationError);
}

TEST(Segmentation, InvariantOnTreebank) {
  testutil::TempDir tmp;
  for (int i = 0; i < 5; ++i) discprobe::io::write_file_atomic(tmp / fmt::format("d{}.dis", i), kThreeEdu);
  auto splits = dt::load_treebank_splits(tmp.path(), 3);
  discprobe::encoder::WhitespaceTokenizer tok;
  auto seg = dt::build_edu_segmentation(splits, tok);
  std::size_t n = 0;
  for (const auto* part : {&seg.train, &seg.dev, &seg.test}) {
    for (const auto& i : *part) {
      EXPECT_NO_THROW(dt::validate(i));
      EXPECT_EQ(std::accumulate(i.boundary_labels.begin(), i.boundary_labels.end(), 0), 3);
      ++n;
    }
  }
  EXPECT_EQ(n, 5u);
}

namespace {

std::vector<dt::ClozeRecord> cloze_records(std::size_t n, const std::string& prefix) {
  std::vector<dt::ClozeRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({prefix + std::to_string(i), {"a.", "b.", "c.", "d."}, {"good.", "bad."}, 1 + static_cast<int>(i % 2)});
  }
  return out;
}

}  // namespace

TEST(BuildCloze, PaperSplitSizes) {
  const auto split = dt::build_cloze(cloze_records(1871, "v"), cloze_records(1871, "t"), {});
  EXPECT_EQ(split.train.size(), 1683u);
  EXPECT_EQ(split.dev.size(), 188u);
  EXPECT_EQ(split.test.size(), 1871u);
  EXPECT_EQ(split.test[1].label, 1);
  EXPECT_EQ(split.test[0].segments[0], "a. b. c. d.");
}

TEST(BuildCloze, RecordErrors) {
  dt::ClozeRecord three{"x", {"a", "b", "c", "d"}, {"e1", "e2", "e3"}, 1};
  EXPECT_THROW(dt::cloze_instance(three), ValidationError);
  dt::ClozeRecord answer2{"y", {"a", "b", "c", "d"}, {"e1", "e2"}, 2};
  EXPECT_EQ(dt::cloze_instance(answer2).label, 1);
  EXPECT_THROW(dt::build_cloze(cloze_records(10, "v"), {}, {}), ValidationError);
}

TEST(BuildCloze, ReadsStoryClozeCsv) {
  testutil::TempDir tmp;
  discprobe::io::write_file_atomic(
      tmp / "val.csv",
      "InputStoryid,InputSentence1,InputSentence2,InputSentence3,InputSentence4,"
      "RandomFifthSentenceQuiz1,RandomFifthSentenceQuiz2,AnswerRightEnding\n"
      "s1,Tom ran.,He fell.,\"He said \"\"ow\"\", loudly.\",He rested.,He got up.,He flew away.,1\n");
  auto recs = dt::read_cloze_csv(tmp / "val.csv");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].context[2], "He said \"ow\", loudly.");
  EXPECT_EQ(recs[0].endings.size(), 2u);
  EXPECT_EQ(dt::cloze_instance(recs[0]).label, 0);
}

TEST(SplitIo, RoundTripAndByteIdentical) {
  testutil::TempDir tmp;
  const auto docs = synthetic_documents(400, 8);
  dt::OrderingConfig ocfg;
  ocfg.counts_per_n = {{3, 50}, {5, 50}};
  const auto ord = dt::build_ordering(docs, ocfg);
  dt::write_split(tmp / "ord", ord);
  const auto back = dt::read_ordering_split(tmp / "ord");
  EXPECT_EQ(back.train, ord.train);
  EXPECT_EQ(back.test, ord.test);
  const std::string first = discprobe::io::read_file(tmp.path() / "ord" / "train.jsonl");
  dt::write_split(tmp / "ord", dt::build_ordering(docs, ocfg));
  EXPECT_EQ(discprobe::io::read_file(tmp.path() / "ord" / "train.jsonl"), first);

  const auto cloze = dt::build_cloze(cloze_records(20, "v"), cloze_records(5, "t"), {15, 1});
  dt::write_split(tmp / "cloze", cloze);
  EXPECT_EQ(dt::read_pair_split(tmp / "cloze", dt::Task::kCloze).dev, cloze.dev);
  const auto line = discprobe::io::read_lines(tmp.path() / "cloze" / "test.jsonl").at(0);
  const auto j = nlohmann::json::parse(line);
  EXPECT_TRUE(j.contains("context"));
  EXPECT_TRUE(j.contains("endings"));
}
