#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "discprobe/common/error.hpp"
#include "discprobe/encoder/encoder.hpp"
#include "discprobe/encoder/feature_cache.hpp"
#include "discprobe/encoder/registry.hpp"
#include "test_util.hpp"

using namespace discprobe;
using namespace discprobe::encoder;

namespace {

ModelRegistry tiny_registry() { return ModelRegistry::load(testutil::fixtures() / "models" / "registry.json"); }

std::string repeat_words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i % 10);
  return s;
}

}  // namespace

TEST(Registry, ResolvesTinyModels) {
  auto reg = tiny_registry();
  EXPECT_EQ(reg.names().size(), 7u);
  const auto& bart = reg.spec("tiny-bart");
  EXPECT_EQ(bart.arch, Arch::kEncDec);
  EXPECT_EQ(bart.num_layers, 4);
  EXPECT_EQ(bart.encoder_layers, 2);
  EXPECT_EQ(bart.stack_of(2), "encoder");
  EXPECT_EQ(bart.stack_of(3), "decoder");
  EXPECT_EQ(reg.spec("tiny-gpt2").arch, Arch::kDec);
  EXPECT_EQ(reg.spec("tiny-bert").stack_of(1), "");
  EXPECT_THROW(bart.check_layer(0), ValidationError);
  EXPECT_THROW(bart.check_layer(5), ValidationError);
}

TEST(Registry, UnknownNameIsError) {
  auto reg = tiny_registry();
  EXPECT_THROW(reg.spec("bogus"), ValidationError);
}

TEST(Registry, UnresolvableCheckpointIsIoError) {
  ModelRegistry reg;
  reg.add({"ghost", "no-such-checkpoint", std::nullopt, std::nullopt});
  EXPECT_THROW(reg.spec("ghost"), IoError);
}

TEST(Registry, DeclaredArchMustMatchConfig) {
  ModelRegistry reg({testutil::fixtures() / "models"});
  reg.add({"bad", "tiny-bert", Arch::kDec, std::nullopt});
  EXPECT_THROW(reg.spec("bad"), ValidationError);
  reg.add({"bad2", "tiny-bert", std::nullopt, 7});
  EXPECT_THROW(reg.spec("bad2"), ValidationError);
}

TEST(Registry, DuplicateNameRejected) {
  ModelRegistry reg;
  reg.add({"a", "x", std::nullopt, std::nullopt});
  EXPECT_THROW(reg.add({"a", "y", std::nullopt, std::nullopt}), ValidationError);
}

TEST(Registry, PaperModelListIsComplete) {
  auto reg = ModelRegistry::load(testutil::data_dir() / "models" / "registry.json");
  EXPECT_EQ(reg.names().size(), 11u);
  EXPECT_EQ(*reg.entry("bart-base").arch, Arch::kEncDec);
  EXPECT_EQ(*reg.entry("gpt2").arch, Arch::kDec);
}

TEST(Pooling, MeanOfTwoTokens) {
  Eigen::MatrixXf h(2, 2);
  h << 1, 3, 3, 5;
  const Eigen::VectorXf v = mean_pool(h, 0, 2);
  EXPECT_FLOAT_EQ(v(0), 2.0f);
  EXPECT_FLOAT_EQ(v(1), 4.0f);
  EXPECT_THROW(mean_pool(h, 1, 1), ValidationError);
}

TEST(Pooling, Defaults) {
  auto reg = tiny_registry();
  EXPECT_EQ(default_pooling(reg.spec("tiny-bert"), true), Pooling::kCls);
  EXPECT_EQ(default_pooling(reg.spec("tiny-bert"), false), Pooling::kMean);
  EXPECT_EQ(default_pooling(reg.spec("tiny-albert"), true), Pooling::kCls);
  EXPECT_EQ(default_pooling(reg.spec("tiny-roberta"), true), Pooling::kMean);
  EXPECT_EQ(pooling_from_string("cls"), Pooling::kCls);
  EXPECT_THROW(pooling_from_string("max"), ValidationError);
}

TEST(EncoderTest, PairMeanConcatenatesSegments) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-bert"));
  const auto r = enc.encode({"the cat sat", "on the mat"}, 2, Pooling::kMean);
  ASSERT_EQ(r.vectors.size(), 2u);
  EXPECT_EQ(r.concatenated().size(), 2 * enc.spec().hidden_dim);
  const auto c = enc.encode({"the cat sat", "on the mat"}, 2, Pooling::kCls);
  ASSERT_EQ(c.vectors.size(), 1u);
  EXPECT_EQ(c.concatenated().size(), enc.spec().hidden_dim);
}

TEST(EncoderTest, Deterministic) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-roberta"));
  const auto a = enc.encode({"Hello there, world."}, 1, Pooling::kMean);
  const auto b = enc.encode({"Hello there, world."}, 1, Pooling::kMean);
  EXPECT_EQ(a.concatenated(), b.concatenated());
}

TEST(EncoderTest, MeanPoolMatchesSpanOfLayerStates) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-bert"));
  const auto in = enc.prepare({"alpha beta", "gamma"}, {});
  const auto states = enc.layer_states(in);
  ASSERT_EQ(states.size(), 3u);
  const auto [b, e] = in.spans[1];
  const Eigen::VectorXf expect = states[2].middleRows(b, e - b).colwise().mean().transpose();
  const auto r = enc.encode({"alpha beta", "gamma"}, 3, Pooling::kMean);
  EXPECT_TRUE(r.vectors[1].isApprox(expect));
}

TEST(EncoderTest, ContextKeepsLastTokens) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-bert"));
  const std::string ctx = repeat_words(60);
  const auto in = enc.prepare({ctx, "end"}, {{20, Keep::kLast}, {50, Keep::kFirst}});
  const auto full = enc.tokenizer().tokenize(ctx);
  ASSERT_GT(full.size(), 20u);
  ASSERT_EQ(in.tokens[0].size(), 20u);
  EXPECT_EQ(in.tokens[0].front().id, full[full.size() - 20].id);
  EXPECT_EQ(in.tokens[0].back().end, full.back().end);
  const auto first = enc.prepare({ctx}, {{20, Keep::kFirst}});
  EXPECT_EQ(first.tokens[0].front().begin, 0u);
}

TEST(EncoderTest, OverlongInputIsError) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-bert"));
  EXPECT_THROW(enc.encode({repeat_words(400)}, 1, Pooling::kMean), ValidationError);
}

TEST(EncoderTest, ClsUnavailableForDecoderOnlyModels) {
  auto reg = tiny_registry();
  Encoder gpt(reg.spec("tiny-gpt2"));
  EXPECT_THROW(gpt.encode({"a b", "c d"}, 1, Pooling::kCls), ValidationError);
  EXPECT_NO_THROW(gpt.encode({"a b", "c d"}, 1, Pooling::kMean));
}

TEST(EncoderTest, LayerOutOfRange) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-electra"));
  EXPECT_THROW(enc.encode({"x"}, 3, Pooling::kMean), ValidationError);
  EXPECT_THROW(enc.encode({"x"}, 0, Pooling::kMean), ValidationError);
}

TEST(EncoderTest, DecoderRowsRealigned) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-bart"));
  const auto in = enc.prepare({"one two three"}, {});
  const auto raw = load_transformer(enc.spec().checkpoint)->forward(in.encoding.ids, in.encoding.type_ids);
  const auto aligned = enc.layer_states(in);
  const Eigen::Index n = raw[3].rows();
  EXPECT_TRUE(aligned[1].isApprox(raw[1]));  // encoder layers untouched
  for (Eigen::Index p = 0; p + 1 < n; ++p) EXPECT_TRUE(aligned[3].row(p).isApprox(raw[3].row(p + 1)));
  EXPECT_TRUE(aligned[3].row(n - 1).isApprox(raw[3].row(n - 1)));
}

TEST(EncoderTest, TokenVectorsExcludeSpecials) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-bert"));
  const std::string text = "Time flies like an arrow.";
  const auto toks = enc.tokenizer().tokenize(text);
  const auto r = enc.encode_tokens(text, 2);
  EXPECT_EQ(static_cast<std::size_t>(r.vectors.rows()), toks.size());
  EXPECT_EQ(r.offsets.size(), toks.size());
  EXPECT_EQ(r.offsets.front().first, 0u);
  EXPECT_THROW(enc.encode_tokens(text, 2, 4), ValidationError);
}

TEST(FeatureCacheTest, NpyRoundTrip) {
  testutil::TempDir tmp;
  FeatureMatrix m(3, 5);
  m.setRandom();
  write_npy(tmp / "a.npy", m);
  EXPECT_EQ(read_npy(tmp / "a.npy"), m);
  FeatureMatrix empty(0, 4);
  write_npy(tmp / "e.npy", empty);
  EXPECT_EQ(read_npy(tmp / "e.npy").cols(), 4);
}

TEST(FeatureCacheTest, NpyHeaderIsAligned) {
  testutil::TempDir tmp;
  FeatureMatrix m(2, 2);
  m.setZero();
  write_npy(tmp / "a.npy", m);
  const auto size = std::filesystem::file_size(tmp / "a.npy");
  EXPECT_EQ((size - 16) % 64, 0u);
}

TEST(FeatureCacheTest, CorruptFileIsParseError) {
  testutil::TempDir tmp;
  std::ofstream(tmp / "bad.npy") << "garbage";
  EXPECT_THROW(read_npy(tmp / "bad.npy"), ParseError);
}

TEST(FeatureCacheTest, StoreLoadAndKeyMismatch) {
  testutil::TempDir tmp;
  FeatureCache cache(tmp.path());
  FeatureMeta key{"tiny-bert", 2, "cls", 0, 0, std::string(64, 'a')};
  EXPECT_FALSE(cache.load(key).has_value());
  FeatureMatrix m(4, 3);
  m.setRandom();
  cache.store(key, m);
  auto got = cache.load(key);
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(*got, m);
  auto other = key;
  other.content_hash = std::string(64, 'b');
  EXPECT_FALSE(cache.load(other).has_value());
  const auto side = feature_meta_from_json(nlohmann::json::parse(
      std::ifstream(cache.path_for(key).string() + ".json")));
  EXPECT_EQ(side.count, 4u);
  EXPECT_EQ(side.dim, 3u);
  const auto c1 = cache.checksum();
  cache.store(key, m);
  EXPECT_EQ(cache.checksum(), c1);
}

TEST(EncoderTest, BudgetedInputIsFittedToModelLimit) {
  auto reg = tiny_registry();
  Encoder enc(reg.spec("tiny-bert"));
  const std::string ctx = repeat_words(300);
  const auto in = enc.prepare({ctx, "the end"}, {{450, Keep::kLast}, {50, Keep::kFirst}});
  EXPECT_LE(in.encoding.ids.size(), 128u);
  const auto full = enc.tokenizer().tokenize(ctx);
  EXPECT_EQ(in.tokens[0].back().end, full.back().end);  // the context keeps its end
  EXPECT_EQ(in.tokens[1].size(), enc.tokenizer().tokenize("the end").size());
  EXPECT_NO_THROW(enc.encode({ctx, "the end"}, 1, Pooling::kCls, {{450, Keep::kLast}, {50, Keep::kFirst}}));
}
