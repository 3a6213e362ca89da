#include <gtest/gtest.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/encoder/transformer.hpp"
#include "test_util.hpp"

namespace de = discprobe::encoder;

namespace {

std::filesystem::path model_dir(const std::string& name) { return testutil::fixtures() / "models" / name; }

class ForwardFixture : public ::testing::TestWithParam<std::string> {};

}  // namespace

TEST_P(ForwardFixture, HiddenStatesMatchReference) {
  const auto model = de::load_transformer(model_dir(GetParam()));
  const auto expected = discprobe::io::read_json(model_dir(GetParam()) / "expected.json");
  for (const auto& c : expected["hidden"]) {
    const auto ids = c["input_ids"].get<std::vector<int>>();
    const auto types = c.value("token_type_ids", std::vector<int>(ids.size(), 0));
    const auto states = model->forward(ids, types);
    const auto& ref = c["hidden_states"];
    ASSERT_EQ(states.size(), ref.size());
    ASSERT_EQ(static_cast<int>(states.size()), model->num_layers());
    for (std::size_t l = 0; l < states.size(); ++l) {
      ASSERT_EQ(static_cast<std::size_t>(states[l].rows()), ref[l].size()) << "layer " << l + 1;
      double worst = 0.0;
      for (std::size_t i = 0; i < ref[l].size(); ++i) {
        for (std::size_t j = 0; j < ref[l][i].size(); ++j) {
          worst = std::max(worst, std::abs(states[l](i, j) - ref[l][i][j].get<double>()));
        }
      }
      EXPECT_LT(worst, 2e-4) << GetParam() << " layer " << l + 1;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Models, ForwardFixture,
                         ::testing::Values("tiny-bert", "tiny-electra", "tiny-roberta", "tiny-gpt2", "tiny-bart",
                                           "tiny-albert", "tiny-t5"),
                         [](const auto& info) {
                           std::string n = info.param;
                           std::replace(n.begin(), n.end(), '-', '_');
                           return n;
                         });

TEST(Transformer, ArchitectureFromConfig) {
  EXPECT_EQ(de::load_transformer(model_dir("tiny-bert"))->arch(), de::Arch::kEnc);
  EXPECT_EQ(de::load_transformer(model_dir("tiny-gpt2"))->arch(), de::Arch::kDec);
  const auto bart = de::load_transformer(model_dir("tiny-bart"));
  EXPECT_EQ(bart->arch(), de::Arch::kEncDec);
  EXPECT_EQ(bart->num_layers(), 4);
  EXPECT_EQ(bart->encoder_layers(), 2);
  EXPECT_EQ(de::classify_arch({{"model_type", "bert"}, {"num_hidden_layers", 12}}), de::Arch::kEnc);
  EXPECT_EQ(de::classify_arch({{"model_type", "bart"}}), de::Arch::kEncDec);
  EXPECT_THROW(de::classify_arch(nlohmann::json::object()), discprobe::ParseError);
}

TEST(Transformer, DecoderOnlyIsCausal) {
  const auto model = de::load_transformer(model_dir("tiny-gpt2"));
  std::vector<int> ids{10, 11, 12, 13, 14};
  const auto a = model->forward(ids, {});
  ids[4] = 99;
  const auto b = model->forward(ids, {});
  for (std::size_t l = 0; l < a.size(); ++l) {
    EXPECT_TRUE(a[l].topRows(4).isApprox(b[l].topRows(4), 0.0f)) << "layer " << l + 1;
    EXPECT_FALSE(a[l].row(4).isApprox(b[l].row(4)));
  }
}

TEST(Transformer, InputErrors) {
  const auto model = de::load_transformer(model_dir("tiny-bert"));
  EXPECT_THROW(model->forward({}, {}), discprobe::ValidationError);
  EXPECT_THROW(model->forward(std::vector<int>(200, 5), {}), discprobe::ValidationError);
  EXPECT_THROW(model->forward({100000}, {0}), discprobe::ValidationError);
  EXPECT_THROW(de::load_transformer(testutil::fixtures() / "nope"), discprobe::IoError);
}

TEST(Transformer, ChecksumStable) {
  const auto a = de::load_transformer(model_dir("tiny-bert"));
  const std::string before = a->weights_checksum();
  a->forward({2, 10, 3}, {0, 0, 0});
  EXPECT_EQ(a->weights_checksum(), before);
  EXPECT_EQ(before.size(), 64u);
  EXPECT_NE(de::load_transformer(model_dir("tiny-electra"))->weights_checksum(), before);
}
