#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "inkline/curriculum.hpp"
#include "inkline/error.hpp"
#include "inkline/metrics.hpp"
#include "inkline/recognizer.hpp"
#include "inkline/toy_data.hpp"

using namespace inkline;

namespace {

ModelConfig small_recognizer() {
  auto c = testing_util::tiny_config().model;
  c.rec_width = 8;
  c.rec_model_dim = 64;
  c.rec_heads = 4;
  c.rec_ff = 128;
  c.rec_layers = 2;
  c.rec_dropout = 0.0;
  return c;
}

torch::Tensor one_hot_logits(const torch::Tensor& targets, int classes, double scale) {
  return torch::one_hot(targets, classes).to(torch::kFloat) * 2 * scale - scale;
}

}  // namespace

TEST(Recognizer, OutputShapeAndNormalization) {
  torch::manual_seed(1);
  Recognizer r(testing_util::tiny_config().model, 79);
  r->eval();
  const auto targets = torch::randint(0, 80, {2, 12}, torch::kLong);
  const auto logits = r->forward(torch::rand({2, 1, 64, 128}), targets);
  EXPECT_EQ(logits.sizes(), (std::vector<int64_t>{2, 12, 80}));
  EXPECT_TRUE(torch::allclose(torch::softmax(logits, -1).sum(-1), torch::ones({2, 12}), 1e-5, 1e-5));
}

TEST(Recognizer, ShiftTargets) {
  Recognizer r(testing_util::tiny_config().model, 79);
  const auto shifted = r->shift_targets(torch::tensor({{3, 4, 5}}, torch::kLong));
  EXPECT_TRUE(torch::equal(shifted, torch::tensor({{80, 3, 4}}, torch::kLong)));
}

TEST(Recognizer, CausalMask) {
  const auto m = causal_mask(3);
  EXPECT_EQ(m[0][1].item<float>(), -std::numeric_limits<float>::infinity());
  EXPECT_EQ(m[1][0].item<float>(), 0.0F);
  EXPECT_EQ(m[2][2].item<float>(), 0.0F);
}

TEST(Recognizer, ParallelMatchesSequential) {
  torch::manual_seed(2);
  Recognizer r(testing_util::tiny_config().model, 79);
  r->eval();
  torch::NoGradGuard ng;
  const auto images = torch::rand({1, 1, 64, 96});
  const auto targets = torch::randint(0, 79, {1, 8}, torch::kLong);
  const auto memory = r->encode(images);
  const auto inputs = r->shift_targets(targets);
  const auto parallel = r->decode_logits(memory, inputs);
  for (int64_t p = 1; p <= 8; ++p) {
    const auto prefix = r->decode_logits(memory, inputs.narrow(1, 0, p));
    EXPECT_TRUE(torch::allclose(prefix[0][p - 1], parallel[0][p - 1], 1e-5, 1e-5)) << p;
  }
}

TEST(Recognizer, CausalityUnderPerturbation) {
  torch::manual_seed(3);
  Recognizer r(testing_util::tiny_config().model, 79);
  r->eval();
  torch::NoGradGuard ng;
  const auto images = torch::rand({1, 1, 64, 96});
  const auto targets = torch::randint(0, 79, {1, 10}, torch::kLong);
  const auto base = r->forward(images, targets);
  for (int64_t j = 0; j < 10; ++j) {
    auto changed = targets.clone();
    changed.narrow(1, j, 10 - j).copy_(torch::randint(0, 79, {1, 10 - j}, torch::kLong));
    const auto out = r->forward(images, changed);
    if (j > 0) {
      EXPECT_TRUE(torch::equal(out.narrow(1, 0, j), base.narrow(1, 0, j))) << j;
    }
  }
}

TEST(ContentLoss, ExactPredictionIsZero) {
  const auto targets = torch::tensor({{3, 4, 79, 79}}, torch::kLong);
  const auto lengths = torch::tensor({2}, torch::kLong);
  EXPECT_NEAR(loss_content(one_hot_logits(targets, 80, 50.0), targets, lengths).item<double>(), 0.0,
              1e-6);
}

TEST(ContentLoss, UniformPredictionIsLog80) {
  const auto targets = torch::tensor({{3, 4, 5, 79}}, torch::kLong);
  const auto lengths = torch::tensor({3}, torch::kLong);
  EXPECT_NEAR(loss_content(torch::zeros({1, 4, 80}), targets, lengths).item<double>(), std::log(80.0),
              1e-5);
}

TEST(ContentLoss, ExtraPaddingLeavesLossUnchanged) {
  torch::manual_seed(4);
  const auto short_t = torch::tensor({{3, 4, 79}}, torch::kLong);
  const auto long_t = torch::tensor({{3, 4, 79, 79, 79}}, torch::kLong);
  const auto lengths = torch::tensor({2}, torch::kLong);
  const auto logits = torch::randn({1, 5, 80});
  EXPECT_NEAR(loss_content(logits.narrow(1, 0, 3), short_t, lengths).item<double>(),
              loss_content(logits, long_t, lengths).item<double>(), 1e-6);
}

TEST(ContentLoss, NonNegativeAndZeroOnlyAtMatch) {
  torch::manual_seed(5);
  const auto targets = torch::tensor({{7, 8, 79, 79}}, torch::kLong);
  const auto lengths = torch::tensor({2}, torch::kLong);
  for (int i = 0; i < 20; ++i) {
    EXPECT_GE(loss_content(torch::randn({1, 4, 80}) * 3, targets, lengths).item<double>(), 0.0);
  }
  auto wrong = targets.clone();
  wrong[0][1] = 9;
  EXPECT_GT(loss_content(one_hot_logits(wrong, 80, 50.0), targets, lengths).item<double>(), 1.0);
  // Positions after the first epsilon are not scored.
  auto tail = targets.clone();
  tail[0][3] = 12;
  EXPECT_NEAR(loss_content(one_hot_logits(tail, 80, 50.0), targets, lengths).item<double>(), 0.0, 1e-6);
  EXPECT_THROW(loss_content(torch::zeros({1, 4, 80}), targets, torch::tensor({0}, torch::kLong)), Error);
}

TEST(ContentLoss, SmoothingStaysFinite) {
  const auto targets = torch::tensor({{3, 79}}, torch::kLong);
  const auto v = loss_content(torch::zeros({1, 2, 80}), targets, torch::tensor({1}, torch::kLong), 0.1);
  EXPECT_TRUE(std::isfinite(v.item<double>()));
}

TEST(Recognizer, GreedyDecodeTerminatesAndRepeats) {
  torch::manual_seed(6);
  Recognizer r(testing_util::tiny_config().model, 79);
  const auto alphabet = Alphabet::iam();
  const auto blank = torch::zeros({1, 1, 64, 128});
  const auto a = r->decode_greedy(blank, 12, alphabet);
  const auto b = r->decode_greedy(blank, 12, alphabet);
  EXPECT_LE(a[0].symbols.size(), 12U);
  EXPECT_EQ(a[0].text, b[0].text);
  EXPECT_EQ(a[0].symbols.size(), a[0].confidence.size());
}

TEST(Recognizer, OverfitsTenToySamples) {
  ToyDatasetOptions o;
  o.num_writers = 2;
  o.samples_per_writer = 5;
  o.seed = 21;
  o.max_chars = 8;
  o.max_width = 192;
  const auto alphabet = Alphabet::iam();
  const auto data = make_toy_samples(o, alphabet);
  ASSERT_EQ(data.size(), 10U);
  const int T = 9;
  std::vector<GrayImage> images;
  std::vector<int64_t> flat, lengths;
  for (const auto& s : data.samples()) {
    images.push_back(s.image);
    const auto p = pad_text(alphabet, s.transcription, T);
    flat.insert(flat.end(), p.symbols.begin(), p.symbols.end());
    lengths.push_back(p.true_length);
  }
  const auto batch = stack_padded(images, grid_width(data.max_width()));
  const auto targets = torch::tensor(flat).reshape({10, T});
  const auto lens = torch::tensor(lengths);
  const auto scored = content_mask(lens, T);

  torch::manual_seed(7);
  Recognizer r(small_recognizer(), alphabet.size());
  torch::optim::Adam opt(r->parameters(), torch::optim::AdamOptions(1e-3));
  bool teacher_forced_exact = false;
  int step = 0;
  for (; step < 2000 && !teacher_forced_exact; ++step) {
    r->train();
    const auto loss = loss_content(r->forward(batch, targets), targets, lens);
    opt.zero_grad();
    loss.backward();
    opt.step();
    if (step % 25 == 24) {
      r->eval();
      torch::NoGradGuard ng;
      const auto pred = r->forward(batch, targets).argmax(-1);
      teacher_forced_exact = (pred.eq(targets) | scored.logical_not()).all().item<bool>();
    }
  }
  ASSERT_TRUE(teacher_forced_exact) << "after " << step << " steps";
  r->eval();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples()[i];
    const auto decoded = r->decode_greedy(batch.narrow(0, static_cast<int64_t>(i), 1), T, alphabet);
    EXPECT_EQ(decoded[0].text, s.transcription);
    EXPECT_EQ(cer(s.transcription, decoded[0].text).distance(), 0);
  }
}
