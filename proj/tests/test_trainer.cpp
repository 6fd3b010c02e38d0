#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "inkline/checkpoint.hpp"
#include "inkline/curriculum.hpp"
#include "inkline/error.hpp"
#include "inkline/toy_data.hpp"
#include "inkline/trainer.hpp"

using namespace inkline;
namespace fs = std::filesystem;

namespace {

Dataset toy(int writers, int per_writer, std::uint64_t seed, int max_chars = 12, int max_width = 192) {
  ToyDatasetOptions o;
  o.num_writers = writers;
  o.samples_per_writer = per_writer;
  o.seed = seed;
  o.max_chars = max_chars;
  o.max_width = max_width;
  return make_toy_samples(o, Alphabet::iam());
}

double window_mean(const std::vector<LossReport>& log, std::size_t from, std::size_t to,
                   double (*f)(const LossReport&)) {
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) {
    s += f(log[i]);
  }
  return s / static_cast<double>(to - from);
}

}  // namespace

TEST(BatchSampler, ShapesAndStyleWriters) {
  const auto data = toy(2, 8, 1);
  BatchSampler sampler(data, 4, 192, 12, 2, 1);
  const auto b = sampler.next();
  EXPECT_EQ(b.real.sizes(), (std::vector<int64_t>{4, 1, 64, 192}));
  EXPECT_EQ(b.styles.sizes(), (std::vector<int64_t>{4, 2, 64, 192}));
  EXPECT_EQ(b.real_symbols.sizes(), (std::vector<int64_t>{4, 12}));
  EXPECT_TRUE(torch::equal(b.real_writers, b.fake_writers));
  EXPECT_EQ(sampler.batches_per_epoch(), 4);
}

TEST(BatchSampler, SameSeedSameBatches) {
  const auto data = toy(2, 8, 1);
  BatchSampler a(data, 4, 192, 12, 2, 9), b(data, 4, 192, 12, 2, 9);
  for (int i = 0; i < 5; ++i) {
    const auto x = a.next(), y = b.next();
    EXPECT_EQ(x.sample_ids, y.sample_ids);
    EXPECT_TRUE(torch::equal(x.styles, y.styles));
    EXPECT_TRUE(torch::equal(x.fake_symbols, y.fake_symbols));
  }
}

TEST(Trainer, PhaseDisciplineAndExactTotal) {
  auto config = testing_util::tiny_config(3);
  config.training.check_phases = true;
  auto models = ModelBundle::create(config, Alphabet::iam());
  const auto data = toy(2, 8, 2);
  BatchSampler sampler(data, 4, 192, 12, config.model.style_images, 3);
  Trainer trainer(models, config.training);
  for (int i = 0; i < 5; ++i) {
    const auto r = trainer.train_step(sampler.next());
    EXPECT_TRUE(r.phases_checked);
    EXPECT_TRUE(r.synthesizer_frozen_in_phase1);
    EXPECT_TRUE(r.auxiliaries_frozen_in_phase2);
    EXPECT_EQ(r.total, r.g_adversarial + r.g_writer + r.g_content);
    EXPECT_EQ(r.iteration, i + 1);
  }
}

TEST(Trainer, EveryGroupMovesWithinAStep) {
  auto config = testing_util::tiny_config(4);
  auto models = ModelBundle::create(config, Alphabet::iam());
  const auto data = toy(2, 8, 2);
  BatchSampler sampler(data, 4, 192, 12, config.model.style_images, 4);
  Trainer trainer(models, config.training);
  const auto h = parameter_hash(*models.synthesizer);
  const auto d = parameter_hash(*models.discriminator);
  const auto w = parameter_hash(*models.writer_classifier);
  const auto r = parameter_hash(*models.recognizer);
  trainer.train_step(sampler.next());
  EXPECT_NE(h, parameter_hash(*models.synthesizer));
  EXPECT_NE(d, parameter_hash(*models.discriminator));
  EXPECT_NE(w, parameter_hash(*models.writer_classifier));
  EXPECT_NE(r, parameter_hash(*models.recognizer));
}

TEST(Trainer, SmokeLossesDecrease) {
  auto config = testing_util::tiny_config(5);
  config.training.lr_auxiliary = 1e-4;
  config.training.max_iterations = 200;
  config.training.max_width = 192;
  auto models = ModelBundle::create(config, Alphabet::iam());
  const auto data = toy(2, 20, 5);
  CurriculumOptions options;
  options.out_dir = testing_util::scratch_dir("smoke");
  options.warn = [](const std::string&) {};
  const auto result = run_curriculum(models, data, options);
  ASSERT_EQ(result.log.size(), 200U);
  const auto& log = result.log;
  auto ld = [](const LossReport& r) { return std::abs(r.d_loss); };
  auto lw = [](const LossReport& r) { return r.w_loss; };
  auto lr = [](const LossReport& r) { return r.r_loss; };
  EXPECT_LT(window_mean(log, 180, 200, lw), window_mean(log, 0, 20, lw));
  EXPECT_LT(window_mean(log, 180, 200, lr), window_mean(log, 0, 20, lr));
  EXPECT_LT(window_mean(log, 180, 200, ld), window_mean(log, 0, 20, ld));
}

TEST(Checkpoint, RoundTripRestoresParameters) {
  auto config = testing_util::tiny_config(6);
  auto models = ModelBundle::create(config, Alphabet::iam());
  const auto dir = testing_util::scratch_dir("ckpt");
  save_checkpoint(dir / "m.ckpt", models, 42);
  int64_t iteration = 0;
  auto back = load_checkpoint(dir / "m.ckpt", &iteration);
  EXPECT_EQ(iteration, 42);
  EXPECT_EQ(back.config.hash(), config.hash());
  EXPECT_EQ(parameter_hash(*back.synthesizer), parameter_hash(*models.synthesizer));
  EXPECT_EQ(parameter_hash(*back.recognizer), parameter_hash(*models.recognizer));
  EXPECT_EQ(parameter_hash(*back.discriminator), parameter_hash(*models.discriminator));
  EXPECT_EQ(parameter_hash(*back.writer_classifier), parameter_hash(*models.writer_classifier));
}

TEST(Checkpoint, MissingAndCorruptFilesThrowLoadError) {
  const auto dir = testing_util::scratch_dir("ckpt_bad");
  try {
    load_checkpoint(dir / "absent.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LoadError);
  }
  std::ofstream(dir / "junk.ckpt") << "not an archive";
  try {
    load_checkpoint(dir / "junk.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LoadError);
  }
}

TEST(Checkpoint, RecognizerRoundTrip) {
  auto config = testing_util::tiny_config(7);
  torch::manual_seed(7);
  Recognizer r(config.model, 79);
  const auto dir = testing_util::scratch_dir("rec");
  save_recognizer(dir / "r.ckpt", r, config, Alphabet::iam());
  RunConfig back_config;
  auto back = load_recognizer(dir / "r.ckpt", &back_config);
  EXPECT_EQ(parameter_hash(*back), parameter_hash(*r));
  EXPECT_EQ(back_config.hash(), config.hash());
  ModelBundle models = ModelBundle::create(config, Alphabet::iam());
  save_checkpoint(dir / "m.ckpt", models, 0);
  EXPECT_THROW(load_recognizer(dir / "m.ckpt"), Error);
}

TEST(Curriculum, StagePlanFollowsCategories) {
  TrainingConfig t;
  t.curriculum = {1, 2, 3};
  const auto plan = stage_plan(t);
  ASSERT_EQ(plan.size(), 3U);
  EXPECT_EQ(plan[0].max_width, 600);
  EXPECT_EQ(plan[1].max_width, 1200);
  EXPECT_EQ(plan[2].max_width, 2160);
  EXPECT_EQ(plan[2].text_length, 88);
  t.curriculum = {};
  t.max_width = 320;
  t.max_chars = 12;
  const auto single = stage_plan(t);
  ASSERT_EQ(single.size(), 1U);
  EXPECT_EQ(single[0].category, 0);
  EXPECT_EQ(single[0].max_width, 320);
}

TEST(Curriculum, RejectsTextLengthBeyondModel) {
  auto config = testing_util::tiny_config(8);
  config.training.curriculum = {1};
  auto models = ModelBundle::create(config, Alphabet::iam());
  CurriculumOptions options;
  options.out_dir = testing_util::scratch_dir("cur_bad");
  EXPECT_THROW(run_curriculum(models, toy(2, 4, 1), options), Error);
}

TEST(Curriculum, RejectsMoreWritersThanModel) {
  auto config = testing_util::tiny_config(9);
  auto models = ModelBundle::create(config, Alphabet::iam());
  CurriculumOptions options;
  options.out_dir = testing_util::scratch_dir("cur_writers");
  EXPECT_THROW(run_curriculum(models, toy(3, 4, 1), options), Error);
}
