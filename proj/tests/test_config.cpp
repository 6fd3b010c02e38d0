#include <gtest/gtest.h>

#include "inkline/config.hpp"
#include "inkline/error.hpp"

using namespace inkline;

TEST(Config, TextRoundTrip) {
  auto c = RunConfig::preset_named("desk");
  c.set("lr_auxiliary", "0.0001");
  c.set("curriculum", "1,2");
  const auto back = RunConfig::from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(back.training.curriculum, (std::vector<int>{1, 2}));
}

TEST(Config, UnknownKeyRejected) {
  RunConfig c;
  try {
    c.set("no_such_key", "1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
  }
}

TEST(Config, MalformedValuesRejected) {
  RunConfig c;
  EXPECT_THROW(c.set("batch_size", "four"), Error);
  EXPECT_THROW(c.set("backbone", "alexnet"), Error);
  EXPECT_THROW(c.set("curriculum", "2,1"), Error);
  EXPECT_THROW(c.set("htr_mode", "magic"), Error);
  EXPECT_THROW(c.set("lr_adversarial", "0"), Error);
}

TEST(Config, PresetResetsFields) {
  RunConfig c;
  c.set("batch_size", "16");
  c.set("preset", "tiny");
  EXPECT_EQ(c.training.batch_size, RunConfig::preset_named("tiny").training.batch_size);
  EXPECT_EQ(c.model.embed_dim, 8);
}

TEST(Config, HashChangesWithContent) {
  auto a = RunConfig::preset_named("tiny");
  auto b = a;
  b.set("seed", "2");
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, CommentsAndBlankLinesIgnored) {
  const auto c = RunConfig::from_text("# desk run\n\npreset=desk\nbatch_size = 2\n");
  EXPECT_EQ(c.preset, "desk");
  EXPECT_EQ(c.training.batch_size, 2);
}
