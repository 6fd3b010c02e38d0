#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "inkline/alphabet.hpp"
#include "inkline/curriculum.hpp"
#include "inkline/dataset.hpp"
#include "inkline/error.hpp"
#include "inkline/ngram.hpp"
#include "inkline/toy_data.hpp"

using namespace inkline;
namespace fs = std::filesystem;

namespace {

RawImage uniform(int h, int w, std::uint8_t value) {
  return RawImage{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, value)};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Normalize, WhitePageBecomesZeros) {
  const auto out = normalize_image(uniform(128, 100, 255));
  EXPECT_EQ(out.height(), 64);
  EXPECT_EQ(out.width(), 50);
  for (float p : out.pixels()) {
    EXPECT_EQ(p, 0.0F);
  }
}

TEST(Normalize, BlackPageBecomesOnes) {
  const auto out = normalize_image(uniform(64, 300, 0));
  EXPECT_EQ(out.width(), 300);
  for (float p : out.pixels()) {
    EXPECT_EQ(p, 1.0F);
  }
}

TEST(Normalize, SingleInkPixelSurvivesUpsampling) {
  auto raw = uniform(32, 32, 255);
  raw.pixels[10 * 32 + 20] = 0;
  const auto out = normalize_image(raw);
  ASSERT_EQ(out.height(), 64);
  ASSERT_EQ(out.width(), 64);
  float best = 0.0F;
  for (float p : out.pixels()) {
    best = std::max(best, p);
  }
  // Half-pixel-centred bilinear x2 maps source pixel 20 onto output 40 and 41.
  EXPECT_EQ(out.at(20, 40), best);
  EXPECT_GT(best, 0.5F);
}

TEST(Normalize, RejectsZeroArea) {
  try {
    normalize_image(RawImage{0, 10, {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidImage);
  }
}

TEST(PeriodicPad, RepeatsColumns) {
  std::mt19937_64 rng(3);
  const auto image = testing_util::random_image(64, 100, rng);
  const auto padded = periodic_pad(image, 250);
  ASSERT_EQ(padded.width(), 250);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 250; ++c) {
      ASSERT_EQ(padded.at(r, c), image.at(r, c % 100));
    }
  }
}

TEST(PeriodicPad, IdentityAtOwnWidth) {
  std::mt19937_64 rng(4);
  const auto image = testing_util::random_image(64, 37, rng);
  EXPECT_EQ(periodic_pad(image, 37), image);
}

TEST(PeriodicPad, SingleColumnTiles) {
  std::mt19937_64 rng(5);
  const auto column = testing_util::random_image(64, 1, rng);
  const auto padded = periodic_pad(column, 7);
  for (int c = 0; c < 7; ++c) {
    EXPECT_EQ(padded.columns(c, c + 1), column);
  }
}

TEST(PeriodicPad, NarrowerTargetThrows) {
  GrayImage image(64, 20);
  try {
    periodic_pad(image, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::WidthExceedsTarget);
  }
}

TEST(Alphabet, IamHas79Symbols) {
  const auto a = Alphabet::iam();
  EXPECT_EQ(a.size(), 79);
  EXPECT_EQ(a.epsilon_index(), 79);
  EXPECT_EQ(a.decode(a.encode("Hello, world!")), "Hello, world!");
}

TEST(Alphabet, UnknownCharacterThrows) {
  try {
    Alphabet::iam().encode("caf\xc3\xa9");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EncodingError);
  }
}

TEST(Alphabet, PadText) {
  const auto a = Alphabet::iam();
  const auto p = pad_text(a, "aa", 5);
  ASSERT_EQ(p.symbols.size(), 5U);
  EXPECT_EQ(p.true_length, 2);
  EXPECT_EQ(p.symbols[0], p.symbols[1]);
  EXPECT_EQ(p.symbols[2], a.epsilon_index());
  EXPECT_THROW(pad_text(a, "", 5), Error);
  EXPECT_THROW(pad_text(a, "abcdef", 5), Error);
}

TEST(Manifest, RoundTripWithEscapes) {
  const auto dir = testing_util::scratch_dir("manifest");
  Manifest m;
  m.records.push_back({dir / "a.png", "w1", "tab\there", {}});
  m.records.push_back({dir / "b.png", "w2", "two words", {{0, 0, 5, 10}, {7, 0, 4, 10}}});
  write_manifest(dir / "m.tsv", m);
  const auto back = read_manifest(dir / "m.tsv");
  ASSERT_EQ(back.records.size(), 2U);
  EXPECT_EQ(back.records[0].transcription, "tab\there");
  EXPECT_EQ(back.records[0].image_path, dir / "a.png");
  EXPECT_EQ(back.records[1].word_boxes, m.records[1].word_boxes);
}

TEST(Manifest, MalformedLineThrows) {
  const auto dir = testing_util::scratch_dir("manifest_bad");
  std::ofstream(dir / "m.tsv") << "only_one_field\n";
  try {
    read_manifest(dir / "m.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ManifestError);
  }
}

TEST(Ingest, RejectsTooWideAndUnknownCharacters) {
  std::vector<TextLineSample> samples(3);
  samples[0] = {"ok", GrayImage(64, 100), "fine", "w", -1, 0};
  samples[1] = {"wide", GrayImage(64, 700), "wide", "w", -1, 0};
  samples[2] = {"bad", GrayImage(64, 100), "\xc3\xa9", "w", -1, 0};
  IngestReport report;
  IngestLimits limits;
  limits.max_width = 600;
  const auto data = ingest_samples(samples, Alphabet::iam(), limits, &report);
  EXPECT_EQ(data.size(), 1U);
  EXPECT_EQ(report.rejected.size(), 2U);
  EXPECT_EQ(data.samples()[0].char_count, 4);
}

TEST(Ngram, ThreeWordsGiveSixSamples) {
  LineWords line;
  line.line_id = "l";
  line.writer_id = "w";
  line.image = uniform(64, 90, 255);
  line.words = {"ab", "cd", "ef"};
  line.boxes = {{0, 0, 20, 64}, {30, 0, 20, 64}, {60, 0, 20, 64}};
  const auto out = ngram_crop(line, 3);
  ASSERT_EQ(out.size(), 6U);
  std::multiset<std::string> texts;
  for (const auto& s : out) {
    texts.insert(s.transcription);
  }
  EXPECT_EQ(texts, (std::multiset<std::string>{"ab", "cd", "ef", "ab cd", "cd ef", "ab cd ef"}));
  EXPECT_EQ(ngram_count(3, 3), 6U);
}

TEST(Ngram, SingleWordAndOrderCap) {
  LineWords line;
  line.line_id = "l";
  line.image = uniform(64, 40, 255);
  line.words = {"x"};
  line.boxes = {{0, 0, 30, 64}};
  EXPECT_EQ(ngram_crop(line, 3).size(), 1U);
  EXPECT_EQ(ngram_count(5, 2), 9U);
}

TEST(Ngram, OverlappingBoxesThrow) {
  LineWords line;
  line.line_id = "l";
  line.image = uniform(64, 90, 255);
  line.words = {"a", "b"};
  line.boxes = {{0, 0, 40, 64}, {30, 0, 20, 64}};
  EXPECT_THROW(ngram_crop(line, 2), Error);
}

TEST(Curriculum, CategoryBoundaries) {
  EXPECT_EQ(assign_category(10).id, 1);
  EXPECT_EQ(assign_category(24).id, 1);
  EXPECT_EQ(assign_category(25).id, 2);
  EXPECT_EQ(assign_category(48).id, 2);
  EXPECT_EQ(assign_category(49).id, 3);
  EXPECT_EQ(assign_category(88).id, 3);
  EXPECT_THROW(assign_category(0), Error);
  EXPECT_THROW(assign_category(89), Error);
}

TEST(Curriculum, GridWidth) {
  EXPECT_EQ(grid_width(600), 608);
  EXPECT_EQ(grid_width(640), 640);
  EXPECT_EQ(grid_width(1), 16);
}

TEST(ToyData, DeterministicBytes) {
  ToyDatasetOptions o;
  o.num_writers = 2;
  o.samples_per_writer = 10;
  o.seed = 7;
  const auto a = testing_util::scratch_dir("toy_a");
  const auto b = testing_util::scratch_dir("toy_b");
  make_toy_dataset(o, a);
  make_toy_dataset(o, b);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) {
      files.push_back(fs::relative(e.path(), a));
    }
  }
  ASSERT_EQ(files.size(), 22U);  // 20 images, manifest, writers
  for (const auto& f : files) {
    EXPECT_EQ(file_bytes(a / f), file_bytes(b / f)) << f;
  }
}

TEST(ToyData, InvariantsFiveWriters) {
  ToyDatasetOptions o;
  o.num_writers = 5;
  o.samples_per_writer = 50;
  o.seed = 11;
  const auto alphabet = Alphabet::iam();
  const auto data = make_toy_samples(o, alphabet);
  EXPECT_EQ(data.size(), 250U);
  EXPECT_EQ(data.num_writers(), 5);
  for (const auto& s : data.samples()) {
    EXPECT_EQ(s.image.height(), 64);
    EXPECT_LE(s.image.width(), o.max_width);
    EXPECT_NO_THROW(alphabet.encode(s.transcription));
  }
}

TEST(Dataset, SplitPerWriterIsDisjoint) {
  ToyDatasetOptions o;
  o.num_writers = 3;
  o.samples_per_writer = 10;
  const auto data = make_toy_samples(o, Alphabet::iam());
  const auto [a, b] = split_per_writer(data, 0.7, 1);
  EXPECT_EQ(a.size() + b.size(), data.size());
  std::set<std::string> ids;
  for (const auto& s : a.samples()) {
    ids.insert(s.sample_id);
  }
  for (const auto& s : b.samples()) {
    EXPECT_FALSE(ids.contains(s.sample_id));
  }
  EXPECT_EQ(a.num_writers(), 3);
}

TEST(Dataset, StyleSetStaysWithinWriter) {
  ToyDatasetOptions o;
  o.num_writers = 2;
  o.samples_per_writer = 6;
  const auto data = make_toy_samples(o, Alphabet::iam());
  std::mt19937_64 rng(1);
  const auto style = data.sample_style_set(1, 5, rng, data.writer_samples(1).front());
  EXPECT_EQ(style.images.size(), 5U);
  EXPECT_EQ(style.writer_index, 1);
}
