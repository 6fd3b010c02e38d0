#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "inkline/error.hpp"
#include "inkline/toy_data.hpp"
#include "inkline/vfid.hpp"

using namespace inkline;

namespace {

std::vector<GrayImage> images_of(const Dataset& data, std::size_t from, std::size_t count) {
  std::vector<GrayImage> out;
  for (std::size_t i = from; i < from + count; ++i) {
    out.push_back(data.samples()[i].image);
  }
  return out;
}

Dataset toy(int writers, int per_writer, std::uint64_t seed) {
  ToyDatasetOptions o;
  o.num_writers = writers;
  o.samples_per_writer = per_writer;
  o.seed = seed;
  return make_toy_samples(o, Alphabet::iam());
}

const auto quiet = [](const std::string&) {};

}  // namespace

TEST(Extractor, KindsByName) {
  EXPECT_EQ(extractor_from_string("conv6"), ExtractorKind::Conv6);
  EXPECT_EQ(extractor_from_string("inception_v3"), ExtractorKind::InceptionV3);
  EXPECT_THROW(extractor_from_string("vgg"), Error);
}

TEST(Extractor, InceptionTopologyHandlesNarrowLines) {
  torch::manual_seed(1);
  FeatureExtractor ex(ExtractorKind::InceptionV3, 0, 2);
  std::mt19937_64 rng(1);
  const auto f = extract_features(ex, {testing_util::random_image(64, 40, rng)}, Pooling::Pyramid);
  EXPECT_EQ(f.size(0), 1);
  const auto g = extract_features(ex, {testing_util::random_image(64, 500, rng)}, Pooling::Pyramid);
  EXPECT_EQ(f.size(1), g.size(1));
}

TEST(Extractor, PooledDimensionWidthInvariant) {
  torch::manual_seed(2);
  FeatureExtractor ex(ExtractorKind::Conv6, 4, 2);
  std::mt19937_64 rng(2);
  int64_t dim = -1;
  for (int w : {64, 100, 333, 1024, 2048}) {
    const auto f = extract_features(ex, {testing_util::random_image(64, w, rng)}, Pooling::Pyramid);
    if (dim < 0) {
      dim = f.size(1);
    }
    EXPECT_EQ(f.size(1), dim) << w;
  }
}

TEST(Vfid, SymmetricNonNegativeAndOrderInvariant) {
  torch::manual_seed(3);
  FeatureExtractor ex(ExtractorKind::Conv6, 4, 2);
  const auto data = toy(2, 20, 3);
  const auto a = images_of(data, 0, 12);
  const auto b = images_of(data, 20, 12);
  const double ab = vfid(ex, a, b, quiet);
  const double ba = vfid(ex, b, a, quiet);
  EXPECT_NEAR(ab, ba, 1e-6 * std::max(1.0, ab));
  EXPECT_GE(ab, -1e-6);
  auto shuffled = a;
  std::mt19937_64 rng(4);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_NEAR(vfid(ex, shuffled, b, quiet), ab, 1e-6 * std::max(1.0, ab));
  EXPECT_NEAR(vfid(ex, a, a, quiet), 0.0, 1e-6);
  EXPECT_NEAR(fid(ex, a, a, quiet), 0.0, 1e-6);
}

TEST(Vfid, ExtractionIsPerImage) {
  torch::manual_seed(4);
  FeatureExtractor ex(ExtractorKind::Conv6, 4, 2);
  const auto data = toy(2, 5, 4);
  const auto all = images_of(data, 0, 6);
  const auto together = extract_features(ex, all, Pooling::Pyramid);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto alone = extract_features(ex, {all[i]}, Pooling::Pyramid);
    EXPECT_TRUE(torch::equal(alone[0], together[static_cast<int64_t>(i)]));
  }
}

TEST(Vfid, SingleImageSetRejected) {
  FeatureExtractor ex(ExtractorKind::Conv6, 4, 2);
  const auto data = toy(2, 3, 5);
  try {
    vfid(ex, images_of(data, 0, 1), images_of(data, 1, 3), quiet);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
}

TEST(Histogram, NormalizedAndSharedEdges) {
  const auto h = make_histogram({1.0, 2.0, 2.5}, {2.0, 5.0, 6.0, 7.0}, 4);
  EXPECT_EQ(h.edges.size(), 5U);
  EXPECT_NEAR(std::accumulate(h.same.begin(), h.same.end(), 0.0), 1.0, 1e-9);
  EXPECT_NEAR(std::accumulate(h.cross.begin(), h.cross.end(), 0.0), 1.0, 1e-9);
  EXPECT_GE(h.overlap, 0.0);
  EXPECT_LE(h.overlap, 1.0);
  EXPECT_NEAR(make_histogram({1.0}, {1.0}, 3).overlap, 1.0, 1e-12);
  EXPECT_NEAR(make_histogram({0.0}, {9.0}, 3).overlap, 0.0, 1e-12);
}

TEST(ToyGate, WriterClassifierReachesNinetyPercent) {
  const auto data = toy(2, 100, 12);
  const auto [train, test] = split_per_writer(data, 0.8, 12);
  torch::manual_seed(12);
  FeatureExtractor ex(ExtractorKind::Conv6, 8, 2);
  ExtractorTrainOptions options;
  options.iterations = 200;
  options.seed = 12;
  train_extractor(ex, train, options);
  const double accuracy = writer_accuracy(ex, test);
  RecordProperty("held_out_accuracy", std::to_string(accuracy));
  EXPECT_GE(accuracy, 0.9);

  const auto dir = testing_util::scratch_dir("extractor");
  save_extractor(dir / "e.ckpt", ex);
  auto back = load_extractor(dir / "e.ckpt");
  EXPECT_EQ(writer_accuracy(back, test), accuracy);

  HistogramOptions h;
  h.pairs = 10;
  h.subset_size = 8;
  const auto study = fid_vfid_histograms(ex, test, h);
  EXPECT_EQ(study.vfid_same.size(), 10U);
  EXPECT_NEAR(std::accumulate(study.vfid.same.begin(), study.vfid.same.end(), 0.0), 1.0, 1e-9);
  const double same = std::accumulate(study.vfid_same.begin(), study.vfid_same.end(), 0.0);
  const double cross = std::accumulate(study.vfid_cross.begin(), study.vfid_cross.end(), 0.0);
  EXPECT_LT(same, cross);
}
