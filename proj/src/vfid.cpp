#include "inkline/vfid.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include <torch/optim.h>

#include "inkline/checkpoint.hpp"
#include "inkline/error.hpp"

namespace inkline {

namespace nn = torch::nn;

namespace {

nn::GroupNorm group_norm(int channels) {
  return nn::GroupNorm(nn::GroupNormOptions(std::gcd(8, channels), channels));
}

/// conv (no bias) -> group norm -> ReLU.
class ConvUnitImpl : public nn::Module {
 public:
  ConvUnitImpl(int in, int out, int kh, int kw, int sh = 1, int sw = 1, int ph = 0, int pw = 0) {
    conv_ = register_module("conv", nn::Conv2d(nn::Conv2dOptions(in, out, {kh, kw})
                                                   .stride({sh, sw})
                                                   .padding({ph, pw})
                                                   .bias(false)));
    norm_ = register_module("norm", group_norm(out));
  }
  torch::Tensor forward(const torch::Tensor& x) { return torch::relu(norm_(conv_(x))); }

 private:
  nn::Conv2d conv_{nullptr};
  nn::GroupNorm norm_{nullptr};
};
TORCH_MODULE(ConvUnit);

class InceptionAImpl : public nn::Module {
 public:
  InceptionAImpl(int in, int pool_features) {
    b1_ = register_module("b1", nn::Sequential(ConvUnit(in, 64, 1, 1)));
    b5_ = register_module("b5", nn::Sequential(ConvUnit(in, 48, 1, 1),
                                               ConvUnit(48, 64, 5, 5, 1, 1, 2, 2)));
    b3_ = register_module("b3", nn::Sequential(ConvUnit(in, 64, 1, 1),
                                               ConvUnit(64, 96, 3, 3, 1, 1, 1, 1),
                                               ConvUnit(96, 96, 3, 3, 1, 1, 1, 1)));
    pool_ = register_module("pool", nn::Sequential(ConvUnit(in, pool_features, 1, 1)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto pooled = torch::avg_pool2d(x, {3, 3}, {1, 1}, {1, 1});
    return torch::cat({b1_->forward(x), b5_->forward(x), b3_->forward(x), pool_->forward(pooled)}, 1);
  }

 private:
  nn::Sequential b1_{nullptr}, b5_{nullptr}, b3_{nullptr}, pool_{nullptr};
};
TORCH_MODULE(InceptionA);

class InceptionBImpl : public nn::Module {
 public:
  explicit InceptionBImpl(int in) {
    b3_ = register_module("b3", nn::Sequential(ConvUnit(in, 384, 3, 3, 2, 2)));
    dbl_ = register_module("dbl", nn::Sequential(ConvUnit(in, 64, 1, 1),
                                                 ConvUnit(64, 96, 3, 3, 1, 1, 1, 1),
                                                 ConvUnit(96, 96, 3, 3, 2, 2)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return torch::cat({b3_->forward(x), dbl_->forward(x), torch::max_pool2d(x, {3, 3}, {2, 2})}, 1);
  }

 private:
  nn::Sequential b3_{nullptr}, dbl_{nullptr};
};
TORCH_MODULE(InceptionB);

class InceptionCImpl : public nn::Module {
 public:
  InceptionCImpl(int in, int c7) {
    b1_ = register_module("b1", nn::Sequential(ConvUnit(in, 192, 1, 1)));
    b7_ = register_module("b7", nn::Sequential(ConvUnit(in, c7, 1, 1),
                                               ConvUnit(c7, c7, 1, 7, 1, 1, 0, 3),
                                               ConvUnit(c7, 192, 7, 1, 1, 1, 3, 0)));
    dbl_ = register_module("dbl", nn::Sequential(ConvUnit(in, c7, 1, 1),
                                                 ConvUnit(c7, c7, 7, 1, 1, 1, 3, 0),
                                                 ConvUnit(c7, c7, 1, 7, 1, 1, 0, 3),
                                                 ConvUnit(c7, c7, 7, 1, 1, 1, 3, 0),
                                                 ConvUnit(c7, 192, 1, 7, 1, 1, 0, 3)));
    pool_ = register_module("pool", nn::Sequential(ConvUnit(in, 192, 1, 1)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto pooled = torch::avg_pool2d(x, {3, 3}, {1, 1}, {1, 1});
    return torch::cat({b1_->forward(x), b7_->forward(x), dbl_->forward(x), pool_->forward(pooled)},
                      1);
  }

 private:
  nn::Sequential b1_{nullptr}, b7_{nullptr}, dbl_{nullptr}, pool_{nullptr};
};
TORCH_MODULE(InceptionC);

nn::MaxPool2d ceil_pool() { return nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2).ceil_mode(true)); }

nn::Sequential conv6_trunk(int w) {
  nn::Sequential seq;
  const int widths[] = {w, 2 * w, 4 * w, 4 * w, 8 * w, 8 * w};
  const bool pool_after[] = {true, true, false, true, false, true};
  int in = 1;
  for (int i = 0; i < 6; ++i) {
    seq->push_back(ConvUnit(in, widths[i], 3, 3, 1, 1, 1, 1));
    if (pool_after[i]) {
      seq->push_back(ceil_pool());
    }
    in = widths[i];
  }
  return seq;
}

nn::Sequential inception_trunk() {
  nn::Sequential seq;
  seq->push_back(ConvUnit(1, 32, 3, 3, 2, 2));
  seq->push_back(ConvUnit(32, 32, 3, 3));
  seq->push_back(ConvUnit(32, 64, 3, 3, 1, 1, 1, 1));
  seq->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2)));
  seq->push_back(ConvUnit(64, 80, 1, 1));
  seq->push_back(ConvUnit(80, 192, 3, 3));
  seq->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2)));
  seq->push_back(InceptionA(192, 32));
  seq->push_back(InceptionA(256, 64));
  seq->push_back(InceptionA(288, 64));
  seq->push_back(InceptionB(288));
  seq->push_back(InceptionC(768, 128));
  seq->push_back(InceptionC(768, 160));
  seq->push_back(InceptionC(768, 160));
  seq->push_back(InceptionC(768, 192));
  return seq;
}

torch::Tensor prepare(const GrayImage& image, int min_width) {
  const auto& src = image.width() < min_width ? zero_pad(image, min_width) : image;
  return src.to_tensor().unsqueeze(0);
}

torch::Tensor resized(const GrayImage& image, int width) {
  auto t = image.to_tensor().unsqueeze(0);
  return torch::upsample_bilinear2d(t, std::vector<int64_t>{kLineHeight, width}, false);
}

}  // namespace

ExtractorKind extractor_from_string(const std::string& name) {
  if (name == "conv6") {
    return ExtractorKind::Conv6;
  }
  if (name == "inception_v3") {
    return ExtractorKind::InceptionV3;
  }
  fail(ErrorKind::ConfigError, "unknown extractor '" + name + "' (conv6, inception_v3)");
}

std::string to_string(ExtractorKind kind) {
  return kind == ExtractorKind::Conv6 ? "conv6" : "inception_v3";
}

FeatureExtractorImpl::FeatureExtractorImpl(ExtractorKind kind, int width, int num_writers)
    : kind_(kind), width_(width), num_writers_(num_writers) {
  int channels = 0;
  if (kind == ExtractorKind::Conv6) {
    trunk_ = conv6_trunk(width);
    channels = 8 * width;
  } else {
    trunk_ = inception_trunk();
    channels = 768;
  }
  register_module("trunk", trunk_);
  head_ = register_module("head", nn::Linear(channels, num_writers));
}

torch::Tensor FeatureExtractorImpl::feature_map(const torch::Tensor& images) {
  return trunk_->forward(images);
}

torch::Tensor FeatureExtractorImpl::forward(const torch::Tensor& images) {
  return head_(feature_map(images).mean({2, 3}));
}

void train_extractor(FeatureExtractor& extractor, const Dataset& train,
                     const ExtractorTrainOptions& options) {
  require(train.num_writers() >= 2, ErrorKind::InsufficientData,
          "extractor training needs at least two writers");
  torch::manual_seed(options.seed);
  std::mt19937_64 rng(options.seed);
  torch::optim::Adam opt(extractor->parameters(), torch::optim::AdamOptions(options.lr));
  extractor->train();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const int min_width = extractor->min_input_width();
  for (int it = 0; it < options.iterations; ++it) {
    std::vector<GrayImage> images;
    std::vector<int64_t> targets;
    int width = min_width;
    for (int b = 0; b < options.batch_size; ++b) {
      if (cursor >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto& s = train.samples()[order[cursor++]];
      images.push_back(s.image);
      targets.push_back(s.writer_index);
      width = std::max(width, s.image.width());
    }
    const auto logits = extractor->forward(stack_padded(images, width));
    const auto loss = torch::nn::functional::cross_entropy(logits, torch::tensor(targets));
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  extractor->eval();
}

double writer_accuracy(FeatureExtractor& extractor, const Dataset& data) {
  require(!data.empty(), ErrorKind::InsufficientData, "accuracy over an empty set");
  torch::NoGradGuard no_grad;
  extractor->eval();
  std::size_t correct = 0;
  for (const auto& s : data.samples()) {
    const auto logits = extractor->forward(prepare(s.image, extractor->min_input_width()));
    correct += logits.argmax(1).item<int64_t>() == s.writer_index ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void save_extractor(const std::filesystem::path& path, FeatureExtractor& extractor) {
  save_archive(path,
               {{"format_version", std::to_string(kCheckpointVersion)},
                {"kind", "extractor"},
                {"extractor", to_string(extractor->kind())},
                {"width", std::to_string(extractor->width())},
                {"num_writers", std::to_string(extractor->num_writers())}},
               {{"extractor", extractor.ptr().get()}});
}

FeatureExtractor load_extractor(const std::filesystem::path& path) {
  const auto meta = read_archive_meta(path);
  if (meta.count("kind") == 0 || meta.at("kind") != "extractor" ||
      meta.count("format_version") == 0 ||
      meta.at("format_version") != std::to_string(kCheckpointVersion)) {
    fail(ErrorKind::LoadError, path.string() + ": not a feature extractor checkpoint");
  }
  FeatureExtractor extractor(extractor_from_string(meta.at("extractor")), std::stoi(meta.at("width")),
                             std::stoi(meta.at("num_writers")));
  load_archive_modules(path, {{"extractor", extractor.ptr().get()}});
  extractor->eval();
  return extractor;
}

torch::Tensor extract_features(FeatureExtractor& extractor, const std::vector<GrayImage>& images,
                               Pooling pooling, const std::vector<int>& levels) {
  require(!images.empty(), ErrorKind::InsufficientData, "no images to extract");
  torch::NoGradGuard no_grad;
  extractor->eval();
  std::vector<torch::Tensor> rows;
  rows.reserve(images.size());
  for (const auto& image : images) {
    if (pooling == Pooling::Pyramid) {
      rows.push_back(pyramid_pool(
          extractor->feature_map(prepare(image, extractor->min_input_width())), levels));
    } else {
      rows.push_back(extractor->feature_map(resized(image, kFidWidth)).mean({2, 3}));
    }
  }
  return torch::cat(rows, 0);
}

double frechet_from_features(const torch::Tensor& a, const torch::Tensor& b,
                             const std::function<void(const std::string&)>& warn) {
  return frechet_distance(to_eigen(a), to_eigen(b), warn);
}

double vfid(FeatureExtractor& extractor, const std::vector<GrayImage>& set_a,
            const std::vector<GrayImage>& set_b,
            const std::function<void(const std::string&)>& warn) {
  return frechet_from_features(extract_features(extractor, set_a, Pooling::Pyramid),
                               extract_features(extractor, set_b, Pooling::Pyramid), warn);
}

double fid(FeatureExtractor& extractor, const std::vector<GrayImage>& set_a,
           const std::vector<GrayImage>& set_b,
           const std::function<void(const std::string&)>& warn) {
  return frechet_from_features(extract_features(extractor, set_a, Pooling::Average),
                               extract_features(extractor, set_b, Pooling::Average), warn);
}

MetricHistogram make_histogram(const std::vector<double>& same, const std::vector<double>& cross,
                               int bins) {
  require(!same.empty() && !cross.empty() && bins >= 1, ErrorKind::InsufficientData,
          "histograms need values in both groups");
  double lo = std::min(*std::min_element(same.begin(), same.end()),
                       *std::min_element(cross.begin(), cross.end()));
  double hi = std::max(*std::max_element(same.begin(), same.end()),
                       *std::max_element(cross.begin(), cross.end()));
  if (hi <= lo) {
    hi = lo + 1.0;
  }
  MetricHistogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) {
    h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  }
  auto fill = [&](const std::vector<double>& values) {
    std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
      auto bin = static_cast<int>((v - lo) / (hi - lo) * bins);
      bin = std::clamp(bin, 0, bins - 1);
      mass[static_cast<std::size_t>(bin)] += 1.0;
    }
    for (auto& m : mass) {
      m /= static_cast<double>(values.size());
    }
    return mass;
  };
  h.same = fill(same);
  h.cross = fill(cross);
  for (int i = 0; i < bins; ++i) {
    h.overlap += std::min(h.same[static_cast<std::size_t>(i)], h.cross[static_cast<std::size_t>(i)]);
  }
  return h;
}

HistogramStudy fid_vfid_histograms(FeatureExtractor& extractor, const Dataset& dataset,
                                   const HistogramOptions& options) {
  const auto m = static_cast<std::size_t>(options.subset_size);
  require(options.subset_size >= 2 && options.pairs >= 1, ErrorKind::InsufficientData,
          "subset_size must be >= 2 and pairs >= 1");
  std::vector<int> eligible;
  for (int w = 0; w < dataset.num_writers(); ++w) {
    if (dataset.writer_samples(w).size() >= 2 * m) {
      eligible.push_back(w);
    }
  }
  require(eligible.size() >= 2, ErrorKind::InsufficientData,
          "need two writers with at least " + std::to_string(2 * m) + " samples each");

  std::vector<GrayImage> images;
  images.reserve(dataset.size());
  for (const auto& s : dataset.samples()) {
    images.push_back(s.image);
  }
  const auto pyramid = extract_features(extractor, images, Pooling::Pyramid);
  const auto average = extract_features(extractor, images, Pooling::Average);
  auto rows = [](const torch::Tensor& features, const std::vector<std::size_t>& picks) {
    std::vector<int64_t> idx(picks.begin(), picks.end());
    return features.index_select(0, torch::tensor(idx, torch::kLong));
  };
  const auto quiet = [](const std::string&) {};

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  HistogramStudy study;
  auto draw = [&](int writer, std::size_t count) {
    auto pool = dataset.writer_samples(writer);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(count);
    return pool;
  };
  for (int p = 0; p < options.pairs; ++p) {
    const int w = eligible[pick(rng)];
    auto both = draw(w, 2 * m);
    const std::vector<std::size_t> a(both.begin(), both.begin() + static_cast<std::ptrdiff_t>(m));
    const std::vector<std::size_t> b(both.begin() + static_cast<std::ptrdiff_t>(m), both.end());
    study.vfid_same.push_back(frechet_from_features(rows(pyramid, a), rows(pyramid, b), quiet));
    study.fid_same.push_back(frechet_from_features(rows(average, a), rows(average, b), quiet));

    const int w1 = eligible[pick(rng)];
    int w2 = w1;
    while (w2 == w1) {
      w2 = eligible[pick(rng)];
    }
    const auto c = draw(w1, m);
    const auto d = draw(w2, m);
    study.vfid_cross.push_back(frechet_from_features(rows(pyramid, c), rows(pyramid, d), quiet));
    study.fid_cross.push_back(frechet_from_features(rows(average, c), rows(average, d), quiet));
  }
  study.fid = make_histogram(study.fid_same, study.fid_cross, options.bins);
  study.vfid = make_histogram(study.vfid_same, study.vfid_cross, options.bins);
  return study;
}

void write_histograms_tsv(const std::filesystem::path& path, const HistogramStudy& study) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    fail(ErrorKind::IoError, "cannot write " + path.string());
  }
  out << std::setprecision(10) << "metric\tgroup\tbin_lo\tbin_hi\tmass\n";
  auto emit = [&](const std::string& metric, const MetricHistogram& h) {
    for (std::size_t i = 0; i + 1 < h.edges.size(); ++i) {
      out << metric << "\tsame\t" << h.edges[i] << '\t' << h.edges[i + 1] << '\t' << h.same[i] << '\n';
    }
    for (std::size_t i = 0; i + 1 < h.edges.size(); ++i) {
      out << metric << "\tcross\t" << h.edges[i] << '\t' << h.edges[i + 1] << '\t' << h.cross[i]
          << '\n';
    }
  };
  emit("fid", study.fid);
  emit("vfid", study.vfid);
  out << "# overlap\tfid\t" << study.fid.overlap << '\n';
  out << "# overlap\tvfid\t" << study.vfid.overlap << '\n';
}

}  // namespace inkline
