// Acceptance driver: one PASS/FAIL/SKIPPED line per criterion. Pass criterion
// names (AC1 ... AC12) as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "inkline/checkpoint.hpp"
#include "inkline/curriculum.hpp"
#include "inkline/error.hpp"
#include "inkline/generator.hpp"
#include "inkline/htr.hpp"
#include "inkline/metrics.hpp"
#include "inkline/recognizer.hpp"
#include "inkline/style_encoder.hpp"
#include "inkline/toy_data.hpp"
#include "inkline/trainer.hpp"
#include "inkline/vfid.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace inkline;

namespace {

struct Outcome {
  enum class Status { Pass, Fail, Skipped } status = Status::Fail;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) {
  return {ok ? Outcome::Status::Pass : Outcome::Status::Fail, std::move(detail)};
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("inkline_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const auto quiet = [](const std::string&) {};

GrayImage random_image(int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0F, 1.0F);
  GrayImage image(height, width);
  for (auto& p : image.pixels()) {
    p = u(rng);
  }
  return image;
}

Dataset toy(int writers, int per_writer, std::uint64_t seed, int max_chars = 12, int max_width = 320) {
  ToyDatasetOptions o;
  o.num_writers = writers;
  o.samples_per_writer = per_writer;
  o.seed = seed;
  o.max_chars = max_chars;
  o.max_width = max_width;
  return make_toy_samples(o, Alphabet::iam());
}

torch::Tensor symbols_tensor(const Alphabet& alphabet, const std::string& text, int length) {
  const auto padded = pad_text(alphabet, text, length);
  return torch::tensor(std::vector<int64_t>(padded.symbols.begin(), padded.symbols.end())).unsqueeze(0);
}

Outcome ac1_periodic_pad() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> width(1, 400), extra(0, 800);
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = width(rng);
    const int target = w + extra(rng);
    const auto image = random_image(64, w, rng);
    const auto padded = periodic_pad(image, target);
    if (padded.width() != target || padded.height() != 64) {
      return verdict(false, "wrong shape at trial " + std::to_string(trial));
    }
    for (int r = 0; r < 64; ++r) {
      for (int c = 0; c < target; ++c) {
        if (padded.at(r, c) != image.at(r, c % w)) {
          return verdict(false, "pixel mismatch at trial " + std::to_string(trial));
        }
      }
    }
  }
  const double t = seconds_since(t0);
  return verdict(t < 10.0, "1000 pairs in " + fmt(t) + " s");
}

Outcome ac2_adain() {
  torch::manual_seed(102);
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> side(8, 32), channels(1, 16);
  std::uniform_real_distribution<double> scale(0.5, 10.0), shift(-5.0, 5.0);
  double worst_mean = 0.0, worst_std = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int c = channels(rng), h = side(rng), w = side(rng);
    const auto z = torch::randn({2, c, h, w}) * scale(rng) + shift(rng);
    const auto alpha = torch::randn({2, c}) * 3.0;
    const auto beta = torch::randn({2, c}) * 3.0;
    const auto out = adain(z, alpha, beta);
    const auto mean = out.mean({2, 3});
    const auto std = out.var({2, 3}, false).sqrt();
    worst_mean = std::max(worst_mean, (mean - beta).abs().max().item<double>());
    worst_std = std::max(worst_std, (std - alpha.abs()).abs().max().item<double>());
  }
  return verdict(worst_mean <= 1e-3 && worst_std <= 1e-2,
                 "max |mean-beta| " + fmt(worst_mean) + ", max |std-|alpha|| " + fmt(worst_std));
}

Outcome ac3_edit_distance() {
  const auto strings = oracle::all_strings("abc", 6);
  auto words = [](const std::string& s) {
    std::string out;
    for (char ch : s) {
      if (!out.empty()) {
        out += ' ';
      }
      out += ch == 'a' ? "alpha" : ch == 'b' ? "beta" : "gamma";
    }
    return out;
  };
  std::int64_t pairs = 0;
  for (const auto& ref : strings) {
    if (ref.empty()) {
      continue;
    }
    const auto ref_words = words(ref);
    for (const auto& hyp : strings) {
      const int expected = oracle::edit_distance(oracle::chars(ref), oracle::chars(hyp));
      const auto c = cer(ref, hyp);
      const auto w = wer(ref_words, words(hyp));
      const double rate = static_cast<double>(expected) / static_cast<double>(ref.size());
      if (c.distance() != expected || w.distance() != expected || c.rate() != rate || w.rate() != rate) {
        return verdict(false, "mismatch for '" + ref + "' / '" + hyp + "'");
      }
      ++pairs;
    }
  }
  bool empty_ref_rejected = false;
  try {
    cer("", "ab");
  } catch (const Error& e) {
    empty_ref_rejected = e.kind() == ErrorKind::UndefinedRate;
  }
  return verdict(empty_ref_rejected, std::to_string(pairs) + " pairs agree for CER and WER");
}

Outcome ac4_causality() {
  auto config = RunConfig::preset_named("desk");
  torch::manual_seed(104);
  Recognizer r(config.model, 79);
  r->eval();
  torch::NoGradGuard no_grad;
  std::mt19937_64 rng(104);
  std::uniform_int_distribution<int> width(16, 320), length(1, 24);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int w = width(rng), t = length(rng);
    const auto images = random_image(64, w, rng).to_tensor().unsqueeze(0);
    const auto targets = torch::randint(0, 80, {1, t}, torch::kLong);
    const auto base = r->forward(images, targets);
    for (int j = 0; j < t; ++j) {
      auto changed = targets.clone();
      changed.narrow(1, j, t - j).copy_(torch::randint(0, 80, {1, t - j}, torch::kLong));
      const auto out = r->forward(images, changed);
      if (j > 0) {
        worst = std::max(worst, (out.narrow(1, 0, j) - base.narrow(1, 0, j)).abs().max().item<double>());
      }
    }
  }
  return verdict(worst <= 1e-6, "max logit change before the edit " + fmt(worst));
}

Outcome ac5_vfid() {
  std::ostringstream detail;
  bool ok = true;

  torch::manual_seed(105);
  FeatureExtractor conv(ExtractorKind::Conv6, 8, 2);
  const auto data = toy(2, 20, 105);
  std::vector<GrayImage> set;
  for (const auto& s : data.samples()) {
    set.push_back(s.image);
  }
  const double self = vfid(conv, set, set, quiet);
  ok = ok && std::abs(self) <= 1e-6;
  detail << "self " << self;

  std::mt19937_64 rng(105);
  std::normal_distribution<double> n;
  const int dim = 8, count = 100000;
  Eigen::VectorXd mu(dim);
  for (int i = 0; i < dim; ++i) {
    mu(i) = n(rng);
  }
  Eigen::MatrixXd a(count, dim), b(count, dim);
  for (int r = 0; r < count; ++r) {
    for (int c = 0; c < dim; ++c) {
      a(r, c) = n(rng);
      b(r, c) = n(rng) + mu(c);
    }
  }
  const double shifted = frechet_distance(a, b, quiet);
  const double expected = mu.squaredNorm();
  const double relative = std::abs(shifted - expected) / expected;
  ok = ok && relative <= 0.05;
  detail << "; shifted " << shifted << " vs ||mu||^2 " << expected;

  FeatureExtractor inception(ExtractorKind::InceptionV3, 0, 2);
  std::set<int64_t> dims_conv, dims_inception;
  for (int w : {64, 97, 128, 333, 512, 1000, 1024, 2048}) {
    const std::vector<GrayImage> one{random_image(64, w, rng)};
    dims_conv.insert(extract_features(conv, one, Pooling::Pyramid).size(1));
    dims_inception.insert(extract_features(inception, one, Pooling::Pyramid).size(1));
  }
  ok = ok && dims_conv.size() == 1 && dims_inception.size() == 1;
  detail << "; pooled dims conv6 " << *dims_conv.begin() << " inception " << *dims_inception.begin()
         << " over widths 64-2048";
  return verdict(ok, detail.str());
}

Outcome ac6_histograms() {
  int wins = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto data = toy(6, 40, seed);
    const auto [train, test] = split_per_writer(data, 0.5, seed);
    torch::manual_seed(seed);
    FeatureExtractor ex(ExtractorKind::Conv6, 8, 6);
    ExtractorTrainOptions t;
    t.iterations = 300;
    t.seed = seed;
    train_extractor(ex, train, t);
    HistogramOptions h;
    h.pairs = 30;
    h.subset_size = 8;
    h.bins = 10;
    h.seed = seed;
    const auto study = fid_vfid_histograms(ex, test, h);
    wins += study.vfid.overlap < study.fid.overlap ? 1 : 0;
    detail << (seed > 1 ? "; " : "") << "seed " << seed << " overlap vFID " << study.vfid.overlap << " FID "
           << study.fid.overlap;
  }
  return verdict(wins >= 2, std::to_string(wins) + "/3 seeds; " + detail.str());
}

Outcome ac7_phase_freezing() {
  auto config = RunConfig::preset_named("tiny");
  config.training.curriculum = {};
  config.training.check_phases = true;
  config.training.seed = 107;
  auto models = ModelBundle::create(config, Alphabet::iam());
  const auto data = toy(2, 12, 107, 12, 192);
  BatchSampler sampler(data, 4, 192, 12, config.model.style_images, 107);
  Trainer trainer(models, config.training);
  int good = 0;
  for (int i = 0; i < 50; ++i) {
    const auto r = trainer.train_step(sampler.next());
    good += r.phases_checked && r.synthesizer_frozen_in_phase1 && r.auxiliaries_frozen_in_phase2 ? 1 : 0;
  }
  return verdict(good == 50, std::to_string(good) + "/50 steps with H frozen in phase 1 and D,W,R in phase 2");
}

Outcome ac8_toy_training() {
  const auto t0 = std::chrono::steady_clock::now();
  auto config = RunConfig::preset_named("desk");
  config.training.curriculum = {};
  config.training.max_width = 320;
  config.training.max_chars = 12;
  config.model.max_text_length = 12;
  config.training.lr_auxiliary = 1e-4;
  config.training.max_iterations = 2000;
  config.training.batch_size = 4;
  config.training.seed = 3;
  const auto data = toy(2, 100, 3, 12, 320);
  auto models = ModelBundle::create(config, data.alphabet());
  CurriculumOptions options;
  options.out_dir = scratch("ac8");
  options.warn = quiet;
  const auto result = run_curriculum(models, data, options);
  const auto& log = result.log;
  const std::size_t n = log.size(), d = n / 10;
  if (n != 2000) {
    return verdict(false, "ran " + std::to_string(n) + " iterations");
  }
  auto window = [&](std::size_t from, std::size_t to, double LossReport::*field) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) {
      s += log[i].*field;
    }
    return s / static_cast<double>(to - from);
  };
  const double w0 = window(0, d, &LossReport::w_loss), w1 = window(n - d, n, &LossReport::w_loss);
  const double r0 = window(0, d, &LossReport::r_loss), r1 = window(n - d, n, &LossReport::r_loss);

  models.synthesizer->eval();
  models.recognizer->eval();
  torch::NoGradGuard no_grad;
  std::mt19937_64 rng(8);
  EditDistanceReport total;
  for (std::size_t i = 0; i < data.size(); i += 5) {
    const auto& s = data.samples()[i];
    const auto style = data.sample_style_set(s.writer_index, config.model.style_images, rng);
    const auto styles = style_tensor(style, config.model.style_images, 320).unsqueeze(0);
    const auto image = to_data_range(models.synthesizer->forward(styles, symbols_tensor(data.alphabet(), s.transcription, 12)));
    total += cer(s.transcription, models.recognizer->decode_greedy(image, 12, data.alphabet())[0].text);
  }
  const double hours = seconds_since(t0) / 3600.0;
  const bool ok = w1 <= 0.7 * w0 && r1 <= 0.7 * r0 && total.rate() < 0.5 && hours < 4.0;
  return verdict(ok, "L_w " + fmt(w0) + " -> " + fmt(w1) + ", L_r " + fmt(r0) + " -> " + fmt(r1) +
                         ", generated CER " + fmt(total.rate()) + ", " + fmt(hours) + " h");
}

Outcome ac9_curriculum() {
  bool ok = true;
  std::ostringstream detail;
  const std::vector<std::pair<int, int>> boundaries{{1, 1}, {24, 1}, {25, 2}, {48, 2}, {49, 3}, {88, 3}};
  for (const auto& [chars, category] : boundaries) {
    ok = ok && assign_category(chars).id == category;
  }
  detail << "boundaries " << (ok ? "ok" : "wrong");

  auto config = RunConfig::preset_named("tiny");
  config.training.curriculum = {1, 2, 3};
  config.training.stage_iterations = {3, 2, 2};
  config.training.batch_size = 2;
  config.model.max_text_length = 88;
  config.training.seed = 109;
  const auto data = toy(2, 30, 109, 88, 2160);
  const auto partition = partition_by_category(data);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i : partition[static_cast<std::size_t>(c)]) {
      ok = ok && assign_category(data.samples()[i].char_count).id == c + 1;
    }
  }
  auto models = ModelBundle::create(config, data.alphabet());
  CurriculumOptions options;
  options.out_dir = scratch("ac9");
  options.warn = quiet;
  const auto result = run_curriculum(models, data, options);
  ok = ok && result.stages.size() == 3;

  std::map<std::string, int> chars_of;
  for (const auto& s : data.samples()) {
    chars_of[s.sample_id] = s.char_count;
  }
  std::set<std::string> seen;
  std::size_t total_ids = 0;
  std::int64_t cumulative = 0;
  std::uint64_t previous_hash = 0;
  for (const auto& stage : result.stages) {
    ok = ok && !stage.skipped;
    for (const auto& id : stage.sample_ids) {
      seen.insert(id);
      ok = ok && chars_of.contains(id) && assign_category(chars_of[id]).id == stage.category;
    }
    total_ids += stage.sample_ids.size();
    cumulative += stage.iterations;
    std::int64_t saved = -1;
    auto loaded = load_checkpoint(stage.checkpoint, &saved);
    const auto hash = parameter_hash(*loaded.synthesizer);
    ok = ok && saved == cumulative && hash != previous_hash;
    previous_hash = hash;
    detail << "; stage " << stage.category << " L=" << stage.width << " T=" << stage.text_length << " n="
           << stage.sample_ids.size() << " ckpt@" << saved;
  }
  ok = ok && seen.size() == total_ids;
  detail << "; stage data " << (seen.size() == total_ids ? "disjoint" : "overlap");
  return verdict(ok, detail.str());
}

Outcome ac10_interpolation() {
  auto config = RunConfig::preset_named("tiny");
  config.training.seed = 110;
  torch::manual_seed(110);
  Synthesizer synth(config.model, 79);
  synth->eval();
  torch::NoGradGuard no_grad;
  const auto data = toy(2, 6, 110, 12, 192);
  std::mt19937_64 rng(110);
  const int k = config.model.style_images;
  const auto a = style_tensor(data.sample_style_set(0, k, rng), k, 192).unsqueeze(0);
  const auto b = style_tensor(data.sample_style_set(1, k, rng), k, 192).unsqueeze(0);
  const auto symbols = symbols_tensor(data.alphabet(), "ink line", config.model.max_text_length);
  const auto frames = interpolate_styles(synth, symbols, a, b, 11);
  const bool ok = frames.size() == 11 && torch::equal(frames.front(), synth->forward(a, symbols)) &&
                  torch::equal(frames.back(), synth->forward(b, symbols));
  return verdict(ok, "11 frames, endpoints " + std::string(ok ? "bit-identical" : "differ"));
}

Outcome ac12_htr() {
  auto config = RunConfig::preset_named("tiny");
  config.training.curriculum = {};
  config.training.seed = 112;
  config.training.max_width = 192;
  config.training.max_chars = 12;
  config.training.max_iterations = 30;
  config.training.batch_size = 4;
  config.model.max_text_length = 12;
  config.htr.iterations = 400;
  config.htr.batch_size = 4;
  config.htr.synthetic_count = 24;
  config.htr.fewshot_sizes = {2, 4};
  config.htr.fewshot_repeats = 2;
  config.htr.finetune_iterations = 60;
  const auto data = make_toy_htr_data(112, 2, 2, 16, 12, 192);
  auto models = ModelBundle::create(config, data.train.alphabet());
  CurriculumOptions options;
  options.out_dir = scratch("ac12");
  options.warn = quiet;
  run_curriculum(models, data.train, options);

  std::vector<HtrTableRow> rows;
  for (const std::string mode : {"supervised", "transfer", "fewshot"}) {
    const auto part = run_htr_experiment(mode, models, data, config);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto table = format_htr_table(rows);
  std::cout << table;
  std::set<std::string> modes;
  for (const auto& r : rows) {
    modes.insert(r.mode);
  }
  if (modes.size() != 3) {
    return verdict(false, "table covers " + std::to_string(modes.size()) + " modes");
  }

  const fs::path fixture = fs::path(INKLINE_FIXTURES) / "htr_table_toy.tsv";
  if (!fs::exists(fixture)) {
    std::ofstream(fixture) << table;
    return verdict(true, std::to_string(rows.size()) + " rows; archived as the regression fixture");
  }
  std::ifstream in(fixture);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto archived = parse_htr_table(ss.str());
  bool same = archived.size() == rows.size();
  for (std::size_t i = 0; same && i < rows.size(); ++i) {
    same = archived[i].mode == rows[i].mode && archived[i].condition == rows[i].condition &&
           archived[i].train_real == rows[i].train_real &&
           archived[i].train_synthetic == rows[i].train_synthetic &&
           std::abs(archived[i].cer - rows[i].cer) <= 1e-6 && std::abs(archived[i].wer - rows[i].wer) <= 1e-6;
  }
  return verdict(same, std::to_string(rows.size()) + " rows; " +
                           (same ? "matches the archived table" : "differs from the archived table"));
}

Outcome ac11_full_scale() {
  return {Outcome::Status::Skipped, "full-scale IAM training not run"};
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1_periodic_pad},  {"AC2", ac2_adain},          {"AC3", ac3_edit_distance},
      {"AC4", ac4_causality},     {"AC5", ac5_vfid},           {"AC6", ac6_histograms},
      {"AC7", ac7_phase_freezing}, {"AC8", ac8_toy_training},  {"AC9", ac9_curriculum},
      {"AC10", ac10_interpolation}, {"AC11", ac11_full_scale}, {"AC12", ac12_htr}};
  const std::set<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!selected.empty() && !selected.contains(name)) {
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome = {Outcome::Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* status = outcome.status == Outcome::Status::Pass   ? "PASS"
                         : outcome.status == Outcome::Status::Fail ? "FAIL"
                                                                   : "SKIPPED";
    failures += outcome.status == Outcome::Status::Fail ? 1 : 0;
    std::cout << name << ' ' << status << ' ' << outcome.detail << " [" << std::fixed << std::setprecision(1)
              << seconds_since(t0) << " s]" << std::defaultfloat << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
