#include "inkline/htr.hpp"

#include <torch/optim.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "inkline/curriculum.hpp"
#include "inkline/error.hpp"
#include "inkline/style_encoder.hpp"
#include "inkline/toy_data.hpp"

namespace inkline {

namespace {

torch::Tensor padded_symbols(const std::vector<PaddedText>& texts) {
  const auto batch = static_cast<int64_t>(texts.size());
  const auto length = static_cast<int64_t>(texts.front().symbols.size());
  auto out = torch::empty({batch, length}, torch::kLong);
  auto acc = out.accessor<int64_t, 2>();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t t = 0; t < length; ++t) {
      acc[b][t] = texts[static_cast<std::size_t>(b)].symbols[static_cast<std::size_t>(t)];
    }
  }
  return out;
}

Dataset merge(const Dataset& a, const Dataset& b) {
  auto samples = a.samples();
  samples.insert(samples.end(), b.samples().begin(), b.samples().end());
  return Dataset(a.alphabet(), std::move(samples));
}

void note(const std::function<void(const std::string&)>& log, const std::string& msg) {
  if (log) {
    log(msg);
  }
}

}  // namespace

GrayImage augment_image(const GrayImage& image, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(0.8, 1.2);
  std::uniform_int_distribution<int> stroke(0, 2);
  auto t = image.to_tensor().unsqueeze(0);  // (1, 1, H, W)
  const auto width = std::max<int64_t>(1, std::lround(static_cast<double>(image.width()) * scale(rng)));
  t = torch::upsample_bilinear2d(t, std::vector<int64_t>{image.height(), width}, false);
  switch (stroke(rng)) {
    case 1:  // thicker strokes
      t = torch::max_pool2d(t, {3, 3}, {1, 1}, {1, 1});
      break;
    case 2:  // thinner strokes
      t = -torch::max_pool2d(-t, {3, 3}, {1, 1}, {1, 1});
      break;
    default:
      break;
  }
  return GrayImage::from_tensor(t[0][0].clamp(0.0, 1.0));
}

void train_recognizer(Recognizer& recognizer, const Dataset& data, const HtrTrainOptions& options) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.samples()[i].char_count <= options.text_length) {
      usable.push_back(i);
    }
  }
  require(!usable.empty(), ErrorKind::InsufficientData, "no trainable lines for the recognizer");
  torch::manual_seed(options.seed);
  std::mt19937_64 rng(options.seed);
  torch::optim::Adam opt(recognizer->parameters(), torch::optim::AdamOptions(options.lr));
  recognizer->train();
  std::size_t cursor = usable.size();
  for (int it = 0; it < options.iterations; ++it) {
    std::vector<GrayImage> images;
    std::vector<PaddedText> texts;
    std::vector<int64_t> lengths;
    int width = 16;
    for (int b = 0; b < options.batch_size; ++b) {
      if (cursor >= usable.size()) {
        std::shuffle(usable.begin(), usable.end(), rng);
        cursor = 0;
      }
      const auto& s = data.samples()[usable[cursor++]];
      images.push_back(options.augment ? augment_image(s.image, rng) : s.image);
      texts.push_back(pad_text(data.alphabet(), s.transcription, options.text_length));
      lengths.push_back(texts.back().true_length);
      width = std::max(width, images.back().width());
    }
    const auto symbols = padded_symbols(texts);
    const auto logits = recognizer->forward(stack_padded(images, grid_width(width)), symbols);
    const auto loss = loss_content(logits, symbols, torch::tensor(lengths));
    if (!std::isfinite(loss.item<double>())) {
      fail(ErrorKind::NonFiniteLoss, "recognizer loss became non-finite at step " + std::to_string(it));
    }
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  recognizer->eval();
}

HtrEvaluation evaluate_recognizer(Recognizer& recognizer, const Dataset& data, int max_length) {
  require(!data.empty(), ErrorKind::InsufficientData, "nothing to evaluate");
  recognizer->eval();
  HtrEvaluation eval;
  for (const auto& s : data.samples()) {
    const auto image = s.image.to_tensor().unsqueeze(0);
    const auto decoded = recognizer->decode_greedy(image, max_length, data.alphabet());
    Prediction p;
    p.sample_id = s.sample_id;
    p.reference = s.transcription;
    p.hypothesis = decoded.front().text;
    p.characters = cer(p.reference, p.hypothesis);
    p.words = wer(p.reference, p.hypothesis);
    eval.characters += p.characters;
    eval.words += p.words;
    eval.predictions.push_back(std::move(p));
  }
  return eval;
}

void write_predictions_tsv(const std::filesystem::path& path, const HtrEvaluation& evaluation) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    fail(ErrorKind::IoError, "cannot write " + path.string());
  }
  out << "image_path\thypothesis\tCER\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& p : evaluation.predictions) {
    out << escape_field(p.sample_id) << '\t' << escape_field(p.hypothesis) << '\t'
        << p.characters.rate() << '\n';
  }
}

Dataset synthesize_dataset(ModelBundle& models, const Dataset& style_pool,
                           const std::vector<std::string>& lexicon, int count, int text_length,
                           std::uint64_t seed) {
  require(style_pool.num_writers() >= 1, ErrorKind::InsufficientData, "empty style pool");
  const auto& alphabet = models.alphabet;
  const int k = models.config.model.style_images;
  text_length = std::min(text_length, models.config.model.max_text_length);
  std::vector<std::string> texts;
  for (const auto& t : lexicon) {
    const auto length = static_cast<int>(utf8_to_utf32(t).size());
    if (length >= 1 && length <= text_length) {
      try {
        alphabet.encode(t);
        texts.push_back(t);
      } catch (const Error&) {
      }
    }
  }
  require(!texts.empty(), ErrorKind::InsufficientData, "lexicon has no usable text");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> writer(0, style_pool.num_writers() - 1);
  std::uniform_int_distribution<std::size_t> word(0, texts.size() - 1);
  auto& synth = models.synthesizer;
  synth->eval();
  torch::NoGradGuard no_grad;
  std::vector<TextLineSample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    const int w = writer(rng);
    const auto style = style_pool.sample_style_set(w, k, rng);
    int widest = 16 * text_length;
    for (const auto& image : style.images) {
      widest = std::max(widest, image.width());
    }
    const int width = grid_width(widest);
    const auto& text = texts[word(rng)];
    const auto padded = pad_text(alphabet, text, text_length);
    const auto symbols =
        torch::tensor(std::vector<int64_t>(padded.symbols.begin(), padded.symbols.end())).unsqueeze(0);
    const auto image = to_data_range(
        synth->forward(style_tensor(style, k, width).unsqueeze(0), symbols))[0][0];
    // Trim trailing background.
    const auto column_ink = std::get<0>(image.max(0));
    const auto inked = (column_ink > 0.3).nonzero();
    int last = inked.numel() > 0 ? static_cast<int>(inked.max().item<int64_t>()) + 1 : width;
    last = std::clamp(last + 8, 16, width);
    TextLineSample s;
    std::ostringstream id;
    id << "syn_" << std::setw(5) << std::setfill('0') << n;
    s.sample_id = id.str();
    s.image = GrayImage::from_tensor(image.narrow(1, 0, last));
    s.transcription = text;
    s.writer_id = style.writer_id;
    s.char_count = padded.true_length;
    samples.push_back(std::move(s));
  }
  return Dataset(alphabet, std::move(samples));
}

void copy_parameters(const torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard no_grad;
  const auto src = from.named_parameters();
  auto dst = to.named_parameters();
  require(src.size() == dst.size(), ErrorKind::ContractViolation, "parameter sets differ");
  for (const auto& item : src) {
    auto* target = dst.find(item.key());
    require(target != nullptr, ErrorKind::ContractViolation, "missing parameter " + item.key());
    target->copy_(item.value());
  }
}

HtrExperimentData make_toy_htr_data(std::uint64_t seed, int source_writers, int target_writers,
                                    int samples_per_writer, int max_chars, int max_width) {
  const auto alphabet = Alphabet::iam();
  ToyDatasetOptions source;
  source.num_writers = source_writers;
  source.samples_per_writer = samples_per_writer;
  source.seed = seed;
  source.max_chars = max_chars;
  source.max_width = max_width;
  ToyDatasetOptions target = source;
  target.num_writers = target_writers;
  target.seed = seed + 1000;

  HtrExperimentData data;
  auto [train, test] = split_per_writer(make_toy_samples(source, alphabet), 0.75, seed);
  data.train = std::move(train);
  data.test = std::move(test);

  auto target_samples = make_toy_samples(target, alphabet).samples();
  for (auto& s : target_samples) {
    s.writer_id = "t" + s.writer_id;
    s.sample_id = "t" + s.sample_id;
  }
  auto [pool, target_test] =
      split_per_writer(Dataset(alphabet, std::move(target_samples)), 0.5, seed + 1);
  data.target_pool = std::move(pool);
  data.target_test = std::move(target_test);

  // External text: single words and word pairs from the bundled list.
  const auto& words = toy_word_list();
  for (const auto& w : words) {
    data.lexicon.push_back(w);
  }
  std::mt19937_64 rng(seed + 2);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto phrase = words[pick(rng)] + " " + words[pick(rng)];
    if (static_cast<int>(phrase.size()) <= max_chars) {
      data.lexicon.push_back(std::move(phrase));
    }
  }
  return data;
}

std::vector<HtrTableRow> run_htr_experiment(const std::string& mode, ModelBundle& generator,
                                            const HtrExperimentData& data, const RunConfig& config,
                                            const std::function<void(const std::string&)>& log) {
  require(mode == "supervised" || mode == "transfer" || mode == "fewshot", ErrorKind::ConfigError,
          "unknown HTR experiment mode '" + mode + "'");
  require(static_cast<bool>(generator.synthesizer), ErrorKind::ConfigError,
          "HTR experiments need a trained generator checkpoint");
  const auto& hc = config.htr;
  const auto& alphabet = generator.alphabet;
  const int text_length = config.training.max_chars;
  const std::uint64_t seed = config.training.seed;

  HtrTrainOptions train_options;
  train_options.iterations = hc.iterations;
  train_options.batch_size = hc.batch_size;
  train_options.lr = hc.lr;
  train_options.text_length = text_length;
  train_options.augment = false;
  train_options.seed = seed;

  auto fresh = [&]() {
    torch::manual_seed(seed);
    Recognizer r(config.model, alphabet.size());
    if (hc.use_joint_recognizer) {
      copy_parameters(*generator.recognizer, *r);
    }
    return r;
  };
  auto score = [&](Recognizer& r, const Dataset& test, const std::string& condition, int real,
                   int synthetic) {
    const auto eval = evaluate_recognizer(r, test, text_length);
    HtrTableRow row{mode, condition, real, synthetic, eval.cer(), eval.wer()};
    note(log, mode + " " + condition + ": CER " + std::to_string(row.cer) + " WER " +
                  std::to_string(row.wer));
    return row;
  };
  const int real_count = static_cast<int>(data.train.size());

  std::vector<HtrTableRow> rows;
  if (mode == "supervised") {
    std::vector<std::string> lexicon;
    for (const auto& s : data.train.samples()) {
      lexicon.push_back(s.transcription);
    }
    const auto synthetic =
        synthesize_dataset(generator, data.train, lexicon, hc.synthetic_count, text_length, seed + 11);
    const int syn_count = static_cast<int>(synthetic.size());
    const auto mixed = merge(data.train, synthetic);

    auto r1 = fresh();
    train_recognizer(r1, data.train, train_options);
    rows.push_back(score(r1, data.test, "real", real_count, 0));
    auto r2 = fresh();
    train_recognizer(r2, mixed, train_options);
    rows.push_back(score(r2, data.test, "real+synthetic", real_count, syn_count));
    auto r3 = fresh();
    auto augmented = train_options;
    augmented.augment = true;
    train_recognizer(r3, mixed, augmented);
    rows.push_back(score(r3, data.test, "real+synthetic+augment", real_count, syn_count));
    return rows;
  }

  const auto synthetic = synthesize_dataset(generator, data.target_pool, data.lexicon,
                                            hc.synthetic_count, text_length, seed + 13);
  const int syn_count = static_cast<int>(synthetic.size());
  auto source = fresh();
  train_recognizer(source, data.train, train_options);

  if (mode == "transfer") {
    rows.push_back(score(source, data.target_test, "source-only", real_count, 0));
    auto adapted = fresh();
    train_recognizer(adapted, merge(data.train, synthetic), train_options);
    rows.push_back(
        score(adapted, data.target_test, "source+target-synthetic", real_count, syn_count));
    return rows;
  }

  // Few-shot fine-tuning on n labeled target lines.
  auto finetune = train_options;
  finetune.iterations = hc.finetune_iterations;
  for (int n : hc.fewshot_sizes) {
    const int available = static_cast<int>(data.target_pool.size());
    const int take = std::min(n, available);
    HtrTableRow plain{mode, "finetune-real", take, 0, 0.0, 0.0};
    HtrTableRow boosted{mode, "finetune-real+synthetic", take, syn_count, 0.0, 0.0};
    for (int rep = 0; rep < hc.fewshot_repeats; ++rep) {
      std::mt19937_64 rng(seed + 101 * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(rep));
      std::vector<std::size_t> order(data.target_pool.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(static_cast<std::size_t>(take));
      const auto labeled = data.target_pool.subset(order, false);
      finetune.seed = seed + static_cast<std::uint64_t>(rep);

      auto r_plain = fresh();
      copy_parameters(*source, *r_plain);
      train_recognizer(r_plain, labeled, finetune);
      const auto e1 = evaluate_recognizer(r_plain, data.target_test, text_length);
      auto r_boost = fresh();
      copy_parameters(*source, *r_boost);
      train_recognizer(r_boost, merge(labeled, synthetic), finetune);
      const auto e2 = evaluate_recognizer(r_boost, data.target_test, text_length);
      plain.cer += e1.cer() / hc.fewshot_repeats;
      plain.wer += e1.wer() / hc.fewshot_repeats;
      boosted.cer += e2.cer() / hc.fewshot_repeats;
      boosted.wer += e2.wer() / hc.fewshot_repeats;
    }
    note(log, "fewshot n=" + std::to_string(take) + ": CER " + std::to_string(plain.cer) + " vs " +
                  std::to_string(boosted.cer) + " with synthetic");
    rows.push_back(plain);
    rows.push_back(boosted);
  }
  return rows;
}

std::string format_htr_table(const std::vector<HtrTableRow>& rows) {
  std::ostringstream out;
  out << "mode\tcondition\ttrain_real\ttrain_synthetic\tCER\tWER\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.mode << '\t' << r.condition << '\t' << r.train_real << '\t' << r.train_synthetic
        << '\t' << r.cer << '\t' << r.wer << '\n';
  }
  return out.str();
}

std::vector<HtrTableRow> parse_htr_table(const std::string& text) {
  std::vector<HtrTableRow> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') {
      continue;
    }
    std::istringstream fields(line);
    HtrTableRow r;
    std::string real, synthetic, c, w;
    if (!std::getline(fields, r.mode, '\t') || !std::getline(fields, r.condition, '\t') ||
        !std::getline(fields, real, '\t') || !std::getline(fields, synthetic, '\t') ||
        !std::getline(fields, c, '\t') || !std::getline(fields, w, '\t')) {
      fail(ErrorKind::ManifestError, "malformed HTR table line: " + line);
    }
    r.train_real = std::stoi(real);
    r.train_synthetic = std::stoi(synthetic);
    r.cer = std::stod(c);
    r.wer = std::stod(w);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace inkline
