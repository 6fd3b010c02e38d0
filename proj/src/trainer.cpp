#include "inkline/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "inkline/curriculum.hpp"
#include "inkline/error.hpp"
#include "inkline/style_encoder.hpp"

namespace inkline {

namespace {

torch::Tensor long_tensor(const std::vector<int64_t>& values) {
  return torch::tensor(values, torch::kLong);
}

torch::Tensor symbols_tensor(const std::vector<PaddedText>& texts) {
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

void set_requires_grad(torch::nn::Module& module, bool value) {
  for (auto& p : module.parameters()) {
    p.set_requires_grad(value);
  }
}

std::unique_ptr<torch::optim::Adam> adam(torch::nn::Module& module, double lr,
                                         const TrainingConfig& config) {
  return std::make_unique<torch::optim::Adam>(
      module.parameters(),
      torch::optim::AdamOptions(lr).betas({config.adam_beta1, config.adam_beta2}));
}

bool finite(double v) { return std::isfinite(v); }

std::array<std::uint64_t, 3> auxiliary_hashes(ModelBundle& m) {
  return {parameter_hash(*m.discriminator), parameter_hash(*m.writer_classifier),
          parameter_hash(*m.recognizer)};
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    out += (out.empty() ? "" : ",") + id;
  }
  return out;
}

}  // namespace

BatchSampler::BatchSampler(const Dataset& dataset, int batch_size, int width, int text_length,
                           int style_images, std::uint64_t seed)
    : dataset_(dataset),
      batch_size_(batch_size),
      width_(width),
      text_length_(text_length),
      style_images_(style_images),
      rng_(seed) {
  require(!dataset.empty(), ErrorKind::InsufficientData, "batch sampler needs samples");
  require(width % 16 == 0, ErrorKind::ContractViolation, "training width must be a multiple of 16");
  for (const auto& s : dataset.samples()) {
    require(s.image.width() <= width && s.char_count <= text_length, ErrorKind::ContractViolation,
            "sample " + s.sample_id + " exceeds the stage limits");
  }
  order_.resize(dataset.size());
  for (std::size_t i = 0; i < order_.size(); ++i) {
    order_[i] = i;
  }
  cursor_ = order_.size();
}

std::int64_t BatchSampler::batches_per_epoch() const {
  return static_cast<std::int64_t>((dataset_.size() + static_cast<std::size_t>(batch_size_) - 1) /
                                   static_cast<std::size_t>(batch_size_));
}

TrainingBatch BatchSampler::next() {
  const auto& samples = dataset_.samples();
  const auto& alphabet = dataset_.alphabet();
  std::vector<GrayImage> real;
  std::vector<PaddedText> real_text, fake_text;
  std::vector<int64_t> real_writers, fake_writers, real_lengths, fake_lengths;
  std::vector<torch::Tensor> styles;
  TrainingBatch batch;
  std::uniform_int_distribution<std::size_t> any(0, samples.size() - 1);
  for (int b = 0; b < batch_size_; ++b) {
    if (cursor_ >= order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    const std::size_t i = order_[cursor_++];
    const auto& s = samples[i];
    real.push_back(s.image);
    real_text.push_back(pad_text(alphabet, s.transcription, text_length_));
    real_lengths.push_back(real_text.back().true_length);
    real_writers.push_back(s.writer_index);
    batch.sample_ids.push_back(s.sample_id);

    const auto style = dataset_.sample_style_set(s.writer_index, style_images_, rng_, i);
    styles.push_back(style_tensor(style, style_images_, width_));
    fake_writers.push_back(s.writer_index);
    const auto& donor = samples[any(rng_)];
    fake_text.push_back(pad_text(alphabet, donor.transcription, text_length_));
    fake_lengths.push_back(fake_text.back().true_length);
  }
  batch.real = stack_padded(real, width_);
  batch.real_symbols = symbols_tensor(real_text);
  batch.real_lengths = long_tensor(real_lengths);
  batch.real_writers = long_tensor(real_writers);
  batch.styles = torch::stack(styles);
  batch.fake_symbols = symbols_tensor(fake_text);
  batch.fake_lengths = long_tensor(fake_lengths);
  batch.fake_writers = long_tensor(fake_writers);
  return batch;
}

Trainer::Trainer(ModelBundle& models, const TrainingConfig& config)
    : models_(models), config_(config) {
  opt_h_ = adam(*models.synthesizer, config.lr_adversarial, config);
  opt_d_ = adam(*models.discriminator, config.lr_adversarial, config);
  opt_w_ = adam(*models.writer_classifier, config.lr_auxiliary, config);
  opt_r_ = adam(*models.recognizer, config.lr_auxiliary, config);
}

LossReport Trainer::train_step(const TrainingBatch& batch) {
  auto& m = models_;
  LossReport report;
  report.iteration = iteration_ + 1;
  report.phases_checked = config_.check_phases;
  const double smoothing = config_.label_smoothing;

  m.synthesizer->train();
  m.discriminator->train();
  m.writer_classifier->train();
  m.recognizer->train();

  const std::uint64_t h_before = config_.check_phases ? parameter_hash(*m.synthesizer) : 0;

  // Phase 1: D ascends L_d; W and R descend on real data.
  torch::Tensor fake;
  {
    torch::NoGradGuard no_grad;
    fake = to_data_range(m.synthesizer->forward(batch.styles, batch.fake_symbols));
  }
  const auto l_d = loss_discriminative(discriminate(m.discriminator, batch.real),
                                       discriminate(m.discriminator, fake));
  const auto l_w = loss_writer(m.writer_classifier->forward(batch.real), batch.real_writers);
  const auto l_r = loss_content(m.recognizer->forward(batch.real, batch.real_symbols),
                                batch.real_symbols, batch.real_lengths, smoothing);
  report.d_loss = l_d.item<double>();
  report.w_loss = l_w.item<double>();
  report.r_loss = l_r.item<double>();
  if (!finite(report.d_loss) || !finite(report.w_loss) || !finite(report.r_loss)) {
    fail(ErrorKind::NonFiniteLoss,
         "non-finite loss at iteration " + std::to_string(report.iteration) +
             " (L_d=" + std::to_string(report.d_loss) + " L_w=" + std::to_string(report.w_loss) +
             " L_r=" + std::to_string(report.r_loss) + "); batch " + join_ids(batch.sample_ids));
  }
  opt_d_->zero_grad();
  (-l_d).backward();
  opt_d_->step();
  opt_w_->zero_grad();
  opt_r_->zero_grad();
  (l_w + l_r).backward();
  opt_w_->step();
  opt_r_->step();

  std::array<std::uint64_t, 3> aux_before{};
  if (config_.check_phases) {
    report.synthesizer_frozen_in_phase1 = parameter_hash(*m.synthesizer) == h_before;
    aux_before = auxiliary_hashes(m);
  }

  // Phase 2: H descends adversarial + L_w + L_r through frozen D, W, R.
  set_requires_grad(*m.discriminator, false);
  set_requires_grad(*m.writer_classifier, false);
  set_requires_grad(*m.recognizer, false);
  m.recognizer->eval();
  const auto generated = to_data_range(m.synthesizer->forward(batch.styles, batch.fake_symbols));
  const auto g_adv = loss_generator_adversarial(discriminate(m.discriminator, generated));
  const auto g_w = loss_writer(m.writer_classifier->forward(generated), batch.fake_writers);
  const auto g_r = loss_content(m.recognizer->forward(generated, batch.fake_symbols),
                                batch.fake_symbols, batch.fake_lengths, smoothing);
  report.g_adversarial = g_adv.item<double>();
  report.g_writer = g_w.item<double>();
  report.g_content = g_r.item<double>();
  report.total = report.g_adversarial + report.g_writer + report.g_content;
  const bool ok = finite(report.total);
  if (ok) {
    opt_h_->zero_grad();
    (g_adv + g_w + g_r).backward();
    opt_h_->step();
  }
  set_requires_grad(*m.discriminator, true);
  set_requires_grad(*m.writer_classifier, true);
  set_requires_grad(*m.recognizer, true);
  m.recognizer->train();
  if (!ok) {
    fail(ErrorKind::NonFiniteLoss,
         "non-finite generator loss at iteration " + std::to_string(report.iteration) + "; batch " +
             join_ids(batch.sample_ids));
  }

  if (config_.check_phases) {
    report.auxiliaries_frozen_in_phase2 = auxiliary_hashes(m) == aux_before;
    if (!report.synthesizer_frozen_in_phase1 || !report.auxiliaries_frozen_in_phase2) {
      fail(ErrorKind::ContractViolation,
           "phase discipline broken at iteration " + std::to_string(report.iteration));
    }
  }
  ++iteration_;
  return report;
}

namespace {

void append_log(const std::filesystem::path& path, const LossReport& r, int stage,
                const std::string& vfid) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (fresh) {
    out << "iteration\tstage\tL_d\tL_w\tL_r\tL_adv\tL_w_gen\tL_r_gen\tL_total\tvfid_val\n";
  }
  out << std::setprecision(8) << r.iteration << '\t' << stage << '\t' << r.d_loss << '\t'
      << r.w_loss << '\t' << r.r_loss << '\t' << r.g_adversarial << '\t' << r.g_writer << '\t'
      << r.g_content << '\t' << r.total << '\t' << vfid << '\n';
}

}  // namespace

std::vector<StagePlan> stage_plan(const TrainingConfig& config) {
  std::vector<StagePlan> plan;
  if (config.curriculum.empty()) {
    plan.push_back({0, config.max_width, config.max_chars});
  } else {
    for (int id : config.curriculum) {
      const auto& cat = kCurriculumCategories.at(static_cast<std::size_t>(id - 1));
      plan.push_back({id, cat.max_width, cat.max_chars});
    }
  }
  return plan;
}

CurriculumResult run_curriculum(ModelBundle& models, const Dataset& train,
                                const CurriculumOptions& options) {
  const auto& tc = models.config.training;
  const auto& mc = models.config.model;
  auto warn = options.warn ? options.warn
                           : [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  require(train.num_writers() <= mc.num_writers, ErrorKind::ConfigError,
          "dataset has " + std::to_string(train.num_writers()) + " writers but the model was built for " +
              std::to_string(mc.num_writers));

  const auto plan = stage_plan(tc);
  for (const auto& p : plan) {
    require(p.text_length <= mc.max_text_length, ErrorKind::ConfigError,
            "stage text length " + std::to_string(p.text_length) + " exceeds max_text_length " +
                std::to_string(mc.max_text_length));
  }

  std::filesystem::create_directories(options.out_dir);
  const auto log_path = options.out_dir / "training_log.tsv";
  const auto partition = partition_by_category(train);
  Trainer trainer(models, tc);
  torch::manual_seed(tc.seed);
  CurriculumResult result;

  for (std::size_t s = 0; s < plan.size(); ++s) {
    const auto& p = plan[s];
    StageReport stage;
    stage.category = p.category;
    stage.max_width = p.max_width;
    stage.width = grid_width(p.max_width);
    stage.text_length = p.text_length;

    std::vector<std::size_t> candidates;
    if (p.category == 0) {
      for (std::size_t i = 0; i < train.size(); ++i) {
        candidates.push_back(i);
      }
    } else {
      candidates = partition[static_cast<std::size_t>(p.category - 1)];
    }
    std::vector<std::size_t> chosen;
    for (std::size_t i : candidates) {
      const auto& sample = train.samples()[i];
      if (sample.image.width() <= p.max_width && sample.char_count <= p.text_length) {
        chosen.push_back(i);
      }
    }
    if (chosen.size() < candidates.size()) {
      warn("stage " + std::to_string(p.category) + ": dropped " +
           std::to_string(candidates.size() - chosen.size()) + " samples beyond L or T");
    }
    if (chosen.empty()) {
      warn("stage " + std::to_string(p.category) + ": no samples, skipping");
      stage.skipped = true;
      result.stages.push_back(stage);
      continue;
    }
    const auto data = train.subset(chosen);
    for (const auto& sample : data.samples()) {
      stage.sample_ids.push_back(sample.sample_id);
    }
    BatchSampler sampler(data, tc.batch_size, stage.width, stage.text_length, mc.style_images,
                         tc.seed + 7919 * s);

    const bool from_scratch = s == 0;
    std::int64_t budget = from_scratch ? tc.max_iterations
                                       : tc.finetune_epochs * sampler.batches_per_epoch();
    if (s < tc.stage_iterations.size()) {
      budget = std::min<std::int64_t>(budget, tc.stage_iterations[s]);
    }

    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (std::int64_t it = 0; it < budget; ++it) {
      const auto report = trainer.train_step(sampler.next());
      std::string vfid;
      if (options.evaluator && tc.eval_every > 0 && (it + 1) % tc.eval_every == 0) {
        const double score = options.evaluator(models.synthesizer);
        std::ostringstream v;
        v << std::setprecision(8) << score;
        vfid = v.str();
        if (score < best) {
          best = score;
          stale = 0;
        } else {
          ++stale;
        }
      }
      append_log(log_path, report, p.category, vfid);
      result.log.push_back(report);
      if (options.on_step) {
        options.on_step(report);
      }
      ++stage.iterations;
      if (from_scratch && stale >= tc.stage1_patience) {
        break;
      }
    }
    stage.checkpoint =
        options.out_dir / (p.category == 0 ? std::string("model.ckpt")
                                           : "stage" + std::to_string(p.category) + ".ckpt");
    save_checkpoint(stage.checkpoint, models, trainer.iteration());
    result.final_checkpoint = stage.checkpoint;
    result.stages.push_back(stage);
  }
  if (!result.final_checkpoint.empty()) {
    const auto final_path = options.out_dir / "final.ckpt";
    std::filesystem::copy_file(result.final_checkpoint, final_path,
                               std::filesystem::copy_options::overwrite_existing);
    result.final_checkpoint = final_path;
  }
  return result;
}

}  // namespace inkline
