#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <torch/optim.h>

#include "inkline/checkpoint.hpp"
#include "inkline/dataset.hpp"

namespace inkline {

/// One optimization step's inputs. Real images are zero padded to L; style
/// sets are periodically padded to L.
struct TrainingBatch {
  torch::Tensor real;          // (B, 1, 64, L) in [0, 1]
  torch::Tensor real_symbols;  // (B, T)
  torch::Tensor real_lengths;  // (B)
  torch::Tensor real_writers;  // (B)
  torch::Tensor styles;        // (B, K, 64, L)
  torch::Tensor fake_symbols;  // (B, T)
  torch::Tensor fake_lengths;  // (B)
  torch::Tensor fake_writers;  // (B), writer of each style set
  std::vector<std::string> sample_ids;
};

/// Epoch-shuffled batches over a dataset at a fixed (L, T). Generated lines
/// take the text of a random sample and the style of the real sample's writer.
class BatchSampler {
 public:
  BatchSampler(const Dataset& dataset, int batch_size, int width, int text_length,
               int style_images, std::uint64_t seed);
  TrainingBatch next();
  std::int64_t batches_per_epoch() const;

 private:
  const Dataset& dataset_;
  int batch_size_;
  int width_;
  int text_length_;
  int style_images_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct LossReport {
  std::int64_t iteration = 0;
  double d_loss = 0.0;         // L_d on real and generated, ascended by D
  double w_loss = 0.0;         // L_w on real, descended by W
  double r_loss = 0.0;         // L_r on real, descended by R
  double g_adversarial = 0.0;  // -log D(x_bar)
  double g_writer = 0.0;       // L_w on generated
  double g_content = 0.0;      // L_r on generated
  double total = 0.0;          // g_adversarial + g_writer + g_content, optimized by H
  bool phases_checked = false;
  bool synthesizer_frozen_in_phase1 = true;
  bool auxiliaries_frozen_in_phase2 = true;
};

/// Two-phase optimizer for H, D, W and R.
///
/// Phase 1 generates under no_grad, ascends L_d for D and descends L_w + L_r
/// on real data for W and R. Phase 2 freezes D, W, R (R in eval mode) and
/// descends adversarial + L_w + L_r on generated data for H only.
class Trainer {
 public:
  Trainer(ModelBundle& models, const TrainingConfig& config);
  LossReport train_step(const TrainingBatch& batch);
  std::int64_t iteration() const noexcept { return iteration_; }
  void set_iteration(std::int64_t iteration) noexcept { iteration_ = iteration; }
  ModelBundle& models() noexcept { return models_; }

 private:
  ModelBundle& models_;
  TrainingConfig config_;
  std::unique_ptr<torch::optim::Adam> opt_h_, opt_d_, opt_w_, opt_r_;
  std::int64_t iteration_ = 0;
};

/// Validation hook (typically vFID of generated vs real lines); lower is better.
using StageEvaluator = std::function<double(Synthesizer&)>;

struct CurriculumOptions {
  std::filesystem::path out_dir;
  StageEvaluator evaluator;                                  // optional
  std::function<void(const LossReport&)> on_step;            // optional
  std::function<void(const std::string&)> warn;              // optional, defaults to stderr
};

struct StagePlan {
  int category = 0;  // 0 for a single-stage run
  int max_width = 0;
  int text_length = 0;
};

/// Stages in training order; the last one also fixes the inference shape.
std::vector<StagePlan> stage_plan(const TrainingConfig& config);

struct StageReport {
  int category = 0;         // 0 for a single-stage run
  int max_width = 0;        // L before grid rounding
  int width = 0;            // L used for tensors (multiple of 16)
  int text_length = 0;      // T
  std::int64_t iterations = 0;
  bool skipped = false;
  std::vector<std::string> sample_ids;
  std::filesystem::path checkpoint;
};

struct CurriculumResult {
  std::vector<StageReport> stages;
  std::filesystem::path final_checkpoint;
  std::vector<LossReport> log;
};

/// Staged training over curriculum categories (or a single stage at the
/// configured L and T when the curriculum list is empty). Each stage uses its
/// own category only; a checkpoint is written after every stage, and the
/// training log is appended to out_dir/training_log.tsv.
CurriculumResult run_curriculum(ModelBundle& models, const Dataset& train,
                                const CurriculumOptions& options);

}  // namespace inkline
