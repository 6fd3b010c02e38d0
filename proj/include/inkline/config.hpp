#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace inkline {

/// Architecture hyperparameters. Everything needed to rebuild the networks
/// from a checkpoint lives here.
struct ModelConfig {
  std::string alphabet;  // UTF-8 symbols; empty selects the IAM set
  int style_images = 5;          // K
  int max_text_length = 88;      // T used by the global string encoding
  int embed_dim = 64;            // n, also the character-wise map channels
  int gen_channels = 256;        // residual-block width, length of each AdaIN vector
  int global_hidden = 1024;      // hidden width of the global string MLP
  std::string backbone = "resnet34";  // resnet34 | vgg19
  int backbone_width = 64;
  std::vector<int> up_channels{256, 128, 64, 32};
  int critic_width = 64;
  int num_writers = 2;
  int rec_width = 64;
  int rec_model_dim = 512;
  int rec_heads = 8;
  int rec_ff = 1024;
  int rec_layers = 4;
  double rec_dropout = 0.1;
  bool use_charwise = true;
  bool use_global = true;
};

struct TrainingConfig {
  double lr_adversarial = 1e-4;  // D and H
  double lr_auxiliary = 1e-5;    // W and R
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int batch_size = 4;
  int max_iterations = 1000;
  std::uint64_t seed = 1;
  int max_width = 600;      // L for single-stage runs
  int max_chars = 24;       // T for single-stage runs
  std::vector<int> curriculum{1, 2, 3};
  int stage1_patience = 10;          // vFID evaluations without improvement
  int eval_every = 500;              // iterations between vFID evaluations (0 disables)
  int finetune_epochs = 5;           // stages 2 and 3
  std::vector<int> stage_iterations; // optional per-stage iteration caps
  double label_smoothing = 0.0;
  bool check_phases = false;  // hash parameter groups around each phase
  int log_every = 10;
};

struct HtrConfig {
  int iterations = 2000;
  double lr = 1e-4;
  int batch_size = 8;
  int synthetic_count = 8000;
  bool augment = false;
  std::string mode = "supervised";  // supervised | transfer | fewshot
  std::vector<int> fewshot_sizes{5, 10, 20, 40, 80, 160};
  int fewshot_repeats = 10;
  int finetune_iterations = 300;
  bool use_joint_recognizer = false;  // start from the GAN-loop R instead of a fresh one
};

/// Flat key=value configuration, the only on-disk config format.
struct RunConfig {
  std::string preset = "full";
  ModelConfig model;
  TrainingConfig training;
  HtrConfig htr;

  /// Apply one `key=value`; unknown keys and malformed values throw
  /// ConfigError. `preset=` resets every field to that preset first.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  /// Canonical sorted `key=value\n` text.
  std::string to_text() const;
  /// 64-bit FNV-1a over to_text(), hex encoded.
  std::string hash() const;

  static RunConfig preset_named(const std::string& name);
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::string& path);
};

std::vector<std::string> config_keys();

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace inkline
