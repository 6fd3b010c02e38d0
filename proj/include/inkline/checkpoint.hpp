#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/nn.h>

#include "inkline/adversaries.hpp"
#include "inkline/alphabet.hpp"
#include "inkline/config.hpp"
#include "inkline/generator.hpp"
#include "inkline/recognizer.hpp"

namespace inkline {

inline constexpr int kCheckpointVersion = 1;

/// The four parameter groups H, D, W, R built from one configuration.
struct ModelBundle {
  RunConfig config;
  Alphabet alphabet = Alphabet::iam();
  Synthesizer synthesizer{nullptr};
  Critic discriminator{nullptr};
  Critic writer_classifier{nullptr};
  Recognizer recognizer{nullptr};

  /// Fresh, jointly initialized networks. Seeds torch with config.training.seed.
  static ModelBundle create(const RunConfig& config, const Alphabet& alphabet);
};

/// Alphabet named by the config (empty selects IAM).
Alphabet config_alphabet(const ModelConfig& config);

using NamedModules = std::vector<std::pair<std::string, torch::nn::Module*>>;

/// Versioned archive: string metadata plus named module parameter trees.
void save_archive(const std::filesystem::path& path, const std::map<std::string, std::string>& meta,
                  const NamedModules& modules);
std::map<std::string, std::string> read_archive_meta(const std::filesystem::path& path);
void load_archive_modules(const std::filesystem::path& path, const NamedModules& modules);

/// Checkpoint of a ModelBundle. Meta keys: format_version, kind, alphabet,
/// config, config_hash, iteration.
void save_checkpoint(const std::filesystem::path& path, ModelBundle& bundle, int64_t iteration);
ModelBundle load_checkpoint(const std::filesystem::path& path, int64_t* iteration = nullptr);

/// Standalone recognizer checkpoint (kind "recognizer").
void save_recognizer(const std::filesystem::path& path, Recognizer& recognizer,
                     const RunConfig& config, const Alphabet& alphabet);
Recognizer load_recognizer(const std::filesystem::path& path, RunConfig* config = nullptr,
                           Alphabet* alphabet = nullptr);

/// 64-bit FNV-1a over every parameter's bytes, in registration order.
std::uint64_t parameter_hash(const torch::nn::Module& module);

}  // namespace inkline
