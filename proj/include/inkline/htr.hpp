#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "inkline/checkpoint.hpp"
#include "inkline/dataset.hpp"
#include "inkline/metrics.hpp"

namespace inkline {

struct HtrTrainOptions {
  int iterations = 2000;
  int batch_size = 8;
  double lr = 1e-4;
  int text_length = 24;  // T; longer transcriptions are skipped
  bool augment = false;
  std::uint64_t seed = 1;
};

/// Random width scaling and stroke thickening/thinning of one image.
GrayImage augment_image(const GrayImage& image, std::mt19937_64& rng);

/// Teacher-forced training of a standalone recognizer on labeled lines.
void train_recognizer(Recognizer& recognizer, const Dataset& data, const HtrTrainOptions& options);

struct Prediction {
  std::string sample_id;
  std::string reference;
  std::string hypothesis;
  EditDistanceReport characters;
  EditDistanceReport words;
};

struct HtrEvaluation {
  std::vector<Prediction> predictions;
  EditDistanceReport characters;  // summed over lines
  EditDistanceReport words;
  double cer() const { return characters.rate(); }
  double wer() const { return words.rate(); }
};

/// Greedy decoding of every sample; rates are corpus-level sums.
HtrEvaluation evaluate_recognizer(Recognizer& recognizer, const Dataset& data, int max_length);

/// image_path (sample id), hypothesis, CER per line.
void write_predictions_tsv(const std::filesystem::path& path, const HtrEvaluation& evaluation);

/// `count` generated lines: text drawn uniformly from `lexicon`, K style
/// images drawn uniformly from one writer of `style_pool` per line. Lines are
/// generated at the grid width of the widest style image (at least 16 T) and
/// then cropped to the ink extent plus a small margin.
Dataset synthesize_dataset(ModelBundle& models, const Dataset& style_pool,
                           const std::vector<std::string>& lexicon, int count, int text_length,
                           std::uint64_t seed);

/// Copy every parameter of `from` into `to` (identical architectures).
void copy_parameters(const torch::nn::Module& from, torch::nn::Module& to);

struct HtrTableRow {
  std::string mode;
  std::string condition;
  int train_real = 0;
  int train_synthetic = 0;
  double cer = 0.0;
  double wer = 0.0;
};

struct HtrExperimentData {
  Dataset train;         // labeled source lines
  Dataset test;          // evaluation lines (source writers for supervised)
  Dataset target_pool;   // target-style lines: unlabeled styles and few-shot labels
  Dataset target_test;   // target evaluation lines
  std::vector<std::string> lexicon;  // external text for transfer and few-shot synthesis
};

/// Toy-scale data for all three modes: source writers for supervised
/// training, a disjoint set of target writers for transfer and few-shot.
HtrExperimentData make_toy_htr_data(std::uint64_t seed, int source_writers, int target_writers,
                                    int samples_per_writer, int max_chars, int max_width);

/// supervised: real / real+synthetic / real+synthetic+augment on `test`.
/// transfer: source-only vs source + target-style synthetic on target_test.
/// fewshot: fine-tune the source recognizer on n labeled target lines, with
/// and without target-style synthetic lines, mean over repeats.
std::vector<HtrTableRow> run_htr_experiment(const std::string& mode, ModelBundle& generator,
                                            const HtrExperimentData& data, const RunConfig& config,
                                            const std::function<void(const std::string&)>& log = {});

std::string format_htr_table(const std::vector<HtrTableRow>& rows);
std::vector<HtrTableRow> parse_htr_table(const std::string& text);

}  // namespace inkline
