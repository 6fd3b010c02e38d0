#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "inkline/alphabet.hpp"
#include "inkline/image.hpp"

namespace inkline {

/// One normalized line image with its transcription and writer.
struct TextLineSample {
  std::string sample_id;
  GrayImage image;
  std::string transcription;
  std::string writer_id;
  int writer_index = -1;
  int char_count = 0;
};

/// K same-writer images used as the few-shot appearance condition.
struct StyleSet {
  std::vector<GrayImage> images;
  std::string writer_id;
  int writer_index = -1;
};

/// Word bounding box in raw image pixel coordinates.
struct WordBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  friend bool operator==(const WordBox&, const WordBox&) = default;
};

struct ManifestRecord {
  std::filesystem::path image_path;
  std::string writer_id;
  std::string transcription;
  std::vector<WordBox> word_boxes;  // empty, or one per space-separated word
};

/// Tab-separated `image_path \t writer_id \t transcription [\t boxes]`.
///
/// Tabs, newlines and backslashes inside fields are escaped as \t, \n and \\.
/// The optional fourth column holds one `x:y:w:h` box per word, space
/// separated. Relative image paths resolve against the manifest directory.
struct Manifest {
  std::vector<ManifestRecord> records;
};

std::string escape_field(std::string_view field);
std::string unescape_field(std::string_view field);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct IngestLimits {
  int max_width = 2160;
  int max_chars = 88;
};

struct IngestReport {
  std::vector<std::string> rejected;  // one human-readable line per record
};

/// In-memory labeled dataset with a dense writer index.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Alphabet alphabet, std::vector<TextLineSample> samples);

  const Alphabet& alphabet() const noexcept { return alphabet_; }
  const std::vector<TextLineSample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  int num_writers() const noexcept { return static_cast<int>(writer_ids_.size()); }
  const std::vector<std::string>& writer_ids() const noexcept { return writer_ids_; }
  std::optional<int> writer_index(const std::string& writer_id) const;
  const std::vector<std::size_t>& writer_samples(int writer_index) const {
    return by_writer_.at(static_cast<std::size_t>(writer_index));
  }

  /// Subset by sample position; the writer index mapping is preserved when
  /// `keep_writer_map` is true (needed when a classifier was built on the
  /// parent).
  Dataset subset(const std::vector<std::size_t>& indices, bool keep_writer_map = true) const;

  /// Sample K images of one writer (with replacement when fewer exist),
  /// avoiding `exclude` while other choices remain.
  StyleSet sample_style_set(int writer_index, int k, std::mt19937_64& rng,
                            std::optional<std::size_t> exclude = std::nullopt) const;

  int max_width() const;
  int max_chars() const;

 private:
  void rebuild_index(const std::vector<std::string>* writer_map);

  Alphabet alphabet_ = Alphabet::iam();
  std::vector<TextLineSample> samples_;
  std::vector<std::string> writer_ids_;
  std::vector<std::vector<std::size_t>> by_writer_;
};

/// Read, normalize and validate every manifest record. Records exceeding
/// the limits or carrying out-of-alphabet characters are reported, not
/// cropped.
Dataset ingest_manifest(const std::filesystem::path& manifest_path, const Alphabet& alphabet,
                        const IngestLimits& limits = {}, IngestReport* report = nullptr);

/// Samples built from already-normalized images, validated against limits.
Dataset ingest_samples(std::vector<TextLineSample> samples, const Alphabet& alphabet,
                       const IngestLimits& limits = {}, IngestReport* report = nullptr);

/// Plain-text statistics table (per-writer counts, widths, char counts,
/// curriculum categories).
std::string dataset_statistics(const Dataset& dataset);

/// Deterministic split by writer-stratified shuffling; returns (first, second)
/// where `first_fraction` of each writer's samples go to the first set.
std::pair<Dataset, Dataset> split_per_writer(const Dataset& dataset, double first_fraction,
                                             std::uint64_t seed);

}  // namespace inkline
