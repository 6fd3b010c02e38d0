#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "inkline/dataset.hpp"

namespace inkline {

/// Parameter bundle describing one synthetic writer.
struct WriterStyle {
  double slant = 0.0;       // horizontal shear per pixel of height above baseline
  double thickness = 2.0;   // stroke width in pixels
  double scale_x = 3.0;     // pixels per glyph cell, horizontally
  double scale_y = 3.0;     // pixels per glyph cell, vertically
  double jitter = 0.0;      // baseline jitter standard deviation in pixels
  double spacing = 1.0;     // inter-glyph gap in cells
};

struct ToyDatasetOptions {
  int num_writers = 2;
  int samples_per_writer = 10;
  std::uint64_t seed = 0;
  int min_chars = 1;
  int max_chars = 12;
  int max_width = 320;
};

struct ToyLine {
  std::string line_id;
  RawImage image;  // height 64, white background
  std::string writer_id;
  std::string transcription;
  std::vector<WordBox> boxes;
};

/// Distinct, stratified style bundles for `num_writers` writers.
std::vector<WriterStyle> toy_writer_styles(int num_writers, std::uint64_t seed);

/// Render a line with the procedural 5x8 cell glyph font. Word boxes are
/// reported when `boxes` is non-null.
RawImage render_text(const std::string& text, const WriterStyle& style, std::mt19937_64& rng,
                     std::vector<WordBox>* boxes = nullptr);

/// Width render_text would produce for `text`.
int rendered_width(const std::string& text, const WriterStyle& style);

const std::vector<std::string>& toy_word_list();

/// Deterministic synthetic lines for a fixed seed.
std::vector<ToyLine> make_toy_lines(const ToyDatasetOptions& options);

/// Write images/<writer>_<n>.png, manifest.tsv and writers.tsv under out_dir.
Manifest make_toy_dataset(const ToyDatasetOptions& options, const std::filesystem::path& out_dir);

/// Normalized in-memory dataset built from make_toy_lines.
Dataset make_toy_samples(const ToyDatasetOptions& options, const Alphabet& alphabet);

}  // namespace inkline
