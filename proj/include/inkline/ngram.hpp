#pragma once

#include <string>
#include <vector>

#include "inkline/dataset.hpp"

namespace inkline {

/// A raw line image with per-word boxes, in reading order.
struct LineWords {
  std::string line_id;
  RawImage image;
  std::string writer_id;
  std::vector<std::string> words;
  std::vector<WordBox> boxes;
};

/// Every contiguous run of 1..max_order words becomes one normalized sample
/// whose transcription is the space-joined words. A line of m words yields
/// m(m+1)/2 samples when max_order >= m. Unsorted or overlapping boxes raise
/// ManifestError.
std::vector<TextLineSample> ngram_crop(const LineWords& line, int max_order);

/// Number of samples ngram_crop emits for a line of `words` words.
std::size_t ngram_count(std::size_t words, int max_order);

/// Expand all manifest records carrying word boxes; records without boxes
/// pass through as whole lines.
std::vector<TextLineSample> ngram_expand(const Manifest& manifest, int max_order);

}  // namespace inkline
