#include "inkline/ngram.hpp"

#include <algorithm>
#include <sstream>

#include "inkline/error.hpp"

namespace inkline {

namespace {

void validate_boxes(const LineWords& line) {
  if (line.words.size() != line.boxes.size()) {
    fail(ErrorKind::ManifestError,
         line.line_id + ": " + std::to_string(line.words.size()) + " words but " +
             std::to_string(line.boxes.size()) + " boxes");
  }
  for (std::size_t i = 0; i < line.boxes.size(); ++i) {
    const auto& b = line.boxes[i];
    if (b.w <= 0 || b.h <= 0 || b.x < 0 || b.y < 0 || b.x + b.w > line.image.width ||
        b.y + b.h > line.image.height) {
      fail(ErrorKind::ManifestError, line.line_id + ": word box " + std::to_string(i) +
                                         " lies outside the line image");
    }
    if (i > 0) {
      const auto& prev = line.boxes[i - 1];
      if (prev.x + prev.w > b.x) {
        fail(ErrorKind::ManifestError, line.line_id + ": word boxes " + std::to_string(i - 1) +
                                           " and " + std::to_string(i) +
                                           " overlap or are out of order");
      }
    }
  }
}

RawImage crop_raw(const RawImage& raw, int x0, int x1, int y0, int y1) {
  RawImage out{y1 - y0, x1 - x0, {}};
  out.pixels.reserve(static_cast<std::size_t>(out.width) * out.height);
  for (int r = y0; r < y1; ++r) {
    const auto* row = raw.pixels.data() + static_cast<std::size_t>(r) * raw.width;
    out.pixels.insert(out.pixels.end(), row + x0, row + x1);
  }
  return out;
}

}  // namespace

std::size_t ngram_count(std::size_t words, int max_order) {
  std::size_t total = 0;
  const auto order = static_cast<std::size_t>(std::max(0, max_order));
  for (std::size_t n = 1; n <= std::min(order, words); ++n) {
    total += words - n + 1;
  }
  return total;
}

std::vector<TextLineSample> ngram_crop(const LineWords& line, int max_order) {
  require(max_order >= 1, ErrorKind::ContractViolation, "n-gram order must be >= 1");
  validate_boxes(line);
  std::vector<TextLineSample> out;
  const auto m = line.words.size();
  out.reserve(ngram_count(m, max_order));
  for (std::size_t n = 1; n <= std::min<std::size_t>(m, static_cast<std::size_t>(max_order));
       ++n) {
    for (std::size_t first = 0; first + n <= m; ++first) {
      const std::size_t last = first + n - 1;
      int y0 = line.boxes[first].y;
      int y1 = line.boxes[first].y + line.boxes[first].h;
      std::string text;
      for (std::size_t k = first; k <= last; ++k) {
        y0 = std::min(y0, line.boxes[k].y);
        y1 = std::max(y1, line.boxes[k].y + line.boxes[k].h);
        text += (k == first ? "" : " ") + line.words[k];
      }
      const int x0 = line.boxes[first].x;
      const int x1 = line.boxes[last].x + line.boxes[last].w;
      TextLineSample s;
      s.sample_id = line.line_id + "#" + std::to_string(first) + "-" + std::to_string(last);
      s.image = normalize_image(crop_raw(line.image, x0, x1, y0, y1));
      s.transcription = std::move(text);
      s.writer_id = line.writer_id;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<TextLineSample> ngram_expand(const Manifest& manifest, int max_order) {
  std::vector<TextLineSample> out;
  for (const auto& record : manifest.records) {
    auto raw = read_png(record.image_path);
    if (record.word_boxes.empty()) {
      TextLineSample s;
      s.sample_id = record.image_path.generic_string();
      s.image = normalize_image(raw);
      s.transcription = record.transcription;
      s.writer_id = record.writer_id;
      out.push_back(std::move(s));
      continue;
    }
    LineWords line;
    line.line_id = record.image_path.generic_string();
    line.image = std::move(raw);
    line.writer_id = record.writer_id;
    std::istringstream words(record.transcription);
    for (std::string w; words >> w;) {
      line.words.push_back(w);
    }
    line.boxes = record.word_boxes;
    auto crops = ngram_crop(line, max_order);
    std::move(crops.begin(), crops.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace inkline
