#include "inkline/toy_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "inkline/error.hpp"

namespace inkline {

namespace {

// Column-major 5x8 glyphs for ASCII 0x20-0x7E; bit r of a column byte is row r
// counted from the top, row 7 holds descenders.
constexpr std::array<std::array<std::uint8_t, 5>, 95> kGlyphs{{
    {0x00, 0x00, 0x00, 0x00, 0x00}, {0x00, 0x00, 0x5F, 0x00, 0x00},
    {0x00, 0x07, 0x00, 0x07, 0x00}, {0x14, 0x7F, 0x14, 0x7F, 0x14},
    {0x24, 0x2A, 0x7F, 0x2A, 0x12}, {0x23, 0x13, 0x08, 0x64, 0x62},
    {0x36, 0x49, 0x56, 0x20, 0x50}, {0x00, 0x08, 0x07, 0x03, 0x00},
    {0x00, 0x1C, 0x22, 0x41, 0x00}, {0x00, 0x41, 0x22, 0x1C, 0x00},
    {0x2A, 0x1C, 0x7F, 0x1C, 0x2A}, {0x08, 0x08, 0x3E, 0x08, 0x08},
    {0x00, 0x80, 0x70, 0x30, 0x00}, {0x08, 0x08, 0x08, 0x08, 0x08},
    {0x00, 0x00, 0x60, 0x60, 0x00}, {0x20, 0x10, 0x08, 0x04, 0x02},
    {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
    {0x72, 0x49, 0x49, 0x49, 0x46}, {0x21, 0x41, 0x49, 0x4D, 0x33},
    {0x18, 0x14, 0x12, 0x7F, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
    {0x3C, 0x4A, 0x49, 0x49, 0x31}, {0x41, 0x21, 0x11, 0x09, 0x07},
    {0x36, 0x49, 0x49, 0x49, 0x36}, {0x46, 0x49, 0x49, 0x29, 0x1E},
    {0x00, 0x00, 0x14, 0x00, 0x00}, {0x00, 0x40, 0x34, 0x00, 0x00},
    {0x00, 0x08, 0x14, 0x22, 0x41}, {0x14, 0x14, 0x14, 0x14, 0x14},
    {0x00, 0x41, 0x22, 0x14, 0x08}, {0x02, 0x01, 0x59, 0x09, 0x06},
    {0x3E, 0x41, 0x5D, 0x59, 0x4E}, {0x7C, 0x12, 0x11, 0x12, 0x7C},
    {0x7F, 0x49, 0x49, 0x49, 0x36}, {0x3E, 0x41, 0x41, 0x41, 0x22},
    {0x7F, 0x41, 0x41, 0x41, 0x3E}, {0x7F, 0x49, 0x49, 0x49, 0x41},
    {0x7F, 0x09, 0x09, 0x09, 0x01}, {0x3E, 0x41, 0x41, 0x51, 0x73},
    {0x7F, 0x08, 0x08, 0x08, 0x7F}, {0x00, 0x41, 0x7F, 0x41, 0x00},
    {0x20, 0x40, 0x41, 0x3F, 0x01}, {0x7F, 0x08, 0x14, 0x22, 0x41},
    {0x7F, 0x40, 0x40, 0x40, 0x40}, {0x7F, 0x02, 0x1C, 0x02, 0x7F},
    {0x7F, 0x04, 0x08, 0x10, 0x7F}, {0x3E, 0x41, 0x41, 0x41, 0x3E},
    {0x7F, 0x09, 0x09, 0x09, 0x06}, {0x3E, 0x41, 0x51, 0x21, 0x5E},
    {0x7F, 0x09, 0x19, 0x29, 0x46}, {0x26, 0x49, 0x49, 0x49, 0x32},
    {0x03, 0x01, 0x7F, 0x01, 0x03}, {0x3F, 0x40, 0x40, 0x40, 0x3F},
    {0x1F, 0x20, 0x40, 0x20, 0x1F}, {0x3F, 0x40, 0x38, 0x40, 0x3F},
    {0x63, 0x14, 0x08, 0x14, 0x63}, {0x03, 0x04, 0x78, 0x04, 0x03},
    {0x61, 0x59, 0x49, 0x4D, 0x43}, {0x00, 0x7F, 0x41, 0x41, 0x41},
    {0x02, 0x04, 0x08, 0x10, 0x20}, {0x00, 0x41, 0x41, 0x41, 0x7F},
    {0x04, 0x02, 0x01, 0x02, 0x04}, {0x40, 0x40, 0x40, 0x40, 0x40},
    {0x00, 0x03, 0x07, 0x08, 0x00}, {0x20, 0x54, 0x54, 0x78, 0x40},
    {0x7F, 0x28, 0x44, 0x44, 0x38}, {0x38, 0x44, 0x44, 0x44, 0x28},
    {0x38, 0x44, 0x44, 0x28, 0x7F}, {0x38, 0x54, 0x54, 0x54, 0x18},
    {0x00, 0x08, 0x7E, 0x09, 0x02}, {0x18, 0xA4, 0xA4, 0x9C, 0x78},
    {0x7F, 0x08, 0x04, 0x04, 0x78}, {0x00, 0x44, 0x7D, 0x40, 0x00},
    {0x20, 0x40, 0x40, 0x3D, 0x00}, {0x7F, 0x10, 0x28, 0x44, 0x00},
    {0x00, 0x41, 0x7F, 0x40, 0x00}, {0x7C, 0x04, 0x78, 0x04, 0x78},
    {0x7C, 0x08, 0x04, 0x04, 0x78}, {0x38, 0x44, 0x44, 0x44, 0x38},
    {0xFC, 0x18, 0x24, 0x24, 0x18}, {0x18, 0x24, 0x24, 0x18, 0xFC},
    {0x7C, 0x08, 0x04, 0x04, 0x08}, {0x48, 0x54, 0x54, 0x54, 0x24},
    {0x04, 0x04, 0x3F, 0x44, 0x24}, {0x3C, 0x40, 0x40, 0x20, 0x7C},
    {0x1C, 0x20, 0x40, 0x20, 0x1C}, {0x3C, 0x40, 0x30, 0x40, 0x3C},
    {0x44, 0x28, 0x10, 0x28, 0x44}, {0x4C, 0x90, 0x90, 0x90, 0x7C},
    {0x44, 0x64, 0x54, 0x4C, 0x44}, {0x00, 0x08, 0x36, 0x41, 0x00},
    {0x00, 0x00, 0x77, 0x00, 0x00}, {0x00, 0x41, 0x36, 0x08, 0x00},
    {0x02, 0x01, 0x02, 0x04, 0x02},
}};

// Unknown code points render as a hollow box.
constexpr std::array<std::uint8_t, 5> kMissingGlyph{0x7F, 0x41, 0x41, 0x41, 0x7F};

constexpr int kGlyphCols = 5;
constexpr int kGlyphRows = 8;
constexpr double kSpaceCells = 3.0;
constexpr int kShift = 4;  // fixed-point bits for sub-pixel drawing

const std::array<std::uint8_t, 5>& glyph_for(char32_t cp) {
  if (cp >= 0x20 && cp <= 0x7E) {
    return kGlyphs[cp - 0x20];
  }
  return kMissingGlyph;
}

bool cell_on(const std::array<std::uint8_t, 5>& glyph, int row, int col) {
  if (row < 0 || row >= kGlyphRows || col < 0 || col >= kGlyphCols) {
    return false;
  }
  return ((glyph[static_cast<std::size_t>(col)] >> row) & 1U) != 0;
}

struct Layout {
  double margin = 0.0;
  double shear_extent = 0.0;
  double top = 0.0;
  int width = 0;
};

double advance(char32_t cp, const WriterStyle& style) {
  if (cp == U' ') {
    return kSpaceCells * style.scale_x;
  }
  return (kGlyphCols + style.spacing) * style.scale_x;
}

Layout layout_for(const std::u32string& text, const WriterStyle& style) {
  Layout layout;
  layout.margin = 3.0 + style.thickness;
  layout.shear_extent = std::abs(style.slant) * kGlyphRows * style.scale_y;
  double body = 0.0;
  for (char32_t cp : text) {
    body += advance(cp, style);
  }
  if (!text.empty() && text.back() != U' ') {
    body -= style.spacing * style.scale_x;
  }
  layout.width = std::max(
      1, static_cast<int>(std::ceil(2.0 * layout.margin + layout.shear_extent + body)));
  layout.top = (kLineHeight - kGlyphRows * style.scale_y) / 2.0;
  return layout;
}

double lerp(double lo, double hi, double t) { return lo + (hi - lo) * t; }

}  // namespace

std::vector<WriterStyle> toy_writer_styles(int num_writers, std::uint64_t seed) {
  require(num_writers >= 1, ErrorKind::ContractViolation, "need at least one writer");
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Each parameter is stratified over the writers with an independent
  // permutation, so no two writers share a bundle.
  auto strata = [&]() {
    std::vector<int> order(static_cast<std::size_t>(num_writers));
    for (int i = 0; i < num_writers; ++i) {
      order[static_cast<std::size_t>(i)] = i;
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> t(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      t[i] = (order[i] + 0.2 + 0.6 * unit(rng)) / num_writers;
    }
    return t;
  };
  const auto slant = strata();
  const auto thickness = strata();
  const auto sx = strata();
  const auto sy = strata();
  const auto jitter = strata();
  const auto spacing = strata();

  std::vector<WriterStyle> styles;
  for (std::size_t w = 0; w < static_cast<std::size_t>(num_writers); ++w) {
    WriterStyle s;
    s.slant = lerp(-0.30, 0.45, slant[w]);
    s.thickness = lerp(1.0, 3.5, thickness[w]);
    s.scale_x = lerp(2.3, 3.4, sx[w]);
    s.scale_y = lerp(2.6, 4.2, sy[w]);
    s.jitter = lerp(0.0, 2.0, jitter[w]);
    s.spacing = lerp(0.6, 1.6, spacing[w]);
    styles.push_back(s);
  }
  return styles;
}

int rendered_width(const std::string& text, const WriterStyle& style) {
  return layout_for(utf8_to_utf32(text), style).width;
}

RawImage render_text(const std::string& text, const WriterStyle& style, std::mt19937_64& rng,
                     std::vector<WordBox>* boxes) {
  const auto u32 = utf8_to_utf32(text);
  const Layout layout = layout_for(u32, style);
  cv::Mat canvas(kLineHeight, layout.width, CV_8UC1, cv::Scalar(255));
  const int stroke = std::max(1, static_cast<int>(std::lround(style.thickness)));
  std::normal_distribution<double> jitter(0.0, std::max(style.jitter, 1e-9));

  const double shear_origin = style.slant >= 0.0 ? 0.0 : layout.shear_extent;
  double pen = layout.margin + shear_origin;
  const double baseline = layout.top + 7.0 * style.scale_y;

  struct Extent {
    double lo = 1e9;
    double hi = -1e9;
  };
  std::vector<Extent> words(1);

  for (char32_t cp : u32) {
    if (cp == U' ') {
      if (words.back().hi > words.back().lo) {
        words.emplace_back();
      }
      pen += advance(cp, style);
      continue;
    }
    const auto& glyph = glyph_for(cp);
    const double dy = style.jitter > 0.0
                          ? std::clamp(jitter(rng), -2.0 * style.jitter, 2.0 * style.jitter)
                          : 0.0;
    auto center = [&](int row, int col) {
      const double y = layout.top + (row + 0.5) * style.scale_y + dy;
      const double x = pen + (col + 0.5) * style.scale_x + style.slant * (baseline - y);
      return cv::Point2d(x, y);
    };
    auto to_fixed = [](cv::Point2d p) {
      return cv::Point(static_cast<int>(std::lround(p.x * (1 << kShift))),
                       static_cast<int>(std::lround(p.y * (1 << kShift))));
    };
    for (int row = 0; row < kGlyphRows; ++row) {
      for (int col = 0; col < kGlyphCols; ++col) {
        if (!cell_on(glyph, row, col)) {
          continue;
        }
        const auto p = center(row, col);
        words.back().lo = std::min(words.back().lo, p.x - style.thickness);
        words.back().hi = std::max(words.back().hi, p.x + style.thickness);
        bool connected = false;
        constexpr std::array<std::pair<int, int>, 4> kNeighbours{
            {{0, 1}, {1, 0}, {1, 1}, {1, -1}}};
        for (const auto& [dr, dc] : kNeighbours) {
          if (cell_on(glyph, row + dr, col + dc)) {
            cv::line(canvas, to_fixed(p), to_fixed(center(row + dr, col + dc)), cv::Scalar(0),
                     stroke, cv::LINE_AA, kShift);
            connected = true;
          }
        }
        const bool has_upstream = cell_on(glyph, row, col - 1) || cell_on(glyph, row - 1, col) ||
                                  cell_on(glyph, row - 1, col - 1) ||
                                  cell_on(glyph, row - 1, col + 1);
        if (!connected && !has_upstream) {
          cv::circle(canvas, to_fixed(p), std::max(1, stroke / 2) << kShift, cv::Scalar(0),
                     cv::FILLED, cv::LINE_AA, kShift);
        }
      }
    }
    pen += advance(cp, style);
  }

  if (boxes != nullptr) {
    boxes->clear();
    std::vector<std::pair<int, int>> spans;
    for (const auto& e : words) {
      if (e.hi <= e.lo) {
        continue;
      }
      const int x0 = std::clamp(static_cast<int>(std::floor(e.lo)), 0, layout.width - 1);
      const int x1 = std::clamp(static_cast<int>(std::ceil(e.hi)), x0 + 1, layout.width);
      spans.emplace_back(x0, x1);
    }
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i - 1].second > spans[i].first) {
        const int mid = (spans[i - 1].second + spans[i].first) / 2;
        spans[i - 1].second = std::max(spans[i - 1].first + 1, mid);
        spans[i].first = std::min(spans[i].second - 1, spans[i - 1].second);
      }
    }
    for (const auto& [x0, x1] : spans) {
      boxes->push_back({x0, 0, x1 - x0, kLineHeight});
    }
  }

  RawImage raw{kLineHeight, layout.width, {}};
  raw.pixels.resize(static_cast<std::size_t>(kLineHeight) * layout.width);
  for (int r = 0; r < kLineHeight; ++r) {
    std::copy_n(canvas.ptr<std::uint8_t>(r), layout.width,
                raw.pixels.begin() + static_cast<std::ptrdiff_t>(r) * layout.width);
  }
  return raw;
}

const std::vector<std::string>& toy_word_list() {
  static const std::vector<std::string> words = {
      "the",     "of",     "and",    "to",      "in",     "a",      "is",      "that",
      "for",     "it",     "as",     "was",     "with",   "be",     "by",      "on",
      "not",     "he",     "I",      "this",    "are",    "or",     "his",     "from",
      "at",      "which",  "but",    "have",    "an",     "had",    "they",    "you",
      "were",    "their",  "one",    "all",     "we",     "can",    "her",     "has",
      "there",   "been",   "if",     "more",    "when",   "will",   "would",   "who",
      "so",      "no",     "She",    "Mr.",     "It",     "The",    "We",      "In",
      "house",   "letter", "paper",  "garden",  "river",  "bridge", "window",  "morning",
      "evening", "winter", "summer", "market",  "station", "London", "Paris",  "Monday",
      "Friday",  "doctor", "teacher", "music",  "silver", "orange", "yellow",  "purple",
      "quick",   "brown",  "fox",    "jumps",   "over",   "lazy",   "dog",     "zebra",
      "quiet",   "voice",  "joke",   "kept",    "wax",    "fizz",   "jazz",    "vex",
      "1984",    "42",     "2020",   "7",       "13th",   "no.",    "it's",    "don't",
      "(see",    "it)",    "yes!",   "why?",    "say:",   "well;",  "end.",    "far,",
      "A",       "B",      "C",      "K",       "Q",      "X",      "Y",       "Z",
      "\"hi\"",  "#1",     "&",      "*",       "+",      "-",      "/",       "J",
  };
  return words;
}

namespace {

std::string draw_transcription(std::mt19937_64& rng, const ToyDatasetOptions& options,
                               const WriterStyle& style) {
  const auto& words = toy_word_list();
  std::uniform_int_distribution<int> length(options.min_chars, options.max_chars);
  const int target = length(rng);
  std::string text;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int room = target - static_cast<int>(text.size()) - (text.empty() ? 0 : 1);
    if (room <= 0) {
      break;
    }
    std::vector<const std::string*> fitting;
    for (const auto& w : words) {
      if (static_cast<int>(w.size()) <= room) {
        fitting.push_back(&w);
      }
    }
    if (fitting.empty()) {
      break;
    }
    std::uniform_int_distribution<std::size_t> pick(0, fitting.size() - 1);
    std::string candidate = text.empty() ? *fitting[pick(rng)] : text + " " + *fitting[pick(rng)];
    if (rendered_width(candidate, style) > options.max_width) {
      break;
    }
    text = std::move(candidate);
  }
  if (text.empty()) {
    static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
    std::uniform_int_distribution<std::size_t> letter(0, kLetters.size() - 1);
    for (int i = 0; i < std::max(1, target); ++i) {
      std::string candidate = text + kLetters[letter(rng)];
      if (!text.empty() && rendered_width(candidate, style) > options.max_width) {
        break;
      }
      text = std::move(candidate);
    }
  }
  return text;
}

std::string writer_name(int w) {
  std::ostringstream name;
  name << 'w' << std::setw(2) << std::setfill('0') << w;
  return name.str();
}

}  // namespace

std::vector<ToyLine> make_toy_lines(const ToyDatasetOptions& options) {
  require(options.num_writers >= 2, ErrorKind::ContractViolation,
          "toy dataset needs at least two writers");
  require(options.samples_per_writer >= 1, ErrorKind::ContractViolation,
          "toy dataset needs at least one sample per writer");
  require(options.min_chars >= 1 && options.min_chars <= options.max_chars,
          ErrorKind::ContractViolation, "invalid toy character range");
  const auto styles = toy_writer_styles(options.num_writers, options.seed);
  std::vector<ToyLine> lines;
  lines.reserve(static_cast<std::size_t>(options.num_writers) * options.samples_per_writer);
  for (int w = 0; w < options.num_writers; ++w) {
    for (int j = 0; j < options.samples_per_writer; ++j) {
      std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                        static_cast<std::uint32_t>(options.seed >> 32),
                        static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(j)};
      std::mt19937_64 rng(seq);
      // Small within-writer variation around the writer's bundle.
      WriterStyle style = styles[static_cast<std::size_t>(w)];
      std::normal_distribution<double> wobble(0.0, 1.0);
      style.slant += 0.02 * wobble(rng);
      style.scale_x *= 1.0 + 0.02 * wobble(rng);

      ToyLine line;
      line.writer_id = writer_name(w);
      std::ostringstream id;
      id << line.writer_id << '_' << std::setw(4) << std::setfill('0') << j;
      line.line_id = id.str();
      line.transcription = draw_transcription(rng, options, style);
      line.image = render_text(line.transcription, style, rng, &line.boxes);
      lines.push_back(std::move(line));
    }
  }
  return lines;
}

Manifest make_toy_dataset(const ToyDatasetOptions& options, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");
  Manifest manifest;
  for (auto& line : make_toy_lines(options)) {
    const fs::path image_path = out_dir / "images" / (line.line_id + ".png");
    write_png(image_path, line.image);
    manifest.records.push_back({image_path, line.writer_id, line.transcription, line.boxes});
  }
  write_manifest(out_dir / "manifest.tsv", manifest);

  std::ofstream writers(out_dir / "writers.tsv");
  writers << "writer\tslant\tthickness\tscale_x\tscale_y\tjitter\tspacing\n";
  const auto styles = toy_writer_styles(options.num_writers, options.seed);
  writers << std::fixed << std::setprecision(4);
  for (int w = 0; w < options.num_writers; ++w) {
    const auto& s = styles[static_cast<std::size_t>(w)];
    writers << writer_name(w) << '\t' << s.slant << '\t' << s.thickness << '\t' << s.scale_x
            << '\t' << s.scale_y << '\t' << s.jitter << '\t' << s.spacing << '\n';
  }
  return manifest;
}

Dataset make_toy_samples(const ToyDatasetOptions& options, const Alphabet& alphabet) {
  std::vector<TextLineSample> samples;
  for (auto& line : make_toy_lines(options)) {
    TextLineSample s;
    s.sample_id = line.line_id;
    s.image = normalize_image(line.image);
    s.transcription = std::move(line.transcription);
    s.writer_id = std::move(line.writer_id);
    samples.push_back(std::move(s));
  }
  IngestLimits limits;
  limits.max_width = std::max(limits.max_width, options.max_width);
  limits.max_chars = std::max(limits.max_chars, options.max_chars);
  return ingest_samples(std::move(samples), alphabet, limits);
}

}  // namespace inkline
