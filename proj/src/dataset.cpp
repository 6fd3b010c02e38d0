#include "inkline/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "inkline/curriculum.hpp"
#include "inkline/error.hpp"

namespace inkline {

namespace fs = std::filesystem;

std::string escape_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (char ch : field) {
    switch (ch) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

std::string unescape_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] != '\\' || i + 1 == field.size()) {
      out.push_back(field[i]);
      continue;
    }
    switch (field[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case '\\': out.push_back('\\'); break;
      default:
        out.push_back('\\');
        out.push_back(field[i]);
    }
  }
  return out;
}

namespace {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(line.substr(start));
      return parts;
    }
    parts.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    words.push_back(word);
  }
  return words;
}

WordBox parse_box(const std::string& token, const std::string& where) {
  const auto parts = split(token, ':');
  if (parts.size() != 4) {
    fail(ErrorKind::ManifestError, where + ": malformed word box '" + token + "'");
  }
  WordBox box;
  try {
    box.x = std::stoi(parts[0]);
    box.y = std::stoi(parts[1]);
    box.w = std::stoi(parts[2]);
    box.h = std::stoi(parts[3]);
  } catch (const std::exception&) {
    fail(ErrorKind::ManifestError, where + ": malformed word box '" + token + "'");
  }
  if (box.w <= 0 || box.h <= 0 || box.x < 0 || box.y < 0) {
    fail(ErrorKind::ManifestError, where + ": degenerate word box '" + token + "'");
  }
  return box;
}

}  // namespace

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::IoError, "cannot open manifest " + path.string());
  }
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  Manifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split(line, '\t');
    if (fields.size() != 3 && fields.size() != 4) {
      fail(ErrorKind::ManifestError, where + ": expected 3 or 4 tab-separated fields");
    }
    ManifestRecord record;
    record.image_path = unescape_field(fields[0]);
    if (record.image_path.is_relative()) {
      record.image_path = base / record.image_path;
    }
    record.writer_id = unescape_field(fields[1]);
    record.transcription = unescape_field(fields[2]);
    if (record.transcription.empty()) {
      fail(ErrorKind::ManifestError, where + ": empty transcription");
    }
    if (fields.size() == 4 && !fields[3].empty()) {
      for (const auto& token : split_words(fields[3])) {
        record.word_boxes.push_back(parse_box(token, where));
      }
      if (record.word_boxes.size() != split_words(record.transcription).size()) {
        fail(ErrorKind::ManifestError, where + ": word box count does not match word count");
      }
    }
    manifest.records.push_back(std::move(record));
  }
  return manifest;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    fail(ErrorKind::IoError, "cannot write manifest " + path.string());
  }
  const fs::path base = fs::absolute(path).lexically_normal().parent_path();
  for (const auto& record : manifest.records) {
    auto image = record.image_path;
    // Paths under the manifest directory are stored relative to it.
    auto rel = fs::absolute(image).lexically_normal().lexically_relative(base);
    if (!rel.empty() && rel.native().rfind("..", 0) != 0) {
      image = rel;
    }
    out << escape_field(image.generic_string()) << '\t' << escape_field(record.writer_id)
        << '\t' << escape_field(record.transcription);
    if (!record.word_boxes.empty()) {
      out << '\t';
      for (std::size_t i = 0; i < record.word_boxes.size(); ++i) {
        const auto& b = record.word_boxes[i];
        out << (i ? " " : "") << b.x << ':' << b.y << ':' << b.w << ':' << b.h;
      }
    }
    out << '\n';
  }
}

Dataset::Dataset(Alphabet alphabet, std::vector<TextLineSample> samples)
    : alphabet_(std::move(alphabet)), samples_(std::move(samples)) {
  rebuild_index(nullptr);
}

void Dataset::rebuild_index(const std::vector<std::string>* writer_map) {
  if (writer_map != nullptr) {
    writer_ids_ = *writer_map;
  } else {
    std::set<std::string> ids;
    for (const auto& s : samples_) {
      ids.insert(s.writer_id);
    }
    writer_ids_.assign(ids.begin(), ids.end());
  }
  std::map<std::string, int> lookup;
  for (std::size_t w = 0; w < writer_ids_.size(); ++w) {
    lookup.emplace(writer_ids_[w], static_cast<int>(w));
  }
  by_writer_.assign(writer_ids_.size(), {});
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    auto& s = samples_[i];
    auto it = lookup.find(s.writer_id);
    require(it != lookup.end(), ErrorKind::ContractViolation,
            "writer '" + s.writer_id + "' missing from writer map");
    s.writer_index = it->second;
    by_writer_[static_cast<std::size_t>(s.writer_index)].push_back(i);
  }
}

std::optional<int> Dataset::writer_index(const std::string& writer_id) const {
  auto it = std::find(writer_ids_.begin(), writer_ids_.end(), writer_id);
  if (it == writer_ids_.end()) {
    return std::nullopt;
  }
  return static_cast<int>(it - writer_ids_.begin());
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices, bool keep_writer_map) const {
  std::vector<TextLineSample> picked;
  picked.reserve(indices.size());
  for (auto i : indices) {
    picked.push_back(samples_.at(i));
  }
  Dataset out;
  out.alphabet_ = alphabet_;
  out.samples_ = std::move(picked);
  out.rebuild_index(keep_writer_map ? &writer_ids_ : nullptr);
  return out;
}

StyleSet Dataset::sample_style_set(int writer_index, int k, std::mt19937_64& rng,
                                   std::optional<std::size_t> exclude) const {
  require(k >= 1, ErrorKind::ContractViolation, "style set size K must be >= 1");
  const auto& pool_all = writer_samples(writer_index);
  require(!pool_all.empty(), ErrorKind::InsufficientData,
          "writer '" + writer_ids_.at(static_cast<std::size_t>(writer_index)) +
              "' has no samples");
  std::vector<std::size_t> pool;
  for (auto i : pool_all) {
    if (!exclude || i != *exclude) {
      pool.push_back(i);
    }
  }
  if (pool.empty()) {
    pool = pool_all;
  }
  StyleSet style;
  style.writer_id = writer_ids_[static_cast<std::size_t>(writer_index)];
  style.writer_index = writer_index;
  if (static_cast<int>(pool.size()) >= k) {
    std::shuffle(pool.begin(), pool.end(), rng);
    for (int j = 0; j < k; ++j) {
      style.images.push_back(samples_[pool[static_cast<std::size_t>(j)]].image);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int j = 0; j < k; ++j) {
      style.images.push_back(samples_[pool[pick(rng)]].image);
    }
  }
  return style;
}

int Dataset::max_width() const {
  int w = 0;
  for (const auto& s : samples_) {
    w = std::max(w, s.image.width());
  }
  return w;
}

int Dataset::max_chars() const {
  int n = 0;
  for (const auto& s : samples_) {
    n = std::max(n, s.char_count);
  }
  return n;
}

Dataset ingest_samples(std::vector<TextLineSample> samples, const Alphabet& alphabet,
                       const IngestLimits& limits, IngestReport* report) {
  std::vector<TextLineSample> kept;
  kept.reserve(samples.size());
  for (auto& s : samples) {
    std::string reason;
    try {
      s.char_count = static_cast<int>(alphabet.encode(s.transcription).size());
      if (s.char_count == 0) {
        reason = "empty transcription";
      } else if (s.char_count > limits.max_chars) {
        reason = "transcription has " + std::to_string(s.char_count) + " chars (limit " +
                 std::to_string(limits.max_chars) + ")";
      } else if (s.image.width() > limits.max_width) {
        reason = "image width " + std::to_string(s.image.width()) + " px (limit " +
                 std::to_string(limits.max_width) + ")";
      } else if (s.image.height() != kLineHeight) {
        reason = "image height is not " + std::to_string(kLineHeight);
      }
    } catch (const Error& e) {
      reason = e.what();
    }
    if (reason.empty()) {
      kept.push_back(std::move(s));
    } else if (report != nullptr) {
      report->rejected.push_back(s.sample_id + "\t" + reason);
    }
  }
  return Dataset(alphabet, std::move(kept));
}

Dataset ingest_manifest(const fs::path& manifest_path, const Alphabet& alphabet,
                        const IngestLimits& limits, IngestReport* report) {
  const auto manifest = read_manifest(manifest_path);
  std::vector<TextLineSample> samples;
  samples.reserve(manifest.records.size());
  for (const auto& record : manifest.records) {
    TextLineSample s;
    s.sample_id = record.image_path.generic_string();
    s.image = normalize_image(read_png(record.image_path));
    s.transcription = record.transcription;
    s.writer_id = record.writer_id;
    samples.push_back(std::move(s));
  }
  return ingest_samples(std::move(samples), alphabet, limits, report);
}

std::string dataset_statistics(const Dataset& dataset) {
  std::ostringstream out;
  out << "samples\t" << dataset.size() << '\n';
  out << "writers\t" << dataset.num_writers() << '\n';
  if (dataset.empty()) {
    return out.str();
  }
  int min_w = dataset.samples().front().image.width();
  int max_w = min_w;
  int min_c = dataset.samples().front().char_count;
  int max_c = min_c;
  std::array<std::size_t, 3> per_category{};
  for (const auto& s : dataset.samples()) {
    min_w = std::min(min_w, s.image.width());
    max_w = std::max(max_w, s.image.width());
    min_c = std::min(min_c, s.char_count);
    max_c = std::max(max_c, s.char_count);
    if (s.char_count >= 1 && s.char_count <= 88) {
      ++per_category[static_cast<std::size_t>(assign_category(s).id - 1)];
    }
  }
  out << "width_range\t" << min_w << '-' << max_w << '\n';
  out << "chars_range\t" << min_c << '-' << max_c << '\n';
  for (std::size_t c = 0; c < 3; ++c) {
    out << "category_" << c + 1 << '\t' << per_category[c] << '\n';
  }
  out << "\nwriter\tsamples\n";
  for (int w = 0; w < dataset.num_writers(); ++w) {
    out << dataset.writer_ids()[static_cast<std::size_t>(w)] << '\t'
        << dataset.writer_samples(w).size() << '\n';
  }
  return out.str();
}

std::pair<Dataset, Dataset> split_per_writer(const Dataset& dataset, double first_fraction,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  for (int w = 0; w < dataset.num_writers(); ++w) {
    auto pool = dataset.writer_samples(w);
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto n_first = static_cast<std::size_t>(std::lround(first_fraction * pool.size()));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (i < n_first ? first : second).push_back(pool[i]);
    }
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {dataset.subset(first), dataset.subset(second)};
}

}  // namespace inkline
