#include "inkline/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "inkline/error.hpp"

namespace inkline {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorKind::ConfigError, "key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument(value);
    }
    return out;
  } catch (const std::exception&) {
    fail(ErrorKind::ConfigError, "key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") {
    return true;
  }
  if (value == "false" || value == "0") {
    return false;
  }
  fail(ErrorKind::ConfigError, "key '" + key + "' expects true/false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (trim(value).empty()) {
    return out;
  }
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    out.push_back(static_cast<int>(parse_int(key, trim(item))));
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string format_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += (i ? "," : "") + std::to_string(v[i]);
  }
  return out;
}

struct Binding {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Binding int_key(std::string key, T RunConfig::*group, int T::*field) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*group.*field); },
          [=](RunConfig& c, const std::string& v) {
            c.*group.*field = static_cast<int>(parse_int(key, v));
          }};
}

template <typename T>
Binding double_key(std::string key, T RunConfig::*group, double T::*field) {
  return {key, [=](const RunConfig& c) { return format_double(c.*group.*field); },
          [=](RunConfig& c, const std::string& v) { c.*group.*field = parse_double(key, v); }};
}

template <typename T>
Binding bool_key(std::string key, T RunConfig::*group, bool T::*field) {
  return {key, [=](const RunConfig& c) { return std::string(c.*group.*field ? "true" : "false"); },
          [=](RunConfig& c, const std::string& v) { c.*group.*field = parse_bool(key, v); }};
}

template <typename T>
Binding string_key(std::string key, T RunConfig::*group, std::string T::*field) {
  return {key, [=](const RunConfig& c) { return c.*group.*field; },
          [=](RunConfig& c, const std::string& v) { c.*group.*field = v; }};
}

template <typename T>
Binding list_key(std::string key, T RunConfig::*group, std::vector<int> T::*field) {
  return {key, [=](const RunConfig& c) { return format_list(c.*group.*field); },
          [=](RunConfig& c, const std::string& v) { c.*group.*field = parse_int_list(key, v); }};
}

const std::vector<Binding>& bindings() {
  using M = ModelConfig;
  using T = TrainingConfig;
  using H = HtrConfig;
  constexpr auto m = &RunConfig::model;
  constexpr auto t = &RunConfig::training;
  constexpr auto h = &RunConfig::htr;
  static const std::vector<Binding> table = {
      string_key("alphabet", m, &M::alphabet),
      int_key("style_images", m, &M::style_images),
      int_key("max_text_length", m, &M::max_text_length),
      int_key("embed_dim", m, &M::embed_dim),
      int_key("gen_channels", m, &M::gen_channels),
      int_key("global_hidden", m, &M::global_hidden),
      string_key("backbone", m, &M::backbone),
      int_key("backbone_width", m, &M::backbone_width),
      list_key("up_channels", m, &M::up_channels),
      int_key("critic_width", m, &M::critic_width),
      int_key("num_writers", m, &M::num_writers),
      int_key("rec_width", m, &M::rec_width),
      int_key("rec_model_dim", m, &M::rec_model_dim),
      int_key("rec_heads", m, &M::rec_heads),
      int_key("rec_ff", m, &M::rec_ff),
      int_key("rec_layers", m, &M::rec_layers),
      double_key("rec_dropout", m, &M::rec_dropout),
      bool_key("use_charwise", m, &M::use_charwise),
      bool_key("use_global", m, &M::use_global),
      double_key("lr_adversarial", t, &T::lr_adversarial),
      double_key("lr_auxiliary", t, &T::lr_auxiliary),
      double_key("adam_beta1", t, &T::adam_beta1),
      double_key("adam_beta2", t, &T::adam_beta2),
      int_key("batch_size", t, &T::batch_size),
      int_key("max_iterations", t, &T::max_iterations),
      {"seed", [](const RunConfig& c) { return std::to_string(c.training.seed); },
       [](RunConfig& c, const std::string& v) {
         c.training.seed = static_cast<std::uint64_t>(parse_int("seed", v));
       }},
      int_key("max_width", t, &T::max_width),
      int_key("max_chars", t, &T::max_chars),
      list_key("curriculum", t, &T::curriculum),
      int_key("stage1_patience", t, &T::stage1_patience),
      int_key("eval_every", t, &T::eval_every),
      int_key("finetune_epochs", t, &T::finetune_epochs),
      list_key("stage_iterations", t, &T::stage_iterations),
      double_key("label_smoothing", t, &T::label_smoothing),
      bool_key("check_phases", t, &T::check_phases),
      int_key("log_every", t, &T::log_every),
      int_key("htr_iterations", h, &H::iterations),
      double_key("htr_lr", h, &H::lr),
      int_key("htr_batch_size", h, &H::batch_size),
      int_key("synthetic_count", h, &H::synthetic_count),
      bool_key("htr_augment", h, &H::augment),
      string_key("htr_mode", h, &H::mode),
      list_key("fewshot_sizes", h, &H::fewshot_sizes),
      int_key("fewshot_repeats", h, &H::fewshot_repeats),
      int_key("finetune_iterations", h, &H::finetune_iterations),
      bool_key("htr_use_joint_recognizer", h, &H::use_joint_recognizer),
  };
  return table;
}

void validate(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.training;
  auto check = [](bool ok, const std::string& msg) {
    require(ok, ErrorKind::ConfigError, msg);
  };
  check(m.style_images >= 1, "style_images must be >= 1");
  check(m.max_text_length >= 1, "max_text_length must be >= 1");
  check(m.embed_dim >= 1 && m.gen_channels >= 1 && m.global_hidden >= 1,
        "encoder widths must be positive");
  check(m.backbone == "resnet34" || m.backbone == "vgg19", "backbone must be resnet34 or vgg19");
  check(m.up_channels.size() == 4, "up_channels must list exactly four widths");
  check(m.num_writers >= 1, "num_writers must be >= 1");
  check(m.rec_model_dim % m.rec_heads == 0, "rec_model_dim must be divisible by rec_heads");
  check(t.lr_adversarial > 0.0 && t.lr_auxiliary > 0.0, "learning rates must be positive");
  check(t.batch_size >= 1, "batch_size must be >= 1");
  check(std::is_sorted(t.curriculum.begin(), t.curriculum.end()) &&
            std::adjacent_find(t.curriculum.begin(), t.curriculum.end()) == t.curriculum.end(),
        "curriculum stages must be strictly increasing");
  for (int id : t.curriculum) {
    check(id >= 1 && id <= 3, "curriculum stages must be in 1..3");
  }
  const auto& h = c.htr;
  check(h.mode == "supervised" || h.mode == "transfer" || h.mode == "fewshot",
        "htr_mode must be supervised, transfer or fewshot");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys{"preset"};
  for (const auto& b : bindings()) {
    keys.push_back(b.key);
  }
  return keys;
}

RunConfig RunConfig::preset_named(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "full") {
    return c;
  }
  auto& m = c.model;
  auto& t = c.training;
  auto& h = c.htr;
  if (name == "desk") {
    m.max_text_length = 24;
    m.embed_dim = 32;
    m.gen_channels = 64;
    m.global_hidden = 256;
    m.backbone_width = 16;
    m.up_channels = {64, 32, 16, 16};
    m.critic_width = 16;
    m.rec_width = 16;
    m.rec_model_dim = 256;
    m.rec_heads = 4;
    m.rec_ff = 512;
    t.max_width = 320;
    t.max_chars = 24;
    t.eval_every = 0;
    h.iterations = 1500;
    h.synthetic_count = 200;
    h.fewshot_sizes = {5, 10, 20};
    h.fewshot_repeats = 2;
    h.finetune_iterations = 150;
    return c;
  }
  if (name == "tiny") {
    m.style_images = 2;
    m.max_text_length = 12;
    m.embed_dim = 8;
    m.gen_channels = 16;
    m.global_hidden = 32;
    m.backbone_width = 4;
    m.up_channels = {16, 8, 8, 8};
    m.critic_width = 4;
    m.rec_width = 4;
    m.rec_model_dim = 32;
    m.rec_heads = 2;
    m.rec_ff = 64;
    m.rec_dropout = 0.1;
    t.max_width = 192;
    t.max_chars = 12;
    t.eval_every = 0;
    h.iterations = 50;
    h.batch_size = 4;
    h.synthetic_count = 16;
    h.fewshot_sizes = {2, 4};
    h.fewshot_repeats = 1;
    h.finetune_iterations = 10;
    return c;
  }
  fail(ErrorKind::ConfigError, "unknown preset '" + name + "' (full, desk, tiny)");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    *this = preset_named(value);
    return;
  }
  for (const auto& b : bindings()) {
    if (b.key == key) {
      b.set(*this, value);
      validate(*this);
      return;
    }
  }
  fail(ErrorKind::ConfigError, "unknown configuration key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out{{"preset", preset}};
  for (const auto& b : bindings()) {
    out[b.key] = b.get(*this);
  }
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) {
    out += k + "=" + v + "\n";
  }
  return out;
}

std::string RunConfig::hash() const {
  const auto text = to_text();
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(text.data(), text.size());
  return out.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig c;
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') {
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::ConfigError,
           "line " + std::to_string(line_no) + ": expected key=value, got '" + stripped + "'");
    }
    entries.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  // The preset applies first regardless of where it appears.
  for (const auto& [k, v] : entries) {
    if (k == "preset") {
      c.set(k, v);
    }
  }
  for (const auto& [k, v] : entries) {
    if (k != "preset") {
      c.set(k, v);
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::IoError, "cannot open config " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace inkline
