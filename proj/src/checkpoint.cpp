#include "inkline/checkpoint.hpp"

#include <sstream>

#include <torch/serialize.h>

#include "inkline/error.hpp"

namespace inkline {

namespace {

void require_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    fail(ErrorKind::LoadError, "checkpoint not found: " + path.string());
  }
}

std::string require_key(const std::map<std::string, std::string>& meta, const std::string& key,
                        const std::filesystem::path& path) {
  const auto it = meta.find(key);
  if (it == meta.end()) {
    fail(ErrorKind::LoadError, path.string() + ": missing meta key '" + key + "'");
  }
  return it->second;
}

void check_version(const std::map<std::string, std::string>& meta, const std::string& kind,
                   const std::filesystem::path& path) {
  const auto version = require_key(meta, "format_version", path);
  if (version != std::to_string(kCheckpointVersion)) {
    fail(ErrorKind::LoadError, path.string() + ": unsupported format version " + version);
  }
  const auto found = require_key(meta, "kind", path);
  if (found != kind) {
    fail(ErrorKind::LoadError, path.string() + ": expected a " + kind + " checkpoint, found " + found);
  }
}

}  // namespace

Alphabet config_alphabet(const ModelConfig& config) {
  return config.alphabet.empty() ? Alphabet::iam() : Alphabet::from_utf8(config.alphabet);
}

ModelBundle ModelBundle::create(const RunConfig& config, const Alphabet& alphabet) {
  torch::manual_seed(config.training.seed);
  ModelBundle b;
  b.config = config;
  b.alphabet = alphabet;
  const int a = alphabet.size();
  b.synthesizer = Synthesizer(config.model, a);
  b.discriminator = Critic(config.model.critic_width, 1);
  b.writer_classifier = Critic(config.model.critic_width, config.model.num_writers);
  b.recognizer = Recognizer(config.model, a);
  return b;
}

void save_archive(const std::filesystem::path& path, const std::map<std::string, std::string>& meta,
                  const NamedModules& modules) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  torch::serialize::OutputArchive archive;
  for (const auto& [key, value] : meta) {
    archive.write("meta." + key, c10::IValue(value));
  }
  std::string names;
  for (const auto& [name, module] : modules) {
    torch::serialize::OutputArchive sub;
    module->save(sub);
    archive.write(name, sub);
    names += (names.empty() ? "" : ",") + name;
  }
  archive.write("meta_keys", c10::IValue([&] {
                  std::string keys;
                  for (const auto& [key, value] : meta) {
                    keys += (keys.empty() ? "" : ",") + key;
                  }
                  return keys;
                }()));
  archive.write("modules", c10::IValue(names));
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    fail(ErrorKind::IoError, "cannot write " + path.string() + ": " + e.what_without_backtrace());
  }
}

std::map<std::string, std::string> read_archive_meta(const std::filesystem::path& path) {
  require_file(path);
  std::map<std::string, std::string> meta;
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    c10::IValue keys;
    archive.read("meta_keys", keys);
    std::stringstream ss(keys.toStringRef());
    for (std::string key; std::getline(ss, key, ',');) {
      c10::IValue value;
      archive.read("meta." + key, value);
      meta[key] = value.toStringRef();
    }
  } catch (const c10::Error& e) {
    fail(ErrorKind::LoadError, path.string() + ": " + e.what_without_backtrace());
  }
  return meta;
}

void load_archive_modules(const std::filesystem::path& path, const NamedModules& modules) {
  require_file(path);
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    for (const auto& [name, module] : modules) {
      torch::serialize::InputArchive sub;
      archive.read(name, sub);
      module->load(sub);
    }
  } catch (const c10::Error& e) {
    fail(ErrorKind::LoadError, path.string() + ": " + e.what_without_backtrace());
  }
}

void save_checkpoint(const std::filesystem::path& path, ModelBundle& bundle, int64_t iteration) {
  const std::map<std::string, std::string> meta{
      {"format_version", std::to_string(kCheckpointVersion)},
      {"kind", "bundle"},
      {"alphabet", bundle.alphabet.to_utf8()},
      {"config", bundle.config.to_text()},
      {"config_hash", bundle.config.hash()},
      {"iteration", std::to_string(iteration)},
  };
  save_archive(path, meta,
               {{"synthesizer", bundle.synthesizer.ptr().get()},
                {"discriminator", bundle.discriminator.ptr().get()},
                {"writer_classifier", bundle.writer_classifier.ptr().get()},
                {"recognizer", bundle.recognizer.ptr().get()}});
}

ModelBundle load_checkpoint(const std::filesystem::path& path, int64_t* iteration) {
  const auto meta = read_archive_meta(path);
  check_version(meta, "bundle", path);
  const auto config = RunConfig::from_text(require_key(meta, "config", path));
  if (config.hash() != require_key(meta, "config_hash", path)) {
    fail(ErrorKind::LoadError, path.string() + ": config hash mismatch");
  }
  auto bundle = ModelBundle::create(config, Alphabet::from_utf8(require_key(meta, "alphabet", path)));
  load_archive_modules(path, {{"synthesizer", bundle.synthesizer.ptr().get()},
                              {"discriminator", bundle.discriminator.ptr().get()},
                              {"writer_classifier", bundle.writer_classifier.ptr().get()},
                              {"recognizer", bundle.recognizer.ptr().get()}});
  if (iteration != nullptr) {
    *iteration = std::stoll(require_key(meta, "iteration", path));
  }
  return bundle;
}

void save_recognizer(const std::filesystem::path& path, Recognizer& recognizer,
                     const RunConfig& config, const Alphabet& alphabet) {
  save_archive(path,
               {{"format_version", std::to_string(kCheckpointVersion)},
                {"kind", "recognizer"},
                {"alphabet", alphabet.to_utf8()},
                {"config", config.to_text()},
                {"config_hash", config.hash()}},
               {{"recognizer", recognizer.ptr().get()}});
}

Recognizer load_recognizer(const std::filesystem::path& path, RunConfig* config,
                           Alphabet* alphabet) {
  const auto meta = read_archive_meta(path);
  check_version(meta, "recognizer", path);
  const auto cfg = RunConfig::from_text(require_key(meta, "config", path));
  const auto alpha = Alphabet::from_utf8(require_key(meta, "alphabet", path));
  Recognizer recognizer(cfg.model, alpha.size());
  load_archive_modules(path, {{"recognizer", recognizer.ptr().get()}});
  if (config != nullptr) {
    *config = cfg;
  }
  if (alphabet != nullptr) {
    *alphabet = alpha;
  }
  return recognizer;
}

std::uint64_t parameter_hash(const torch::nn::Module& module) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : module.parameters()) {
    const auto t = p.detach().contiguous().cpu();
    h = fnv1a64(t.data_ptr(), static_cast<std::size_t>(t.nbytes()), h);
  }
  return h;
}

}  // namespace inkline
