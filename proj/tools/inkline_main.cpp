// inkline: command-line entry point for training, generation, metrics and
// HTR experiments.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "inkline/checkpoint.hpp"
#include "inkline/config.hpp"
#include "inkline/curriculum.hpp"
#include "inkline/dataset.hpp"
#include "inkline/error.hpp"
#include "inkline/generator.hpp"
#include "inkline/htr.hpp"
#include "inkline/style_encoder.hpp"
#include "inkline/toy_data.hpp"
#include "inkline/trainer.hpp"
#include "inkline/vfid.hpp"

namespace fs = std::filesystem;
using namespace inkline;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMissingInput = 3;
constexpr const char* kVersion = "0.1.0";

/// A required checkpoint, manifest or input directory does not exist.
struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  std::replace(text.begin(), text.end(), '"', '\'');
  return text;
}

void report_error(std::string_view kind, const std::string& message) {
  std::cerr << "error kind=" << kind << " message=\"" << one_line(message) << "\"\n";
}

void need(const fs::path& path, const std::string& what) {
  if (path.empty() || !fs::exists(path)) {
    throw MissingInput(what + " not found: " + path.string());
  }
}

void warn(const std::string& msg) { std::cerr << "warning: " << one_line(msg) << '\n'; }

void info(const std::string& msg) { std::cerr << msg << '\n'; }

/// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  fs::path out;
};

void add_common(CLI::App* app, Common& c, const std::string& default_out) {
  app->add_option("--config", c.config_path, "key=value config file");
  app->add_option("--set", c.overrides, "override, key=value (repeatable)");
  app->add_option("--seed", c.seed, "random seed");
  c.out = default_out;
  app->add_option("--out", c.out, "output directory")->capture_default_str();
}

RunConfig effective_config(const Common& c, const RunConfig* base = nullptr) {
  RunConfig config = base != nullptr ? *base : RunConfig{};
  if (!c.config_path.empty()) {
    need(c.config_path, "config file");
    config = RunConfig::load(c.config_path);
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorKind::ConfigError, "override '" + kv + "' is not key=value");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) {
    config.training.seed = *c.seed;
  }
  return config;
}

/// config.txt and run_manifest.txt, written before any heavy work.
void write_run_files(const fs::path& out, const std::string& subcommand, const RunConfig& config,
                     const std::vector<std::string>& argv,
                     const std::vector<std::pair<std::string, fs::path>>& inputs) {
  fs::create_directories(out);
  {
    std::ofstream cfg(out / "config.txt");
    require(static_cast<bool>(cfg), ErrorKind::IoError, "cannot write " + (out / "config.txt").string());
    cfg << config.to_text();
  }
  std::ofstream m(out / "run_manifest.txt");
  require(static_cast<bool>(m), ErrorKind::IoError, "cannot write " + (out / "run_manifest.txt").string());
  m << "tool inkline " << kVersion << '\n';
  m << "subcommand " << subcommand << '\n';
  m << "seed " << config.training.seed << '\n';
  m << "config_hash " << config.hash() << '\n';
  m << "torch " << TORCH_VERSION << '\n';
  m << "argv";
  for (const auto& a : argv) {
    m << ' ' << escape_field(a);
  }
  m << '\n';
  for (const auto& [name, path] : inputs) {
    m << "input " << name << ' ' << escape_field(path.string());
    if (fs::is_regular_file(path)) {
      m << " bytes=" << fs::file_size(path);
    }
    m << '\n';
  }
}

/// PNG files of a directory (sorted by name) or the images of a manifest.
std::vector<GrayImage> load_images(const fs::path& source, std::vector<std::string>* names = nullptr) {
  need(source, "image directory or manifest");
  std::vector<GrayImage> images;
  if (fs::is_directory(source)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(source)) {
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (entry.is_regular_file() && ext == ".png") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      images.push_back(normalize_image(read_png(f)));
      if (names != nullptr) {
        names->push_back(f.filename().string());
      }
    }
  } else {
    const auto manifest = read_manifest(source);
    for (const auto& r : manifest.records) {
      need(r.image_path, "manifest image");
      images.push_back(normalize_image(read_png(r.image_path)));
      if (names != nullptr) {
        names->push_back(r.image_path.filename().string());
      }
    }
  }
  require(!images.empty(), ErrorKind::InsufficientData, "no images in " + source.string());
  return images;
}

Dataset load_dataset(const fs::path& manifest, const Alphabet& alphabet) {
  need(manifest, "manifest");
  IngestReport report;
  auto data = ingest_manifest(manifest, alphabet, {}, &report);
  for (const auto& line : report.rejected) {
    warn(line);
  }
  return data;
}

/// Style set of exactly K images; fewer inputs are reused in seeded order.
StyleSet style_from_images(const std::vector<GrayImage>& images, int k, std::uint64_t seed) {
  StyleSet style;
  style.writer_id = "style";
  if (static_cast<int>(images.size()) >= k) {
    style.images.assign(images.begin(), images.begin() + k);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
    style.images = images;
    while (static_cast<int>(style.images.size()) < k) {
      style.images.push_back(images[pick(rng)]);
    }
  }
  return style;
}

/// Canvas width and text length for inference with a trained bundle.
std::pair<int, int> inference_shape(const ModelBundle& models, const StyleSet& style, int width) {
  const auto plan = stage_plan(models.config.training);
  const int text_length = std::min(plan.back().text_length, models.config.model.max_text_length);
  int target = width > 0 ? width : plan.back().max_width;
  for (const auto& image : style.images) {
    target = std::max(target, image.width());
  }
  target = std::max(target, 16 * text_length);
  return {grid_width(target), text_length};
}

torch::Tensor symbols_of(const ModelBundle& models, const std::string& text, int text_length) {
  const auto padded = pad_text(models.alphabet, text, text_length);
  return torch::tensor(std::vector<int64_t>(padded.symbols.begin(), padded.symbols.end()))
      .unsqueeze(0);
}

void save_generated(const fs::path& path, const torch::Tensor& generated) {
  write_png(path, to_raw(GrayImage::from_tensor(to_data_range(generated)[0][0].clamp(0.0, 1.0))));
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out += (i == 0 ? "" : std::string(1, sep)) + parts[i];
  }
  return out;
}

FeatureExtractor extractor_or_default(const std::string& path, std::uint64_t seed) {
  if (!path.empty()) {
    need(path, "extractor checkpoint");
    return load_extractor(path);
  }
  warn("no --extractor given; using an untrained conv6 extractor seeded by --seed");
  torch::manual_seed(seed);
  return FeatureExtractor(ExtractorKind::Conv6, 16, 2);
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  const std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"inkline: few-shot styled handwriting synthesis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // make-toy-data
  Common toy_c;
  ToyDatasetOptions toy_opt;
  auto* toy = app.add_subcommand("make-toy-data", "write a deterministic synthetic dataset");
  add_common(toy, toy_c, "toy_data");
  toy->add_option("--writers", toy_opt.num_writers, "number of writers")->capture_default_str();
  toy->add_option("--per-writer", toy_opt.samples_per_writer, "lines per writer")->capture_default_str();
  toy->add_option("--max-chars", toy_opt.max_chars, "longest transcription")->capture_default_str();
  toy->add_option("--max-width", toy_opt.max_width, "widest normalized line")->capture_default_str();

  // train
  Common train_c;
  std::string train_manifest, train_extractor_path;
  auto* train = app.add_subcommand("train", "adversarial training with the curriculum schedule");
  add_common(train, train_c, "run");
  train->add_option("--data", train_manifest, "training manifest")->required();
  train->add_option("--extractor", train_extractor_path, "vFID extractor for stage-1 early stopping");

  // generate
  Common gen_c;
  std::string gen_ckpt, gen_style, gen_text, gen_name = "generated.png";
  int gen_width = 0;
  auto* gen = app.add_subcommand("generate", "render text in the style of a few images");
  add_common(gen, gen_c, "generated");
  gen->add_option("--checkpoint", gen_ckpt, "model checkpoint")->required();
  gen->add_option("--style-dir", gen_style, "directory of style PNGs or a manifest")->required();
  gen->add_option("--text", gen_text, "text to render")->required();
  gen->add_option("--width", gen_width, "canvas width (default: final training width)");
  gen->add_option("--name", gen_name, "output file name")->capture_default_str();

  // interpolate
  Common interp_c;
  std::string interp_ckpt, interp_a, interp_b, interp_text;
  int interp_steps = 11;
  int interp_width = 0;
  auto* interp = app.add_subcommand("interpolate", "blend two styles over the same text");
  add_common(interp, interp_c, "interpolation");
  interp->add_option("--checkpoint", interp_ckpt, "model checkpoint")->required();
  interp->add_option("--style-a", interp_a, "first style directory or manifest")->required();
  interp->add_option("--style-b", interp_b, "second style directory or manifest")->required();
  interp->add_option("--text", interp_text, "text to render")->required();
  interp->add_option("--steps", interp_steps, "frames including both endpoints")->capture_default_str();
  interp->add_option("--width", interp_width, "canvas width");

  // vfid
  Common vfid_c;
  std::string vfid_a, vfid_b, vfid_extractor;
  bool vfid_also_fid = false;
  auto* vf = app.add_subcommand("vfid", "variable-length Frechet distance between two image sets");
  add_common(vf, vfid_c, "vfid");
  vf->add_option("set_a", vfid_a, "directory or manifest")->required();
  vf->add_option("set_b", vfid_b, "directory or manifest")->required();
  vf->add_option("--extractor", vfid_extractor, "trained extractor checkpoint");
  vf->add_flag("--fid", vfid_also_fid, "also report fixed-width FID");

  // histograms
  Common hist_c;
  std::string hist_manifest, hist_extractor, hist_kind = "conv6";
  HistogramOptions hist_opt;
  ExtractorTrainOptions hist_train;
  int hist_width = 16;
  auto* hist = app.add_subcommand("histograms", "same- vs cross-writer FID and vFID histograms");
  add_common(hist, hist_c, "histograms");
  hist->add_option("--data", hist_manifest, "manifest with at least two writers")->required();
  hist->add_option("--extractor", hist_extractor, "extractor checkpoint (trained here when absent)");
  hist->add_option("--extractor-kind", hist_kind, "conv6 | inception_v3")->capture_default_str();
  hist->add_option("--extractor-width", hist_width, "extractor base width")->capture_default_str();
  hist->add_option("--extractor-iterations", hist_train.iterations, "extractor training steps")
      ->capture_default_str();
  hist->add_option("--pairs", hist_opt.pairs, "subset pairs per group")->capture_default_str();
  hist->add_option("--subset", hist_opt.subset_size, "images per subset")->capture_default_str();
  hist->add_option("--bins", hist_opt.bins, "histogram bins")->capture_default_str();

  // htr-train
  Common htr_c;
  std::string htr_manifest, htr_test, htr_target, htr_target_test, htr_lexicon, htr_generator;
  std::string htr_experiment;
  bool htr_toy = false;
  auto* htr = app.add_subcommand("htr-train", "train a recognizer or run an HTR experiment");
  add_common(htr, htr_c, "htr");
  htr->add_option("--data", htr_manifest, "labeled training manifest");
  htr->add_option("--experiment", htr_experiment, "supervised | transfer | fewshot | all");
  htr->add_option("--checkpoint", htr_generator, "generator checkpoint for synthetic lines");
  htr->add_option("--test", htr_test, "evaluation manifest");
  htr->add_option("--target", htr_target, "target-writer manifest (styles and few-shot labels)");
  htr->add_option("--target-test", htr_target_test, "target-writer evaluation manifest");
  htr->add_option("--lexicon", htr_lexicon, "one text per line for synthesis");
  htr->add_flag("--toy", htr_toy, "use generated toy data for every split");

  // htr-eval
  Common eval_c;
  std::string eval_model, eval_manifest;
  auto* heval = app.add_subcommand("htr-eval", "greedy-decode a manifest and score CER/WER");
  add_common(heval, eval_c, "htr_eval");
  heval->add_option("--recognizer", eval_model, "recognizer checkpoint")->required();
  heval->add_option("--data", eval_manifest, "labeled manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    report_error("UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (toy->parsed()) {
      const auto config = effective_config(toy_c);
      toy_opt.seed = config.training.seed;
      write_run_files(toy_c.out, "make-toy-data", config, args, {});
      const auto manifest = make_toy_dataset(toy_opt, toy_c.out);
      std::cout << "wrote " << manifest.records.size() << " lines to " << toy_c.out.string() << '\n';
      return 0;
    }

    if (train->parsed()) {
      auto config = effective_config(train_c);
      need(train_manifest, "manifest");
      write_run_files(train_c.out, "train", config, args, {{"data", train_manifest}});
      const auto alphabet = config_alphabet(config.model);
      const auto data = load_dataset(train_manifest, alphabet);
      if (data.num_writers() != config.model.num_writers) {
        info("setting model.num_writers=" + std::to_string(data.num_writers()) + " from the data");
        config.set("num_writers", std::to_string(data.num_writers()));
        write_run_files(train_c.out, "train", config, args, {{"data", train_manifest}});
      }
      auto models = ModelBundle::create(config, alphabet);
      CurriculumOptions options;
      options.out_dir = train_c.out;
      options.warn = warn;
      const int log_every = std::max(1, config.training.log_every);
      options.on_step = [&](const LossReport& r) {
        if (r.iteration % log_every == 0) {
          std::cerr << "iter " << r.iteration << " L_d " << r.d_loss << " L_w " << r.w_loss
                    << " L_r " << r.r_loss << " G " << r.total << '\n';
        }
      };
      std::optional<FeatureExtractor> extractor;
      if (!train_extractor_path.empty()) {
        need(train_extractor_path, "extractor checkpoint");
        extractor = load_extractor(train_extractor_path);
        const auto shape = stage_plan(config.training).front();
        options.evaluator = [&, shape](Synthesizer& synth) {
          // vFID between real lines and their re-synthesis from the same writer.
          torch::NoGradGuard no_grad;
          std::mt19937_64 rng(config.training.seed);
          std::vector<GrayImage> real, fake;
          const int width = grid_width(shape.max_width);
          const std::size_t count = std::min<std::size_t>(64, data.size());
          for (std::size_t i = 0; i < data.size() && real.size() < count; ++i) {
            const auto& s = data.samples()[i];
            if (s.char_count > shape.text_length || s.image.width() > width) {
              continue;
            }
            const auto style = data.sample_style_set(s.writer_index, config.model.style_images, rng, i);
            const auto padded = pad_text(alphabet, s.transcription, shape.text_length);
            const auto symbols =
                torch::tensor(std::vector<int64_t>(padded.symbols.begin(), padded.symbols.end()))
                    .unsqueeze(0);
            const auto out = to_data_range(synth->forward(
                style_tensor(style, config.model.style_images, width).unsqueeze(0), symbols));
            real.push_back(s.image);
            fake.push_back(GrayImage::from_tensor(out[0][0]));
          }
          return vfid(*extractor, real, fake);
        };
      }
      const auto result = run_curriculum(models, data, options);
      for (const auto& st : result.stages) {
        std::cout << "stage " << st.category << (st.skipped ? " skipped" : "") << " iterations "
                  << st.iterations << " lines " << st.sample_ids.size() << " checkpoint "
                  << st.checkpoint.string() << '\n';
      }
      std::cout << "final " << result.final_checkpoint.string() << '\n';
      return 0;
    }

    if (gen->parsed()) {
      need(gen_ckpt, "checkpoint");
      need(gen_style, "style directory");
      auto models = load_checkpoint(gen_ckpt);
      const auto config = effective_config(gen_c, &models.config);
      write_run_files(gen_c.out, "generate", config, args, {{"checkpoint", gen_ckpt}, {"style", gen_style}});
      std::vector<std::string> names;
      const auto images = load_images(gen_style, &names);
      const int k = models.config.model.style_images;
      const auto style = style_from_images(images, k, config.training.seed);
      const auto [width, text_length] = inference_shape(models, style, gen_width);
      torch::manual_seed(config.training.seed);
      models.synthesizer->eval();
      torch::NoGradGuard no_grad;
      const auto out = models.synthesizer->forward(style_tensor(style, k, width).unsqueeze(0),
                                                   symbols_of(models, gen_text, text_length));
      save_generated(gen_c.out / gen_name, out);
      std::ofstream prov(gen_c.out / "provenance.tsv");
      prov << "image\ttext\tcheckpoint\tconfig_hash\tstyle_source\tstyle_images\twidth\ttext_length\tseed\n";
      prov << escape_field(gen_name) << '\t' << escape_field(gen_text) << '\t'
           << escape_field(fs::absolute(gen_ckpt).string()) << '\t' << models.config.hash() << '\t'
           << escape_field(gen_style) << '\t'
           << escape_field(join(std::vector<std::string>(names.begin(),
                                                         names.begin() + std::min<std::size_t>(k, names.size())),
                                ','))
           << '\t' << width << '\t' << text_length << '\t' << config.training.seed << '\n';
      std::cout << (gen_c.out / gen_name).string() << '\n';
      return 0;
    }

    if (interp->parsed()) {
      need(interp_ckpt, "checkpoint");
      need(interp_a, "style directory");
      need(interp_b, "style directory");
      auto models = load_checkpoint(interp_ckpt);
      const auto config = effective_config(interp_c, &models.config);
      write_run_files(interp_c.out, "interpolate", config, args,
                      {{"checkpoint", interp_ckpt}, {"style_a", interp_a}, {"style_b", interp_b}});
      const int k = models.config.model.style_images;
      const auto style_a = style_from_images(load_images(interp_a), k, config.training.seed);
      const auto style_b = style_from_images(load_images(interp_b), k, config.training.seed + 1);
      StyleSet both = style_a;
      both.images.insert(both.images.end(), style_b.images.begin(), style_b.images.end());
      const auto [width, text_length] = inference_shape(models, both, interp_width);
      models.synthesizer->eval();
      torch::NoGradGuard no_grad;
      const auto frames = interpolate_styles(models.synthesizer, symbols_of(models, interp_text, text_length),
                                             style_tensor(style_a, k, width).unsqueeze(0),
                                             style_tensor(style_b, k, width).unsqueeze(0), interp_steps);
      std::ofstream prov(interp_c.out / "provenance.tsv");
      prov << "image\tlambda\ttext\tcheckpoint\n";
      for (std::size_t i = 0; i < frames.size(); ++i) {
        std::ostringstream name;
        name << "frame_" << std::setw(2) << std::setfill('0') << i << ".png";
        save_generated(interp_c.out / name.str(), frames[i]);
        prov << name.str() << '\t' << static_cast<double>(i) / (frames.size() - 1) << '\t'
             << escape_field(interp_text) << '\t' << escape_field(interp_ckpt) << '\n';
      }
      std::cout << "wrote " << frames.size() << " frames to " << interp_c.out.string() << '\n';
      return 0;
    }

    if (vf->parsed()) {
      need(vfid_a, "set A");
      need(vfid_b, "set B");
      const auto config = effective_config(vfid_c);
      write_run_files(vfid_c.out, "vfid", config, args, {{"set_a", vfid_a}, {"set_b", vfid_b}});
      auto extractor = extractor_or_default(vfid_extractor, config.training.seed);
      const auto a = load_images(vfid_a);
      const auto b = load_images(vfid_b);
      const double v = vfid(extractor, a, b, warn);
      std::ostringstream report;
      report << std::setprecision(10);
      report << "{\n  \"vfid\": " << v << ",\n";
      if (vfid_also_fid) {
        report << "  \"fid\": " << fid(extractor, a, b, warn) << ",\n";
      }
      report << "  \"set_a\": \"" << one_line(vfid_a) << "\", \"count_a\": " << a.size() << ",\n";
      report << "  \"set_b\": \"" << one_line(vfid_b) << "\", \"count_b\": " << b.size() << ",\n";
      report << "  \"extractor\": \"" << (vfid_extractor.empty() ? "untrained" : one_line(vfid_extractor))
             << "\"\n}\n";
      std::ofstream(vfid_c.out / "vfid_report.txt") << report.str();
      std::cout << std::setprecision(10) << v << '\n' << report.str();
      return 0;
    }

    if (hist->parsed()) {
      need(hist_manifest, "manifest");
      const auto config = effective_config(hist_c);
      write_run_files(hist_c.out, "histograms", config, args, {{"data", hist_manifest}});
      const auto data = load_dataset(hist_manifest, config_alphabet(config.model));
      FeatureExtractor extractor{nullptr};
      if (!hist_extractor.empty()) {
        need(hist_extractor, "extractor checkpoint");
        extractor = load_extractor(hist_extractor);
      } else {
        torch::manual_seed(config.training.seed);
        extractor = FeatureExtractor(extractor_from_string(hist_kind), hist_width, data.num_writers());
        hist_train.seed = config.training.seed;
        train_extractor(extractor, data, hist_train);
        save_extractor(hist_c.out / "extractor.ckpt", extractor);
        info("extractor writer accuracy " + std::to_string(writer_accuracy(extractor, data)));
      }
      hist_opt.seed = config.training.seed;
      const auto study = fid_vfid_histograms(extractor, data, hist_opt);
      write_histograms_tsv(hist_c.out / "histograms.tsv", study);
      std::cout << "fid_overlap " << study.fid.overlap << "\nvfid_overlap " << study.vfid.overlap << '\n';
      return 0;
    }

    if (htr->parsed()) {
      auto config = effective_config(htr_c);
      std::vector<std::pair<std::string, fs::path>> inputs;
      for (const auto& [name, path] : std::vector<std::pair<std::string, std::string>>{
               {"data", htr_manifest}, {"test", htr_test}, {"target", htr_target},
               {"target_test", htr_target_test}, {"lexicon", htr_lexicon}, {"checkpoint", htr_generator}}) {
        if (!path.empty()) {
          need(path, name == "checkpoint" ? "checkpoint" : name + " manifest");
          inputs.emplace_back(name, path);
        }
      }
      if (htr_experiment.empty()) {
        require(!htr_manifest.empty(), ErrorKind::ConfigError, "htr-train needs --data or --experiment");
        write_run_files(htr_c.out, "htr-train", config, args, inputs);
        const auto alphabet = config_alphabet(config.model);
        const auto data = load_dataset(htr_manifest, alphabet);
        torch::manual_seed(config.training.seed);
        Recognizer recognizer(config.model, alphabet.size());
        if (config.htr.use_joint_recognizer) {
          require(!htr_generator.empty(), ErrorKind::ConfigError,
                  "use_joint_recognizer needs --checkpoint");
          auto models = load_checkpoint(htr_generator);
          copy_parameters(*models.recognizer, *recognizer);
        }
        HtrTrainOptions options;
        options.iterations = config.htr.iterations;
        options.batch_size = config.htr.batch_size;
        options.lr = config.htr.lr;
        options.text_length = std::min(config.training.max_chars, config.model.max_text_length);
        options.augment = config.htr.augment;
        options.seed = config.training.seed;
        train_recognizer(recognizer, data, options);
        save_recognizer(htr_c.out / "recognizer.ckpt", recognizer, config, alphabet);
        std::cout << (htr_c.out / "recognizer.ckpt").string() << '\n';
        return 0;
      }

      require(!htr_generator.empty(), ErrorKind::ConfigError, "--experiment needs --checkpoint");
      auto models = load_checkpoint(htr_generator);
      // Recognizer shape follows the generator; HTR and seed settings follow the CLI.
      const auto htr_settings = config.htr;
      const auto seed = config.training.seed;
      config = effective_config(htr_c, &models.config);
      config.htr = htr_settings;
      config.training.seed = seed;
      write_run_files(htr_c.out, "htr-train", config, args, inputs);
      const int text_length = std::min(stage_plan(config.training).back().text_length,
                                       config.model.max_text_length);
      config.training.max_chars = text_length;

      HtrExperimentData data;
      if (htr_toy) {
        data = make_toy_htr_data(seed, 2, 2, 40, text_length, stage_plan(config.training).back().max_width);
      } else {
        for (const auto& [flag, path] : std::vector<std::pair<std::string, std::string>>{
                 {"--data", htr_manifest}, {"--test", htr_test}, {"--target", htr_target},
                 {"--target-test", htr_target_test}}) {
          require(!path.empty(), ErrorKind::ConfigError, "experiments need " + flag + " or --toy");
        }
        data.train = load_dataset(htr_manifest, models.alphabet);
        data.test = load_dataset(htr_test, models.alphabet);
        data.target_pool = load_dataset(htr_target, models.alphabet);
        data.target_test = load_dataset(htr_target_test, models.alphabet);
        if (!htr_lexicon.empty()) {
          std::ifstream in(htr_lexicon);
          for (std::string line; std::getline(in, line);) {
            if (!line.empty()) {
              data.lexicon.push_back(line);
            }
          }
        } else {
          for (const auto& s : data.train.samples()) {
            data.lexicon.push_back(s.transcription);
          }
        }
      }
      std::vector<std::string> modes;
      if (htr_experiment == "all") {
        modes = {"supervised", "transfer", "fewshot"};
      } else {
        modes = {htr_experiment};
      }
      std::vector<HtrTableRow> rows;
      for (const auto& mode : modes) {
        const auto part = run_htr_experiment(mode, models, data, config, info);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      const auto table = format_htr_table(rows);
      std::ofstream(htr_c.out / "htr_table.tsv") << table;
      std::cout << table;
      return 0;
    }

    if (heval->parsed()) {
      need(eval_model, "recognizer checkpoint");
      need(eval_manifest, "manifest");
      RunConfig model_config;
      Alphabet alphabet = Alphabet::iam();
      auto recognizer = load_recognizer(eval_model, &model_config, &alphabet);
      const auto config = effective_config(eval_c, &model_config);
      write_run_files(eval_c.out, "htr-eval", config, args,
                      {{"recognizer", eval_model}, {"data", eval_manifest}});
      torch::manual_seed(config.training.seed);
      const auto data = load_dataset(eval_manifest, alphabet);
      const int max_length = std::max(data.max_chars(), config.training.max_chars);
      const auto eval = evaluate_recognizer(recognizer, data, max_length);
      write_predictions_tsv(eval_c.out / "predictions.tsv", eval);
      std::cout << std::fixed << std::setprecision(6) << "CER " << eval.cer() << "\nWER " << eval.wer()
                << '\n';
      return 0;
    }
  } catch (const MissingInput& e) {
    report_error("MissingInput", e.what());
    return kExitMissingInput;
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
