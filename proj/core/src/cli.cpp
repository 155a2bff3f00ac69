#include "avid/cli.hpp"

#include <CLI11.hpp>
#include <torch/torch.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "avid/checkpoint.hpp"
#include "avid/config.hpp"
#include "avid/data.hpp"
#include "avid/detection.hpp"
#include "avid/digits.hpp"
#include "avid/errors.hpp"
#include "avid/evaluation.hpp"
#include "avid/image_io.hpp"
#include "avid/plot.hpp"
#include "avid/training.hpp"

namespace avid {
namespace {

namespace fs = std::filesystem;

/// Invalid input from the user (flags, config values, bad arguments).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

fs::path require_out(const RunConfig& c) {
  if (c.out.empty()) throw UsageError("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

fs::path split_root(const RunConfig& c, Split split) {
  if (c.data.empty()) throw UsageError("--data is required");
  if (!fs::exists(c.data)) throw LoadError("dataset root does not exist: " + c.data.string());
  // frame_directory clips sit under <data>/<split>/<clip>/
  return c.layout == Layout::frame_directory ? c.data / to_string(split) : c.data;
}

InputSet load_inputs(const RunConfig& c, Split split) {
  auto data = std::make_shared<Dataset>(load_dataset(split_root(c, split), c.layout, split));
  InputSet inputs(std::move(data), static_cast<int>(c.arch.detector.total_stride()));
  if (inputs.empty()) throw LoadError("no scorable inputs in " + c.data.string());
  return inputs;
}

Models load_models(const RunConfig& c, std::int64_t height, std::int64_t width) {
  const fs::path dir = c.checkpoints.empty() ? c.out : c.checkpoints;
  const auto det_path = dir / "detector_best.ckpt", inp_path = dir / "inpainter_best.ckpt";
  for (const auto& p : {det_path, inp_path}) {
    if (!fs::exists(p)) throw LoadError("missing checkpoint " + p.string());
  }
  const auto det = load_checkpoint(det_path);
  const auto inp = load_checkpoint(inp_path);
  auto arch = inp.arch;
  arch.detector = det.arch.detector;
  arch.input_height = height;
  arch.input_width = width;
  auto models = init_models(arch, 0);
  apply_checkpoint(inp, models);
  apply_checkpoint(det, models);
  models.inpainter->eval();
  models.detector->eval();
  return models;
}

std::string frame_name(const Sample& s, Layout layout) {
  if (layout == Layout::ir_mnist) return "IMG_" + std::to_string(s.index);
  return (s.clip.empty() ? std::string("clip") : s.clip) + "_frame_" + std::to_string(s.index);
}

int cmd_gen_data(const RunConfig& c, std::ostream& out) {
  const auto root = require_out(c);
  if (c.layout == Layout::frame_directory) {
    // Normal clips for training, one clip with planted objects for test.
    Dataset train;
    train.layout = Layout::frame_directory;
    train.split = Split::train;
    const int clips = 32;
    for (int k = 0; k < clips; ++k) {
      TextureClipConfig tc;
      tc.frames = 60;
      tc.seed = c.seed * 7919 + static_cast<std::uint64_t>(k);
      auto clip = synthesize_texture_clip(tc, "clip" + std::to_string(k));
      for (auto& s : clip.samples) train.samples.push_back(std::move(s));
    }
    TextureClipConfig tc;
    tc.frames = 50;
    tc.seed = c.seed * 7919 + 1000;
    tc.anomalies = {{15, 24}, {35, 44}};
    auto test = synthesize_texture_clip(tc, "clip0");
    test.split = Split::test;
    write_dataset(train, root / "train");
    write_dataset(test, root / "test");
    write_text(root / "config.txt", format_config(c));
    out << "wrote " << train.samples.size() << " train frames and " << test.samples.size() << " test frames to "
        << root.string() << "\n";
    return kExitOk;
  }

  DigitSource digits;
  if (!c.mnist_images.empty() || !c.mnist_labels.empty()) {
    if (c.mnist_images.empty() || c.mnist_labels.empty()) throw UsageError("--mnist-images and --mnist-labels go together");
    digits = load_mnist_idx(c.mnist_images, c.mnist_labels);
  } else {
    digits = synthesize_digits(c.digits_per_class, c.seed);
  }
  const auto splits = generate_ir_mnist(digits, c.generate);
  write_dataset(splits.train, root);
  write_dataset(splits.test, root);
  write_text(root / "config.txt", format_config(c));

  std::size_t irregular_tiles = 0, irregular_images = 0;
  for (const auto& s : splits.test.samples) {
    std::size_t n = 0;
    for (const auto& t : s.tiles) n += t.irregular ? 1 : 0;
    irregular_tiles += n;
    irregular_images += n > 0 ? 1 : 0;
  }
  out << "wrote " << splits.train.samples.size() << " train and " << splits.test.samples.size()
      << " test composites to " << root.string() << "\n";
  out << "test: " << irregular_images << " images with irregular tiles, " << irregular_tiles << " irregular tiles\n";
  return kExitOk;
}

int cmd_train(RunConfig c, std::ostream& out) {
  const auto root = require_out(c);
  const auto all = load_inputs(c, Split::train);
  auto [train, validation] = all.hold_out(c.validation_fraction, c.seed);
  c.arch.input_height = all.height();
  c.arch.input_width = all.width();
  auto models = init_models(c.arch, c.seed);

  std::ofstream log(root / "train.log", std::ios::trunc);
  log << "train=" << train.size() << " validation=" << validation.size() << " height=" << all.height()
      << " width=" << all.width() << "\n";
  log << "inpainter_parameters=" << parameter_count(*models.inpainter)
      << " detector_parameters=" << parameter_count(*models.detector) << "\n";
  FitOptions options;
  options.log = &log;
  const auto result = fit(models, train, validation, c.train, options);
  log << "best_inpainter_step=" << result.best_inpainter_step << " best_reconstruction=" << fixed(result.best_reconstruction)
      << " initial_reconstruction=" << fixed(result.initial.reconstruction) << "\n";
  log << "best_detector_step=" << result.best_detector_step << " best_gap=" << fixed(result.best_gap) << "\n";
  if (!log) throw std::runtime_error("failed writing " + (root / "train.log").string());

  write_fit_checkpoints(result, c.arch, root);
  RunConfig echoed = c;
  echoed.arch.input_height = 0;
  echoed.arch.input_width = 0;
  write_text(root / "config.txt", format_config(echoed));
  out << "trained " << c.train.max_steps << " steps; checkpoints in " << root.string() << "\n";
  out << "best inpainter step " << result.best_inpainter_step << " (validation reconstruction "
      << fixed(result.best_reconstruction) << ", initial " << fixed(result.initial.reconstruction) << ")\n";
  out << "best detector step " << result.best_detector_step << " (validation gap " << fixed(result.best_gap) << ")\n";
  return kExitOk;
}

int cmd_infer(const RunConfig& c, std::ostream& out) {
  c.thresholds.validate();
  const auto root = require_out(c);
  const auto inputs = load_inputs(c, c.split);
  auto models = load_models(c, inputs.height(), inputs.width());
  const auto grid = region_map(models.detector->spec(), inputs.height(), inputs.width());

  std::ostringstream csv;
  csv << "clip,frame_index,frame_score,flagged,label\n";
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& s = inputs.sample(i);
    const auto x = inputs.input(i);
    const auto r = fuse(x, models.inpainter, models.detector, c.thresholds);
    const double score = frame_score(r.residual, r.scores, grid);
    const bool any = r.mask.any();
    flagged += any ? 1 : 0;

    const auto name = frame_name(s, c.layout);
    write_png_gray(root / "masks" / (name + ".png"), to_u8(r.mask.pixels));
    write_png_gray(root / "residuals" / (name + ".png"), to_u8(r.residual.clamp(0.0, 1.0)));
    write_png_gray(root / "scores" / (name + ".png"), to_u8(upsample_scores(r.scores, grid)));
    csv << s.clip << ',' << s.index << ',' << fixed(score, 8) << ',' << (any ? 1 : 0) << ','
        << (s.irregular ? std::to_string(*s.irregular ? 1 : 0) : std::string()) << '\n';
  }
  write_text(root / "frame_scores.csv", csv.str());
  write_text(root / "config.txt", format_config(c));
  out << "scored " << inputs.size() << " frames, " << flagged << " flagged at alpha=" << c.thresholds.alpha
      << " zeta=" << c.thresholds.zeta << "\n";
  return kExitOk;
}

/// Reads the frame_score and label columns of a scores CSV.
void read_scores_csv(const fs::path& path, std::vector<double>& scores, std::vector<bool>& labels) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open scores file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty scores file " + path.string());
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) header.push_back(f);
  }
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw LoadError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto score_col = column("frame_score"), label_col = column("label");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.emplace_back();
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) throw LoadError(where + ": expected " + std::to_string(header.size()) + " columns");
    if (fields[label_col] != "0" && fields[label_col] != "1") throw LoadError(where + ": label must be 0 or 1");
    try {
      std::size_t used = 0;
      scores.push_back(std::stod(fields[score_col], &used));
      if (used != fields[score_col].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw LoadError(where + ": bad frame_score '" + fields[score_col] + "'");
    }
    labels.push_back(fields[label_col] == "1");
  }
}

void write_curve(const fs::path& root, const EvalCurve& curve, const std::string& level, std::size_t items,
                 std::size_t sweep) {
  std::ostringstream metrics;
  metrics << "level = " << level << "\n"
          << "auc = " << fixed(curve.auc) << "\n"
          << "eer = " << fixed(curve.eer) << "\n"
          << "items = " << items << "\n"
          << "sweep_points = " << sweep << "\n"
          << "curve_points = " << curve.points.size() << "\n";
  write_text(root / "metrics.txt", metrics.str());

  std::ostringstream csv;
  csv << "alpha,zeta,fpr,tpr\n";
  for (const auto& p : curve.points) csv << fixed(p.alpha, 8) << ',' << fixed(p.zeta, 8) << ',' << fixed(p.fpr, 8) << ',' << fixed(p.tpr, 8) << '\n';
  write_text(root / "roc.csv", csv.str());
  render_roc_png(curve, root / "roc.png");
}

int cmd_eval(const RunConfig& c, const std::string& scores_file, std::ostream& out) {
  const auto root = require_out(c);
  EvalCurve curve;
  std::size_t items = 0, sweep = 0;
  std::string level = to_string(c.level);
  if (!scores_file.empty()) {
    std::vector<double> scores;
    std::vector<bool> labels;
    read_scores_csv(scores_file, scores, labels);
    const std::unique_ptr<bool[]> flags(new bool[labels.size()]);
    for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i];
    curve = roc_from_scores(scores, std::span<const bool>(flags.get(), labels.size()));
    items = scores.size();
    sweep = curve.points.size();
    level = "frame_score";
  } else {
    const auto inputs = load_inputs(c, c.split);
    auto models = load_models(c, inputs.height(), inputs.width());
    const auto grid = region_map(models.detector->spec(), inputs.height(), inputs.width());
    const auto evidence = collect_evidence(inputs, models.inpainter, models.detector);
    curve = roc(evidence, grid, c.sweep, c.level);
    items = inputs.size();
    sweep = c.sweep.thresholds().size();
  }
  write_curve(root, curve, level, items, sweep);
  write_text(root / "config.txt", format_config(c));
  out << level << " level: AUC " << fixed(curve.auc, 4) << ", EER " << fixed(curve.eer, 4) << " over " << items
      << " items\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial inpainting + patch detection for visual irregularities", "avid"};
  app.require_subcommand(1);
  app.fallthrough();

  KeyValues overrides;
  std::string config_file, scores_file;
  std::vector<std::string> sets;
  auto key_option = [&overrides](CLI::App* target, const std::string& flag, const std::string& key, const std::string& help) {
    target->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
  };

  app.add_option("--config", config_file, "key = value config file");
  key_option(&app, "--seed", "seed", "random seed");
  key_option(&app, "--out", "out", "output directory");
  key_option(&app, "--profile", "profile", "full or quick");
  key_option(&app, "--threads", "threads", "intra-op threads");
  app.add_option("--set", sets, "override any config key (key=value)");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  key_option(gen, "--train", "n_train", "training composites");
  key_option(gen, "--test", "n_test", "test composites");
  key_option(gen, "--grid", "grid_side", "tiles per side");
  key_option(gen, "--exclude", "excluded_digit", "digit kept out of training");
  key_option(gen, "--irregular-rate", "irregular_rate_test", "per-tile chance of the excluded digit in test");
  key_option(gen, "--mnist-images", "mnist_images", "IDX image file (default: procedural digits)");
  key_option(gen, "--mnist-labels", "mnist_labels", "IDX label file");
  key_option(gen, "--layout", "layout", "ir_mnist or frame_directory");

  auto* train = app.add_subcommand("train", "train both networks");
  key_option(train, "--data", "data", "dataset root");
  key_option(train, "--layout", "layout", "ir_mnist or frame_directory");
  key_option(train, "--steps", "max_steps", "training steps");

  auto* infer = app.add_subcommand("infer", "write masks, heatmaps and frame scores");
  auto* eval = app.add_subcommand("eval", "ROC, AUC and EER against ground truth");
  for (auto* sub : {infer, eval}) {
    key_option(sub, "--data", "data", "dataset root");
    key_option(sub, "--layout", "layout", "ir_mnist or frame_directory");
    key_option(sub, "--checkpoints", "checkpoints", "directory with *_best.ckpt (default: --out)");
    key_option(sub, "--split", "split", "train or test");
  }
  key_option(infer, "--alpha", "alpha", "residual threshold");
  key_option(infer, "--zeta", "zeta", "region score threshold");
  key_option(eval, "--level", "level", "frame, pixel or region");
  eval->add_option("--scores", scores_file, "evaluate a frame_scores.csv (frame_score, label) instead of the models");

  std::vector<const char*> argv{"avid"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "avid: " << e.what() << "\n";
    return kExitUsage;
  }

  RunConfig config;
  try {
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      const auto key = s.substr(0, eq);
      if (!is_known_key(key)) throw ConfigError("--set: unknown key '" + key + "'");
      overrides[key] = s.substr(eq + 1);
    }
    const KeyValues file_values = config_file.empty() ? KeyValues{} : read_key_values(config_file);
    config = resolve_config(file_values, overrides);
    config.validate();
  } catch (const std::exception& e) {
    err << "avid: " << e.what() << "\n";
    return kExitUsage;
  }

  torch::set_num_threads(config.threads);
  at::globalContext().setFlushDenormal(true);
  try {
    if (gen->parsed()) return cmd_gen_data(config, out);
    if (train->parsed()) return cmd_train(config, out);
    if (infer->parsed()) return cmd_infer(config, out);
    return cmd_eval(config, scores_file, out);
  } catch (const UsageError& e) {
    err << "avid: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "avid: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "avid: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "avid: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace avid
