// Acceptance runner: one PASS/FAIL line per criterion.
//
//   avid_acceptance [--work DIR] [--seed N] [--only 2,7] [--allow-fail 1] [--full]
//
// Exit status is 0 when every FAIL is listed in --allow-fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "avid/cli.hpp"
#include "avid/config.hpp"
#include "avid/data.hpp"
#include "avid/detection.hpp"
#include "avid/evaluation.hpp"
#include "avid/models.hpp"
#include "avid/training.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace avid;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Options {
  fs::path work;
  std::uint64_t seed = 1;
  bool full = false;
} opts;

std::ofstream cli_log;

using Clock = std::chrono::steady_clock;
double minutes_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count() / 60.0;
}

// Runs one avid command in-process; its console output goes to cli.log.
void avid_cmd(const std::vector<std::string>& args) {
  std::string joined = "avid";
  for (const auto& a : args) joined += " " + a;
  cli_log << "$ " << joined << std::endl;
  const int code = run_cli(args, cli_log, cli_log);
  cli_log.flush();
  if (code != 0) throw std::runtime_error(joined + " exited with " + std::to_string(code) + " (see cli.log)");
}

std::map<std::string, std::string> read_metrics(const fs::path& file) {
  std::map<std::string, std::string> out;
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  if (out.empty()) throw std::runtime_error("no metrics in " + file.string());
  return out;
}

double metric(const fs::path& file, const std::string& key) { return std::stod(read_metrics(file).at(key)); }

std::string seed_str() { return std::to_string(opts.seed); }

// ---------------------------------------------------------------------------
// Quick-profile pipeline, shared by criteria 2 and 7.

struct QuickRun {
  fs::path root;
  double auc = 0.0;
  double eer = 0.0;
  double train_minutes = 0.0;
};

QuickRun run_quick(const std::string& name) {
  QuickRun r;
  r.root = opts.work / name;
  fs::remove_all(r.root);
  const auto data = r.root / "data", run = r.root / "run", eval = r.root / "eval";
  const std::vector<std::string> common{"--profile", "quick", "--seed", seed_str()};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  avid_cmd(with({"gen-data", "--out", data.string()}));
  const auto t0 = Clock::now();
  avid_cmd(with({"train", "--data", data.string(), "--out", run.string()}));
  r.train_minutes = minutes_since(t0);
  avid_cmd(with({"eval", "--data", data.string(), "--checkpoints", run.string(), "--out", eval.string(), "--level",
                 "frame"}));
  r.auc = metric(eval / "metrics.txt", "auc");
  r.eer = metric(eval / "metrics.txt", "eer");
  return r;
}

std::optional<QuickRun> quick_a;
const QuickRun& first_quick_run() {
  if (!quick_a) quick_a = run_quick("quick_a");
  return *quick_a;
}

double untrained_frame_auc(const fs::path& data) {
  const auto config = preset(Profile::quick);
  const auto set = std::make_shared<const Dataset>(load_dataset(data, Layout::ir_mnist, Split::test));
  const InputSet inputs(set, config.arch.detector.total_stride());
  auto arch = config.arch;
  arch.input_height = inputs.height();
  arch.input_width = inputs.width();
  auto models = init_models(arch, opts.seed);
  const auto grid = region_map(arch.detector, inputs.height(), inputs.width());
  const auto evidence = collect_evidence(inputs, models.inpainter, models.detector);
  return roc(evidence, grid, config.sweep, EvalLevel::frame).auc;
}

// ---------------------------------------------------------------------------

Outcome ac1_full_reproduction() {
  if (!opts.full) {
    return {false,
            "not run: the full profile (308x308 inputs, 64..512-channel inpainter, 20000 steps) needs GPU-scale "
            "compute; one training step takes tens of seconds on this CPU. Rerun with --full to attempt it"};
  }
  const auto root = opts.work / "full";
  fs::remove_all(root);
  const auto data = root / "data", run = root / "run";
  avid_cmd({"gen-data", "--profile", "full", "--seed", seed_str(), "--out", data.string()});
  avid_cmd({"train", "--profile", "full", "--seed", seed_str(), "--data", data.string(), "--out", run.string()});
  avid_cmd({"eval", "--profile", "full", "--data", data.string(), "--checkpoints", run.string(), "--out",
            (root / "frame").string(), "--level", "frame"});
  avid_cmd({"eval", "--profile", "full", "--data", data.string(), "--checkpoints", run.string(), "--out",
            (root / "region").string(), "--level", "region"});
  const double det_eer = metric(root / "frame/metrics.txt", "eer"), det_auc = metric(root / "frame/metrics.txt", "auc");
  const double loc_eer = metric(root / "region/metrics.txt", "eer"), loc_auc = metric(root / "region/metrics.txt", "auc");
  const bool pass = det_eer <= 0.32 && loc_eer <= 0.40 && det_auc > 0.70 && loc_auc > 0.70;
  return {pass, "detection EER " + fmt(det_eer) + " AUC " + fmt(det_auc) + "; localization EER " + fmt(loc_eer) +
                    " AUC " + fmt(loc_auc) + " (need EER <= 0.32 / 0.40, AUC > 0.70)"};
}

Outcome ac2_quick_sanity() {
  const auto& q = first_quick_run();
  const double untrained = untrained_frame_auc(q.root / "data");
  const bool pass = q.auc > 0.60 && q.auc > untrained && std::abs(untrained - 0.5) <= 0.1;
  return {pass, "trained frame AUC " + fmt(q.auc) + " (EER " + fmt(q.eer) + "), untrained AUC " + fmt(untrained) +
                    "; training took " + fmt(q.train_minutes, 1) + " min"};
}

bool same_dataset(const Dataset& a, const Dataset& b, std::string& why) {
  if (a.size() != b.size()) {
    why = "sample count " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a.samples[i], &y = b.samples[i];
    const bool masks = x.mask.defined() == y.mask.defined() && (!x.mask.defined() || torch::equal(x.mask, y.mask));
    if (x.clip != y.clip || x.index != y.index || !torch::equal(x.image, y.image) || x.irregular != y.irregular ||
        !masks) {
      why = "sample " + std::to_string(i) + " (" + x.clip + " frame " + std::to_string(x.index) + ") differs";
      return false;
    }
  }
  return true;
}

Outcome ac3_video_substitute() {
  // Loader round trip on synthetic clips.
  const auto fixtures = opts.work / "frame_fixture";
  fs::remove_all(fixtures);
  Dataset clips;
  clips.layout = Layout::frame_directory;
  clips.split = Split::test;
  for (int k = 0; k < 3; ++k) {
    TextureClipConfig tc;
    tc.frames = 12 + 4 * k;
    tc.height = 36;
    tc.width = 40;
    tc.seed = 100 + k;
    if (k != 1) tc.anomalies = {{6, 9}};
    auto c = synthesize_texture_clip(tc, "clip" + std::to_string(k));
    for (auto& s : c.samples) clips.samples.push_back(std::move(s));
  }
  write_dataset(clips, fixtures);
  const auto loaded = load_dataset(fixtures, Layout::frame_directory, Split::test);
  std::string why;
  if (!same_dataset(clips, loaded, why)) return {false, "frame_directory round trip: " + why};

  // End-to-end on the walking-texture clip with planted objects.
  const auto root = opts.work / "texture";
  fs::remove_all(root);
  const auto data = root / "data", run = root / "run", eval = root / "eval";
  const std::vector<std::string> common{"--profile", "quick", "--seed", seed_str(), "--layout", "frame_directory"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  avid_cmd(with({"gen-data", "--out", data.string()}));
  avid_cmd(with({"train", "--data", data.string(), "--out", run.string(), "--steps", "1500", "--set",
                 "eval_interval=250"}));
  avid_cmd(with({"eval", "--data", data.string(), "--checkpoints", run.string(), "--out", eval.string(),
                 "--level", "frame"}));
  const double auc = metric(eval / "metrics.txt", "auc");
  return {auc >= 0.9, "round trip of " + std::to_string(clips.size()) + " frames exact; 50-frame clip frame AUC " +
                          fmt(auc) + " (need >= 0.9)"};
}

Outcome ac4_metric_oracles() {
  std::mt19937 rng(opts.seed * 31 + 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_auc = 0, worst_eer = 0;
  const int sets = 200;
  for (int trial = 0; trial < sets; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 40);
    std::vector<double> s(n);
    std::vector<bool> p(n);
    const bool coarse = trial % 2 == 0;
    for (int i = 0; i < n; ++i) {
      p[i] = u(rng) < 0.5;
      s[i] = u(rng) + (p[i] ? 0.25 : 0.0);
      if (coarse) s[i] = std::round(s[i] * 8) / 8;  // ties
    }
    p[0] = true;
    p[1] = false;
    std::unique_ptr<bool[]> flags(new bool[n]);
    for (int i = 0; i < n; ++i) flags[i] = p[i];
    const auto c = roc_from_scores(s, std::span<const bool>(flags.get(), n));
    const auto brute = test::enumerate_thresholds(s, p);
    worst_auc = std::max({worst_auc, std::abs(c.auc - test::mann_whitney(s, p)), std::abs(auc_of(brute) - c.auc)});
    worst_eer = std::max({worst_eer, std::abs(c.eer - test::bisect_eer(brute)), std::abs(eer_of(brute) - c.eer)});
  }

  // Every pair of 3x3 masks.
  long mismatches = 0, pairs = 0;
  auto to_mask = [](int bits) {
    auto m = torch::zeros({3, 3}, torch::kBool);
    for (int i = 0; i < 9; ++i) m.view(-1)[i] = ((bits >> i) & 1) != 0;
    return m;
  };
  std::vector<torch::Tensor> all;
  for (int b = 0; b < 512; ++b) all.push_back(to_mask(b));
  for (int g = 0; g < 512; ++g) {
    for (int m = 0; m < 512; ++m) {
      ++pairs;
      if (pixel_level_match(all[m], all[g]) != test::overlap_oracle(all[m], all[g])) ++mismatches;
    }
    if (frame_level_label(all[g]) != (g != 0)) ++mismatches;
  }
  // 2 of 5 ground-truth pixels is exactly 40%.
  const bool boundary = pixel_level_match(to_mask(0b11), to_mask(0b11111)) && !pixel_level_match(to_mask(0b1), to_mask(0b11111));

  const bool pass = worst_auc <= 1e-6 && worst_eer <= 1e-6 && mismatches == 0 && boundary;
  return {pass, std::to_string(sets) + " score sets: max |AUC err| " + fmt(worst_auc, 9) + ", max |EER err| " +
                    fmt(worst_eer, 9) + "; " + std::to_string(pairs) + " mask pairs, " + std::to_string(mismatches) +
                    " mismatches; 40% boundary " + (boundary ? "ok" : "wrong")};
}

Outcome ac5_gradient_checks() {
  DetectorSpec mini{{{3, 2, 5, 2}, {2, 2, 5, 2}, {2, 2, 3, 7}, {2, 2, 1, 1}, {2, 1, 1, 1}}, 0.2};
  ArchConfig arch{InpainterSpec{{2, 3}, 0.2, true}, mini, 0, 0};
  double worst = 0;
  int seeds = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = init_models(arch, 1000 + seed);
    m.inpainter->to(torch::kDouble);
    m.detector->to(torch::kDouble);
    torch::manual_seed(seed);
    const auto x = torch::rand({2, 3, 56, 56}, torch::kDouble);
    const auto noisy = inject_noise(x, NoiseConfig{0.4, 1.0, seed});
    const auto targets = AdversarialTargets::like(torch::zeros({2, 2, 2}, torch::kDouble));
    std::vector<torch::Tensor> ip = m.inpainter->parameters(), dp = m.detector->parameters();
    for (auto form : {LossForm::literal, LossForm::per_cell_bce}) {
      auto d_loss = [&] {
        return detector_loss(m.detector->forward(x), m.detector->forward(m.inpainter->forward(noisy)), targets, form);
      };
      auto i_loss = [&] { return inpainter_loss(m.detector->forward(m.inpainter->forward(noisy)), targets, form); };
      worst = std::max(worst, test::check_gradients(d_loss, dp).max_rel_error);
      worst = std::max(worst, test::check_gradients(i_loss, ip).max_rel_error);
    }
    ++seeds;
  }
  return {worst <= 1e-3, std::to_string(seeds) + " seeds x 2 loss forms x 2 networks; worst relative error " +
                             fmt(worst, 8) + " (need <= 1e-3)"};
}

bool subset(const torch::Tensor& a, const torch::Tensor& b) { return !(a & ~b).any().item<bool>(); }

Outcome ac6_mask_algebra() {
  std::mt19937 rng(opts.seed * 31 + 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  torch::manual_seed(static_cast<std::int64_t>(opts.seed) + 6);
  const auto spec = DetectorSpec::defaults();
  int failures = 0;
  const int instances = 1500;
  for (int trial = 0; trial < instances; ++trial) {
    const int rows = 1 + static_cast<int>(rng() % 3), cols = 1 + static_cast<int>(rng() % 3);
    const auto grid = region_map(spec, 28 * rows, 28 * cols);
    const auto residual = torch::rand({28 * rows, 28 * cols}).pow(1 + static_cast<int>(rng() % 3));
    const ScoreGrid s{torch::rand({rows, cols})};
    const double alpha = u(rng), zeta = std::clamp(u(rng), 1e-3, 1 - 1e-3);
    const auto f = fuse(residual, s, grid, {alpha, zeta});
    bool ok = torch::equal(f.mask.pixels, test::fuse_oracle(residual, s, grid, alpha, zeta));
    ok = ok && subset(f.mask.pixels, f.residual_mask) && subset(f.mask.pixels, f.region_mask);
    const double alpha2 = alpha + (1 - alpha) * u(rng), zeta2 = std::max(1e-4, zeta * u(rng));
    const auto g = fuse(residual, s, grid, {alpha2, zeta2});
    ok = ok && subset(g.residual_mask, f.residual_mask) && subset(g.region_mask, f.region_mask) &&
         subset(g.mask.pixels, f.mask.pixels);
    failures += ok ? 0 : 1;
  }
  return {failures == 0, std::to_string(instances) + " random instances, " + std::to_string(failures) +
                             " violations of containment, monotonicity or the pixel-loop oracle"};
}

Outcome ac7_determinism() {
  const auto& a = first_quick_run();
  const auto b = run_quick("quick_b");
  std::vector<std::string> differing;
  for (const char* f : {"eval/metrics.txt", "eval/roc.csv", "run/detector_best.ckpt", "run/inpainter_best.ckpt",
                        "run/last.ckpt"}) {
    if (test::checksum(a.root / f) != test::checksum(b.root / f)) differing.emplace_back(f);
  }
  std::string detail = "two quick runs with seed " + seed_str() + ": ";
  if (differing.empty()) return {true, detail + "metrics.txt, roc.csv and all three checkpoints are byte-identical"};
  for (const auto& d : differing) detail += d + " ";
  return {false, detail + "differ"};
}

Outcome ac8_preprocessing() {
  std::mt19937 rng(opts.seed * 31 + 8);
  int cases = 0, mismatched = 0;
  for (; cases < 200; ++cases) {
    const std::size_t n = 6 + rng() % 10;
    const std::int64_t h = 1 + rng() % 12, w = 1 + rng() % 12;
    FrameSequence clip;
    torch::manual_seed(static_cast<std::int64_t>(rng()));
    for (std::size_t t = 0; t < n; ++t) clip.push_back({torch::rand({h, w}), static_cast<std::int64_t>(t)});
    const std::size_t t = 5 + rng() % (n - 5);
    const auto x = preprocess_temporal(clip, t);
    const std::size_t taps[3] = {t - 4, t - 2, t};
    for (int c = 0; c < 3; ++c) {
      const auto cur = clip[taps[c]].pixels.accessor<float, 2>();
      const auto prev = clip[taps[c] - 1].pixels.accessor<float, 2>();
      const auto chan = x.channels[c].contiguous();
      const auto got = chan.accessor<float, 2>();
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t xx = 0; xx < w; ++xx)
          if (got[y][xx] != (cur[y][xx] + prev[y][xx]) / 2.0f) ++mismatched;
    }
  }
  return {mismatched == 0, std::to_string(cases) + " random clips, " + std::to_string(mismatched) +
                               " elements differing from (I(t) + I(t-1)) / 2"};
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "IR-MNIST full-profile reproduction", ac1_full_reproduction},
    {2, "quick-profile detection beats chance and the untrained model", ac2_quick_sanity},
    {3, "frame_directory round trip and synthetic-clip pipeline", ac3_video_substitute},
    {4, "metric oracle equivalence", ac4_metric_oracles},
    {5, "loss gradients match finite differences", ac5_gradient_checks},
    {6, "mask algebra properties", ac6_mask_algebra},
    {7, "quick-profile determinism", ac7_determinism},
    {8, "temporal preprocessing exactness", ac8_preprocessing},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"avid acceptance criteria"};
  std::string work = "acceptance_work";
  std::vector<int> only, allow_fail;
  app.add_option("--work", work, "scratch directory for generated data and runs");
  app.add_option("--seed", opts.seed, "seed for every pipeline run");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--allow-fail", allow_fail, "criteria whose FAIL does not fail the run")->delimiter(',');
  app.add_flag("--full", opts.full, "attempt the full-profile reproduction");
  CLI11_PARSE(app, argc, argv);

  opts.work = fs::absolute(work);
  fs::create_directories(opts.work);
  cli_log.open(opts.work / "cli.log", std::ios::trunc);
  torch::set_num_threads(1);
  at::globalContext().setFlushDenormal(true);

  const std::set<int> selected(only.begin(), only.end()), allowed(allow_fail.begin(), allow_fail.end());
  int failed = 0, unexpected = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool ok = o.pass;
    failed += ok ? 0 : 1;
    if (!ok && !allowed.count(c.id)) ++unexpected;
    std::cout << "AC" << c.id << ' ' << (ok ? "PASS" : "FAIL") << "  " << c.title << ": " << o.detail << " ["
              << fmt(minutes_since(t0), 1) << " min]" << (!ok && allowed.count(c.id) ? " (allowed)" : "") << std::endl;
  }
  std::cout << "summary: " << failed << " failed, " << unexpected << " unexpected" << std::endl;
  return unexpected == 0 ? 0 : 1;
}
