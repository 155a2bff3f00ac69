#include "avid/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "avid/errors.hpp"
#include "avid/image_io.hpp"

namespace fs = std::filesystem;

namespace avid {
namespace {

// Stroke pixels at or above this intensity form the pixel ground truth of an
// irregular tile.
constexpr std::uint8_t kStrokeThreshold = 128;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    field.erase(0, field.find_first_not_of(" \t\r"));
    field.erase(field.find_last_not_of(" \t\r") + 1);
    out.push_back(field);
  }
  return out;
}

long long parse_int_field(const std::string& text, const fs::path& file, int line) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw LoadError(file.string() + ":" + std::to_string(line) + ": expected an integer, got '" + text + "'");
  }
  return v;
}

/// Rows of integers; a first line that does not start with a digit is a header.
std::vector<std::vector<long long>> read_int_csv(const fs::path& file, std::size_t columns) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open " + file.string());
  std::vector<std::vector<long long>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (lineno == 1 && !fields.empty() && !fields[0].empty() && !std::isdigit(static_cast<unsigned char>(fields[0][0]))) {
      continue;
    }
    if (fields.size() != columns) {
      throw LoadError(file.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                      " columns, got " + std::to_string(fields.size()));
    }
    std::vector<long long> row;
    for (const auto& f : fields) row.push_back(parse_int_field(f, file, lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Files named <prefix><int>.png in `dir`, keyed by the integer.
std::map<long long, fs::path> indexed_pngs(const fs::path& dir, const std::string& prefix) {
  std::map<long long, fs::path> out;
  const std::regex pattern(prefix + "([0-9]+)\\.png");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) out.emplace(std::stoll(m[1].str()), entry.path());
  }
  return out;
}

torch::Tensor read_binary_mask(const fs::path& file, std::int64_t height, std::int64_t width) {
  auto img = read_png_gray(file);
  if (img.size(0) != height || img.size(1) != width) {
    throw LoadError("mask size " + std::to_string(img.size(0)) + "x" + std::to_string(img.size(1)) +
                    " does not match frame size " + std::to_string(height) + "x" + std::to_string(width) +
                    ": " + file.string());
  }
  auto bad = img.ne(0).logical_and(img.ne(255));
  if (bad.any().item<bool>()) throw LoadError("mask is not binary (0/255): " + file.string());
  return img.eq(255);
}

void check_same_size(const torch::Tensor& img, std::int64_t& height, std::int64_t& width, const fs::path& file) {
  if (height == 0) {
    height = img.size(0);
    width = img.size(1);
  } else if (img.size(0) != height || img.size(1) != width) {
    throw LoadError("image size differs from the rest of the dataset: " + file.string());
  }
}

Dataset load_ir_mnist(const fs::path& root, Split split) {
  const fs::path dir = root / to_string(split);
  if (!fs::is_directory(dir)) throw LoadError("missing directory " + dir.string());

  Dataset data;
  data.split = split;
  data.layout = Layout::ir_mnist;

  const auto files = indexed_pngs(dir, "IMG_");
  if (files.empty()) throw LoadError("no IMG_<idx>.png files in " + dir.string());
  long long expected = 0;
  std::int64_t height = 0, width = 0;
  for (const auto& [idx, file] : files) {
    if (idx != expected) throw LoadError("missing image " + (dir / ("IMG_" + std::to_string(expected) + ".png")).string());
    ++expected;
    Sample s;
    s.index = idx;
    s.image = read_png_gray(file);
    check_same_size(s.image, height, width, file);
    data.samples.push_back(std::move(s));
  }

  const fs::path labels = dir / "labels.csv";
  int grid = 0;
  if (fs::exists(labels)) {
    const auto rows = read_int_csv(labels, 4);
    for (const auto& r : rows) {
      if (r[0] < 0 || r[0] >= static_cast<long long>(data.samples.size())) {
        throw LoadError("label row references missing image " + std::to_string(r[0]) + ": " + labels.string());
      }
      if (r[3] != 0 && r[3] != 1) throw LoadError("is_irregular must be 0 or 1: " + labels.string());
      grid = std::max<int>(grid, static_cast<int>(std::max(r[1], r[2])) + 1);
      data.samples[r[0]].tiles.push_back({static_cast<int>(r[1]), static_cast<int>(r[2]), r[3] == 1});
    }
    for (auto& s : data.samples) {
      if (s.tiles.size() != static_cast<std::size_t>(grid) * grid) {
        throw LoadError("image " + std::to_string(s.index) + " has " + std::to_string(s.tiles.size()) +
                        " tile labels, expected " + std::to_string(grid * grid) + ": " + labels.string());
      }
      std::sort(s.tiles.begin(), s.tiles.end(),
                [](const TileLabel& a, const TileLabel& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
      s.irregular = std::any_of(s.tiles.begin(), s.tiles.end(), [](const TileLabel& t) { return t.irregular; });
    }
    if (height % grid != 0 || width % grid != 0) {
      throw LoadError("image size is not a multiple of the tile grid in " + labels.string());
    }
    data.tile_side = static_cast<int>(height / grid);
  } else if (height % kDigitSide == 0 && width % kDigitSide == 0) {
    data.tile_side = kDigitSide;
  }

  const fs::path masks = dir / "masks";
  if (fs::is_directory(masks)) {
    for (auto& s : data.samples) {
      const auto file = masks / ("IMG_" + std::to_string(s.index) + ".png");
      if (!fs::exists(file)) throw LoadError("missing mask " + file.string());
      s.mask = read_binary_mask(file, height, width);
    }
  }
  return data;
}

Dataset load_frame_directory(const fs::path& root, Split split) {
  if (!fs::is_directory(root)) throw LoadError("missing directory " + root.string());
  Dataset data;
  data.split = split;
  data.layout = Layout::frame_directory;

  std::vector<fs::path> clips;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) clips.push_back(entry.path());
  }
  std::sort(clips.begin(), clips.end());

  std::int64_t height = 0, width = 0;
  for (const auto& clip_dir : clips) {
    const auto frames = indexed_pngs(clip_dir, "frame_");
    if (frames.empty()) continue;
    const std::string clip = clip_dir.filename().string();
    const std::size_t first = data.samples.size();

    long long expected = frames.begin()->first;
    for (const auto& [t, file] : frames) {
      if (t != expected) {
        throw LoadError("missing frame " + (clip_dir / ("frame_" + std::to_string(expected) + ".png")).string());
      }
      ++expected;
      Sample s;
      s.clip = clip;
      s.index = t;
      s.image = read_png_gray(file);
      check_same_size(s.image, height, width, file);
      data.samples.push_back(std::move(s));
    }

    const fs::path gt = clip_dir / "gt";
    if (fs::is_directory(gt)) {
      for (std::size_t i = first; i < data.samples.size(); ++i) {
        auto& s = data.samples[i];
        const auto file = gt / ("frame_" + std::to_string(s.index) + ".png");
        if (!fs::exists(file)) throw LoadError("missing mask " + file.string());
        s.mask = read_binary_mask(file, height, width);
        s.irregular = s.mask.any().item<bool>();
      }
    }

    const fs::path labels = clip_dir / "labels.csv";
    if (fs::exists(labels)) {
      std::map<long long, bool> by_frame;
      for (const auto& r : read_int_csv(labels, 2)) {
        if (r[1] != 0 && r[1] != 1) throw LoadError("is_irregular must be 0 or 1: " + labels.string());
        by_frame[r[0]] = r[1] == 1;
      }
      for (std::size_t i = first; i < data.samples.size(); ++i) {
        auto& s = data.samples[i];
        auto it = by_frame.find(s.index);
        if (it == by_frame.end()) {
          throw LoadError("no label for frame " + std::to_string(s.index) + ": " + labels.string());
        }
        s.irregular = it->second;
        by_frame.erase(it);
      }
      if (!by_frame.empty()) {
        throw LoadError("label for nonexistent frame " + std::to_string(by_frame.begin()->first) + ": " +
                        labels.string());
      }
    }
  }
  if (data.samples.empty()) throw LoadError("no clips with frame_<t>.png files in " + root.string());
  return data;
}

void write_ir_mnist(const Dataset& data, const fs::path& root) {
  const fs::path dir = root / to_string(data.split);
  fs::create_directories(dir);
  bool has_labels = false, has_masks = false;
  for (const auto& s : data.samples) {
    write_png_gray(dir / ("IMG_" + std::to_string(s.index) + ".png"), s.image);
    has_labels = has_labels || !s.tiles.empty();
    has_masks = has_masks || s.mask.defined();
  }
  if (has_labels) {
    std::ofstream out(dir / "labels.csv");
    out << "image_index,tile_row,tile_col,is_irregular\n";
    for (const auto& s : data.samples) {
      for (const auto& t : s.tiles) out << s.index << ',' << t.row << ',' << t.col << ',' << (t.irregular ? 1 : 0) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + (dir / "labels.csv").string());
  }
  if (has_masks) {
    for (const auto& s : data.samples) {
      if (s.mask.defined()) write_png_gray(dir / "masks" / ("IMG_" + std::to_string(s.index) + ".png"), to_u8(s.mask));
    }
  }
}

void write_frame_directory(const Dataset& data, const fs::path& root) {
  std::map<std::string, std::vector<const Sample*>> clips;
  for (const auto& s : data.samples) clips[s.clip.empty() ? "clip" : s.clip].push_back(&s);
  for (const auto& [name, samples] : clips) {
    const fs::path dir = root / name;
    fs::create_directories(dir);
    bool labeled = false;
    for (const auto* s : samples) {
      write_png_gray(dir / ("frame_" + std::to_string(s->index) + ".png"), s->image);
      if (s->mask.defined()) write_png_gray(dir / "gt" / ("frame_" + std::to_string(s->index) + ".png"), to_u8(s->mask));
      labeled = labeled || s->irregular.has_value();
    }
    if (labeled) {
      std::ofstream out(dir / "labels.csv");
      out << "frame_index,is_irregular\n";
      for (const auto* s : samples) out << s->index << ',' << (s->irregular.value_or(false) ? 1 : 0) << '\n';
    }
  }
}

Frame to_frame(const torch::Tensor& u8, std::int64_t index, int pad_multiple) {
  return {pad_to_multiple(to_unit(u8), pad_multiple), index};
}

}  // namespace

void NoiseConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("noise gamma must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("noise sigma must be > 0");
}

const char* to_string(Split split) { return split == Split::train ? "train" : "test"; }

const char* to_string(Layout layout) { return layout == Layout::ir_mnist ? "ir_mnist" : "frame_directory"; }

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  throw ConfigError("unknown split '" + text + "' (expected train or test)");
}

Layout parse_layout(const std::string& text) {
  if (text == "ir_mnist") return Layout::ir_mnist;
  if (text == "frame_directory") return Layout::frame_directory;
  throw ConfigError("unknown layout '" + text + "' (expected ir_mnist or frame_directory)");
}

IrMnistSplits generate_ir_mnist(const DigitSource& digits, const IrMnistConfig& cfg) {
  if (cfg.n_train <= 0 || cfg.n_test <= 0) throw std::invalid_argument("n_train and n_test must be positive");
  if (cfg.grid_side < 1) throw std::invalid_argument("grid_side must be >= 1");
  if (cfg.excluded_digit < 0 || cfg.excluded_digit > 9) throw std::invalid_argument("excluded_digit must be 0..9");
  if (!(cfg.irregular_rate_test >= 0.0 && cfg.irregular_rate_test <= 1.0)) {
    throw std::invalid_argument("irregular_rate_test must be in [0,1]");
  }

  // Every sixth sample of each class is reserved for test composites, so the
  // test tiles of normal digits are unseen handwriting.
  std::array<std::vector<std::size_t>, 10> train_pool, test_pool;
  for (int label = 0; label < 10; ++label) {
    const auto idx = digits.indices_of(label);
    if (idx.empty()) throw ConfigError("digit source has no samples of digit " + std::to_string(label));
    for (std::size_t k = 0; k < idx.size(); ++k) (k % 6 == 5 ? test_pool : train_pool)[label].push_back(idx[k]);
    if (train_pool[label].empty()) train_pool[label] = idx;
    if (test_pool[label].empty()) test_pool[label] = idx;
    if (label == cfg.excluded_digit) test_pool[label] = idx;
  }
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits.images[i].size(0) != kDigitSide || digits.images[i].size(1) != kDigitSide) {
      throw ConfigError("digit images must be 28x28");
    }
  }

  std::vector<int> normal_digits;
  for (int d = 0; d < 10; ++d) {
    if (d != cfg.excluded_digit) normal_digits.push_back(d);
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick_normal(0, normal_digits.size() - 1);
  std::bernoulli_distribution irregular(cfg.irregular_rate_test);
  auto pick = [&](const std::vector<std::size_t>& pool) {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  };

  const int side = cfg.grid_side * kDigitSide;
  IrMnistSplits out;
  auto build = [&](Split split, int count, Dataset& data) {
    data.split = split;
    data.layout = Layout::ir_mnist;
    data.tile_side = kDigitSide;
    data.samples.reserve(count);
    const bool test = split == Split::test;
    for (int n = 0; n < count; ++n) {
      Sample s;
      s.index = n;
      s.image = torch::zeros({side, side}, torch::kUInt8);
      if (test) s.mask = torch::zeros({side, side}, torch::kBool);
      for (int r = 0; r < cfg.grid_side; ++r) {
        for (int c = 0; c < cfg.grid_side; ++c) {
          const bool odd = test && irregular(rng);
          const int digit = odd ? cfg.excluded_digit : normal_digits[pick_normal(rng)];
          const std::size_t src = pick((test ? test_pool : train_pool)[digit]);
          using torch::indexing::Slice;
          auto tile = s.image.index({Slice(r * kDigitSide, (r + 1) * kDigitSide), Slice(c * kDigitSide, (c + 1) * kDigitSide)});
          tile.copy_(digits.images[src]);
          if (odd) {
            s.mask.index({Slice(r * kDigitSide, (r + 1) * kDigitSide), Slice(c * kDigitSide, (c + 1) * kDigitSide)})
                .copy_(digits.images[src].ge(kStrokeThreshold));
          }
          s.tiles.push_back({r, c, odd});
          out.tile_log.push_back({split, n, r, c, digit, src});
        }
      }
      s.irregular = std::any_of(s.tiles.begin(), s.tiles.end(), [](const TileLabel& t) { return t.irregular; });
      data.samples.push_back(std::move(s));
    }
  };
  build(Split::train, cfg.n_train, out.train);
  build(Split::test, cfg.n_test, out.test);
  return out;
}

Dataset synthesize_texture_clip(const TextureClipConfig& cfg, const std::string& clip_name) {
  if (cfg.frames <= 0 || cfg.height <= 0 || cfg.width <= 0) throw std::invalid_argument("clip dimensions must be positive");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double phase1 = 2.0 * M_PI * u(rng), phase2 = 2.0 * M_PI * u(rng);
  const double wave1 = 10.0 + 4.0 * u(rng), wave2 = 14.0 + 6.0 * u(rng);
  std::normal_distribution<double> grain(0.0, 0.02);

  constexpr int kObject = 10;
  Dataset data;
  data.layout = Layout::frame_directory;
  data.split = Split::test;
  for (int t = 0; t < cfg.frames; ++t) {
    auto img = torch::empty({cfg.height, cfg.width}, torch::kFloat64);
    auto a = img.accessor<double, 2>();
    const double shift = cfg.speed * t;
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const double v = 0.5 + 0.18 * std::sin(2.0 * M_PI * (x - shift) / wave1 + phase1) *
                                   std::cos(2.0 * M_PI * y / wave2 + phase2) +
                         0.08 * std::sin(2.0 * M_PI * (x + y - 0.5 * shift) / (0.7 * wave2)) + grain(rng);
        a[y][x] = std::clamp(v, 0.0, 0.85);
      }
    }
    Sample s;
    s.clip = clip_name;
    s.index = t;
    s.mask = torch::zeros({cfg.height, cfg.width}, torch::kBool);
    bool odd = false;
    for (const auto& [first, last] : cfg.anomalies) {
      if (t < first || t > last) continue;
      odd = true;
      // A bright block crossing the frame much faster than the texture drifts.
      const int span_x = std::max(1, cfg.width - kObject), span_y = std::max(1, cfg.height - kObject);
      const int k = t - first;
      const int x0 = (4 * k) % span_x;
      const int y0 = (span_y / 3 + 2 * k) % span_y;
      using torch::indexing::Slice;
      const auto ys = Slice(y0, std::min(cfg.height, y0 + kObject)), xs = Slice(x0, std::min(cfg.width, x0 + kObject));
      img.index_put_({ys, xs}, 1.0);
      s.mask.index_put_({ys, xs}, true);
    }
    s.irregular = odd;
    s.image = to_u8(img);
    data.samples.push_back(std::move(s));
  }
  return data;
}

ModelInput preprocess_temporal(const FrameSequence& clip, std::size_t t) {
  if (t < 5 || t >= clip.size()) {
    throw std::out_of_range("preprocess_temporal needs 5 <= t < " + std::to_string(clip.size()) + ", got t=" +
                            std::to_string(t));
  }
  const auto& ref = clip[t].pixels;
  for (std::size_t k = t - 5; k <= t; ++k) {
    if (clip[k].pixels.sizes() != ref.sizes()) throw std::invalid_argument("frames in a clip must share one size");
  }
  auto average = [&](std::size_t k) { return (clip[k].pixels + clip[k - 1].pixels) * 0.5f; };
  return {torch::stack({average(t - 4), average(t - 2), average(t)}).to(torch::kFloat32).contiguous(),
          clip[t].index};
}

ModelInput replicate_channels(const torch::Tensor& gray_u8, std::int64_t index) {
  auto unit = gray_u8.scalar_type() == torch::kUInt8 ? to_unit(gray_u8) : gray_u8.to(torch::kFloat32);
  return {unit.unsqueeze(0).expand({3, unit.size(0), unit.size(1)}).contiguous(), index};
}

torch::Tensor sample_noise(at::IntArrayRef shape, const NoiseConfig& cfg) {
  cfg.validate();
  auto gen = at::make_generator<at::CPUGeneratorImpl>(cfg.seed);
  return torch::randn(shape, gen, torch::TensorOptions().dtype(torch::kFloat32)).mul_(cfg.sigma * cfg.gamma);
}

torch::Tensor inject_noise(const torch::Tensor& batch, const NoiseConfig& cfg) {
  cfg.validate();
  if (cfg.gamma == 0.0) return batch.clone();
  auto noise = sample_noise(batch.sizes(), cfg).to(batch.scalar_type());
  return (batch + noise).clamp_(0.0, 1.0);
}

NoisyInput inject_noise(const ModelInput& x, const NoiseConfig& cfg) {
  return {inject_noise(x.channels, cfg), cfg.gamma, cfg.seed};
}

torch::Tensor pad_to_multiple(const torch::Tensor& image, int multiple) {
  if (multiple <= 1 || !image.defined()) return image;
  const auto h = image.size(-2), w = image.size(-1);
  const auto ph = (multiple - h % multiple) % multiple, pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return image;
  if (image.scalar_type() == torch::kBool) {
    return torch::constant_pad_nd(image.to(torch::kUInt8), {0, pw, 0, ph}, 0).to(torch::kBool);
  }
  return torch::constant_pad_nd(image, {0, pw, 0, ph}, 0);
}

Dataset load_dataset(const fs::path& root, Layout layout, Split split) {
  if (!fs::exists(root)) throw LoadError("dataset root does not exist: " + root.string());
  return layout == Layout::ir_mnist ? load_ir_mnist(root, split) : load_frame_directory(root, split);
}

void write_dataset(const Dataset& data, const fs::path& root) {
  if (data.layout == Layout::ir_mnist) {
    write_ir_mnist(data, root);
  } else {
    write_frame_directory(data, root);
  }
}

InputSet::InputSet(std::shared_ptr<const Dataset> data, int pad_multiple)
    : data_(std::move(data)), pad_multiple_(std::max(1, pad_multiple)) {
  if (!data_) throw std::invalid_argument("InputSet needs a dataset");
  const auto& samples = data_->samples;
  if (data_->layout == Layout::ir_mnist) {
    entries_.resize(samples.size());
    std::iota(entries_.begin(), entries_.end(), std::size_t{0});
  } else {
    std::size_t position = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      position = (i > 0 && samples[i].clip == samples[i - 1].clip) ? position + 1 : 0;
      if (position >= 5) entries_.push_back(i);
    }
  }
  if (!samples.empty()) {
    const auto probe = pad_to_multiple(samples.front().image, pad_multiple_);
    height_ = probe.size(0);
    width_ = probe.size(1);
    for (const auto& s : samples) {
      if (s.image.size(0) != samples.front().image.size(0) || s.image.size(1) != samples.front().image.size(1)) {
        throw std::invalid_argument("all frames of an InputSet must share one size");
      }
    }
  }
}

ModelInput InputSet::input(std::size_t i) const {
  const std::size_t s = entries_.at(i);
  const auto& samples = data_->samples;
  if (data_->layout == Layout::ir_mnist) {
    return replicate_channels(pad_to_multiple(samples[s].image, pad_multiple_), samples[s].index);
  }
  FrameSequence clip;
  clip.reserve(6);
  for (std::size_t k = s - 5; k <= s; ++k) clip.push_back(to_frame(samples[k].image, samples[k].index, pad_multiple_));
  return preprocess_temporal(clip, 5);
}

torch::Tensor InputSet::batch(std::span<const std::size_t> indices) const {
  std::vector<torch::Tensor> items;
  items.reserve(indices.size());
  for (auto i : indices) items.push_back(input(i).channels);
  return torch::stack(items);
}

const Sample& InputSet::sample(std::size_t i) const { return data_->samples.at(entries_.at(i)); }

torch::Tensor InputSet::mask(std::size_t i) const {
  const auto& m = sample(i).mask;
  return m.defined() ? pad_to_multiple(m, pad_multiple_) : m;
}

InputSet InputSet::subset(std::vector<std::size_t> indices) const {
  InputSet out = *this;
  out.entries_.clear();
  for (auto i : indices) out.entries_.push_back(entries_.at(i));
  return out;
}

std::pair<InputSet, InputSet> InputSet::hold_out(double fraction, std::uint64_t seed) const {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("hold-out fraction must be in (0,1)");
  if (size() < 2) throw std::invalid_argument("need at least two inputs to hold some out");
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(size())));
  held = std::clamp<std::size_t>(held, 1, size() - 1);
  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::vector<std::size_t> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  std::sort(rest.begin(), rest.end());
  std::sort(out.begin(), out.end());
  return {subset(rest), subset(out)};
}

}  // namespace avid
