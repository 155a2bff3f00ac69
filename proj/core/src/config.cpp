#include "avid/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "avid/errors.hpp"

namespace avid {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw ConfigError("bad value for " + key + ": '" + text + "'");
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::string join_widths(const std::vector<int>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) s += (i ? "," : "") + std::to_string(widths[i]);
  return s;
}

std::vector<int> parse_widths(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& w : split(text, ',')) out.push_back(parse_number<int>(key, w));
  return out;
}

// in:out:kernel:stride, comma separated
std::string join_layers(const std::vector<ConvSpec>& layers) {
  std::string s;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    s += (i ? "," : "") + std::to_string(l.in_channels) + ":" + std::to_string(l.out_channels) + ":" +
         std::to_string(l.kernel) + ":" + std::to_string(l.stride);
  }
  return s;
}

std::vector<ConvSpec> parse_layers(const std::string& key, const std::string& text) {
  std::vector<ConvSpec> out;
  for (const auto& item : split(text, ',')) {
    const auto f = split(item, ':');
    if (f.size() != 4) throw ConfigError("bad value for " + key + ": layer '" + item + "' needs in:out:kernel:stride");
    out.push_back({parse_number<int>(key, f[0]), parse_number<int>(key, f[1]), parse_number<int>(key, f[2]),
                   parse_number<int>(key, f[3])});
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define AVID_NUM(name, field, T)                                                                        \
  Key {                                                                                                 \
    name, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_number<T>(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                                     \
  }
#define AVID_REAL(name, field)                                                                               \
  Key {                                                                                                      \
    name, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_number<double>(k, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                                                     \
  }
#define AVID_PATH(name, field)                                                                 \
  Key {                                                                                        \
    name, [](RunConfig& c, const std::string&, const std::string& v) { c.field = v; },       \
        [](const RunConfig& c) { return c.field.string(); }                                   \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"profile", [](RunConfig& c, const std::string&, const std::string& v) { c.profile = parse_profile(v); },
       [](const RunConfig& c) { return std::string(to_string(c.profile)); }},
      AVID_NUM("seed", seed, std::uint64_t),
      AVID_PATH("out", out),
      AVID_PATH("data", data),
      AVID_PATH("checkpoints", checkpoints),
      {"layout", [](RunConfig& c, const std::string&, const std::string& v) { c.layout = parse_layout(v); },
       [](const RunConfig& c) { return std::string(to_string(c.layout)); }},
      {"split", [](RunConfig& c, const std::string&, const std::string& v) { c.split = parse_split(v); },
       [](const RunConfig& c) { return std::string(to_string(c.split)); }},
      AVID_PATH("mnist_images", mnist_images),
      AVID_PATH("mnist_labels", mnist_labels),
      AVID_NUM("digits_per_class", digits_per_class, int),

      AVID_NUM("n_train", generate.n_train, int),
      AVID_NUM("n_test", generate.n_test, int),
      AVID_NUM("grid_side", generate.grid_side, int),
      AVID_NUM("excluded_digit", generate.excluded_digit, int),
      AVID_REAL("irregular_rate_test", generate.irregular_rate_test),

      AVID_REAL("learning_rate", train.learning_rate),
      AVID_REAL("momentum", train.momentum),
      AVID_NUM("batch_size", train.batch_size, int),
      AVID_REAL("gamma", train.gamma),
      AVID_REAL("sigma", train.sigma),
      AVID_NUM("max_steps", train.max_steps, long long),
      AVID_NUM("eval_interval", train.eval_interval, long long),
      {"loss_form", [](RunConfig& c, const std::string&, const std::string& v) { c.train.loss_form = parse_loss_form(v); },
       [](const RunConfig& c) { return std::string(to_string(c.train.loss_form)); }},
      AVID_REAL("reconstruction_weight", train.reconstruction_weight),
      AVID_REAL("grad_clip", train.grad_clip),

      {"inpainter_widths",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.inpainter.widths = parse_widths(k, v); },
       [](const RunConfig& c) { return join_widths(c.arch.inpainter.widths); }},
      AVID_REAL("inpainter_leaky_slope", arch.inpainter.leaky_slope),
      {"inpainter_input_bias",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.inpainter.input_bias = parse_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.arch.inpainter.input_bias ? "true" : "false"); }},
      {"detector_layers",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.detector.layers = parse_layers(k, v); },
       [](const RunConfig& c) { return join_layers(c.arch.detector.layers); }},
      AVID_REAL("detector_leaky_slope", arch.detector.leaky_slope),

      AVID_REAL("alpha", thresholds.alpha),
      AVID_REAL("zeta", thresholds.zeta),
      AVID_NUM("sweep_coupled_points", sweep.coupled_points, int),
      AVID_NUM("sweep_grid_side", sweep.grid_side, int),
      AVID_REAL("sweep_alpha_max", sweep.alpha_max),
      {"level", [](RunConfig& c, const std::string&, const std::string& v) { c.level = parse_level(v); },
       [](const RunConfig& c) { return std::string(to_string(c.level)); }},
      AVID_REAL("validation_fraction", validation_fraction),
      AVID_NUM("threads", threads, int),
  };
  return table;
}

#undef AVID_NUM
#undef AVID_REAL
#undef AVID_PATH

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

void sync_seeds(RunConfig& c) {
  c.generate.seed = c.seed;
  c.train.seed = c.seed;
}

}  // namespace

const char* to_string(Profile profile) { return profile == Profile::quick ? "quick" : "full"; }

Profile parse_profile(const std::string& text) {
  if (text == "full") return Profile::full;
  if (text == "quick") return Profile::quick;
  throw ConfigError("unknown profile '" + text + "' (expected full or quick)");
}

bool is_known_key(const std::string& key) { return find_key(key) != nullptr; }

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key + " " + what);
  };
  need(generate.n_train > 0, "n_train", "must be > 0");
  need(generate.n_test > 0, "n_test", "must be > 0");
  need(generate.grid_side >= 1, "grid_side", "must be >= 1");
  need(generate.excluded_digit >= 0 && generate.excluded_digit <= 9, "excluded_digit", "must be 0..9");
  need(generate.irregular_rate_test >= 0.0 && generate.irregular_rate_test <= 1.0, "irregular_rate_test", "must be in [0,1]");
  need(digits_per_class > 0, "digits_per_class", "must be > 0");
  need(validation_fraction > 0.0 && validation_fraction < 1.0, "validation_fraction", "must be in (0,1)");
  need(threads >= 1, "threads", "must be >= 1");
  train.validate();
  arch.inpainter.validate();
  arch.detector.validate();
  thresholds.validate();
  (void)sweep.thresholds();
}

bool RunConfig::operator==(const RunConfig& o) const {
  return profile == o.profile && seed == o.seed && out == o.out && data == o.data && checkpoints == o.checkpoints &&
         layout == o.layout && split == o.split && mnist_images == o.mnist_images && mnist_labels == o.mnist_labels &&
         digits_per_class == o.digits_per_class && generate == o.generate && train == o.train && arch == o.arch &&
         thresholds == o.thresholds && sweep == o.sweep && level == o.level &&
         validation_fraction == o.validation_fraction && threads == o.threads;
}

RunConfig preset(Profile profile) {
  RunConfig c;
  c.profile = profile;
  c.arch.detector = DetectorSpec::defaults();
  if (profile == Profile::quick) {
    c.generate.n_train = 500;
    c.generate.n_test = 200;
    c.generate.grid_side = 5;
    // about half of the 25-tile test composites hold no irregular tile
    c.generate.irregular_rate_test = 0.03;
    c.train.max_steps = 2000;
    c.train.eval_interval = 250;
    c.arch.inpainter.widths = {8, 16, 32, 64};
    c.digits_per_class = 300;
  }
  sync_seeds(c);
  return c;
}

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = source + ":" + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (!is_known_key(key)) throw ConfigError(where + "unknown key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

void apply(RunConfig& config, const KeyValues& values) {
  for (const auto& [name, value] : values) {
    const auto* key = find_key(name);
    if (!key) throw ConfigError("unknown key '" + name + "'");
    try {
      key->set(config, name, value);
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      throw ConfigError(what.rfind(name, 0) == 0 || what.find(name) != std::string::npos ? what : name + ": " + what);
    }
  }
  sync_seeds(config);
}

KeyValues to_key_values(const RunConfig& config) {
  KeyValues out;
  for (const auto& k : keys()) out[k.name] = k.get(config);
  return out;
}

std::string format_config(const RunConfig& config) {
  std::string s;
  for (const auto& k : keys()) s += std::string(k.name) + " = " + k.get(config) + "\n";
  return s;
}

RunConfig resolve_config(const KeyValues& file_values, const KeyValues& overrides) {
  Profile profile = Profile::full;
  if (auto it = overrides.find("profile"); it != overrides.end()) {
    profile = parse_profile(it->second);
  } else if (auto jt = file_values.find("profile"); jt != file_values.end()) {
    profile = parse_profile(jt->second);
  }
  auto config = preset(profile);
  apply(config, file_values);
  apply(config, overrides);
  config.profile = profile;
  return config;
}

}  // namespace avid
