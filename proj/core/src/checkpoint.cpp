#include "avid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>
#include <torch/torch.h>

#include "avid/errors.hpp"

namespace avid {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'A', 'V', 'I', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

const char* kind_name(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::inpainter: return "inpainter";
    case CheckpointKind::detector: return "detector";
    case CheckpointKind::pair: return "pair";
  }
  return "pair";
}

CheckpointKind parse_kind(const std::string& s, const std::filesystem::path& path) {
  if (s == "inpainter") return CheckpointKind::inpainter;
  if (s == "detector") return CheckpointKind::detector;
  if (s == "pair") return CheckpointKind::pair;
  throw LoadError("unknown checkpoint kind '" + s + "': " + path.string());
}

json arch_json(const ArchConfig& arch) {
  json layers = json::array();
  for (const auto& l : arch.detector.layers) layers.push_back({l.in_channels, l.out_channels, l.kernel, l.stride});
  return {
      {"inpainter", {{"widths", arch.inpainter.widths}, {"leaky_slope", arch.inpainter.leaky_slope}, {"input_bias", arch.inpainter.input_bias}}},
      {"detector", {{"layers", layers}, {"leaky_slope", arch.detector.leaky_slope}}},
      {"input_height", arch.input_height},
      {"input_width", arch.input_width},
  };
}

ArchConfig arch_from(const json& j) {
  ArchConfig a;
  a.inpainter.widths = j.at("inpainter").at("widths").get<std::vector<int>>();
  a.inpainter.leaky_slope = j.at("inpainter").at("leaky_slope").get<double>();
  a.inpainter.input_bias = j.at("inpainter").value("input_bias", false);
  a.detector.layers.clear();
  for (const auto& l : j.at("detector").at("layers")) {
    a.detector.layers.push_back({l.at(0).get<int>(), l.at(1).get<int>(), l.at(2).get<int>(), l.at(3).get<int>()});
  }
  a.detector.leaky_slope = j.at("detector").at("leaky_slope").get<double>();
  a.input_height = j.value("input_height", std::int64_t{0});
  a.input_width = j.value("input_width", std::int64_t{0});
  return a;
}

}  // namespace

std::string arch_to_json(const ArchConfig& arch) { return arch_json(arch).dump(); }

ArchConfig arch_from_json(const std::string& text) {
  try {
    return arch_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed architecture description: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json table = json::array();
  std::vector<torch::Tensor> payload;
  std::int64_t offset = 0;
  auto add = [&](const std::string& group, const ParameterSnapshot& params) {
    for (const auto& [name, value] : params) {
      auto t = value.detach().to(torch::kFloat32).contiguous();
      table.push_back({{"name", group + "/" + name}, {"shape", t.sizes().vec()}, {"offset", offset}, {"count", t.numel()}});
      offset += t.numel();
      payload.push_back(std::move(t));
    }
  };
  add("inpainter", ckpt.inpainter);
  add("detector", ckpt.detector);
  add("extra", ckpt.extra);

  const json header = {
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"kind", kind_name(ckpt.kind)},
      {"arch", arch_json(ckpt.arch)},
      {"step", ckpt.step},
      {"rng_state", ckpt.rng_state},
      {"tensors", table},
  };
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t hlen = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : payload) {
    out.write(reinterpret_cast<const char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());

  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t hlen = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw LoadError("not an avid checkpoint: " + path.string());
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version) || version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  }
  if (!in.read(reinterpret_cast<char*>(&hlen), sizeof hlen) || hlen > (1u << 30)) {
    throw LoadError("corrupt checkpoint header: " + path.string());
  }
  std::string text(hlen, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(hlen))) throw LoadError("truncated checkpoint header: " + path.string());

  Checkpoint ckpt;
  try {
    const auto header = json::parse(text);
    if (header.at("format").get<std::string>() != kCheckpointFormat) throw LoadError("bad format tag: " + path.string());
    ckpt.kind = parse_kind(header.at("kind").get<std::string>(), path);
    ckpt.arch = arch_from(header.at("arch"));
    ckpt.step = header.at("step").get<long long>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();

    std::int64_t expected_offset = 0;
    for (const auto& entry : header.at("tensors")) {
      const auto full = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const auto count = entry.at("count").get<std::int64_t>();
      if (entry.at("offset").get<std::int64_t>() != expected_offset) throw LoadError("non-contiguous tensor table: " + path.string());
      expected_offset += count;

      auto t = torch::empty(shape, torch::kFloat32);
      if (t.numel() != count) throw LoadError("tensor " + full + " shape/count mismatch: " + path.string());
      if (!in.read(reinterpret_cast<char*>(t.data_ptr<float>()), static_cast<std::streamsize>(count * sizeof(float)))) {
        throw LoadError("truncated checkpoint payload: " + path.string());
      }
      const auto slash = full.find('/');
      const auto group = full.substr(0, slash), name = full.substr(slash + 1);
      if (group == "inpainter") {
        ckpt.inpainter.emplace_back(name, t);
      } else if (group == "detector") {
        ckpt.detector.emplace_back(name, t);
      } else {
        ckpt.extra.emplace_back(name, t);
      }
    }
  } catch (const json::exception& e) {
    throw LoadError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, Models& models) {
  if (!models.inpainter || !models.detector) models = init_models(ckpt.arch, 0);
  if (!ckpt.inpainter.empty()) restore(*models.inpainter, ckpt.inpainter);
  if (!ckpt.detector.empty()) restore(*models.detector, ckpt.detector);
}

}  // namespace avid
