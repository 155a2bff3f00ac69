#include "avid/models.hpp"

#include <cmath>
#include <string>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "avid/errors.hpp"

namespace avid {
namespace {

torch::nn::Conv2d make_conv(int in, int out, int kernel, int stride, int padding) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding));
}

std::int64_t valid_output_length(const DetectorSpec& spec, std::int64_t length) {
  for (const auto& layer : spec.layers) {
    if (length < layer.kernel) return 0;
    length = (length - layer.kernel) / layer.stride + 1;
  }
  return length;
}

}  // namespace

DetectorSpec DetectorSpec::defaults() {
  return DetectorSpec{{{3, 32, 5, 2}, {32, 64, 5, 2}, {64, 128, 3, 7}, {128, 64, 1, 1}, {64, 1, 1, 1}}, 0.2};
}

int DetectorSpec::total_stride() const {
  int s = 1;
  for (const auto& l : layers) s *= l.stride;
  return s;
}

int DetectorSpec::receptive_field() const {
  int rf = 1, jump = 1;
  for (const auto& l : layers) {
    rf += (l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return rf;
}

void DetectorSpec::validate() const {
  if (layers.empty()) throw ConfigError("detector needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in_channels <= 0 || l.out_channels <= 0 || l.kernel <= 0 || l.stride <= 0) {
      throw ConfigError("detector layer " + std::to_string(i) + " has a non-positive channel, kernel or stride");
    }
    if (i > 0 && l.in_channels != layers[i - 1].out_channels) {
      throw ConfigError("detector layer " + std::to_string(i) + " input channels do not match the previous layer");
    }
  }
  if (layers.front().in_channels != 3) throw ConfigError("detector must take 3 input channels");
  if (layers.back().out_channels != 1) throw ConfigError("detector must end in a single output channel");
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky slope must be >= 0");
}

void InpainterSpec::validate() const {
  if (widths.empty()) throw ConfigError("inpainter needs at least one level");
  for (int w : widths) {
    if (w <= 0) throw ConfigError("inpainter widths must be positive");
  }
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky slope must be >= 0");
}

void ArchConfig::validate() const {
  inpainter.validate();
  detector.validate();
  if (input_height < 0 || input_width < 0) throw ConfigError("input size must be >= 0");
  const int stride = detector.total_stride();
  if (input_height % stride != 0 || input_width % stride != 0) {
    throw ConfigError("input size must be a multiple of the detector stride " + std::to_string(stride));
  }
}

void check_input_shape(const torch::Tensor& x, std::int64_t height, std::int64_t width) {
  if (x.dim() != 4 || x.size(1) != 3) {
    throw std::invalid_argument("expected an N x 3 x H x W input, got " + std::to_string(x.dim()) + " dims");
  }
  if ((height > 0 && x.size(2) != height) || (width > 0 && x.size(3) != width)) {
    throw std::invalid_argument("input is " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                                ", model expects " + std::to_string(height) + "x" + std::to_string(width));
  }
}

InpainterImpl::InpainterImpl(const InpainterSpec& spec, std::int64_t input_height, std::int64_t input_width)
    : spec_(spec), input_height_(input_height), input_width_(input_width) {
  spec_.validate();
  const auto& w = spec_.widths;
  encoder_ = register_module("encoder", torch::nn::ModuleList());
  up_ = register_module("up", torch::nn::ModuleList());
  merge_ = register_module("merge", torch::nn::ModuleList());
  for (std::size_t level = 0; level < w.size(); ++level) {
    const int in = level == 0 ? 3 : w[level - 1];
    encoder_->push_back(make_conv(in, w[level], 3, level == 0 ? 1 : 2, 1));
    encoder_->push_back(make_conv(w[level], w[level], 3, 1, 1));
  }
  for (std::size_t level = w.size() - 1; level >= 1; --level) {
    up_->push_back(make_conv(w[level], w[level - 1], 3, 1, 1));
    merge_->push_back(make_conv(2 * w[level - 1], w[level - 1], 3, 1, 1));
  }
  head_ = register_module("head", make_conv(w.front(), 3, 1, 1, 0));
}

torch::Tensor InpainterImpl::forward(const torch::Tensor& x) { return torch::sigmoid(logits(x)); }

torch::Tensor InpainterImpl::logits(const torch::Tensor& x) {
  check_input_shape(x, input_height_, input_width_);
  const auto act = torch::nn::functional::LeakyReLUFuncOptions().negative_slope(spec_.leaky_slope);
  namespace F = torch::nn::functional;

  std::vector<torch::Tensor> skips;
  torch::Tensor h = x;
  for (std::size_t level = 0; level < spec_.widths.size(); ++level) {
    h = F::leaky_relu(encoder_[2 * level]->as<torch::nn::Conv2d>()->forward(h), act);
    h = F::leaky_relu(encoder_[2 * level + 1]->as<torch::nn::Conv2d>()->forward(h), act);
    skips.push_back(h);
  }
  for (std::size_t k = 0; k + 1 < spec_.widths.size(); ++k) {
    const auto& skip = skips[skips.size() - 2 - k];
    h = F::interpolate(h, F::InterpolateFuncOptions()
                              .size(std::vector<std::int64_t>{skip.size(2), skip.size(3)})
                              .mode(torch::kNearest));
    h = F::leaky_relu(up_[k]->as<torch::nn::Conv2d>()->forward(h), act);
    h = F::leaky_relu(merge_[k]->as<torch::nn::Conv2d>()->forward(torch::cat({h, skip}, 1)), act);
  }
  auto z = head_->forward(h);
  if (spec_.input_bias) z = z + torch::logit(x.clamp(kInputBiasEpsilon, 1.0 - kInputBiasEpsilon));
  return z;
}

DetectorImpl::DetectorImpl(const DetectorSpec& spec, std::int64_t input_height, std::int64_t input_width)
    : spec_(spec), input_height_(input_height), input_width_(input_width) {
  spec_.validate();
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (const auto& l : spec_.layers) layers_->push_back(make_conv(l.in_channels, l.out_channels, l.kernel, l.stride, 0));
}

DetectorAlignment DetectorImpl::alignment(std::int64_t side) const {
  // Center of output cell 0 for an unpadded input, in input pixels.
  int center = 0, jump = 1;
  for (const auto& l : spec_.layers) {
    center += (l.kernel - 1) / 2 * jump;
    jump *= l.stride;
  }
  const int stride = jump;
  DetectorAlignment a;
  a.lead = center - (stride - 1) / 2;
  const std::int64_t cells = side / stride;
  const int reach = 2 * stride + spec_.receptive_field();
  for (int k = 0; k <= 2 * reach; ++k) {
    const int trail = (k % 2 == 0) ? k / 2 : -(k + 1) / 2;
    if (valid_output_length(spec_, side + a.lead + trail) == cells) {
      a.trail = trail;
      return a;
    }
  }
  throw ConfigError("cannot align detector output with " + std::to_string(side) + "-pixel input");
}

std::pair<std::int64_t, std::int64_t> DetectorImpl::output_grid(std::int64_t height, std::int64_t width) const {
  const int stride = spec_.total_stride();
  if (height <= 0 || width <= 0 || height % stride != 0 || width % stride != 0) {
    throw ConfigError("input " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not a positive multiple of the detector stride " + std::to_string(stride));
  }
  return {height / stride, width / stride};
}

torch::Tensor DetectorImpl::logits(const torch::Tensor& x) {
  check_input_shape(x, input_height_, input_width_);
  const auto [rows, cols] = output_grid(x.size(2), x.size(3));
  const auto ah = alignment(x.size(2)), aw = alignment(x.size(3));
  torch::Tensor h = torch::constant_pad_nd(x, {aw.lead, aw.trail, ah.lead, ah.trail}, 0);
  const auto act = torch::nn::functional::LeakyReLUFuncOptions().negative_slope(spec_.leaky_slope);
  for (std::size_t i = 0; i < layers_->size(); ++i) {
    h = layers_[i]->as<torch::nn::Conv2d>()->forward(h);
    if (i + 1 < layers_->size()) h = torch::nn::functional::leaky_relu(h, act);
  }
  TORCH_CHECK(h.size(2) == rows && h.size(3) == cols, "detector alignment produced a wrong grid");
  return h.squeeze(1);
}

torch::Tensor DetectorImpl::forward(const torch::Tensor& x) { return torch::sigmoid(logits(x)); }

Models init_models(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  Models m;
  m.arch = arch;
  m.inpainter = Inpainter(arch.inpainter, arch.input_height, arch.input_width);
  m.detector = Detector(arch.detector, arch.input_height, arch.input_width);

  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  auto init = [&](torch::nn::Module& module) {
    for (auto& p : module.named_parameters()) {
      auto& t = p.value();
      if (t.dim() == 1) {
        t.zero_();
      } else {
        const double fan_in = static_cast<double>(t.size(1) * t.size(2) * t.size(3));
        t.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
      }
    }
  };
  init(*m.inpainter);
  init(*m.detector);
  return m;
}

ModelInput inpainter_forward(Inpainter& model, const ModelInput& x) {
  if (!x.channels.defined() || x.channels.dim() != 3) throw std::invalid_argument("inpainter input must be 3 x H x W");
  return {model->forward(x.channels.unsqueeze(0)).squeeze(0), x.source_frame_index};
}

ModelInput inpainter_forward(Inpainter& model, const NoisyInput& x) {
  return inpainter_forward(model, ModelInput{x.channels, 0});
}

ScoreGrid detector_forward(Detector& model, const ModelInput& x) {
  if (!x.channels.defined() || x.channels.dim() != 3) throw std::invalid_argument("detector input must be 3 x H x W");
  return {model->forward(x.channels.unsqueeze(0)).squeeze(0)};
}

RegionGrid region_map(const DetectorSpec& spec, std::int64_t height, std::int64_t width) {
  const int stride = spec.total_stride();
  if (height <= 0 || width <= 0 || height % stride != 0 || width % stride != 0) {
    throw ConfigError("input " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by the detector stride " + std::to_string(stride));
  }
  RegionGrid g;
  g.rows = height / stride;
  g.cols = width / stride;
  g.frame_height = height;
  g.frame_width = width;
  g.blocks.reserve(static_cast<std::size_t>(g.rows * g.cols));
  for (std::int64_t r = 0; r < g.rows; ++r) {
    for (std::int64_t c = 0; c < g.cols; ++c) g.blocks.push_back({r * stride, c * stride, stride, stride});
  }
  return g;
}

std::int64_t parameter_count(const DetectorSpec& spec) {
  std::int64_t n = 0;
  for (const auto& l : spec.layers) {
    n += static_cast<std::int64_t>(l.in_channels) * l.out_channels * l.kernel * l.kernel + l.out_channels;
  }
  return n;
}

std::int64_t parameter_count(torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

ParameterSnapshot snapshot(const torch::nn::Module& module) {
  ParameterSnapshot out;
  for (const auto& p : module.named_parameters()) out.emplace_back(p.key(), p.value().detach().clone());
  return out;
}

void restore(torch::nn::Module& module, const ParameterSnapshot& params) {
  torch::NoGradGuard no_grad;
  auto named = module.named_parameters();
  if (named.size() != params.size()) {
    throw std::invalid_argument("parameter count mismatch: module has " + std::to_string(named.size()) +
                                ", snapshot has " + std::to_string(params.size()));
  }
  for (const auto& [name, value] : params) {
    auto* target = named.find(name);
    if (target == nullptr) throw std::invalid_argument("unknown parameter " + name);
    if (target->sizes() != value.sizes()) throw std::invalid_argument("shape mismatch for parameter " + name);
    target->copy_(value);
  }
}

}  // namespace avid
