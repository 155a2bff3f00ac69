#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "avid/models.hpp"
#include "avid/training.hpp"

namespace {

avid::ArchConfig quick_arch(int base_width, std::int64_t side) {
  avid::ArchConfig arch;
  arch.inpainter.widths = {base_width, 2 * base_width, 4 * base_width, 8 * base_width};
  arch.detector = avid::DetectorSpec::defaults();
  arch.input_height = side;
  arch.input_width = side;
  return arch;
}

void InpainterForward(benchmark::State& state) {
  torch::set_num_threads(1);
  auto models = avid::init_models(quick_arch(static_cast<int>(state.range(0)), 140), 1);
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({16, 3, 140, 140});
  for (auto _ : state) benchmark::DoNotOptimize(models.inpainter->forward(x));
}
BENCHMARK(InpainterForward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void InpainterForwardBackward(benchmark::State& state) {
  torch::set_num_threads(1);
  auto models = avid::init_models(quick_arch(static_cast<int>(state.range(0)), 140), 1);
  const auto x = torch::rand({16, 3, 140, 140});
  for (auto _ : state) {
    models.inpainter->zero_grad();
    models.inpainter->forward(x).sum().backward();
  }
}
BENCHMARK(InpainterForwardBackward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void DetectorForward(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto side = state.range(0);
  auto models = avid::init_models(quick_arch(8, side), 1);
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({16, 3, side, side});
  for (auto _ : state) benchmark::DoNotOptimize(models.detector->forward(x));
}
BENCHMARK(DetectorForward)->Arg(140)->Arg(308)->Unit(benchmark::kMillisecond);

void TrainStep(benchmark::State& state) {
  torch::set_num_threads(1);
  auto models = avid::init_models(quick_arch(static_cast<int>(state.range(0)), 140), 1);
  avid::TrainConfig cfg;
  avid::TrainState train(models, cfg);
  const auto x = torch::rand({16, 3, 140, 140});
  for (auto _ : state) benchmark::DoNotOptimize(avid::train_step(train, x, cfg));
}
BENCHMARK(TrainStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
