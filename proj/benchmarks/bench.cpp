#include <benchmark/benchmark.h>

#include "dsm/attacks.hpp"
#include "dsm/synthetic.hpp"
#include "dsm/training.hpp"

using namespace dsm;

namespace {

const char* kArchs[] = {"conv_a", "conv_b", "conv_c", "mlp"};

ImageBatch batch(int n, ImageShape shape) {
  Rng rng(1, "bench-batch");
  Tensor t({n, shape.channels, shape.height, shape.width});
  for (double& v : t.values()) v = rng.uniform();
  return ImageBatch(std::move(t));
}

Model model(const char* arch, ImageShape shape) {
  Rng rng(2, "bench-model");
  return make_model(arch, shape, 10, rng);
}

void BM_Forward(benchmark::State& state) {
  const ImageShape shape{1, 16, 16};
  const Model m = model(kArchs[state.range(0)], shape);
  const ImageBatch x = batch(64, shape);
  for (auto _ : state) benchmark::DoNotOptimize(m.logits(x.pixels()));
  state.SetLabel(kArchs[state.range(0)]);
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Forward)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_ForwardBackward(benchmark::State& state) {
  const ImageShape shape{1, 16, 16};
  const Model m = model(kArchs[state.range(0)], shape);
  const ImageBatch x = batch(64, shape);
  std::vector<int> y(64);
  for (int i = 0; i < 64; ++i) y[i] = i % 10;
  const Tensor targets = one_hot_rows(y, 10);
  for (auto _ : state) {
    const ForwardTrace trace = m.forward(x.pixels());
    const auto lg = softmax_cross_entropy(trace.logits(), targets);
    Gradients grads = m.zero_gradients();
    benchmark::DoNotOptimize(m.backward(trace, &lg.grad, nullptr, &grads));
  }
  state.SetLabel(kArchs[state.range(0)]);
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardBackward)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_AttackStep(benchmark::State& state) {
  const ImageShape shape{1, 16, 16};
  const Model m = model("conv_a", shape);
  const ImageBatch x = batch(64, shape);
  std::vector<int> y(64, 3);
  attacks::AttackConfig cfg;
  cfg.iterations = 1;
  const bool diversity = state.range(0) == 1;
  Rng rng(3, "bench-attack");
  for (auto _ : state) {
    if (diversity)
      benchmark::DoNotOptimize(attacks::mdi2_fgsm(m, x, {y, std::nullopt}, cfg, rng));
    else
      benchmark::DoNotOptimize(attacks::mi_fgsm(m, x, {y, std::nullopt}, cfg));
  }
  state.SetLabel(diversity ? "M-DI2-FGSM" : "MI-FGSM");
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_AttackStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_TrainEpoch(benchmark::State& state) {
  ToyDataConfig dc;
  dc.train_per_class = 50;
  dc.test_per_class = 1;
  Rng drng(4, "bench-data");
  const Dataset train = make_toy_dataset(dc, drng).split(Split::train);
  Model teacher = model("conv_a", dc.shape);
  training::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.decay_epochs = {};
  const bool dark = state.range(0) == 1;
  if (dark) {
    cfg.mix = augment::MixKind::cutmix;
    cfg.label = labeling::LabelKind::dark;
  }
  for (auto _ : state) {
    state.PauseTiming();
    Model m = model("conv_a", dc.shape);
    state.ResumeTiming();
    if (dark)
      training::train_dsm(m, &teacher, train, cfg);
    else
      training::train_normal(m, train, cfg);
  }
  state.SetLabel(dark ? "CutMix + dark labels" : "one-hot");
  state.SetItemsProcessed(state.iterations() * train.size());
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
