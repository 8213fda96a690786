#include <benchmark/benchmark.h>

#include <vector>

#include "ditra/autograd.hpp"
#include "ditra/config.hpp"
#include "ditra/model.hpp"
#include "ditra/rng.hpp"
#include "ditra/task.hpp"
#include "ditra/trainer.hpp"

using namespace ditra;

namespace {

struct Fixture {
  RunConfig cfg;
  SynthTask task;
  Model model;
  Image img;
  std::vector<int> text;

  Fixture()
      : cfg(make_cfg()),
        task(cfg.task, cfg.task_seed),
        model(cfg, task),
        img(task.render({3, 1, 4, 1, 5, 9}, Domain::A)) {
    model.backbone().freeze();
    auto [t, first] = seq_translate({2, 7, 1, 8, 2, 8}, cfg.backbone.vocab);
    (void)first;
    text = t;
  }

  static RunConfig make_cfg() {
    RunConfig c;
    c.finalize();
    return c;
  }
};

Fixture& fx() {
  static Fixture f;
  return f;
}

void BM_RenderImage(benchmark::State& state) {
  Fixture& f = fx();
  std::vector<int> src = {3, 1, 4, 1, 5, 9};
  for (auto _ : state)
    benchmark::DoNotOptimize(f.task.render(src, Domain::B));
}
BENCHMARK(BM_RenderImage);

void BM_FuseImage(benchmark::State& state) {
  Fixture& f = fx();
  for (auto _ : state) benchmark::DoNotOptimize(f.model.fuse(f.img));
}
BENCHMARK(BM_FuseImage);

void BM_BackboneLogits(benchmark::State& state) {
  Fixture& f = fx();
  Tensor fused = f.model.fuse(f.img);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        f.model.backbone().forward_logits(&fused, f.text, nullptr));
}
BENCHMARK(BM_BackboneLogits);

void BM_AdaptedLoss(benchmark::State& state) {
  Fixture& f = fx();
  Tensor fused = f.model.fuse(f.img);
  for (auto _ : state) {
    AdapterHook hook = f.model.hook(fused, nullptr);
    benchmark::DoNotOptimize(
        f.model.backbone().sequence_loss(&fused, f.text, 0, &hook));
  }
}
BENCHMARK(BM_AdaptedLoss);

void BM_TrainStepBackward(benchmark::State& state) {
  Fixture& f = fx();
  for (auto _ : state) {
    Tape tape;
    Tensor fused = f.model.fuse(f.img);
    AdapterHook hook = f.model.hook(fused, nullptr);
    Tensor loss = f.model.backbone().sequence_loss(&fused, f.text, 0, &hook);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_TrainStepBackward);

void BM_GreedyTranslate(benchmark::State& state) {
  Fixture& f = fx();
  for (auto _ : state)
    benchmark::DoNotOptimize(f.model.translate(f.img, nullptr));
}
BENCHMARK(BM_GreedyTranslate);

}  // namespace

BENCHMARK_MAIN();
