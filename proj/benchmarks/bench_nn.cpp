#include "spu/policy_net.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace spu::nn;

namespace {

void BM_PolicyForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  PolicyNet net(HeadKind::categorical, 25, 4);
  net.init(rng);
  const Matrix states = Matrix::Random(25, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(states));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PolicyForward)->Arg(64)->Arg(2048);

void BM_PolicyBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  PolicyNet net(HeadKind::gaussian, 4, 2);
  net.init(rng);
  const Matrix states = Matrix::Random(4, state.range(0));
  const auto out = net.forward(states);
  ActionBatch actions;
  actions.values = Matrix::Random(2, state.range(0));
  const auto upstream = d_log_prob(out, actions);
  for (auto _ : state) benchmark::DoNotOptimize(net.backward(out, upstream));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PolicyBackward)->Arg(64)->Arg(2048);

void BM_ValueMse(benchmark::State& state) {
  std::mt19937_64 rng(3);
  ValueNet critic(4);
  critic.init(rng);
  const Matrix states = Matrix::Random(4, 64);
  const Vector targets = Vector::Random(64);
  Vector grad;
  for (auto _ : state) benchmark::DoNotOptimize(critic.mse_loss(states, targets, &grad));
}
BENCHMARK(BM_ValueMse);

}  // namespace
