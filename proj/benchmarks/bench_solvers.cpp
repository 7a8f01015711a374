#include "spu/oracle.hpp"
#include "spu/proximal_solver.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace spu::proximal;

namespace {

ProblemInstance make_instance(ConstraintKind kind, int states, int actions) {
  std::mt19937_64 rng(7);
  return random_instance(kind, rng, states, actions, 0.05 / 1.2, 0.05);
}

void BM_ForwardKlClosedForm(benchmark::State& state) {
  const auto inst = make_instance(ConstraintKind::forward_kl, static_cast<int>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_closed_form(inst));
}
BENCHMARK(BM_ForwardKlClosedForm)->Arg(1)->Arg(10)->Arg(100);

void BM_BackwardKlClosedForm(benchmark::State& state) {
  const auto inst = make_instance(ConstraintKind::backward_kl, static_cast<int>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_closed_form(inst));
}
BENCHMARK(BM_BackwardKlClosedForm)->Arg(1)->Arg(10)->Arg(100);

void BM_LinfClosedForm(benchmark::State& state) {
  const auto inst = make_instance(ConstraintKind::linf, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_closed_form(inst));
}
BENCHMARK(BM_LinfClosedForm)->Arg(64)->Arg(2048);

void BM_Oracle(benchmark::State& state) {
  const auto kind = static_cast<ConstraintKind>(state.range(0));
  const auto inst = make_instance(kind, 4, 4);
  OracleOptions options;
  options.restarts = 2;
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_oracle(inst, options));
}
BENCHMARK(BM_Oracle)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace
