#include <benchmark/benchmark.h>

#include "pdp/builtins.hpp"
#include "pdp/hjb_solver.hpp"

namespace {

using namespace pdp;

// Full backward solve; range(0) is n_t per interval.
static void BM_SolveValue(benchmark::State& state) {
  const auto data = builtin_problem("two_control_markov");
  const QuadratureSpec quad{static_cast<std::size_t>(state.range(0)), 0};
  for (auto _ : state) benchmark::DoNotOptimize(solve_value(data, quad));
}
BENCHMARK(BM_SolveValue)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SolvePathDependent(benchmark::State& state) {
  const auto data = builtin_problem("running_max_pathdep");
  for (auto _ : state) benchmark::DoNotOptimize(solve_value(data, {32, 0}));
}
BENCHMARK(BM_SolvePathDependent)->Unit(benchmark::kMillisecond);

// Precomputing the operator plans of the last interval, with and without
// one switch per piece.
static void BM_BuildIntervalOperator(benchmark::State& state) {
  const auto data = builtin_problem("two_control_markov");
  const QuadratureSpec quad{32, static_cast<std::size_t>(state.range(0))};
  const auto v = solve_value(data, quad);
  const std::size_t L = v.lifted_nodes(), M = v.grid().M;
  const std::vector<double> eta(v.table().end() - static_cast<std::ptrdiff_t>(L), v.table().end());
  for (auto _ : state) {
    IntervalOperator op(data, v.grid(), v.partition().knots, M - quad.n_t, M, eta, quad);
    benchmark::DoNotOptimize(op.size());
  }
}
BENCHMARK(BM_BuildIntervalOperator)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_ApplyIntervalOperator(benchmark::State& state) {
  const auto data = builtin_problem("two_control_markov");
  const QuadratureSpec quad{64, 0};
  const auto v = solve_value(data, quad);
  const std::size_t L = v.lifted_nodes(), M = v.grid().M;
  const std::vector<double> eta(v.table().end() - static_cast<std::ptrdiff_t>(L), v.table().end());
  const IntervalOperator op(data, v.grid(), v.partition().knots, M - quad.n_t, M, eta, quad);
  std::vector<double> in(op.size(), 0.0), out(op.size());
  for (auto _ : state) {
    op.apply(in, out);
    in.swap(out);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(op.size()));
}
BENCHMARK(BM_ApplyIntervalOperator);

}  // namespace
