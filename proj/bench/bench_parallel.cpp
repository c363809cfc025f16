// Serial reference against the OpenMP kernels. Each pair runs the same
// work; the parallel variant should scale with the available cores.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "oilid/config.hpp"
#include "oilid/scenario_lab.hpp"

using namespace oilid;

namespace {

const config::StudyConfig& study() {
  static const auto s = config::load_study(OILID_CONFIG_DIR "/turbine.cfg");
  return s;
}

const std::array<bearing::CoefficientTable, 2>& tables() {
  static const auto t = config::build_tables(study(), ss::Build::Parallel);
  return t;
}

const ss::Plant& plant() {
  static const ss::Plant p(config::plant_config(study(), tables()), ss::Build::Parallel);
  return p;
}

void BM_CoefficientTable(benchmark::State& state) {
  const auto build = state.range(0) ? ss::Build::Parallel : ss::Build::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(config::build_tables(study(), build));
}

void BM_PlantBuild(benchmark::State& state) {
  const auto build = state.range(0) ? ss::Build::Parallel : ss::Build::Serial;
  const auto cfg = config::plant_config(study(), tables());
  for (auto _ : state) benchmark::DoNotOptimize(ss::Plant(cfg, build));
}

void BM_SensitivitySweep(benchmark::State& state) {
  const auto exec = state.range(0) ? scenario::Execution::Parallel : scenario::Execution::Serial;
  const auto model = config::sensitivity_model(study());
  const std::vector<double> levels = {1.0, 0.9, 0.8};
  for (auto _ : state)
    benchmark::DoNotOptimize(scenario::sensitivity_sweep(model, study().nominal_flowrate, levels, true, exec));
}

void BM_ConstantGrid(benchmark::State& state) {
  const auto exec = state.range(0) ? scenario::Execution::Parallel : scenario::Execution::Serial;
  const auto setup = config::identification_setup(study(), plant());
  auto base = study().scenario;
  base.duration = 3.0;
  base.discard = 1.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(scenario::run_constant_grid(setup, base, {1.0, 0.85}, 1e-6, {1}, exec));
}

}  // namespace

// Argument 0: serial, 1: parallel.
BENCHMARK(BM_CoefficientTable)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_PlantBuild)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_SensitivitySweep)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_ConstantGrid)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

int main(int argc, char** argv) {
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
