// oilid: coefficient tables, synthetic measurements, flowrate identification,
// error sweeps and plots from the command line.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "oilid/config.hpp"
#include "oilid/csv.hpp"
#include "oilid/errors.hpp"
#include "oilid/units.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace oilid;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kOutEnv = "OILID_OUT_DIR";

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string default_out() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? env : "oilid_out";
}

// Collects what a command read and wrote, then lands next to the outputs.
class Manifest {
 public:
  Manifest(std::string command, std::string out_dir)
      : command_(std::move(command)), dir_(std::move(out_dir)), started_(utc_now()) {
    fs::create_directories(dir_);
  }
  void config(const config::StudyConfig& c) { doc_["config"] = {{"path", c.source}, {"hash", c.hash}}; }
  void input(const std::string& path) {
    doc_["inputs"].push_back({{"path", path}, {"hash", config::content_hash(io::read_text(path))}});
  }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void set(const std::string& key, json value) { doc_["parameters"][key] = std::move(value); }
  std::string write(const std::string& name, const std::string& content) {
    const std::string path = (fs::path(dir_) / name).string();
    io::write_text_atomic(path, content);
    doc_["outputs"].push_back(path);
    return path;
  }
  void finish() {
    doc_["tool"] = "oilid";
    doc_["version"] = kVersion;
    doc_["command"] = command_;
    doc_["started_utc"] = started_;
    doc_["finished_utc"] = utc_now();
    io::write_text_atomic((fs::path(dir_) / (command_ + "_manifest.json")).string(), doc_.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string dir_;
  std::string started_;
  json doc_ = json::object();
};

struct Common {
  std::string config_path;
  std::string out_dir = default_out();
  std::string mode;  // empty: as configured
  int jobs = 0;
};

config::StudyConfig load(const Common& c) {
  config::StudyConfig cfg = config::load_study(c.config_path);
  if (c.mode == "cached") cfg.mode = ss::Discretization::CachedGrid;
  if (c.mode == "exact") cfg.mode = ss::Discretization::Exact;
  return cfg;
}

void apply_jobs(int jobs) {
  if (jobs > 0) omp_set_num_threads(jobs);
}

ss::Plant make_plant(const config::StudyConfig& cfg, ss::Build build = ss::Build::Serial) {
  return ss::Plant(config::plant_config(cfg, config::build_tables(cfg, build)), build);
}

double ml(double q) { return units::m3s_to_ml_min(q); }

std::string truth_csv(const scenario::TruthSeries& t, std::size_t first) {
  io::CsvTable csv;
  csv.header = {"time_s", "q1_true_ml_min", "q2_true_ml_min"};
  for (std::size_t k = first; k < t.time.size(); ++k)
    csv.rows.push_back({t.time[k], ml(t.flowrate[k][0]), ml(t.flowrate[k][1])});
  return io::to_csv_string(csv);
}

// ---- commands ---------------------------------------------------------

int cmd_coeffs(const Common& c, bool parallel) {
  apply_jobs(c.jobs);
  const auto cfg = load(c);
  Manifest m("coeffs", c.out_dir);
  m.config(cfg);
  const auto tables = config::build_tables(cfg, parallel ? ss::Build::Parallel : ss::Build::Serial);
  for (int b = 0; b < 2; ++b) {
    const auto path = m.write("coefficients_b" + std::to_string(b + 1) + ".csv",
                              bearing::coefficient_table_csv(tables[static_cast<std::size_t>(b)]));
    std::cout << "bearing " << b + 1 << ": " << tables[static_cast<std::size_t>(b)].entries.size()
              << " flowrates -> " << path << "\n";
  }
  m.finish();
  return kOk;
}

scenario::ScenarioSpec scenario_for(const config::StudyConfig& cfg, const std::string& path) {
  return path.empty() ? cfg.scenario : config::load_scenario(path, cfg);
}

int cmd_simulate(const Common& c, const std::string& scenario_path, std::optional<std::uint64_t> seed,
                 std::optional<double> sigma_um) {
  const auto cfg = load(c);
  auto spec = scenario_for(cfg, scenario_path);
  if (seed) spec.seed = *seed;
  if (sigma_um) spec.sigma_v = units::um_to_m(*sigma_um);
  spec.validate();
  const ss::Plant plant = make_plant(cfg);
  Manifest m("simulate", c.out_dir);
  m.config(cfg);
  if (!scenario_path.empty()) m.input(scenario_path);
  m.seed(spec.seed);
  m.set("sigma_um", units::m_to_um(spec.sigma_v));
  const auto truth = scenario::simulate_truth(plant, spec);
  const auto meas = scenario::make_measurements(truth, spec);
  const auto path = m.write("measurements.csv", scenario::measurement_csv(meas));
  m.write("truth.csv", truth_csv(truth, truth.time.size() - meas.time.size()));
  m.finish();
  std::cout << meas.time.size() << " samples -> " << path << "\n";
  return kOk;
}

// Final truth flowrate from a scenario, for the error line.
Eigen::Vector2d truth_at(const scenario::ScenarioSpec& spec, double t) {
  return Eigen::Vector2d(spec.profiles[0].value(t), spec.profiles[1].value(t));
}

int cmd_identify(const Common& c, const std::string& scenario_path, const std::string& meas_path,
                 std::optional<double> sigma_um, bool live) {
  const auto cfg = load(c);
  const auto meas = scenario::parse_measurement_csv(io::read_text(meas_path), meas_path);
  if (meas.time.size() < 2) throw SchemaError(meas_path + ": need at least 2 samples");
  const ss::Plant plant = make_plant(cfg);
  Manifest m("identify", c.out_dir);
  m.config(cfg);
  m.input(meas_path);
  std::optional<scenario::ScenarioSpec> spec;
  if (!scenario_path.empty()) {
    m.input(scenario_path);
    spec = config::load_scenario(scenario_path, cfg);
  }
  m.set("mode", cfg.mode == ss::Discretization::Exact ? "exact" : "cached");
  m.set("live", live);

  // R needs the noise level the data was made with: flag, scenario, config.
  const double sigma = sigma_um ? units::um_to_m(*sigma_um) : spec ? spec->sigma_v : cfg.scenario.sigma_v;
  m.set("sigma_um", units::m_to_um(sigma));
  const auto noise = ekf::make_noise(cfg.noise, plant.dof_count(), sigma > 0 ? sigma : 1e-6,
                                     cfg.nominal_flowrate, cfg.sample_period);
  const auto setup = config::identification_setup(cfg, plant);
  ekf::FilterOptions options = setup.filter;

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  double worst_lag = 0.0;
  long late = 0;
  if (live) {
    const double dt = cfg.sample_period;
    options.on_step = [&, dt](long k, double t, const ekf::FilterState& s, const ekf::StepDiagnostics&) {
      const auto due = start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(k * dt));
      const double lag = std::chrono::duration<double>(clock::now() - due).count();
      worst_lag = std::max(worst_lag, lag);
      if (lag > dt) ++late;
      const long n = static_cast<long>(s.estimate.size());
      if (k % 100 == 0)
        std::cout << "live t=" << t << " s  q1=" << ml(s.estimate[n - 2]) << "  q2=" << ml(s.estimate[n - 1])
                  << " ml/min\n" << std::flush;
      std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(
                                                std::chrono::duration<double>((k + 1) * dt)));
    };
  }
  const auto history = ekf::run_filter(
      plant, meas, noise, ekf::initial_state(plant, Eigen::Vector2d::Constant(cfg.nominal_flowrate), noise),
      options);
  const double wall = std::chrono::duration<double>(clock::now() - start).count();

  json summary;
  summary["samples"] = history.time.size();
  summary["converged"] = history.convergence.converged;
  summary["diverged"] = history.diverged;
  if (history.diverged) summary["failure"] = history.failure;
  if (history.convergence.converged) summary["convergence_time_s"] = history.time[static_cast<std::size_t>(history.convergence.index)];
  summary["q1_ml_min"] = ml(history.convergence.mean[0]);
  summary["q2_ml_min"] = ml(history.convergence.mean[1]);
  summary["wall_time_s"] = wall;
  std::cout << "identified q1 = " << ml(history.convergence.mean[0])
            << " ml/min, q2 = " << ml(history.convergence.mean[1]) << " ml/min"
            << (history.convergence.converged ? "" : " (not converged: last-window mean)");
  if (spec && !history.time.empty()) {
    const Eigen::Vector2d q = truth_at(*spec, history.time.back());
    const Eigen::Vector2d err = ((history.convergence.mean - q).array().abs() / q.array() * 100).matrix();
    summary["q1_error_percent"] = err[0];
    summary["q2_error_percent"] = err[1];
    std::cout << "; errors " << err[0] << " %, " << err[1] << " %";
  }
  std::cout << "\n";
  if (live) {
    const bool sustained = !history.diverged && worst_lag < 0.1;
    summary["live"] = {{"worst_lag_s", worst_lag}, {"late_samples", late}, {"sustained_1khz", sustained}};
    std::cout << "live replay: " << history.time.size() << " samples in " << wall << " s, worst lag "
              << worst_lag * 1e3 << " ms, " << late << " late samples, "
              << (sustained ? "sustained 1 kHz" : "did NOT sustain 1 kHz") << "\n";
  }
  m.write("estimates.csv", ekf::estimate_csv(history));
  m.write("identify_summary.json", summary.dump(2) + "\n");
  m.finish();
  if (history.diverged) {
    std::cerr << "error: " << history.failure << "\n";
    return kNumerical;
  }
  return kOk;
}

std::vector<double> fractions(const std::vector<double>& percent) {
  if (percent.empty()) throw UsageError("--levels needs at least one value");
  std::vector<double> f;
  for (double p : percent) {
    if (!(p > 0)) throw UsageError("--levels values must be positive percentages");
    f.push_back(p / 100.0);
  }
  return f;
}

int cmd_sweep(const Common& c, const std::vector<double>& levels_percent, double sigma_um, int seeds,
              std::uint64_t base_seed) {
  const auto levels = fractions(levels_percent);
  if (seeds < 1) throw UsageError("--seeds must be at least 1");
  apply_jobs(c.jobs);
  const auto cfg = load(c);
  const bool parallel = c.jobs != 1;
  const ss::Plant plant = make_plant(cfg, parallel ? ss::Build::Parallel : ss::Build::Serial);
  const auto setup = config::identification_setup(cfg, plant);
  std::vector<std::uint64_t> seed_list;
  for (int s = 0; s < seeds; ++s) seed_list.push_back(base_seed + static_cast<std::uint64_t>(s));
  Manifest m("sweep", c.out_dir);
  m.config(cfg);
  m.seed(base_seed);
  m.set("levels_percent", levels_percent);
  m.set("sigma_um", sigma_um);
  m.set("seeds", seeds);
  const auto grid = scenario::run_constant_grid(setup, cfg.scenario, levels, units::um_to_m(sigma_um),
                                                seed_list,
                                                parallel ? scenario::Execution::Parallel : scenario::Execution::Serial);
  m.write("grid.csv", scenario::grid_csv(grid));
  const json summary = {{"sigma_um", sigma_um},
                        {"average_percent", grid.summary.average},
                        {"std_percent", grid.summary.std_dev},
                        {"max_percent", grid.summary.maximum},
                        {"cells", grid.cells.size()},
                        {"seeds", seeds}};
  m.write("sweep_summary.json", summary.dump(2) + "\n");
  m.finish();
  std::cout << "sigma_v " << sigma_um << " um: average " << grid.summary.average << " %, std "
            << grid.summary.std_dev << " %, max " << grid.summary.maximum << " % over "
            << grid.cells.size() << " cells x " << seeds << " seeds\n";
  return kOk;
}

int cmd_sensitivity(const Common& c, const std::vector<double>& levels_percent, bool single) {
  const auto levels = fractions(levels_percent);
  apply_jobs(c.jobs);
  const auto cfg = load(c);
  Manifest m("sensitivity", c.out_dir);
  m.config(cfg);
  m.set("levels_percent", levels_percent);
  m.set("equal_drop", !single);
  const auto table = scenario::sensitivity_sweep(config::sensitivity_model(cfg), cfg.nominal_flowrate, levels,
                                                 !single,
                                                 c.jobs != 1 ? scenario::Execution::Parallel : scenario::Execution::Serial);
  const std::string csv = scenario::sensitivity_csv(table);
  m.write(single ? "sensitivity_single.csv" : "sensitivity_equal.csv", csv);
  m.finish();
  std::cout << csv;
  return kOk;
}

int cmd_modal(const Common& c) {
  const auto cfg = load(c);
  Manifest m("modal", c.out_dir);
  m.config(cfg);
  const auto p = scenario::rotordynamic_placement(config::sensitivity_model(cfg), cfg.nominal_flowrate);
  io::CsvTable csv;
  csv.header = {"frequency_hz", "damping_ratio", "forward", "real_per_s"};
  for (const auto& mode : p.modes)
    if (mode.frequency_hz < 500)
      csv.rows.push_back({mode.frequency_hz, mode.damping_ratio, mode.forward ? 1.0 : 0.0, mode.eigenvalue.real()});
  m.write("modes.csv", io::to_csv_string(csv));
  const json summary = {{"first_critical_hz", p.first_critical.frequency_hz},
                        {"first_critical_damping_ratio", p.first_critical.damping_ratio},
                        {"instability_onset_hz", std::isnan(p.onset_hz) ? json(nullptr) : json(p.onset_hz)}};
  m.write("modal_summary.json", summary.dump(2) + "\n");
  m.finish();
  std::cout << "first lightly damped forward mode " << p.first_critical.frequency_hz << " Hz (zeta "
            << p.first_critical.damping_ratio << "); instability onset "
            << (std::isnan(p.onset_hz) ? std::string("none below 200 Hz") : std::to_string(p.onset_hz) + " Hz")
            << "\n";
  return kOk;
}

// ---- report -------------------------------------------------------------

std::vector<double> column(const io::CsvTable& t, const std::string& name, double scale = 1.0) {
  const std::size_t j = t.column(name);
  std::vector<double> v;
  for (const auto& r : t.rows) v.push_back(r[j] * scale);
  return v;
}

bool has_column(const io::CsvTable& t, const std::string& name) {
  return std::find(t.header.begin(), t.header.end(), name) != t.header.end();
}

int cmd_report(const std::string& out_dir, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw UsageError("report needs at least one input file");
  Manifest m("report", out_dir);
  svg::LineChart traces{"Identified oil supply flowrates", "time [s]", "flowrate [ml/min]", {}, false};
  int plotted = 0;
  for (const auto& path : inputs) {
    m.input(path);
    const io::CsvTable t = io::read_csv(path);
    const std::string stem = fs::path(path).stem().string();
    const std::string tag = fs::path(path).parent_path().filename().string();
    const std::string name = tag.empty() ? stem : tag + "/" + stem;
    if (has_column(t, "q1_ml_min") && has_column(t, "converged_flag")) {
      const auto time = column(t, "time_s");
      const auto q1 = column(t, "q1_ml_min"), q2 = column(t, "q2_ml_min");
      traces.series.push_back({name + " q1", time, q1, false});
      traces.series.push_back({name + " q2", time, q2, false});
      const auto conv = column(t, "converged_flag");
      std::cout << path << ": estimate trace, " << t.rows.size() << " samples, final q1 "
                << q1.back() << " q2 " << q2.back() << " ml/min, converged fraction "
                << std::accumulate(conv.begin(), conv.end(), 0.0) / static_cast<double>(conv.size()) << "\n";
    } else if (has_column(t, "q1_true_ml_min")) {
      const auto time = column(t, "time_s");
      traces.series.push_back({name + " q1 true", time, column(t, "q1_true_ml_min"), true});
      traces.series.push_back({name + " q2 true", time, column(t, "q2_true_ml_min"), true});
      std::cout << path << ": truth flowrates, " << t.rows.size() << " samples\n";
    } else if (has_column(t, "b1_x_m")) {
      svg::LineChart orbit{"Shaft orbits at the bearings (" + name + ")", "X [um]", "Y [um]", {}, true};
      orbit.series.push_back({"bearing 1", column(t, "b1_x_m", 1e6), column(t, "b1_y_m", 1e6), false});
      orbit.series.push_back({"bearing 2", column(t, "b2_x_m", 1e6), column(t, "b2_y_m", 1e6), false});
      const auto out = m.write("orbit_" + stem + ".svg", svg::render(orbit));
      std::cout << path << ": measurements, " << t.rows.size() << " samples -> " << out << "\n";
      ++plotted;
    } else if (has_column(t, "q1_percent")) {
      std::vector<double> levels;
      for (const auto& r : t.rows)
        if (std::find(levels.begin(), levels.end(), r[0]) == levels.end()) levels.push_back(r[0]);
      std::sort(levels.begin(), levels.end());
      auto index = [&](double v) {
        return static_cast<std::size_t>(std::find(levels.begin(), levels.end(), v) - levels.begin());
      };
      for (int b = 1; b <= 2; ++b) {
        svg::Heatmap map;
        map.title = "Mean relative error, bearing " + std::to_string(b) + " (rows q2 %, columns q1 %)";
        map.unit = "%";
        map.values.assign(levels.size(), std::vector<double>(levels.size(), 0.0));
        const std::size_t col = t.column("err" + std::to_string(b) + "_mean_percent");
        for (const auto& r : t.rows) map.values[index(r[1])][index(r[0])] = r[col];
        for (double l : levels) {
          map.row_labels.push_back(io::format_number(l));
          map.col_labels.push_back(io::format_number(l));
        }
        const auto out = m.write("heatmap_" + stem + "_b" + std::to_string(b) + ".svg", svg::render(map));
        std::cout << path << ": error grid bearing " << b << " -> " << out << "\n";
      }
      ++plotted;
    } else {
      throw SchemaError(path + ": unrecognized CSV (no estimate, truth, measurement or grid columns)");
    }
  }
  if (!traces.series.empty()) {
    const auto out = m.write("flowrate_traces.svg", svg::render(traces));
    std::cout << "traces -> " << out << "\n";
    ++plotted;
  }
  m.finish();
  return plotted > 0 ? kOk : kInput;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oil supply flowrate identification for hydrodynamic journal bearings"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    auto* opt = sub->add_option("--config", common.config_path, "Study configuration file");
    if (needs_config) opt->required();
    sub->add_option("--out", common.out_dir,
                    std::string("Output directory (default $") + kOutEnv + " or ./oilid_out)");
  };

  auto* coeffs = app.add_subcommand("coeffs", "Build the bearing coefficient tables");
  add_common(coeffs);
  bool parallel = false;
  coeffs->add_flag("--parallel", parallel, "Solve the grid flowrates concurrently");
  coeffs->add_option("--jobs", common.jobs, "Worker threads (0: all)");

  auto* simulate = app.add_subcommand("simulate", "Simulate a scenario and write noisy measurements");
  add_common(simulate);
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma_um;
  simulate->add_option("--scenario", scenario_path, "Scenario file (default: nominal constant flow)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Noise seed");
  simulate->add_option("--sigma-um", sigma_um, "Displacement noise std [um]")->check(CLI::NonNegativeNumber);

  auto* identify = app.add_subcommand("identify", "Identify both flowrates from a measurement CSV");
  add_common(identify);
  std::string meas_path;
  bool live = false;
  identify->add_option("--measurements", meas_path, "Measurement CSV")->required();
  identify->add_option("--scenario", scenario_path, "Scenario file (truth for the error line, noise level)")
      ->check(CLI::ExistingFile);
  identify->add_option("--mode", common.mode, "Plant discretization")->check(CLI::IsMember({"cached", "exact"}));
  identify->add_option("--sigma-um", sigma_um, "Noise std the data carries [um] (sets R)")
      ->check(CLI::NonNegativeNumber);
  identify->add_flag("--live", live, "Replay at the 1 kHz sampling pace and stream estimates");

  auto* sweep = app.add_subcommand("sweep", "Constant-flowrate error grid");
  add_common(sweep);
  std::vector<double> levels{100, 95, 90, 85, 80, 75};
  double sweep_sigma = 1.0;
  int seeds = 3;
  std::uint64_t base_seed = 1;
  sweep->add_option("--levels", levels, "Flowrate levels [% of nominal]")->delimiter(',');
  sweep->add_option("--sigma-um", sweep_sigma, "Displacement noise std [um]")->check(CLI::NonNegativeNumber);
  sweep->add_option("--seeds", seeds, "Noise realizations per cell");
  sweep->add_option("--seed", base_seed, "First seed");
  sweep->add_option("--mode", common.mode, "Plant discretization")->check(CLI::IsMember({"cached", "exact"}));
  sweep->add_option("--jobs", common.jobs, "Worker threads (0: all, 1: serial)");

  auto* sens = app.add_subcommand("sensitivity", "Eccentricity and orbit changes as the flowrate drops");
  add_common(sens);
  bool single = false;
  sens->add_option("--levels", levels, "Flowrate levels [% of nominal], descending")->delimiter(',');
  sens->add_flag("--single", single, "Drop bearing 1 only (bearing 2 stays nominal)");
  sens->add_option("--jobs", common.jobs, "Worker threads (0: all, 1: serial)");

  auto* modal = app.add_subcommand("modal", "Damped modes at the running speed and instability onset");
  add_common(modal);

  auto* report = app.add_subcommand("report", "Summaries and SVG plots from result CSVs");
  std::vector<std::string> inputs;
  report->add_option("inputs", inputs, "Estimate, truth, measurement or grid CSV files")->check(CLI::ExistingFile);
  report->add_option("--out", common.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*coeffs) return cmd_coeffs(common, parallel);
    if (*simulate) return cmd_simulate(common, scenario_path, seed, sigma_um);
    if (*identify) return cmd_identify(common, scenario_path, meas_path, sigma_um, live);
    if (*sweep) return cmd_sweep(common, levels, sweep_sigma, seeds, base_seed);
    if (*sens) return cmd_sensitivity(common, levels, single);
    if (*modal) return cmd_modal(common);
    if (*report) return cmd_report(common.out_dir, inputs);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const SchemaError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const ModelError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  }
  return kUsage;
}
