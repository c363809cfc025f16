#include <cmath>
#include <complex>
#include <exception>
#include <map>
#include <sstream>

#include "oilid/csv.hpp"
#include "oilid/errors.hpp"
#include "oilid/scenario_lab.hpp"
#include "oilid/units.hpp"

namespace oilid::scenario {

namespace {

// splitmix64 finalizer: decorrelates the per-task noise seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Runs task(i) for i in [0, n), in parallel when asked; the first exception
// (by index) is rethrown so failures are reported deterministically.
template <class Task>
void for_each_task(long n, Execution execution, Task&& task) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto guarded = [&](long i) {
    try {
      task(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  if (execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) guarded(i);
  } else {
    for (long i = 0; i < n; ++i) guarded(i);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Eigen::Vector2d window_mean(const std::vector<double>& time, const std::vector<Eigen::Vector2d>& v,
                            double t0, double t1) {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  long count = 0;
  for (std::size_t k = 0; k < time.size(); ++k)
    if (time[k] >= t0 - 1e-9 && time[k] <= t1 + 1e-9) {
      sum += v[k];
      ++count;
    }
  if (count == 0) throw ModelError("empty averaging window");
  return sum / static_cast<double>(count);
}

}  // namespace

RunResult run_identification(const IdentificationSetup& setup, const ScenarioSpec& spec) {
  if (!setup.plant) throw ModelError("identification needs a plant");
  const ss::Plant& plant = *setup.plant;
  const TruthSeries truth = simulate_truth(plant, spec);
  const ekf::Measurements m = make_measurements(truth, spec);

  // R needs a positive std; clean data is filtered as if sigma_v were 1 um.
  const double filter_sigma = spec.sigma_v > 0 ? spec.sigma_v : 1e-6;
  const ekf::NoiseConfig noise = ekf::make_noise(setup.noise, plant.dof_count(), filter_sigma,
                                                 setup.nominal_flowrate, spec.sample_period);
  ekf::FilterOptions options = setup.filter;
  options.nominal_flowrate = setup.nominal_flowrate;
  options.jacobian_step = setup.noise.jacobian_step;
  const auto initial = ekf::initial_state(
      plant, Eigen::Vector2d::Constant(setup.nominal_flowrate), noise);

  RunResult r;
  r.spec = spec;
  r.estimate = ekf::run_filter(plant, m, noise, initial, options);
  const std::size_t first = truth.time.size() - m.time.size();
  for (std::size_t k = 0; k < r.estimate.time.size(); ++k) r.truth_flowrate.push_back(truth.flowrate[first + k]);
  r.identified = r.estimate.convergence.mean;
  const Eigen::Vector2d q_true = truth.flowrate.back();
  r.relative_error = ((r.identified - q_true).array().abs() / q_true.array() * 100.0).matrix();
  return r;
}

GridResult run_constant_grid(const IdentificationSetup& setup, const ScenarioSpec& base,
                             const std::vector<double>& levels, double sigma_v,
                             const std::vector<std::uint64_t>& seeds, Execution execution) {
  if (levels.empty()) throw ModelError("flowrate level list is empty");
  if (seeds.empty()) throw ModelError("seed list is empty");
  GridResult grid;
  grid.sigma_v = sigma_v;
  for (double a : levels)
    for (double b : levels) {
      GridCell c;
      c.q1_fraction = a;
      c.q2_fraction = b;
      c.errors.resize(seeds.size());
      grid.cells.push_back(c);
    }
  const long per_cell = static_cast<long>(seeds.size());
  const long tasks = static_cast<long>(grid.cells.size()) * per_cell;
  std::vector<std::uint8_t> converged(static_cast<std::size_t>(tasks), 0);
  for_each_task(tasks, execution, [&](long i) {
    GridCell& cell = grid.cells[static_cast<std::size_t>(i / per_cell)];
    const std::size_t s = static_cast<std::size_t>(i % per_cell);
    ScenarioSpec spec = base;
    spec.sigma_v = sigma_v;
    spec.seed = mix(seeds[s] ^ mix(static_cast<std::uint64_t>(i / per_cell)));
    spec.profiles = {FlowrateProfile::constant(cell.q1_fraction * setup.nominal_flowrate),
                     FlowrateProfile::constant(cell.q2_fraction * setup.nominal_flowrate)};
    const RunResult r = run_identification(setup, spec);
    cell.errors[s] = r.relative_error;
    converged[static_cast<std::size_t>(i)] = r.estimate.convergence.converged && !r.estimate.diverged;
  });

  std::vector<double> all;
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    GridCell& cell = grid.cells[c];
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      sum += cell.errors[s];
      all.push_back(cell.errors[s][0]);
      all.push_back(cell.errors[s][1]);
      if (!converged[c * seeds.size() + s]) ++cell.not_converged;
    }
    cell.mean = sum / static_cast<double>(seeds.size());
    if (seeds.size() > 1) {
      Eigen::Vector2d sq = Eigen::Vector2d::Zero();
      for (const auto& e : cell.errors) sq += (e - cell.mean).cwiseAbs2();
      cell.std_dev = (sq / static_cast<double>(seeds.size() - 1)).cwiseSqrt();
    }
  }
  grid.summary = summarize(all);
  return grid;
}

std::string grid_csv(const GridResult& grid) {
  io::CsvTable csv;
  csv.header = {"q1_percent", "q2_percent", "seeds", "err1_mean_percent", "err1_std_percent",
                "err2_mean_percent", "err2_std_percent", "not_converged"};
  for (const auto& c : grid.cells)
    csv.rows.push_back({c.q1_fraction * 100.0, c.q2_fraction * 100.0,
                        static_cast<double>(c.errors.size()), c.mean[0], c.std_dev[0], c.mean[1],
                        c.std_dev[1], static_cast<double>(c.not_converged)});
  return io::to_csv_string(csv);
}

std::array<FlowrateProfile, 2> drop_profiles(const DropSpec& drop, double nominal) {
  const double d = transition_duration(drop.steepness);
  const double low = nominal * (1.0 - drop.drop_fraction);
  const double high = nominal * (1.0 + drop.drop_fraction);
  auto falling = FlowrateProfile::sigmoid(nominal, low, drop.t_center, d);
  switch (drop.kind) {
    case DropKind::Equal:
      return {falling, falling};
    case DropKind::SingleBearing: {
      std::array<FlowrateProfile, 2> p{FlowrateProfile::constant(nominal),
                                       FlowrateProfile::constant(nominal)};
      p[static_cast<std::size_t>(drop.bearing)] = falling;
      return p;
    }
    case DropKind::Clog: {
      auto rising = FlowrateProfile::sigmoid(nominal, high, drop.t_center, d);
      std::array<FlowrateProfile, 2> p{rising, rising};
      p[static_cast<std::size_t>(drop.bearing)] = falling;
      return p;
    }
  }
  return {falling, falling};
}

DropResult run_drop(const IdentificationSetup& setup, const ScenarioSpec& base, const DropSpec& drop,
                    double sigma_v, std::uint64_t seed) {
  if (drop.bearing < 0 || drop.bearing > 1) throw ModelError("drop bearing must be 1 or 2");
  if (!(drop.plateau > 0)) throw ModelError("plateau window must be positive");
  ScenarioSpec spec = base;
  spec.duration = drop.duration;
  spec.discard = 0.0;
  spec.sigma_v = sigma_v;
  spec.seed = seed;
  spec.profiles = drop_profiles(drop, setup.nominal_flowrate);

  DropResult out;
  out.drop = drop;
  out.run = run_identification(setup, spec);
  const auto& est = out.run.estimate;
  if (est.diverged) throw NumericalError("drop scenario filter diverged: " + est.failure);
  const double start = drop.t_center - 0.5 * transition_duration(drop.steepness);
  const double plateau = drop.plateau;
  const double end = est.time.back();
  out.pre_mean = window_mean(est.time, est.flowrate, start - plateau, start);
  out.post_mean = window_mean(est.time, est.flowrate, end - plateau, end);
  const Eigen::Vector2d pre_true = window_mean(est.time, out.run.truth_flowrate, start - plateau, start);
  const Eigen::Vector2d post_true = window_mean(est.time, out.run.truth_flowrate, end - plateau, end);
  out.pre_error = ((out.pre_mean - pre_true).array().abs() / pre_true.array() * 100.0).matrix();
  out.post_error = ((out.post_mean - post_true).array().abs() / post_true.array() * 100.0).matrix();

  // A change is attributed when every bearing whose flow moved is seen moving
  // the same way by at least half the true change, and every other bearing
  // moves by less than half of the largest true change.
  const Eigen::Vector2d d_true = post_true - pre_true;
  const Eigen::Vector2d d_est = out.post_mean - out.pre_mean;
  const double largest = d_true.cwiseAbs().maxCoeff();
  out.attributed = true;
  for (int b = 0; b < 2; ++b) {
    if (std::abs(d_true[b]) > 1e-3 * largest)
      out.attributed &= d_est[b] * d_true[b] > 0 && std::abs(d_est[b]) >= 0.5 * std::abs(d_true[b]);
    else
      out.attributed &= std::abs(d_est[b]) < 0.5 * largest;
  }
  return out;
}

std::vector<DropResult> run_drop_scenarios(const IdentificationSetup& setup,
                                           const ScenarioSpec& base, DropKind kind,
                                           Steepness steepness, double sigma_v,
                                           const std::vector<std::uint64_t>& seeds,
                                           Execution execution) {
  std::vector<DropResult> out(seeds.size());
  for_each_task(static_cast<long>(seeds.size()), execution, [&](long i) {
    DropSpec d;
    d.kind = kind;
    d.steepness = steepness;
    d.bearing = kind == DropKind::Equal ? 0 : static_cast<int>(i % 2);
    out[static_cast<std::size_t>(i)] = run_drop(setup, base, d, sigma_v, seeds[static_cast<std::size_t>(i)]);
  });
  return out;
}

std::array<Eigen::Vector2d, 2> orbit_amplitudes(const SensitivityModel& model,
                                                const std::array<bearing::BearingCoefficients, 2>& c) {
  using cd = std::complex<double>;
  const auto m = ss::fold_bearings(model.global, model.speed, model.bearing_nodes, c);
  const double w = model.speed;
  const Eigen::MatrixXcd dyn = (m.stiffness - w * w * m.mass).cast<cd>() + cd(0, w) * m.damping.cast<cd>();
  Eigen::VectorXcd f = Eigen::VectorXcd::Zero(model.global.size());
  // F = A (cos(wt + p), sin(wt + p)) = Re(A e^{ip} (1, -i) e^{iwt}).
  const cd a = model.unbalance.moment * w * w * std::exp(cd(0, model.unbalance.phase));
  f[rotor::dof(model.unbalance.node, rotor::kV)] = a;
  f[rotor::dof(model.unbalance.node, rotor::kW)] = cd(0, -1) * a;
  const Eigen::VectorXcd r = dyn.partialPivLu().solve(f);
  std::array<Eigen::Vector2d, 2> out;
  for (std::size_t b = 0; b < 2; ++b)
    out[b] = {std::abs(r[rotor::dof(model.bearing_nodes[b], rotor::kV)]),
              std::abs(r[rotor::dof(model.bearing_nodes[b], rotor::kW)])};
  return out;
}

SensitivityTable sensitivity_sweep(const SensitivityModel& model, double nominal,
                                   const std::vector<double>& levels, bool equal,
                                   Execution execution) {
  if (levels.size() < 2) throw ModelError("sensitivity sweep needs at least two levels");
  for (std::size_t k = 1; k < levels.size(); ++k)
    if (!(levels[k] < levels[k - 1])) throw ModelError("sensitivity levels must be descending");

  // Distinct (bearing, flowrate) solves.
  std::vector<std::pair<int, double>> keys;
  auto key_of = [&](int b, double q) {
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (keys[i].first == b && keys[i].second == q) return i;
    keys.emplace_back(b, q);
    return keys.size() - 1;
  };
  std::vector<std::array<std::size_t, 2>> level_keys;
  for (double f : levels)
    level_keys.push_back({key_of(0, f * nominal), key_of(1, (equal ? f : 1.0) * nominal)});

  std::vector<bearing::BearingCoefficients> solved(keys.size());
  for_each_task(static_cast<long>(keys.size()), execution, [&](long i) {
    const auto [b, q] = keys[static_cast<std::size_t>(i)];
    const auto eq = bearing::find_equilibrium(model.bearing, model.loads[static_cast<std::size_t>(b)], q);
    solved[static_cast<std::size_t>(i)] = bearing::linearized_coefficients(model.bearing, eq, q);
  });

  SensitivityTable t;
  std::vector<std::array<Eigen::Vector2d, 2>> amp;
  for (const auto& lk : level_keys) {
    const std::array<bearing::BearingCoefficients, 2> c{solved[lk[0]], solved[lk[1]]};
    t.eccentricity.push_back({units::m_to_um(c[0].equilibrium.eccentricity.norm()),
                              units::m_to_um(c[1].equilibrium.eccentricity.norm())});
    amp.push_back(orbit_amplitudes(model, c));
  }
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    std::ostringstream label;
    label << std::lround(levels[k] * 100) << "-" << std::lround(levels[k + 1] * 100);
    t.intervals.push_back(label.str());
  }
  auto row = [&](const std::string& name, auto value) {
    SensitivityRow r{name, {}};
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) r.values.push_back(value(k + 1) - value(k));
    t.rows.push_back(r);
  };
  for (int b = 0; b < 2; ++b)
    row("eccentricity_b" + std::to_string(b + 1) + "_um",
        [&](std::size_t k) { return t.eccentricity[k][static_cast<std::size_t>(b)]; });
  for (int axis = 0; axis < 2; ++axis)
    for (int b = 0; b < 2; ++b)
      row(std::string("amplitude_") + (axis == 0 ? "x" : "y") + "_b" + std::to_string(b + 1) + "_um",
          [&](std::size_t k) { return units::m_to_um(amp[k][static_cast<std::size_t>(b)][axis]); });
  return t;
}

std::string sensitivity_csv(const SensitivityTable& table) {
  std::string out = "quantity";
  for (const auto& i : table.intervals) out += "," + i;
  out += '\n';
  for (const auto& r : table.rows) {
    out += r.label;
    for (double v : r.values) out += "," + io::format_number(v);
    out += '\n';
  }
  return out;
}

std::array<bearing::BearingCoefficients, 2> coefficients_at_speed(const SensitivityModel& model,
                                                                 double speed, double flowrate) {
  bearing::BearingSetup setup = model.bearing;
  setup.speed = speed;
  std::array<bearing::BearingCoefficients, 2> c;
  for (std::size_t b = 0; b < 2; ++b) {
    if (b == 1 && model.loads[1] == model.loads[0]) {
      c[1] = c[0];
      break;
    }
    const auto eq = bearing::find_equilibrium(setup, model.loads[b], flowrate);
    c[b] = bearing::linearized_coefficients(setup, eq, flowrate);
  }
  return c;
}

std::vector<ss::DampedMode> modes_at_speed(const SensitivityModel& model, double speed,
                                           double flowrate) {
  const auto c = coefficients_at_speed(model, speed, flowrate);
  const auto sys = ss::build_continuous(model.global, speed, model.bearing_nodes, c);
  return ss::damped_modes(sys.A, model.global.size());
}

Placement rotordynamic_placement(const SensitivityModel& model, double flowrate, double lo_hz,
                                 double hi_hz) {
  Placement p;
  p.modes = modes_at_speed(model, model.speed, flowrate);
  p.first_critical = ss::first_forward_mode(p.modes);
  p.onset_hz = ss::find_onset(
      [&](double hz) {
        const double w = units::hz_to_rad_s(hz);
        const auto c = coefficients_at_speed(model, w, flowrate);
        return ss::spectral_abscissa(ss::build_continuous(model.global, w, model.bearing_nodes, c).A);
      },
      lo_hz, hi_hz);
  return p;
}

}  // namespace oilid::scenario
