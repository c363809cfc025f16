#pragma once

// Synthetic experiments: ground-truth vibration, noisy measurements,
// identification runs and their error statistics.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "oilid/bearing_hydro.hpp"
#include "oilid/ekf.hpp"
#include "oilid/modal.hpp"
#include "oilid/rotor_fem.hpp"
#include "oilid/statespace.hpp"

namespace oilid::scenario {

using Channels = Eigen::Matrix<double, 8, 1>;

/// Logistic step from q_start to q_end that covers 1% .. 99% of the change
/// over [t_center - duration/2, t_center + duration/2].
double sigmoid_profile(double q_start, double q_end, double t_center, double duration, double t);

struct FlowrateProfile {
  enum class Kind { Constant, Sigmoid, Piecewise };
  Kind kind = Kind::Constant;
  double q_start = 0.0;  // m^3/s; the constant value for Kind::Constant
  double q_end = 0.0;
  double t_center = 0.0;
  double duration = 1.0;
  std::vector<std::pair<double, double>> points;  // (t, q), linear between, held outside

  static FlowrateProfile constant(double q);
  static FlowrateProfile sigmoid(double q_start, double q_end, double t_center, double duration);
  static FlowrateProfile piecewise(std::vector<std::pair<double, double>> points);

  double value(double t) const;
  double min_value() const;
  double max_value() const;
  void validate(double q_min, double q_max) const;
};

enum class VelocitySource {
  Differentiated,    // central differences of the noisy displacements
  IndependentNoise,  // exact velocities plus independent N(0, sigma_v) noise
};

enum class TruthIntegrator {
  Newmark,        // implicit trapezoidal rule on the second-order equations
  DiscretePlant,  // the filter's own discrete model (inverse crime)
};

struct ScenarioSpec {
  std::array<FlowrateProfile, 2> profiles;
  double duration = 10.0;       // s
  double sample_period = 1e-3;  // s
  double discard = 5.0;         // s dropped from the start
  double sigma_v = 1e-6;        // m
  std::uint64_t seed = 1;
  VelocitySource velocity = VelocitySource::Differentiated;
  TruthIntegrator integrator = TruthIntegrator::Newmark;
  int substeps = 10;            // Newmark steps per sample
  double coefficient_mismatch = 0.0;  // truth K, C scaled by (1 + mismatch)

  void validate() const;
  long sample_count() const;    // samples in [0, duration], inclusive
};

/// Clean signals at the measured channels; velocities are exact.
struct TruthSeries {
  std::vector<double> time;
  std::vector<Eigen::Vector2d> flowrate;
  std::vector<Channels> channels;
};

/// Starts from the static equilibrium at q(0). Coefficients follow q(t) via
/// the plant's coefficient tables.
TruthSeries simulate_truth(const ss::Plant& plant, const ScenarioSpec& spec);

/// Adds N(0, sigma) to the four displacement channels; same seed, same noise.
std::vector<Channels> add_noise(const std::vector<Channels>& clean, double sigma,
                                std::uint64_t seed);

/// Replaces the four velocity channels by differences of the displacement
/// channels: central inside, one-sided at both ends.
void estimate_velocities(std::vector<Channels>& series, double dt);

/// Noise, velocity channels and discard applied to a truth run.
ekf::Measurements make_measurements(const TruthSeries& truth, const ScenarioSpec& spec);

/// time_s then the 8 channels.
std::string measurement_csv(const ekf::Measurements& m);
ekf::Measurements parse_measurement_csv(const std::string& text, const std::string& source);
const std::vector<std::string>& measurement_header();

struct ErrorStats {
  std::vector<double> relative_percent;
  double average = 0.0;
  double std_dev = 0.0;  // sample standard deviation
  double maximum = 0.0;
};

/// |identified - truth| / truth * 100, element-wise, plus summary.
ErrorStats error_stats(const std::vector<double>& identified, const std::vector<double>& truth);
ErrorStats summarize(const std::vector<double>& relative_percent);

/// Everything an identification run needs besides the scenario.
struct IdentificationSetup {
  const ss::Plant* plant = nullptr;
  double nominal_flowrate = 596.3 / 6e7;  // m^3/s, initial guess for both bearings
  ekf::NoiseSettings noise;
  ekf::FilterOptions filter;
};

struct RunResult {
  ScenarioSpec spec;
  std::vector<Eigen::Vector2d> truth_flowrate;  // aligned with the estimate history
  ekf::EstimateHistory estimate;
  Eigen::Vector2d identified = Eigen::Vector2d::Zero();  // post-convergence mean
  Eigen::Vector2d relative_error = Eigen::Vector2d::Zero();  // %, against the final truth
};

RunResult run_identification(const IdentificationSetup& setup, const ScenarioSpec& spec);

enum class Execution { Serial, Parallel };

struct GridCell {
  double q1_fraction = 0.0;
  double q2_fraction = 0.0;
  std::vector<Eigen::Vector2d> errors;  // % per seed
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d std_dev = Eigen::Vector2d::Zero();
  int not_converged = 0;
};

struct GridResult {
  double sigma_v = 0.0;
  std::vector<GridCell> cells;
  ErrorStats summary;  // over every cell, seed and bearing
};

/// All (q1, q2) pairs from `levels` (fractions of nominal), `seeds` noise
/// realizations each. Parallel and serial runs give identical results.
GridResult run_constant_grid(const IdentificationSetup& setup, const ScenarioSpec& base,
                             const std::vector<double>& levels, double sigma_v,
                             const std::vector<std::uint64_t>& seeds,
                             Execution execution = Execution::Serial);

std::string grid_csv(const GridResult& grid);

enum class DropKind { Equal, SingleBearing, Clog };
enum class Steepness { Slow, Intermediate, Sudden };
double transition_duration(Steepness s);  // 4 s, 1 s, 0.1 s

struct DropSpec {
  DropKind kind = DropKind::Equal;
  Steepness steepness = Steepness::Intermediate;
  int bearing = 0;  // the bearing that loses flow (SingleBearing, Clog)
  double drop_fraction = 0.25;
  double t_center = 10.0;
  double duration = 20.0;
  double plateau = 1.0;  // s, averaging window on each side of the transition
};

/// Flowrate profiles of a drop scenario around `nominal`.
std::array<FlowrateProfile, 2> drop_profiles(const DropSpec& drop, double nominal);

struct DropResult {
  DropSpec drop;
  RunResult run;
  Eigen::Vector2d pre_error = Eigen::Vector2d::Zero();   // % on the pre-drop plateau
  Eigen::Vector2d post_error = Eigen::Vector2d::Zero();  // % on the post-drop plateau
  Eigen::Vector2d pre_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d post_mean = Eigen::Vector2d::Zero();
  bool attributed = false;  // the estimated change lands on the right bearing
};

/// Plateau windows: `plateau` seconds before the transition starts, and the
/// last `plateau` seconds of the run.
DropResult run_drop(const IdentificationSetup& setup, const ScenarioSpec& base, const DropSpec& drop,
                    double sigma_v, std::uint64_t seed);

std::vector<DropResult> run_drop_scenarios(const IdentificationSetup& setup,
                                           const ScenarioSpec& base, DropKind kind,
                                           Steepness steepness, double sigma_v,
                                           const std::vector<std::uint64_t>& seeds,
                                           Execution execution = Execution::Serial);

/// Flowrate sensitivity study: per-interval change of the
/// equilibrium eccentricity and of the steady unbalance-orbit amplitudes at
/// both bearings. Coefficients are solved directly at every level.
struct SensitivityModel {
  rotor::GlobalMatrices global;
  double speed = 0.0;
  std::array<int, 2> bearing_nodes{0, 0};
  rotor::Unbalance unbalance;
  bearing::BearingSetup bearing;
  std::array<Eigen::Vector2d, 2> loads;
};

struct SensitivityRow {
  std::string label;
  std::vector<double> values;  // one per interval, um
};
struct SensitivityTable {
  std::vector<std::string> intervals;  // "100-95", ...
  std::vector<SensitivityRow> rows;
  std::vector<std::array<double, 2>> eccentricity;  // um, per level and bearing
};

/// Steps flowrate levels (fractions of nominal, descending); `equal` drops
/// both bearings, otherwise only bearing 1.
SensitivityTable sensitivity_sweep(const SensitivityModel& model, double nominal,
                                   const std::vector<double>& levels, bool equal,
                                   Execution execution = Execution::Serial);

/// Peak orbit amplitudes (X, Y per bearing, m) of the steady unbalance
/// response with the given bearing coefficients.
std::array<Eigen::Vector2d, 2> orbit_amplitudes(const SensitivityModel& model,
                                                const std::array<bearing::BearingCoefficients, 2>& c);

std::string sensitivity_csv(const SensitivityTable& table);

/// Bearing coefficients of both bearings at `speed` (rad/s) and a common
/// supply flowrate, solved directly.
std::array<bearing::BearingCoefficients, 2> coefficients_at_speed(const SensitivityModel& model,
                                                                 double speed, double flowrate);

/// Damped modes of the rotor-bearing system running at `speed` (rad/s).
std::vector<ss::DampedMode> modes_at_speed(const SensitivityModel& model, double speed,
                                           double flowrate);

/// Where the running speed sits among the rotordynamic features: the first
/// lightly damped forward mode at the operating speed, and the lowest speed
/// at which a mode below 500 Hz turns unstable (coefficients re-solved at
/// each speed, supply flowrate held).
struct Placement {
  std::vector<ss::DampedMode> modes;
  ss::DampedMode first_critical;
  double onset_hz = 0.0;  // NaN when stable over the whole search range
};
Placement rotordynamic_placement(const SensitivityModel& model, double flowrate,
                                 double onset_lo_hz = 50.0, double onset_hi_hz = 200.0);

}  // namespace oilid::scenario
