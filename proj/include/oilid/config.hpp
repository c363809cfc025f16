#pragma once

// Study and scenario configuration files (JSON). Files use the customary
// mixed units with the unit in every key name (mm, um, ml/min, Hz, bar);
// everything is converted to SI here. Node numbers are 1-based in files.

#include <array>
#include <optional>
#include <string>

#include "oilid/bearing_hydro.hpp"
#include "oilid/ekf.hpp"
#include "oilid/rotor_fem.hpp"
#include "oilid/scenario_lab.hpp"
#include "oilid/statespace.hpp"

namespace oilid::config {

enum class StaticLoads { Computed, Equal };

struct StudyConfig {
  rotor::RotorModel rotor;
  bearing::BearingSetup bearing;  // speed copied from the rotor
  StaticLoads static_loads = StaticLoads::Computed;
  double equal_load = 3272.8;     // N per bearing, StaticLoads::Equal only
  double nominal_flowrate = 596.3 / 6e7;            // m^3/s
  std::optional<double> flooded_threshold;          // m^3/s; solved for when absent
  int grid_points = 7;
  double sample_period = 1e-3;
  ss::Discretization mode = ss::Discretization::CachedGrid;
  ss::InputHold input_hold = ss::InputHold::Harmonic;
  double exact_threshold = 1.0 / 6e7;
  ekf::NoiseSettings noise;
  double convergence_window = 1.0;
  double convergence_fraction = 0.005;
  scenario::ScenarioSpec scenario;  // defaults for scenario files
  std::string source;               // path or "<memory>"
  std::string hash;                 // of the file text, 16 hex digits
};

/// Throws SchemaError for malformed or unknown keys, ModelError for
/// physically invalid values.
StudyConfig parse_study(const std::string& text, const std::string& source = "<memory>");
/// Throws SchemaError naming the path when it cannot be read.
StudyConfig load_study(const std::string& path);

/// 64-bit FNV-1a of `text` as 16 lowercase hex digits.
std::string content_hash(const std::string& text);

/// Static bearing loads (force pushing each journal, +Y down).
std::array<Eigen::Vector2d, 2> bearing_loads(const StudyConfig& config);

/// Flooded threshold from the file, or solved by bisection.
double flooded_threshold(const StudyConfig& config);

/// Coefficient tables of both bearings on the default grid.
std::array<bearing::CoefficientTable, 2> build_tables(const StudyConfig& config,
                                                      ss::Build build = ss::Build::Serial);

ss::PlantConfig plant_config(const StudyConfig& config,
                             const std::array<bearing::CoefficientTable, 2>& tables);

scenario::SensitivityModel sensitivity_model(const StudyConfig& config);

scenario::IdentificationSetup identification_setup(const StudyConfig& config,
                                                   const ss::Plant& plant);

/// Scenario file: profiles plus optional overrides of the study defaults.
scenario::ScenarioSpec parse_scenario(const std::string& text, const StudyConfig& study,
                                      const std::string& source = "<memory>");
scenario::ScenarioSpec load_scenario(const std::string& path, const StudyConfig& study);

}  // namespace oilid::config
