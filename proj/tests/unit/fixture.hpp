#pragma once

// The reference turbine study, its coefficient tables and a cached-grid plant,
// built once per test binary.

#include <string>

#include "oilid/config.hpp"
#include "oilid/statespace.hpp"

namespace oilid::testing {

inline const config::StudyConfig& study() {
  static const config::StudyConfig s = config::load_study(std::string(OILID_CONFIG_DIR) + "/turbine.cfg");
  return s;
}

inline const std::array<bearing::CoefficientTable, 2>& tables() {
  static const auto t = config::build_tables(study(), ss::Build::Parallel);
  return t;
}

inline const ss::Plant& plant() {
  static const ss::Plant p(config::plant_config(study(), tables()), ss::Build::Parallel);
  return p;
}

}  // namespace oilid::testing
