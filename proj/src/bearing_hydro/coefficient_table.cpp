#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "oilid/bearing_hydro.hpp"
#include "oilid/csv.hpp"
#include "oilid/errors.hpp"
#include "oilid/units.hpp"

namespace oilid::bearing {

void CoefficientTable::validate() const {
  if (flowrate_grid.empty()) throw ModelError("coefficient table has no grid points");
  if (flowrate_grid.size() != entries.size())
    throw ModelError("coefficient table needs one entry per grid point");
  for (std::size_t k = 1; k < flowrate_grid.size(); ++k)
    if (!(flowrate_grid[k] > flowrate_grid[k - 1]))
      throw ModelError("coefficient table flowrate grid must be strictly increasing");
}

std::vector<double> default_flowrate_grid(double threshold, int points) {
  std::vector<double> grid;
  for (int k = 0; k < points; ++k)
    grid.push_back(threshold * (0.5 + static_cast<double>(k) / (points - 1)));
  return grid;
}

namespace {

BearingCoefficients table_entry(const BearingSetup& setup, const Eigen::Vector2d& load, double q) {
  try {
    const EquilibriumPoint eq = find_equilibrium(setup, load, q);
    return linearized_coefficients(setup, eq, q);
  } catch (const NumericalError& e) {
    std::ostringstream msg;
    msg << "coefficient table point " << units::m3s_to_ml_min(q) << " ml/min: " << e.what();
    throw NumericalError(msg.str());
  }
}

void check_grid(const std::vector<double>& q_grid) {
  if (q_grid.empty()) throw ModelError("flowrate grid is empty");
  for (std::size_t k = 1; k < q_grid.size(); ++k)
    if (!(q_grid[k] > q_grid[k - 1])) throw ModelError("flowrate grid must be strictly increasing");
}

}  // namespace

CoefficientTable build_coefficient_table(const BearingSetup& setup,
                                         const Eigen::Vector2d& static_load,
                                         const std::vector<double>& q_grid) {
  check_grid(q_grid);
  CoefficientTable table;
  table.flowrate_grid = q_grid;
  for (double q : q_grid) table.entries.push_back(table_entry(setup, static_load, q));
  return table;
}

CoefficientTable build_coefficient_table_parallel(const BearingSetup& setup,
                                                  const Eigen::Vector2d& static_load,
                                                  const std::vector<double>& q_grid) {
  check_grid(q_grid);
  CoefficientTable table;
  table.flowrate_grid = q_grid;
  table.entries.resize(q_grid.size());
  const long n = static_cast<long>(q_grid.size());
  std::vector<std::exception_ptr> errors(q_grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long k = 0; k < n; ++k) {
    try {
      table.entries[static_cast<std::size_t>(k)] =
          table_entry(setup, static_load, q_grid[static_cast<std::size_t>(k)]);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return table;
}

InterpolatedCoefficients interpolate_coefficients(const CoefficientTable& table, double q) {
  table.validate();
  InterpolatedCoefficients out;
  const auto& grid = table.flowrate_grid;
  if (grid.size() == 1) {
    if (q != grid.front())
      throw ModelError("single-point coefficient table cannot be evaluated away from its grid point");
    out.coefficients = table.entries.front();
    return out;
  }
  if (q <= grid.front() || q >= grid.back()) {
    out.out_of_range = q < grid.front() || q > grid.back();
    out.coefficients = q <= grid.front() ? table.entries.front() : table.entries.back();
    out.coefficients.equilibrium.flowrate = q <= grid.front() ? grid.front() : grid.back();
    return out;
  }
  const auto upper = std::upper_bound(grid.begin(), grid.end(), q);
  const auto k = static_cast<std::size_t>(std::distance(grid.begin(), upper) - 1);
  const BearingCoefficients& a = table.entries[k];
  const BearingCoefficients& b = table.entries[k + 1];
  const double t = (q - grid[k]) / (grid[k + 1] - grid[k]);
  if (t == 0.0) {
    out.coefficients = a;
    return out;
  }
  auto mix = [t](const auto& x, const auto& y) { return (x + t * (y - x)).eval(); };
  BearingCoefficients& c = out.coefficients;
  c.stiffness = mix(a.stiffness, b.stiffness);
  c.damping = mix(a.damping, b.damping);
  c.static_reaction = mix(a.static_reaction, b.static_reaction);
  c.equilibrium.eccentricity = mix(a.equilibrium.eccentricity, b.equilibrium.eccentricity);
  c.equilibrium.residual_force = mix(a.equilibrium.residual_force, b.equilibrium.residual_force);
  c.equilibrium.flowrate = q;
  return out;
}

namespace {

const std::vector<std::string>& table_header() {
  static const std::vector<std::string> h = {
      "flowrate_ml_min", "ex0_um", "ey0_um", "Kxx_N_m",   "Kxy_N_m",  "Kyx_N_m", "Kyy_N_m",
      "Cxx_Ns_m",        "Cxy_Ns_m", "Cyx_Ns_m", "Cyy_Ns_m", "Fx0_N",   "Fy0_N"};
  return h;
}

}  // namespace

std::string coefficient_table_csv(const CoefficientTable& table) {
  table.validate();
  io::CsvTable csv;
  csv.header = table_header();
  for (std::size_t k = 0; k < table.entries.size(); ++k) {
    const auto& e = table.entries[k];
    csv.rows.push_back({units::m3s_to_ml_min(table.flowrate_grid[k]),
                        units::m_to_um(e.equilibrium.eccentricity.x()),
                        units::m_to_um(e.equilibrium.eccentricity.y()), e.stiffness(0, 0),
                        e.stiffness(0, 1), e.stiffness(1, 0), e.stiffness(1, 1), e.damping(0, 0),
                        e.damping(0, 1), e.damping(1, 0), e.damping(1, 1), e.static_reaction.x(),
                        e.static_reaction.y()});
  }
  return io::to_csv_string(csv);
}

void write_coefficient_table(const CoefficientTable& table, const std::string& path) {
  io::write_text_atomic(path, coefficient_table_csv(table));
}

CoefficientTable read_coefficient_table(const std::string& path) {
  const io::CsvTable csv = io::read_csv(path);
  io::require_header(csv, table_header(), path);
  CoefficientTable table;
  for (const auto& r : csv.rows) {
    table.flowrate_grid.push_back(units::ml_min_to_m3s(r[0]));
    BearingCoefficients e;
    e.equilibrium.flowrate = table.flowrate_grid.back();
    e.equilibrium.eccentricity = {units::um_to_m(r[1]), units::um_to_m(r[2])};
    e.stiffness << r[3], r[4], r[5], r[6];
    e.damping << r[7], r[8], r[9], r[10];
    e.static_reaction = {r[11], r[12]};
    table.entries.push_back(e);
  }
  table.validate();
  return table;
}

}  // namespace oilid::bearing
