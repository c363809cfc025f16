#pragma once

// Hydrodynamic journal bearing with a prescribed oil supply flowrate.
//
// The film is solved with the mass-conserving p-theta formulation on a
// finite-volume mesh: every cell is either pressurized (theta = 1, p > p_cav)
// or cavitated (p = p_cav, 0 <= theta < 1). The supply flowrate enters as a
// volumetric source spread over the groove cells.
//
// Frame: X horizontal, Y vertical pointing down (gravity along +Y), angle phi
// measured from +X towards +Y, shaft spinning in +phi, groove at phi = 0.
// Film thickness h = c - ex cos(phi) - ey sin(phi).
// Coefficients follow the usual rotordynamic sign: the film force on the
// shaft is F = F0 - K (e - e0) - C de/dt.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oilid::bearing {

struct BearingGeometry {
  double radius = 0.045;
  double width = 0.070;
  double radial_clearance = 120e-6;
  double groove_angle = 0.0;                 // rad, groove center
  double groove_circumferential_length = 0.0162;
  double groove_axial_width = 0.035;

  void validate() const;
  /// Bearing of the reference turbine (both bearings are identical).
  static BearingGeometry turbine();
};

struct Lubricant {
  double viscosity = 0.094;        // Pa s
  double supply_pressure = 50e3;   // Pa gauge
  double cavitation_pressure = 0;  // Pa gauge

  void validate() const;
};

class FilmMesh {
 public:
  FilmMesh(const BearingGeometry& geometry, int n_circ = 120, int n_axial = 30);

  int n_circ() const { return n_circ_; }
  int n_axial() const { return n_axial_; }
  int size() const { return n_circ_ * n_axial_; }
  double dphi() const { return dphi_; }
  double dz() const { return dz_; }
  double radius() const { return radius_; }
  double width() const { return width_; }

  /// Cell-center angle, cell i spans [i dphi, (i + 1) dphi).
  double angle(int i) const { return (i + 0.5) * dphi_; }
  double axial(int j) const { return (j + 0.5) * dz_; }
  double cell_area() const { return radius_ * dphi_ * dz_; }

  bool is_groove(int i, int j) const { return groove_[static_cast<std::size_t>(i + n_circ_ * j)] != 0; }
  int groove_cell_count() const { return groove_count_; }
  double groove_area() const { return groove_count_ * cell_area(); }

 private:
  int n_circ_;
  int n_axial_;
  double dphi_;
  double dz_;
  double radius_;
  double width_;
  std::vector<std::uint8_t> groove_;
  int groove_count_ = 0;
};

struct ShaftKinematics {
  Eigen::Vector2d eccentricity = Eigen::Vector2d::Zero();
  Eigen::Vector2d eccentricity_rate = Eigen::Vector2d::Zero();
  double speed = 0.0;  // rad/s
};

/// Fields are stored n_circ x n_axial, circumferential index fastest.
struct FilmState {
  Eigen::ArrayXXd pressure;
  Eigen::ArrayXXd fluid_fraction;
  Eigen::ArrayXXd film_thickness;

  int sweeps = 0;
  double residual = 0.0;        // max cell imbalance / (U c dz / 2)
  double groove_flowrate = 0.0; // m^3/s entering through the groove
  double axial_outflow = 0.0;   // m^3/s leaving through both bearing ends
  double squeeze_flow = 0.0;    // m^3/s absorbed by the moving walls
  std::vector<double> residual_history;
};

struct SolverOptions {
  double tolerance = 1e-6;
  int max_sweeps = 100000;
  double relaxation = 1.85;
  int check_every = 10;
};

double film_thickness(const BearingGeometry& geometry, const ShaftKinematics& kinematics,
                      double angle);

/// Steady (quasi-static for nonzero eccentricity rate) film with the supply
/// flowrate injected over the groove. `warm_start` must come from the same mesh.
FilmState solve_film(const BearingGeometry& geometry, const Lubricant& lubricant,
                     const FilmMesh& mesh, const ShaftKinematics& kinematics,
                     double supply_flowrate, const SolverOptions& options = {},
                     const FilmState* warm_start = nullptr);

/// Groove cells held at the lubricant supply pressure; the resulting groove
/// flowrate is reported in FilmState::groove_flowrate.
FilmState solve_film_pressure_fed(const BearingGeometry& geometry, const Lubricant& lubricant,
                                  const FilmMesh& mesh, const ShaftKinematics& kinematics,
                                  const SolverOptions& options = {},
                                  const FilmState* warm_start = nullptr);

/// Film force acting on the shaft.
Eigen::Vector2d hydrodynamic_force(const FilmState& state, const FilmMesh& mesh);

/// Largest |(p - p_cav)(1 - theta)| normalized by the peak pressure.
double complementarity_violation(const FilmState& state, double cavitation_pressure = 0.0);

/// |groove inflow - axial outflow - squeeze| / groove inflow.
double mass_balance_error(const FilmState& state);

struct EquilibriumPoint {
  Eigen::Vector2d eccentricity = Eigen::Vector2d::Zero();
  double flowrate = 0.0;
  Eigen::Vector2d residual_force = Eigen::Vector2d::Zero();
  int iterations = 0;
};

struct BearingCoefficients {
  Eigen::Matrix2d stiffness = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d damping = Eigen::Matrix2d::Zero();
  EquilibriumPoint equilibrium;
  Eigen::Vector2d static_reaction = Eigen::Vector2d::Zero();  // film force at equilibrium
};

/// Everything needed to evaluate the film at one operating speed.
struct BearingSetup {
  BearingGeometry geometry;
  Lubricant lubricant;
  int n_circ = 120;
  int n_axial = 30;
  double speed = 0.0;  // rad/s
  SolverOptions solver;
  double equilibrium_tolerance = 1e-3;  // relative to load magnitude
  int equilibrium_max_iterations = 40;
  double displacement_step = 1e-3;      // fraction of clearance
};

/// Which groove boundary condition a solve uses.
enum class Feed { Flowrate, Pressure };

/// Film force on the shaft (plus the groove flowrate) at given kinematics.
struct ForceEvaluation {
  Eigen::Vector2d force;
  double groove_flowrate;
  FilmState state;
};

ForceEvaluation evaluate_force(const BearingSetup& setup, const FilmMesh& mesh,
                               const ShaftKinematics& kinematics, Feed feed, double supply_flowrate,
                               const FilmState* warm_start = nullptr);

/// Static equilibrium: film force + static_load = 0. Throws NumericalError
/// when no equilibrium exists inside the clearance circle.
EquilibriumPoint find_equilibrium(const BearingSetup& setup, const Eigen::Vector2d& static_load,
                                  double supply_flowrate, Feed feed = Feed::Flowrate,
                                  std::optional<Eigen::Vector2d> initial_guess = std::nullopt);

/// K = -dF/de and C = -dF/d(de/dt) by central differences about `equilibrium`.
BearingCoefficients linearized_coefficients(const BearingSetup& setup,
                                            const EquilibriumPoint& equilibrium,
                                            double supply_flowrate, Feed feed = Feed::Flowrate);

/// Groove flowrate of the pressure-fed bearing at its own equilibrium.
struct NominalCalibration {
  double flowrate = 0.0;
  EquilibriumPoint equilibrium;
};
NominalCalibration calibrate_nominal(const BearingSetup& setup, const Eigen::Vector2d& static_load);

/// Smallest supply flowrate for which the cells just downstream of the groove
/// run full at equilibrium. Bisection between `q_low` and `q_high`.
double flooded_threshold(const BearingSetup& setup, const Eigen::Vector2d& static_load,
                         double q_low, double q_high, double relative_tolerance = 2e-3);

struct CoefficientTable {
  std::vector<double> flowrate_grid;
  std::vector<BearingCoefficients> entries;

  void validate() const;
  double q_min() const { return flowrate_grid.front(); }
  double q_max() const { return flowrate_grid.back(); }
};

/// 7 equispaced flowrates from 50% to 150% of `threshold`.
std::vector<double> default_flowrate_grid(double threshold, int points = 7);

CoefficientTable build_coefficient_table(const BearingSetup& setup,
                                         const Eigen::Vector2d& static_load,
                                         const std::vector<double>& q_grid);

/// Same result as build_coefficient_table, grid points solved concurrently.
CoefficientTable build_coefficient_table_parallel(const BearingSetup& setup,
                                                  const Eigen::Vector2d& static_load,
                                                  const std::vector<double>& q_grid);

struct InterpolatedCoefficients {
  BearingCoefficients coefficients;
  bool out_of_range = false;
};

InterpolatedCoefficients interpolate_coefficients(const CoefficientTable& table, double q);

void write_coefficient_table(const CoefficientTable& table, const std::string& path);
CoefficientTable read_coefficient_table(const std::string& path);
std::string coefficient_table_csv(const CoefficientTable& table);

}  // namespace oilid::bearing
