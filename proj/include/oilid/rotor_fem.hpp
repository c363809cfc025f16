#pragma once

// Finite-element rotor: Timoshenko shaft elements, rigid discs, unbalance.
//
// Four dofs per node in the order (V, W, B, Gamma): translations along X and
// Y, rotations about X and Y. Dofs are node-major, so dof(node, k) = 4 node + k.
// With the shaft along Z: Gamma = dV/dz and B = -dW/dz for a bending-only
// deflection. Gravity acts along +Y (Y points down).

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <vector>

namespace oilid::rotor {

inline constexpr int kDofsPerNode = 4;
enum LocalDof : int { kV = 0, kW = 1, kB = 2, kGamma = 3 };
constexpr int dof(int node, int local) { return kDofsPerNode * node + local; }

struct Material {
  double young_modulus = 210e9;
  double poisson_ratio = 0.3;
  double density = 7850.0;

  void validate() const;
  double shear_modulus() const { return young_modulus / (2.0 * (1.0 + poisson_ratio)); }
};

/// Shear correction factor of a solid circular section.
double shear_correction_factor(double poisson_ratio);

struct ShaftElement {
  double length = 0.0;
  double diameter = 0.0;
};

struct Disc {
  int node = 0;  // 0-based
  double width = 0.0;
  double external_diameter = 0.0;
  std::optional<double> internal_diameter;  // defaults to the shaft diameter at the node
};

struct Unbalance {
  int node = 0;          // 0-based
  double moment = 0.0;   // kg m
  double phase = 0.0;    // rad
};

struct RotorModel {
  Material material;
  std::vector<ShaftElement> elements;
  std::vector<Disc> discs;
  std::array<int, 2> bearing_nodes{0, 0};  // 0-based
  Unbalance unbalance;
  double speed = 0.0;    // rad/s
  double gravity = 9.81; // m/s^2, along +Y
  double damping_mass_factor = 0.0;       // C = a M + b K
  double damping_stiffness_factor = 0.0;

  int node_count() const { return static_cast<int>(elements.size()) + 1; }
  int dof_count() const { return kDofsPerNode * node_count(); }
  std::vector<double> node_positions() const;
  /// Largest diameter of the elements touching `node`.
  double shaft_diameter_at(int node) const;
  void validate() const;

  /// Generic turbine: 20 elements, three discs, bearings at (1-based) nodes
  /// 6 and 20, unbalance on the central disc sized by balance grade G2.5.
  static RotorModel turbine();
};

struct ElementMatrices {
  Eigen::Matrix<double, 8, 8> mass;
  Eigen::Matrix<double, 8, 8> stiffness;
  Eigen::Matrix<double, 8, 8> gyroscopic;  // multiply by the spin speed
};

ElementMatrices beam_element_matrices(const ShaftElement& element, const Material& material);

struct DiscMatrices {
  Eigen::Matrix4d mass;
  Eigen::Matrix4d gyroscopic;
  double mass_value = 0.0;
  double polar_inertia = 0.0;
  double diametral_inertia = 0.0;
};

DiscMatrices disc_matrices(const Disc& disc, const Material& material, double internal_diameter);

struct GlobalMatrices {
  Eigen::MatrixXd mass;
  Eigen::MatrixXd damping;     // structural only
  Eigen::MatrixXd gyroscopic;  // multiply by the spin speed
  Eigen::MatrixXd stiffness;
  Eigen::VectorXd weight;      // gravity load vector

  int size() const { return static_cast<int>(mass.rows()); }
};

GlobalMatrices assemble_global(const RotorModel& model);

double total_mass(const RotorModel& model);

/// Unbalance force (F_X, F_Y) at time t.
Eigen::Vector2d unbalance_force(double moment, double phase, double speed, double time);

/// Permissible residual unbalance m e = m G / Omega; grade G in m/s.
double g25_unbalance_moment(double rotor_mass, double service_speed, double grade = 2.5e-3);

/// Loads the rotor weight puts on the two bearings (force on each bearing,
/// +Y down), from a static solve with both bearing nodes pinned.
std::array<Eigen::Vector2d, 2> static_bearing_loads(const RotorModel& model);

}  // namespace oilid::rotor
