#pragma once

// Rotor-bearing state-space model with the two oil supply flowrates appended
// to the state. State ordering: [r (n); dr/dt (n); q1; q2], n = dof count.

#include <Eigen/Dense>

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "oilid/bearing_hydro.hpp"
#include "oilid/rotor_fem.hpp"

namespace oilid::ss {

using bearing::BearingCoefficients;
using bearing::CoefficientTable;

struct ContinuousStateSpace {
  Eigen::MatrixXd A;  // 2n x 2n
  Eigen::MatrixXd B;  // 2n x n
};

/// Second-order matrices with the bearing stiffness/damping folded in at the
/// bearing translational dofs.
struct BearingLoadedMatrices {
  Eigen::MatrixXd mass;
  Eigen::MatrixXd damping;    // structural + bearings + spin * gyroscopic
  Eigen::MatrixXd stiffness;  // rotor + bearings
};

BearingLoadedMatrices fold_bearings(const rotor::GlobalMatrices& global, double speed,
                                    const std::array<int, 2>& bearing_nodes,
                                    const std::array<BearingCoefficients, 2>& coefficients);

ContinuousStateSpace build_continuous(const rotor::GlobalMatrices& global, double speed,
                                      const std::array<int, 2>& bearing_nodes,
                                      const std::array<BearingCoefficients, 2>& coefficients);

/// Constant part of u: gravity plus F0 + K e0 of each bearing.
Eigen::VectorXd constant_input(const rotor::GlobalMatrices& global,
                               const std::array<int, 2>& bearing_nodes,
                               const std::array<BearingCoefficients, 2>& coefficients);

struct DiscreteStateSpace {
  Eigen::MatrixXd Ad;
  Eigen::MatrixXd Bd;
  double sample_period = 0.0;
};

/// Zero-order-hold discretization: top blocks of exp([[A, B], [0, 0]] dt).
DiscreteStateSpace discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt);

/// As discretize, plus the exact response to a harmonic input
/// Bh [cos(w t + p); sin(w t + p)]: the state advances by Gamma [cos; sin]
/// evaluated at the start of the step.
struct HarmonicDiscretization {
  Eigen::MatrixXd Ad;
  Eigen::MatrixXd Bd;
  Eigen::MatrixXd Gamma;  // 2n x 2
};
HarmonicDiscretization discretize_harmonic(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                           const Eigen::MatrixXd& Bh, double omega, double dt);

struct AugmentedMatrices {
  Eigen::MatrixXd transition;  // [[Ad, 0], [0, I2]]
  Eigen::MatrixXd input;       // [Bd; 0]
  Eigen::MatrixXd output;      // [H, 0]
};
AugmentedMatrices augment(const DiscreteStateSpace& model, const Eigen::MatrixXd& H);

/// 8 x 2n selection of bearing displacements then velocities, ordered
/// b1-X, b1-Y, b2-X, b2-Y.
Eigen::MatrixXd measurement_matrix(int dof_count, const std::array<int, 2>& bearing_nodes);

enum class Discretization { CachedGrid, Exact };
/// How the unbalance force enters a step: exact harmonic response, or held
/// at its end-of-step value (u_{k+1}) over the whole step.
enum class InputHold { Harmonic, EndValue };

struct PlantConfig {
  rotor::GlobalMatrices global;
  double speed = 0.0;
  std::array<int, 2> bearing_nodes{0, 0};
  std::array<CoefficientTable, 2> tables;
  rotor::Unbalance unbalance;
  double sample_period = 1e-3;
  Discretization mode = Discretization::CachedGrid;
  InputHold input_hold = InputHold::Harmonic;
  double exact_threshold = 1.0 / 6e7;  // m^3/s (1 ml/min)
};

/// Discrete model at one flowrate pair.
struct LocalModel {
  Eigen::MatrixXd Ad;           // 2n x 2n
  Eigen::VectorXd drift;        // Bd times the constant input
  Eigen::MatrixXd unbalance;    // 2n x 2: Gamma (harmonic) or Bd columns of the unbalance dofs
  std::array<bool, 2> clamped{false, false};
};

enum class Build { Serial, Parallel };

class Plant {
 public:
  /// Build::Parallel fills the cached grid with OpenMP; the result is
  /// identical to the serial build.
  explicit Plant(PlantConfig config, Build build = Build::Serial);

  int dof_count() const { return n_; }
  int state_size() const { return 2 * n_; }
  int augmented_size() const { return 2 * n_ + 2; }
  const PlantConfig& config() const { return config_; }
  const Eigen::MatrixXd& measurement() const { return H_; }
  Eigen::MatrixXd augmented_measurement() const;

  /// Lookup bounds of each bearing's coefficient table.
  std::pair<double, double> flowrate_bounds(int bearing) const;

  LocalModel model_at(double q1, double q2) const;

  /// s_{k+1} = f(s_k) for the step starting at time t_k.
  Eigen::VectorXd transition(const Eigen::VectorXd& state, double t_k) const;
  /// Displacement/velocity part of f, at an explicit flowrate pair.
  Eigen::VectorXd advance(const Eigen::VectorXd& rotor_state, double q1, double q2, double t_k) const;

  /// df/ds; q columns by central differences with step dq (one-sided at the clamp).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& state, double t_k, double dq) const;

  /// Static deflection (zero velocity, no unbalance) at a flowrate pair.
  Eigen::VectorXd static_state(double q1, double q2) const;

  /// Exact discretization at a flowrate pair (expensive).
  LocalModel exact_model(double q1, double q2) const;

  /// Unbalance direction vector [cos; sin] entering a step at t_k.
  Eigen::Vector2d unbalance_phasor(double t_k) const;

 private:
  std::array<BearingCoefficients, 2> coefficients_at(double q1, double q2,
                                                     std::array<bool, 2>* clamped) const;
  struct Blend {
    std::array<int, 4> index{};
    std::array<double, 4> weight{};
    int count = 0;
  };
  Blend blend(double q1, double q2) const;
  std::shared_ptr<const LocalModel> lattice_model(double q1, double q2) const;

  PlantConfig config_;
  int n_ = 0;
  Eigen::MatrixXd H_;
  // CachedGrid: Ad and input columns per grid pair, row-major in (i1, i2).
  struct GridEntry {
    Eigen::MatrixXd Ad;
    Eigen::VectorXd drift_weight;  // Bd * weight
    Eigen::MatrixXd bearing_cols;  // Bd columns at the 4 bearing dofs
    Eigen::MatrixXd unbalance;     // Gamma or Bd unbalance columns
  };
  std::vector<GridEntry> grid_;
  // Exact mode: models on a flowrate lattice, shared between copies.
  struct LatticeCache {
    std::mutex mutex;
    std::map<std::pair<long, long>, std::shared_ptr<const LocalModel>> models;
  };
  std::shared_ptr<LatticeCache> lattice_;
  Eigen::MatrixXd input_selection_;  // n x 5: weight, then the 4 bearing dofs
  Eigen::MatrixXd unbalance_selection_;  // n x 2
  GridEntry build_entry(const std::array<BearingCoefficients, 2>& coefficients) const;
  Eigen::VectorXd bearing_forces(const std::array<BearingCoefficients, 2>& coefficients) const;
};

}  // namespace oilid::ss
