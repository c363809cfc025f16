#pragma once

// Extended Kalman filter over the flowrate-augmented rotor state
// s = [r; dr/dt; q1; q2]. The flowrates are random-walk states.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oilid/statespace.hpp"

namespace oilid::ekf {

/// Diagonal covariances in SI units.
struct NoiseConfig {
  Eigen::VectorXd Q;   // 2n + 2
  Eigen::VectorXd R;   // 8
  Eigen::VectorXd P0;  // 2n + 2

  void validate(int augmented_size) const;
};

/// Noise levels as the user states them.
struct NoiseSettings {
  double displacement_std = 10e-6;         // m, process
  double velocity_std = 10e-6;             // m/s, process
  double flowrate_std = 0.1 / 6e7;         // m^3/s, process (0.1 ml/min)
  double initial_displacement_std = 100e-6;
  double initial_velocity_std = 10e-3;
  double initial_flowrate_fraction = 0.10;  // of the nominal flowrate
  /// Velocity-channel variance: false uses sigma_v^2 on every channel,
  /// true uses sigma_v^2 / (2 dt^2), the variance of a central difference.
  bool corrected_velocity_variance = false;
  double jacobian_step = 1.0 / 6e7;        // m^3/s (1 ml/min)
};

/// Q, R, P0 for a plant with `dof_count` dofs and measurement noise sigma_v.
NoiseConfig make_noise(const NoiseSettings& settings, int dof_count, double sigma_v,
                       double nominal_flowrate, double sample_period);

struct FilterState {
  Eigen::VectorXd estimate;
  Eigen::MatrixXd covariance;
  long step = 0;
};

struct StepDiagnostics {
  Eigen::VectorXd innovation;
  Eigen::MatrixXd innovation_covariance;
  double gain_norm = 0.0;
  Eigen::Vector2d flowrate = Eigen::Vector2d::Zero();
  Eigen::Vector2d flowrate_std = Eigen::Vector2d::Zero();
  double normalized_innovation = 0.0;  // innovation' S^-1 innovation
};

/// A-priori step with an explicit Jacobian: P = J P J' + Q, symmetrized.
FilterState predict(const FilterState& state, const Eigen::VectorXd& next_estimate,
                    const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& Q);

/// A-priori step through the plant transition at time t_k.
FilterState predict(const FilterState& state, const ss::Plant& plant, double t_k,
                    const Eigen::VectorXd& Q, double jacobian_step);

/// Measurement update in Joseph form. Throws NumericalError when the
/// innovation covariance cannot be factorized.
FilterState update(const FilterState& prior, const Eigen::VectorXd& z, const Eigen::MatrixXd& H,
                   const Eigen::VectorXd& R, StepDiagnostics* diagnostics = nullptr);

/// Converged when the std of every flowrate over the trailing window is
/// below `threshold`.
struct Convergence {
  bool converged = false;
  long index = -1;               // first sample whose trailing window satisfies the test
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();  // mean from the window start to the end
};
Convergence detect_convergence(const std::vector<Eigen::Vector2d>& trace, long window,
                               double threshold);

struct Measurements {
  std::vector<double> time;
  std::vector<Eigen::Matrix<double, 8, 1>> channels;  // disp b1 X Y, b2 X Y, vel b1 X Y, b2 X Y
};

struct FilterOptions {
  double convergence_window = 1.0;         // s
  double convergence_fraction = 0.005;     // of the nominal flowrate
  double nominal_flowrate = 596.3 / 6e7;   // m^3/s
  double jacobian_step = 1.0 / 6e7;
  /// Blow-up guard: a flowrate std above this fraction of nominal flags
  /// divergence. (The velocity block of P is legitimately huge: the stiff
  /// shaft modes map displacement uncertainty into m/s.)
  double max_flowrate_std_fraction = 1.0;
  /// Called after every update; lets a caller stream estimates.
  std::function<void(long, double, const FilterState&, const StepDiagnostics&)> on_step;
};

struct EstimateHistory {
  std::vector<double> time;
  std::vector<Eigen::Vector2d> flowrate;
  std::vector<Eigen::Vector2d> flowrate_std;
  std::vector<double> innovation_norm;
  std::vector<double> normalized_innovation;
  std::vector<std::uint8_t> converged;  // trailing-window test per step
  Convergence convergence;
  FilterState final_state;
  bool diverged = false;
  std::string failure;
};

EstimateHistory run_filter(const ss::Plant& plant, const Measurements& measurements,
                           const NoiseConfig& noise, const FilterState& initial,
                           const FilterOptions& options = {});

/// Zero displacements and velocities (or `rotor_state`), q at `q0`, P0 diagonal.
FilterState initial_state(const ss::Plant& plant, const Eigen::Vector2d& q0,
                          const NoiseConfig& noise,
                          const std::optional<Eigen::VectorXd>& rotor_state = std::nullopt);

/// time_s, q1_ml_min, q2_ml_min, q1_std, q2_std, innovation_norm, converged_flag
std::string estimate_csv(const EstimateHistory& history);

}  // namespace oilid::ekf
