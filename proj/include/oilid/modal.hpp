#pragma once

// Damped eigenanalysis of the bearing-supported rotor.

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <vector>

#include "oilid/statespace.hpp"

namespace oilid::ss {

struct DampedMode {
  std::complex<double> eigenvalue;
  double frequency_hz = 0.0;   // |Im| / 2 pi
  double damping_ratio = 0.0;  // -Re / |lambda|
  bool forward = false;        // whirls in the spin direction
};

/// Modes with positive imaginary part, sorted by frequency. `measure_nodes`
/// picks the nodes whose orbits decide the whirl direction (all when empty).
std::vector<DampedMode> damped_modes(const Eigen::MatrixXd& A, int dof_count,
                                     const std::vector<int>& measure_nodes = {});

/// Lowest forward-whirl mode above `min_hz`, skipping the overdamped
/// bearing modes.
DampedMode first_forward_mode(const std::vector<DampedMode>& modes, double min_hz = 1.0,
                              double max_damping_ratio = 0.3);

/// Largest real part over the eigenvalues with |Im| below 2 pi max_hz. The
/// cut keeps the undamped high shaft modes (no structural damping) out.
double spectral_abscissa(const Eigen::MatrixXd& A, double max_hz = 500.0);

/// Zero crossing of a scalar function of speed, by bracketing on a coarse
/// grid and bisection. Returns NaN when no crossing lies in [lo, hi].
double find_onset(const std::function<double(double)>& growth, double lo, double hi,
                  int coarse_points = 8, double tolerance = 0.05);

}  // namespace oilid::ss
