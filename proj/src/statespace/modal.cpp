#include "oilid/modal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oilid/errors.hpp"
#include "oilid/units.hpp"

namespace oilid::ss {

namespace {

// The undamped shaft modes reach tens of kHz, so ||A|| ~ 1e11 and double
// precision leaves real-part errors of order 10 s^-1 on them. Extended
// precision keeps the sign of small real parts trustworthy.
using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace

std::vector<DampedMode> damped_modes(const Eigen::MatrixXd& A, int dof_count,
                                     const std::vector<int>& measure_nodes) {
  Eigen::EigenSolver<LongMatrix> es(A.cast<long double>(), true);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver failed");
  std::vector<int> nodes = measure_nodes;
  if (nodes.empty())
    for (int k = 0; k < dof_count / rotor::kDofsPerNode; ++k) nodes.push_back(k);

  std::vector<DampedMode> out;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const std::complex<double> lambda(static_cast<double>(es.eigenvalues()[k].real()),
                                      static_cast<double>(es.eigenvalues()[k].imag()));
    if (lambda.imag() <= 0.0) continue;
    DampedMode m;
    m.eigenvalue = lambda;
    m.frequency_hz = units::rad_s_to_hz(lambda.imag());
    m.damping_ratio = -lambda.real() / std::abs(lambda);
    // x = Re(vx e^{i w t}), y = Re(vy e^{i w t}) turns from +X to +Y when
    // Im(conj(vx) vy) < 0.
    long double whirl = 0.0;
    for (int node : nodes) {
      const auto vx = es.eigenvectors()(rotor::dof(node, rotor::kV), k);
      const auto vy = es.eigenvectors()(rotor::dof(node, rotor::kW), k);
      whirl += std::imag(std::conj(vx) * vy);
    }
    m.forward = whirl < 0.0;
    out.push_back(m);
  }
  std::sort(out.begin(), out.end(),
            [](const DampedMode& a, const DampedMode& b) { return a.frequency_hz < b.frequency_hz; });
  return out;
}

DampedMode first_forward_mode(const std::vector<DampedMode>& modes, double min_hz,
                              double max_damping_ratio) {
  for (const auto& m : modes)
    if (m.forward && m.frequency_hz >= min_hz && m.damping_ratio < max_damping_ratio) return m;
  throw NumericalError("no lightly damped forward whirl mode found");
}

double spectral_abscissa(const Eigen::MatrixXd& A, double max_hz) {
  Eigen::EigenSolver<LongMatrix> es(A.cast<long double>(), false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver failed");
  const long double cut = 2.0L * units::kPi * max_hz;
  long double best = -std::numeric_limits<long double>::infinity();
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    if (std::abs(es.eigenvalues()[k].imag()) <= cut) best = std::max(best, es.eigenvalues()[k].real());
  return static_cast<double>(best);
}

double find_onset(const std::function<double(double)>& growth, double lo, double hi,
                  int coarse_points, double tolerance) {
  double a = lo;
  double ga = growth(a);
  if (ga >= 0.0) return a;
  for (int k = 1; k < coarse_points; ++k) {
    double b = lo + (hi - lo) * k / (coarse_points - 1);
    const double gb = growth(b);
    if (gb >= 0.0) {
      while (b - a > tolerance) {
        const double mid = 0.5 * (a + b);
        (growth(mid) >= 0.0 ? b : a) = mid;
      }
      return 0.5 * (a + b);
    }
    a = b;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace oilid::ss
