#include "oilid/statespace.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

#include "oilid/errors.hpp"

namespace oilid::ss {

using rotor::dof;
using rotor::kV;
using rotor::kW;

BearingLoadedMatrices fold_bearings(const rotor::GlobalMatrices& global, double speed,
                                    const std::array<int, 2>& bearing_nodes,
                                    const std::array<BearingCoefficients, 2>& coefficients) {
  BearingLoadedMatrices out{global.mass, global.damping + speed * global.gyroscopic,
                            global.stiffness};
  for (std::size_t b = 0; b < 2; ++b) {
    const int first = dof(bearing_nodes[b], kV);
    out.stiffness.block<2, 2>(first, first) += coefficients[b].stiffness;
    out.damping.block<2, 2>(first, first) += coefficients[b].damping;
  }
  return out;
}

namespace {

Eigen::MatrixXd mass_inverse_times(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(mass);
  if (llt.info() != Eigen::Success) throw ModelError("mass matrix is not positive definite");
  return llt.solve(rhs);
}

Eigen::MatrixXd state_matrix(const BearingLoadedMatrices& m) {
  const Eigen::Index n = m.mass.rows();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  A.topRightCorner(n, n).setIdentity();
  Eigen::MatrixXd kd(n, 2 * n);
  kd << m.stiffness, m.damping;
  A.bottomRows(n) = -mass_inverse_times(m.mass, kd);
  return A;
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite())
    throw NumericalError(std::string(what) + ": matrix exponential overflowed (unstable A with large dt?)");
}

}  // namespace

ContinuousStateSpace build_continuous(const rotor::GlobalMatrices& global, double speed,
                                      const std::array<int, 2>& bearing_nodes,
                                      const std::array<BearingCoefficients, 2>& coefficients) {
  const auto loaded = fold_bearings(global, speed, bearing_nodes, coefficients);
  const Eigen::Index n = global.mass.rows();
  ContinuousStateSpace out;
  out.A = state_matrix(loaded);
  out.B = Eigen::MatrixXd::Zero(2 * n, n);
  out.B.bottomRows(n) = mass_inverse_times(global.mass, Eigen::MatrixXd::Identity(n, n));
  return out;
}

Eigen::VectorXd constant_input(const rotor::GlobalMatrices& global,
                               const std::array<int, 2>& bearing_nodes,
                               const std::array<BearingCoefficients, 2>& coefficients) {
  Eigen::VectorXd u = global.weight;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto& c = coefficients[b];
    u.segment<2>(dof(bearing_nodes[b], kV)) +=
        c.static_reaction + c.stiffness * c.equilibrium.eccentricity;
  }
  return u;
}

DiscreteStateSpace discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt) {
  if (!(dt > 0)) throw ModelError("sample period must be positive");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n + m, n + m);
  block.topLeftCorner(n, n) = A;
  block.topRightCorner(n, m) = B;
  const Eigen::MatrixXd phi = (block * dt).exp();
  check_finite(phi, "discretize");
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, m), dt};
}

HarmonicDiscretization discretize_harmonic(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                           const Eigen::MatrixXd& Bh, double omega, double dt) {
  if (!(dt > 0)) throw ModelError("sample period must be positive");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n + m + 2, n + m + 2);
  block.topLeftCorner(n, n) = A;
  block.block(0, n, n, m) = B;
  block.block(0, n + m, n, 2) = Bh;
  block(n + m, n + m + 1) = -omega;
  block(n + m + 1, n + m) = omega;
  const Eigen::MatrixXd phi = (block * dt).exp();
  check_finite(phi, "discretize_harmonic");
  return {phi.topLeftCorner(n, n), phi.block(0, n, n, m), phi.block(0, n + m, n, 2)};
}

AugmentedMatrices augment(const DiscreteStateSpace& model, const Eigen::MatrixXd& H) {
  const Eigen::Index n = model.Ad.rows();
  AugmentedMatrices out;
  out.transition = Eigen::MatrixXd::Zero(n + 2, n + 2);
  out.transition.topLeftCorner(n, n) = model.Ad;
  out.transition.bottomRightCorner(2, 2).setIdentity();
  out.input = Eigen::MatrixXd::Zero(n + 2, model.Bd.cols());
  out.input.topRows(n) = model.Bd;
  out.output = Eigen::MatrixXd::Zero(H.rows(), n + 2);
  out.output.leftCols(H.cols()) = H;
  return out;
}

Eigen::MatrixXd measurement_matrix(int dof_count, const std::array<int, 2>& bearing_nodes) {
  for (int b : bearing_nodes)
    if (b < 0 || rotor::kDofsPerNode * b >= dof_count)
      throw ModelError("measurement node out of range");
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(8, 2 * dof_count);
  int row = 0;
  for (int block = 0; block < 2; ++block)  // displacements, then velocities
    for (int b : bearing_nodes)
      for (int axis : {kV, kW}) H(row++, block * dof_count + dof(b, axis)) = 1.0;
  return H;
}

// ---------------------------------------------------------------------------
// Plant

Plant::Plant(PlantConfig config, Build build)
    : config_(std::move(config)), lattice_(std::make_shared<LatticeCache>()) {
  n_ = config_.global.size();
  for (const auto& t : config_.tables) t.validate();
  H_ = measurement_matrix(n_, config_.bearing_nodes);

  input_selection_ = Eigen::MatrixXd::Zero(n_, 5);
  input_selection_.col(0) = config_.global.weight;
  for (int b = 0; b < 2; ++b) {
    const int first = dof(config_.bearing_nodes[static_cast<std::size_t>(b)], kV);
    input_selection_(first, 1 + 2 * b) = 1.0;
    input_selection_(first + 1, 2 + 2 * b) = 1.0;
  }
  const auto& u = config_.unbalance;
  unbalance_selection_ = Eigen::MatrixXd::Zero(n_, 2);
  const double amplitude = u.moment * config_.speed * config_.speed;
  unbalance_selection_(dof(u.node, kV), 0) = amplitude;
  unbalance_selection_(dof(u.node, kW), 1) = amplitude;

  if (config_.mode != Discretization::CachedGrid) return;
  const auto& g1 = config_.tables[0];
  const auto& g2 = config_.tables[1];
  const long n1 = static_cast<long>(g1.flowrate_grid.size());
  const long n2 = static_cast<long>(g2.flowrate_grid.size());
  grid_.resize(static_cast<std::size_t>(n1 * n2));
  auto fill = [&](long k) {
    const auto i1 = static_cast<std::size_t>(k / n2);
    const auto i2 = static_cast<std::size_t>(k % n2);
    grid_[static_cast<std::size_t>(k)] = build_entry({g1.entries[i1], g2.entries[i2]});
  };
  if (build == Build::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long k = 0; k < n1 * n2; ++k) fill(k);
  } else {
    for (long k = 0; k < n1 * n2; ++k) fill(k);
  }
}

Eigen::MatrixXd Plant::augmented_measurement() const {
  Eigen::MatrixXd Ha = Eigen::MatrixXd::Zero(8, augmented_size());
  Ha.leftCols(2 * n_) = H_;
  return Ha;
}

std::pair<double, double> Plant::flowrate_bounds(int bearing) const {
  const auto& t = config_.tables[static_cast<std::size_t>(bearing)];
  return {t.q_min(), t.q_max()};
}

Eigen::Vector2d Plant::unbalance_phasor(double t_k) const {
  const double t = config_.input_hold == InputHold::Harmonic ? t_k : t_k + config_.sample_period;
  const double arg = config_.speed * t + config_.unbalance.phase;
  return {std::cos(arg), std::sin(arg)};
}

std::array<BearingCoefficients, 2> Plant::coefficients_at(double q1, double q2,
                                                          std::array<bool, 2>* clamped) const {
  const auto a = bearing::interpolate_coefficients(config_.tables[0], q1);
  const auto b = bearing::interpolate_coefficients(config_.tables[1], q2);
  if (clamped) *clamped = {a.out_of_range, b.out_of_range};
  return {a.coefficients, b.coefficients};
}

Eigen::VectorXd Plant::bearing_forces(const std::array<BearingCoefficients, 2>& c) const {
  Eigen::VectorXd f(4);
  for (std::size_t b = 0; b < 2; ++b)
    f.segment<2>(static_cast<Eigen::Index>(2 * b)) =
        c[b].static_reaction + c[b].stiffness * c[b].equilibrium.eccentricity;
  return f;
}

Plant::GridEntry Plant::build_entry(const std::array<BearingCoefficients, 2>& coefficients) const {
  const auto loaded = fold_bearings(config_.global, config_.speed, config_.bearing_nodes, coefficients);
  const Eigen::MatrixXd A = state_matrix(loaded);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2 * n_, 5);
  B.bottomRows(n_) = mass_inverse_times(loaded.mass, input_selection_);
  Eigen::MatrixXd Bh = Eigen::MatrixXd::Zero(2 * n_, 2);
  Bh.bottomRows(n_) = mass_inverse_times(loaded.mass, unbalance_selection_);

  GridEntry e;
  if (config_.input_hold == InputHold::Harmonic) {
    auto d = discretize_harmonic(A, B, Bh, config_.speed, config_.sample_period);
    e.Ad = std::move(d.Ad);
    e.drift_weight = d.Bd.col(0);
    e.bearing_cols = d.Bd.rightCols(4);
    e.unbalance = std::move(d.Gamma);
  } else {
    Eigen::MatrixXd Ball(2 * n_, 7);
    Ball << B, Bh;
    auto d = discretize(A, Ball, config_.sample_period);
    e.Ad = std::move(d.Ad);
    e.drift_weight = d.Bd.col(0);
    e.bearing_cols = d.Bd.middleCols(1, 4);
    e.unbalance = d.Bd.rightCols(2);
  }
  // Constant inputs: Bd = (I - Ad)(-A^-1 B) with -A^-1 B = [K^-1 S; 0]. Same
  // matrix as the exponential block, but static deflections then map onto
  // themselves to round-off instead of to the exponential's accuracy.
  const Eigen::FullPivLU<Eigen::MatrixXd> k_lu(loaded.stiffness);
  if (k_lu.isInvertible()) {
    Eigen::MatrixXd held = Eigen::MatrixXd::Zero(2 * n_, 5);
    held.topRows(n_) = k_lu.solve(input_selection_);
    Eigen::MatrixXd cols = held;
    cols.noalias() -= e.Ad * held;
    e.drift_weight = cols.col(0);
    e.bearing_cols = cols.rightCols(4);
  }
  return e;
}

Plant::Blend Plant::blend(double q1, double q2) const {
  auto locate = [](const std::vector<double>& grid, double q, int& k, double& t) {
    const int last = static_cast<int>(grid.size()) - 1;
    if (last == 0 || q <= grid.front()) {
      k = 0;
      t = 0.0;
      return;
    }
    if (q >= grid.back()) {
      k = last;
      t = 0.0;
      return;
    }
    k = static_cast<int>(std::upper_bound(grid.begin(), grid.end(), q) - grid.begin()) - 1;
    t = (q - grid[static_cast<std::size_t>(k)]) /
        (grid[static_cast<std::size_t>(k + 1)] - grid[static_cast<std::size_t>(k)]);
  };
  int k1 = 0, k2 = 0;
  double t1 = 0, t2 = 0;
  locate(config_.tables[0].flowrate_grid, q1, k1, t1);
  locate(config_.tables[1].flowrate_grid, q2, k2, t2);
  const int n2 = static_cast<int>(config_.tables[1].flowrate_grid.size());
  Blend b;
  auto add = [&](int i1, int i2, double w) {
    if (w == 0.0) return;
    b.index[static_cast<std::size_t>(b.count)] = i1 * n2 + i2;
    b.weight[static_cast<std::size_t>(b.count)] = w;
    ++b.count;
  };
  add(k1, k2, (1 - t1) * (1 - t2));
  add(k1 + 1, k2, t1 * (1 - t2));
  add(k1, k2 + 1, (1 - t1) * t2);
  add(k1 + 1, k2 + 1, t1 * t2);
  return b;
}

std::shared_ptr<const LocalModel> Plant::lattice_model(double q1, double q2) const {
  const double step = config_.exact_threshold;
  auto snap = [&](int bearing, double q) {
    const auto [lo, hi] = flowrate_bounds(bearing);
    return std::lround(std::clamp(q, lo, hi) / step);
  };
  const std::pair<long, long> key{snap(0, q1), snap(1, q2)};
  {
    std::lock_guard lock(lattice_->mutex);
    auto it = lattice_->models.find(key);
    if (it != lattice_->models.end()) return it->second;
  }
  auto model = std::make_shared<const LocalModel>(
      exact_model(static_cast<double>(key.first) * step, static_cast<double>(key.second) * step));
  std::lock_guard lock(lattice_->mutex);
  return lattice_->models.emplace(key, std::move(model)).first->second;
}

LocalModel Plant::exact_model(double q1, double q2) const {
  LocalModel out;
  const auto coeffs = coefficients_at(q1, q2, &out.clamped);
  GridEntry e = build_entry(coeffs);
  out.Ad = std::move(e.Ad);
  out.drift = e.drift_weight + e.bearing_cols * bearing_forces(coeffs);
  out.unbalance = std::move(e.unbalance);
  return out;
}

LocalModel Plant::model_at(double q1, double q2) const {
  if (config_.mode == Discretization::Exact) return *lattice_model(q1, q2);
  LocalModel out;
  const auto coeffs = coefficients_at(q1, q2, &out.clamped);
  const Eigen::VectorXd f = bearing_forces(coeffs);
  const Blend b = blend(q1, q2);
  for (int k = 0; k < b.count; ++k) {
    const auto& e = grid_[static_cast<std::size_t>(b.index[static_cast<std::size_t>(k)])];
    const double w = b.weight[static_cast<std::size_t>(k)];
    Eigen::VectorXd drift = e.drift_weight + e.bearing_cols * f;
    if (k == 0) {
      out.Ad = w * e.Ad;
      out.drift = w * drift;
      out.unbalance = w * e.unbalance;
    } else {
      out.Ad += w * e.Ad;
      out.drift += w * drift;
      out.unbalance += w * e.unbalance;
    }
  }
  return out;
}

Eigen::VectorXd Plant::advance(const Eigen::VectorXd& x, double q1, double q2, double t_k) const {
  const Eigen::Vector2d w = unbalance_phasor(t_k);
  if (config_.mode == Discretization::Exact) {
    const auto m = lattice_model(q1, q2);
    return m->Ad * x + m->drift + m->unbalance * w;
  }
  const Eigen::VectorXd f = bearing_forces(coefficients_at(q1, q2, nullptr));
  const Blend b = blend(q1, q2);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * n_);
  for (int k = 0; k < b.count; ++k) {
    const auto& e = grid_[static_cast<std::size_t>(b.index[static_cast<std::size_t>(k)])];
    const double wt = b.weight[static_cast<std::size_t>(k)];
    out.noalias() += wt * (e.Ad * x);
    out += wt * (e.drift_weight + e.bearing_cols * f + e.unbalance * w);
  }
  return out;
}

Eigen::VectorXd Plant::transition(const Eigen::VectorXd& state, double t_k) const {
  if (state.size() != augmented_size()) throw ModelError("augmented state has the wrong size");
  if (!state.allFinite()) throw NumericalError("non-finite augmented state");
  Eigen::VectorXd next(augmented_size());
  next.head(2 * n_) = advance(state.head(2 * n_), state[2 * n_], state[2 * n_ + 1], t_k);
  next.tail(2) = state.tail(2);
  return next;
}

Eigen::MatrixXd Plant::jacobian(const Eigen::VectorXd& state, double t_k, double dq) const {
  const int ns = 2 * n_;
  if (config_.mode == Discretization::Exact) dq = std::max(dq, config_.exact_threshold);
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(ns + 2, ns + 2);
  const Eigen::VectorXd x = state.head(ns);
  const double q1 = state[ns];
  const double q2 = state[ns + 1];
  J.topLeftCorner(ns, ns) = model_at(q1, q2).Ad;
  for (int i = 0; i < 2; ++i) {
    const auto [lo, hi] = flowrate_bounds(i);
    const double q = state[ns + i];
    double up = q + dq;
    double down = q - dq;
    if (up > hi && down >= lo) up = q;        // backward difference at the upper clamp
    else if (down < lo && up <= hi) down = q;  // forward difference at the lower clamp
    auto eval = [&](double qi) {
      return i == 0 ? advance(x, qi, q2, t_k) : advance(x, q1, qi, t_k);
    };
    J.block(0, ns + i, ns, 1) = (eval(up) - eval(down)) / (up - down);
  }
  return J;
}

Eigen::VectorXd Plant::static_state(double q1, double q2) const {
  const auto coeffs = coefficients_at(q1, q2, nullptr);
  const auto loaded = fold_bearings(config_.global, config_.speed, config_.bearing_nodes, coeffs);
  const Eigen::VectorXd u = constant_input(config_.global, config_.bearing_nodes, coeffs);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(2 * n_);
  s.head(n_) = loaded.stiffness.fullPivLu().solve(u);
  return s;
}

}  // namespace oilid::ss
