#include "oilid/ekf.hpp"

#include <cmath>
#include <sstream>

#include "oilid/csv.hpp"
#include "oilid/errors.hpp"
#include "oilid/units.hpp"

namespace oilid::ekf {

void NoiseConfig::validate(int augmented_size) const {
  if (Q.size() != augmented_size || P0.size() != augmented_size)
    throw ModelError("Q and P0 need one entry per augmented state");
  if (R.size() != 8) throw ModelError("R needs one entry per measured channel (8)");
  if ((Q.array() < 0).any() || (P0.array() < 0).any())
    throw ModelError("Q and P0 entries must be non-negative");
  if (!(R.array() > 0).all()) throw ModelError("R entries must be positive");
}

NoiseConfig make_noise(const NoiseSettings& s, int dof_count, double sigma_v,
                       double nominal_flowrate, double sample_period) {
  if (!(sigma_v > 0)) throw ModelError("measurement noise std must be positive for R");
  const int n = dof_count;
  NoiseConfig out;
  out.Q.resize(2 * n + 2);
  out.Q << Eigen::VectorXd::Constant(n, s.displacement_std * s.displacement_std),
      Eigen::VectorXd::Constant(n, s.velocity_std * s.velocity_std),
      Eigen::VectorXd::Constant(2, s.flowrate_std * s.flowrate_std);
  const double q0 = s.initial_flowrate_fraction * nominal_flowrate;
  out.P0.resize(2 * n + 2);
  out.P0 << Eigen::VectorXd::Constant(n, s.initial_displacement_std * s.initial_displacement_std),
      Eigen::VectorXd::Constant(n, s.initial_velocity_std * s.initial_velocity_std),
      Eigen::VectorXd::Constant(2, q0 * q0);
  const double rd = sigma_v * sigma_v;
  const double rv = s.corrected_velocity_variance ? rd / (2.0 * sample_period * sample_period) : rd;
  out.R.resize(8);
  out.R << Eigen::VectorXd::Constant(4, rd), Eigen::VectorXd::Constant(4, rv);
  return out;
}

namespace {

void symmetrize(Eigen::MatrixXd& P) {
  P = 0.5 * (P + P.transpose()).eval();
}

}  // namespace

FilterState predict(const FilterState& state, const Eigen::VectorXd& next_estimate,
                    const Eigen::MatrixXd& J, const Eigen::VectorXd& Q) {
  if (!next_estimate.allFinite())
    throw NumericalError("filter diverged: non-finite state at step " + std::to_string(state.step + 1));
  FilterState out;
  out.estimate = next_estimate;
  Eigen::MatrixXd JP;
  JP.noalias() = J * state.covariance;
  out.covariance.noalias() = JP * J.transpose();
  out.covariance.diagonal() += Q;
  symmetrize(out.covariance);
  out.step = state.step + 1;
  return out;
}

FilterState predict(const FilterState& state, const ss::Plant& plant, double t_k,
                    const Eigen::VectorXd& Q, double jacobian_step) {
  if (!state.estimate.allFinite())
    throw NumericalError("filter diverged: non-finite state at step " + std::to_string(state.step));
  const Eigen::MatrixXd J = plant.jacobian(state.estimate, t_k, jacobian_step);
  return predict(state, plant.transition(state.estimate, t_k), J, Q);
}

FilterState update(const FilterState& prior, const Eigen::VectorXd& z, const Eigen::MatrixXd& H,
                   const Eigen::VectorXd& R, StepDiagnostics* diagnostics) {
  if (z.size() != H.rows() || R.size() != H.rows())
    throw ModelError("measurement, H and R sizes disagree");
  if (!z.allFinite()) throw ModelError("non-finite measurement at step " + std::to_string(prior.step));
  const Eigen::MatrixXd& P = prior.covariance;
  const Eigen::MatrixXd PHt = P * H.transpose();
  Eigen::MatrixXd S = H * PHt;
  S.diagonal() += R;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "innovation covariance not positive definite at step " << prior.step
        << " (eigenvalues " << es.eigenvalues().minCoeff() << " .. " << es.eigenvalues().maxCoeff()
        << ")";
    throw NumericalError(msg.str());
  }
  const Eigen::MatrixXd K = llt.solve(PHt.transpose()).transpose();
  const Eigen::VectorXd innovation = z - H * prior.estimate;

  FilterState out;
  out.step = prior.step;
  out.estimate = prior.estimate + K * innovation;
  // Joseph form (I - K H) P (I - K H)' + K R K', expanded so that only
  // rank-m products appear.
  out.covariance = P;
  out.covariance.noalias() -= K * PHt.transpose();
  out.covariance.noalias() -= PHt * K.transpose();
  out.covariance.noalias() += K * (S * K.transpose());
  symmetrize(out.covariance);

  if (diagnostics) {
    diagnostics->innovation = innovation;
    diagnostics->innovation_covariance = S;
    diagnostics->gain_norm = K.norm();
    diagnostics->normalized_innovation = innovation.dot(llt.solve(innovation));
    const Eigen::Index n = out.estimate.size();
    if (n >= 2) {
      diagnostics->flowrate = out.estimate.tail(2);
      diagnostics->flowrate_std = {std::sqrt(std::max(0.0, out.covariance(n - 2, n - 2))),
                                   std::sqrt(std::max(0.0, out.covariance(n - 1, n - 1)))};
    }
  }
  return out;
}

namespace {

// Trailing-window test at every sample; sums are taken about the first
// sample to avoid cancellation.
std::vector<std::uint8_t> window_flags(const std::vector<Eigen::Vector2d>& trace, long window,
                                       double threshold) {
  std::vector<std::uint8_t> flags(trace.size(), 0);
  if (trace.empty() || window < 2) return flags;
  const Eigen::Array2d ref = trace.front().array();
  Eigen::Array2d sum = Eigen::Array2d::Zero();
  Eigen::Array2d sq = Eigen::Array2d::Zero();
  const long n = static_cast<long>(trace.size());
  for (long i = 0; i < n; ++i) {
    const Eigen::Array2d d = trace[static_cast<std::size_t>(i)].array() - ref;
    sum += d;
    sq += d * d;
    if (i >= window) {
      const Eigen::Array2d old = trace[static_cast<std::size_t>(i - window)].array() - ref;
      sum -= old;
      sq -= old * old;
    }
    if (i + 1 >= window) {
      const double w = static_cast<double>(window);
      const Eigen::Array2d var = ((sq - sum * sum / w) / (w - 1.0)).max(0.0);
      flags[static_cast<std::size_t>(i)] = (var.sqrt() < threshold).all() ? 1 : 0;
    }
  }
  return flags;
}

}  // namespace

Convergence detect_convergence(const std::vector<Eigen::Vector2d>& trace, long window,
                               double threshold) {
  Convergence out;
  const auto flags = window_flags(trace, window, threshold);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (!flags[i]) continue;
    out.converged = true;
    out.index = static_cast<long>(i);
    const std::size_t first = i + 1 - static_cast<std::size_t>(window);
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (std::size_t k = first; k < trace.size(); ++k) sum += trace[k];
    out.mean = sum / static_cast<double>(trace.size() - first);
    return out;
  }
  // Not converged: report the mean of the last window for diagnostics.
  if (!trace.empty()) {
    const std::size_t w = std::min(trace.size(), static_cast<std::size_t>(std::max(1L, window)));
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (std::size_t k = trace.size() - w; k < trace.size(); ++k) sum += trace[k];
    out.mean = sum / static_cast<double>(w);
  }
  return out;
}

FilterState initial_state(const ss::Plant& plant, const Eigen::Vector2d& q0,
                          const NoiseConfig& noise,
                          const std::optional<Eigen::VectorXd>& rotor_state) {
  noise.validate(plant.augmented_size());
  FilterState s;
  s.estimate = Eigen::VectorXd::Zero(plant.augmented_size());
  if (rotor_state) {
    if (rotor_state->size() != plant.state_size()) throw ModelError("initial rotor state has the wrong size");
    s.estimate.head(plant.state_size()) = *rotor_state;
  }
  s.estimate.tail(2) = q0;
  s.covariance = noise.P0.asDiagonal();
  return s;
}

EstimateHistory run_filter(const ss::Plant& plant, const Measurements& m, const NoiseConfig& noise,
                           const FilterState& initial, const FilterOptions& options) {
  noise.validate(plant.augmented_size());
  if (m.time.size() != m.channels.size()) throw ModelError("measurement times and samples differ in count");
  const double dt = plant.config().sample_period;
  for (std::size_t k = 1; k < m.time.size(); ++k)
    if (std::abs(m.time[k] - m.time[k - 1] - dt) > 1e-6 * dt)
      throw ModelError("measurement sample period must match the plant (" + std::to_string(dt) +
                       " s) at sample " + std::to_string(k));

  const Eigen::MatrixXd H = plant.augmented_measurement();
  EstimateHistory h;
  h.final_state = initial;
  const std::size_t n = m.time.size();
  h.time.reserve(n);
  h.flowrate.reserve(n);
  h.flowrate_std.reserve(n);
  h.innovation_norm.reserve(n);
  h.normalized_innovation.reserve(n);

  FilterState state = initial;
  StepDiagnostics diag;
  for (std::size_t k = 0; k < n; ++k) {
    try {
      if (k > 0) state = predict(state, plant, m.time[k - 1], noise.Q, options.jacobian_step);
      state = update(state, m.channels[k], H, noise.R, &diag);
    } catch (const NumericalError& e) {
      h.diverged = true;
      h.failure = e.what();
      break;
    }
    if (!state.estimate.allFinite() || !(state.covariance.bottomRightCorner<2, 2>().diagonal().cwiseSqrt().maxCoeff() <
          options.max_flowrate_std_fraction * options.nominal_flowrate)) {
      h.diverged = true;
      h.failure = "filter diverged at step " + std::to_string(k) + " (t = " +
                  std::to_string(m.time[k]) + " s)";
      break;
    }
    h.time.push_back(m.time[k]);
    h.flowrate.push_back(diag.flowrate);
    h.flowrate_std.push_back(diag.flowrate_std);
    h.innovation_norm.push_back(diag.innovation.norm());
    h.normalized_innovation.push_back(diag.normalized_innovation);
    h.final_state = state;
    if (options.on_step) options.on_step(static_cast<long>(k), m.time[k], state, diag);
  }
  const long window = std::lround(options.convergence_window / dt);
  const double threshold = options.convergence_fraction * options.nominal_flowrate;
  h.converged = window_flags(h.flowrate, window, threshold);
  h.convergence = detect_convergence(h.flowrate, window, threshold);
  return h;
}

std::string estimate_csv(const EstimateHistory& h) {
  io::CsvTable csv;
  csv.header = {"time_s", "q1_ml_min", "q2_ml_min", "q1_std", "q2_std", "innovation_norm",
                "converged_flag"};
  for (std::size_t k = 0; k < h.time.size(); ++k)
    csv.rows.push_back({h.time[k], units::m3s_to_ml_min(h.flowrate[k][0]),
                        units::m3s_to_ml_min(h.flowrate[k][1]),
                        units::m3s_to_ml_min(h.flowrate_std[k][0]),
                        units::m3s_to_ml_min(h.flowrate_std[k][1]), h.innovation_norm[k],
                        static_cast<double>(h.converged[k])});
  return io::to_csv_string(csv);
}

}  // namespace oilid::ekf
