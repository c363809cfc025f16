#include <cmath>

#include "oilid/errors.hpp"
#include "oilid/scenario_lab.hpp"

namespace oilid::scenario {

namespace {

using rotor::dof;
using rotor::kV;
using rotor::kW;

std::array<int, 8> channel_dofs(const ss::PlantConfig& c, int n) {
  std::array<int, 8> d{};
  int k = 0;
  for (int block = 0; block < 2; ++block)
    for (int b : c.bearing_nodes)
      for (int axis : {kV, kW}) d[static_cast<std::size_t>(k++)] = block * n + dof(b, axis);
  return d;
}

Channels sample(const Eigen::VectorXd& r, const Eigen::VectorXd& v, const std::array<int, 8>& dofs,
                int n) {
  Channels c;
  for (std::size_t k = 0; k < 8; ++k) {
    const int d = dofs[k];
    c[static_cast<Eigen::Index>(k)] = d < n ? r[d] : v[d - n];
  }
  return c;
}

// Second-order matrices and constant load at one flowrate pair.
struct Operating {
  ss::BearingLoadedMatrices m;
  Eigen::VectorXd constant;
};

Operating operating_point(const ss::PlantConfig& c, const Eigen::Vector2d& q, double mismatch) {
  std::array<bearing::BearingCoefficients, 2> coeffs{
      bearing::interpolate_coefficients(c.tables[0], q[0]).coefficients,
      bearing::interpolate_coefficients(c.tables[1], q[1]).coefficients};
  for (auto& k : coeffs) {
    k.stiffness *= 1.0 + mismatch;
    k.damping *= 1.0 + mismatch;
  }
  return {ss::fold_bearings(c.global, c.speed, c.bearing_nodes, coeffs),
          ss::constant_input(c.global, c.bearing_nodes, coeffs)};
}

Eigen::Vector2d flowrates(const ScenarioSpec& spec, double t) {
  return {spec.profiles[0].value(t), spec.profiles[1].value(t)};
}

TruthSeries newmark(const ss::Plant& plant, const ScenarioSpec& spec) {
  const auto& cfg = plant.config();
  const int n = plant.dof_count();
  const long samples = spec.sample_count();
  const double dt = spec.sample_period;
  const double h = dt / spec.substeps;
  const auto dofs = channel_dofs(cfg, n);

  const Eigen::LLT<Eigen::MatrixXd> mass(cfg.global.mass);
  const double amp = cfg.unbalance.moment * cfg.speed * cfg.speed;
  auto load = [&](const Eigen::VectorXd& constant, double t) {
    Eigen::VectorXd u = constant;
    const double arg = cfg.speed * t + cfg.unbalance.phase;
    u[dof(cfg.unbalance.node, kV)] += amp * std::cos(arg);
    u[dof(cfg.unbalance.node, kW)] += amp * std::sin(arg);
    return u;
  };

  Eigen::Vector2d q = flowrates(spec, 0.0);
  Operating op = operating_point(cfg, q, spec.coefficient_mismatch);
  Eigen::VectorXd r = op.m.stiffness.fullPivLu().solve(op.constant);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd a = mass.solve(load(op.constant, 0.0) - op.m.stiffness * r);

  TruthSeries out;
  out.time.reserve(static_cast<std::size_t>(samples));
  out.flowrate.reserve(static_cast<std::size_t>(samples));
  out.channels.reserve(static_cast<std::size_t>(samples));
  out.time.push_back(0.0);
  out.flowrate.push_back(q);
  out.channels.push_back(sample(r, v, dofs, n));

  const double c1 = 4.0 / (h * h);
  const double c2 = 4.0 / h;
  const double c3 = 2.0 / h;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  bool factored = false;
  for (long k = 0; k + 1 < samples; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    // Flowrate held over the sample interval at its mid-interval value.
    const Eigen::Vector2d q_new = flowrates(spec, t0 + 0.5 * dt);
    if (!factored || q_new != q) {
      q = q_new;
      op = operating_point(cfg, q, spec.coefficient_mismatch);
      lu.compute(op.m.stiffness + c3 * op.m.damping + c1 * op.m.mass);
      // Restart the acceleration from the new operating equations.
      a = mass.solve(load(op.constant, t0) - op.m.damping * v - op.m.stiffness * r);
      factored = true;
    }
    for (int s = 1; s <= spec.substeps; ++s) {
      const double t1 = t0 + s * h;
      const Eigen::VectorXd rhs = load(op.constant, t1) + op.m.mass * (c1 * r + c2 * v + a) +
                                  op.m.damping * (c3 * r + v);
      const Eigen::VectorXd r1 = lu.solve(rhs);
      const Eigen::VectorXd v1 = c3 * (r1 - r) - v;
      a = c1 * (r1 - r) - c2 * v - a;
      r = r1;
      v = v1;
    }
    if (!r.allFinite()) throw NumericalError("truth integration produced non-finite values at t = " +
                                             std::to_string(t0 + dt) + " s");
    out.time.push_back(static_cast<double>(k + 1) * dt);
    out.flowrate.push_back(flowrates(spec, static_cast<double>(k + 1) * dt));
    out.channels.push_back(sample(r, v, dofs, n));
  }
  return out;
}

TruthSeries discrete(const ss::Plant& plant, const ScenarioSpec& spec) {
  if (std::abs(spec.sample_period - plant.config().sample_period) > 1e-12)
    throw ModelError("discrete-plant truth needs the plant sample period");
  if (spec.coefficient_mismatch != 0.0)
    throw ModelError("coefficient mismatch is only available with the Newmark truth");
  const int n = plant.dof_count();
  const auto dofs = channel_dofs(plant.config(), n);
  const long samples = spec.sample_count();
  const double dt = spec.sample_period;

  Eigen::Vector2d q = flowrates(spec, 0.0);
  Eigen::VectorXd x = plant.static_state(q[0], q[1]);
  TruthSeries out;
  for (long k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    q = flowrates(spec, t);
    out.time.push_back(t);
    out.flowrate.push_back(q);
    out.channels.push_back(sample(x.head(n), x.tail(n), dofs, n));
    x = plant.advance(x, q[0], q[1], t);
  }
  return out;
}

}  // namespace

TruthSeries simulate_truth(const ss::Plant& plant, const ScenarioSpec& spec) {
  spec.validate();
  for (int b = 0; b < 2; ++b) {
    const auto [lo, hi] = plant.flowrate_bounds(b);
    spec.profiles[static_cast<std::size_t>(b)].validate(lo, hi);
  }
  return spec.integrator == TruthIntegrator::Newmark ? newmark(plant, spec) : discrete(plant, spec);
}

}  // namespace oilid::scenario
