#include <algorithm>
#include <cmath>
#include <sstream>

#include "oilid/bearing_hydro.hpp"
#include "oilid/errors.hpp"

namespace oilid::bearing {

ForceEvaluation evaluate_force(const BearingSetup& setup, const FilmMesh& mesh,
                               const ShaftKinematics& kinematics, Feed feed, double supply_flowrate,
                               const FilmState* warm_start) {
  FilmState state =
      feed == Feed::Flowrate
          ? solve_film(setup.geometry, setup.lubricant, mesh, kinematics, supply_flowrate,
                       setup.solver, warm_start)
          : solve_film_pressure_fed(setup.geometry, setup.lubricant, mesh, kinematics,
                                    setup.solver, warm_start);
  Eigen::Vector2d force = hydrodynamic_force(state, mesh);
  const double q = state.groove_flowrate;
  return {force, q, std::move(state)};
}

namespace {

ShaftKinematics at(const BearingSetup& setup, const Eigen::Vector2d& e) {
  ShaftKinematics k;
  k.eccentricity = e;
  k.speed = setup.speed;
  return k;
}

// -dF/de by central differences.
Eigen::Matrix2d film_stiffness(const BearingSetup& setup, const FilmMesh& mesh,
                               const Eigen::Vector2d& e, Feed feed, double q, double step,
                               const FilmState& warm) {
  Eigen::Matrix2d k;
  for (int c = 0; c < 2; ++c) {
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    d[c] = step;
    const auto plus = evaluate_force(setup, mesh, at(setup, e + d), feed, q, &warm);
    const auto minus = evaluate_force(setup, mesh, at(setup, e - d), feed, q, &warm);
    k.col(c) = -(plus.force - minus.force) / (2.0 * step);
  }
  return k;
}

}  // namespace

EquilibriumPoint find_equilibrium(const BearingSetup& setup, const Eigen::Vector2d& static_load,
                                  double supply_flowrate, Feed feed,
                                  std::optional<Eigen::Vector2d> initial_guess) {
  const FilmMesh mesh(setup.geometry, setup.n_circ, setup.n_axial);
  const double c = setup.geometry.radial_clearance;
  const double load = static_load.norm();
  // Near zero load the residual is judged against the film's own force
  // scale (mu omega R L (R/c)^2) rather than the vanishing load.
  const auto& geo = setup.geometry;
  const double film_scale = setup.lubricant.viscosity * std::abs(setup.speed) * geo.radius * geo.width *
                            (geo.radius / c) * (geo.radius / c);
  const double tol = setup.equilibrium_tolerance * std::max({load, 1e-2 * film_scale, 1.0});
  const double limit = 0.98 * c;

  Eigen::Vector2d e = initial_guess.value_or(
      load > 0 ? Eigen::Vector2d(0.2 * c * static_load / load) : Eigen::Vector2d::Zero());

  auto eval = [&](const Eigen::Vector2d& x, const FilmState* warm) {
    return evaluate_force(setup, mesh, at(setup, x), feed, supply_flowrate, warm);
  };

  auto current = eval(e, nullptr);
  Eigen::Vector2d r = current.force + static_load;
  EquilibriumPoint out;
  for (int it = 0; it < setup.equilibrium_max_iterations; ++it) {
    if (r.norm() < tol) {
      out.eccentricity = e;
      out.residual_force = r;
      out.iterations = it;
      out.flowrate = current.groove_flowrate;
      return out;
    }
    const Eigen::Matrix2d k = film_stiffness(setup, mesh, e, feed, supply_flowrate,
                                             setup.displacement_step * c, current.state);
    Eigen::Vector2d step = k.fullPivLu().solve(r);
    if (!step.allFinite()) step = 0.05 * c * r.normalized();

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 8 && !accepted; ++ls, alpha *= 0.5) {
      Eigen::Vector2d trial = e + alpha * step;
      if (trial.norm() >= limit) continue;
      auto next = eval(trial, &current.state);
      Eigen::Vector2d rn = next.force + static_load;
      if (rn.norm() < r.norm()) {
        e = trial;
        r = rn;
        current = std::move(next);
        accepted = true;
      }
    }
    if (!accepted) {
      // Steepest descent on |r|^2, whose gradient is -2 K^T r.
      Eigen::Vector2d g = k.transpose() * r;
      double len = 0.02 * c;
      for (int ls = 0; ls < 8 && !accepted; ++ls, len *= 0.5) {
        Eigen::Vector2d trial = e + len * g.normalized();
        if (trial.norm() >= limit) continue;
        auto next = eval(trial, &current.state);
        Eigen::Vector2d rn = next.force + static_load;
        if (rn.norm() < r.norm()) {
          e = trial;
          r = rn;
          current = std::move(next);
          accepted = true;
        }
      }
    }
    if (!accepted) break;
  }
  std::ostringstream msg;
  msg << "no static equilibrium inside the clearance circle at supply flowrate "
      << supply_flowrate << " m^3/s (load capacity exceeded; residual " << r.norm() << " N)";
  throw NumericalError(msg.str());
}

BearingCoefficients linearized_coefficients(const BearingSetup& setup,
                                            const EquilibriumPoint& equilibrium,
                                            double supply_flowrate, Feed feed) {
  const FilmMesh mesh(setup.geometry, setup.n_circ, setup.n_axial);
  const double c = setup.geometry.radial_clearance;
  const Eigen::Vector2d e0 = equilibrium.eccentricity;
  const auto base = evaluate_force(setup, mesh, at(setup, e0), feed, supply_flowrate);

  auto attempt = [&](double scale) {
    BearingCoefficients out;
    const double de = scale * setup.displacement_step * c;
    const double dv = de * setup.speed;
    out.stiffness = film_stiffness(setup, mesh, e0, feed, supply_flowrate, de, base.state);
    for (int col = 0; col < 2; ++col) {
      ShaftKinematics plus = at(setup, e0);
      ShaftKinematics minus = plus;
      plus.eccentricity_rate[col] = dv;
      minus.eccentricity_rate[col] = -dv;
      const auto fp = evaluate_force(setup, mesh, plus, feed, supply_flowrate, &base.state);
      const auto fm = evaluate_force(setup, mesh, minus, feed, supply_flowrate, &base.state);
      out.damping.col(col) = -(fp.force - fm.force) / (2.0 * dv);
    }
    return out;
  };

  BearingCoefficients out;
  try {
    out = attempt(1.0);
  } catch (const NumericalError&) {
    out = attempt(0.5);
  }
  out.equilibrium = equilibrium;
  out.static_reaction = base.force;
  return out;
}

NominalCalibration calibrate_nominal(const BearingSetup& setup, const Eigen::Vector2d& static_load) {
  NominalCalibration cal;
  cal.equilibrium = find_equilibrium(setup, static_load, 0.0, Feed::Pressure);
  cal.flowrate = cal.equilibrium.flowrate;
  return cal;
}

namespace {

bool downstream_full(const FilmState& state, const FilmMesh& mesh) {
  const int nc = mesh.n_circ();
  for (int j = 0; j < mesh.n_axial(); ++j) {
    for (int i = 0; i < nc; ++i) {
      const int next = (i + 1) % nc;
      if (mesh.is_groove(i, j) && !mesh.is_groove(next, j) &&
          state.fluid_fraction(next, j) < 1.0 - 1e-9)
        return false;
    }
  }
  return true;
}

}  // namespace

double flooded_threshold(const BearingSetup& setup, const Eigen::Vector2d& static_load,
                         double q_low, double q_high, double relative_tolerance) {
  const FilmMesh mesh(setup.geometry, setup.n_circ, setup.n_axial);
  std::optional<Eigen::Vector2d> guess;
  auto flooded = [&](double q) {
    const EquilibriumPoint eq = find_equilibrium(setup, static_load, q, Feed::Flowrate, guess);
    guess = eq.eccentricity;
    const auto ev = evaluate_force(setup, mesh, at(setup, eq.eccentricity), Feed::Flowrate, q);
    return downstream_full(ev.state, mesh);
  };
  if (flooded(q_low)) return q_low;
  if (!flooded(q_high)) throw NumericalError("bearing still starved at the upper flowrate bound");
  while ((q_high - q_low) > relative_tolerance * q_high) {
    const double mid = 0.5 * (q_low + q_high);
    (flooded(mid) ? q_high : q_low) = mid;
  }
  return q_high;
}

}  // namespace oilid::bearing
