#include "oilid/bearing_hydro.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oilid/errors.hpp"
#include "oilid/units.hpp"

namespace oilid::bearing {

void BearingGeometry::validate() const {
  if (!(radius > 0) || !(width > 0)) throw ModelError("bearing radius and width must be positive");
  if (!(radial_clearance > 0)) throw ModelError("radial clearance must be positive");
  if (!(groove_axial_width > 0) || groove_axial_width > width)
    throw ModelError("groove axial width must lie in (0, width]");
  if (!(groove_circumferential_length > 0) ||
      groove_circumferential_length >= 2.0 * units::kPi * radius)
    throw ModelError("groove circumferential length must lie in (0, 2 pi R)");
}

BearingGeometry BearingGeometry::turbine() { return BearingGeometry{}; }

void Lubricant::validate() const {
  if (!(viscosity > 0)) throw ModelError("oil viscosity must be positive");
  if (supply_pressure < cavitation_pressure)
    throw ModelError("supply pressure must not be below the cavitation pressure");
}

FilmMesh::FilmMesh(const BearingGeometry& geometry, int n_circ, int n_axial)
    : n_circ_(n_circ), n_axial_(n_axial) {
  geometry.validate();
  if (n_circ < 40 || n_axial < 10)
    throw ModelError("film mesh below the 40 x 10 resolution floor");
  dphi_ = 2.0 * units::kPi / n_circ;
  dz_ = geometry.width / n_axial;
  radius_ = geometry.radius;
  width_ = geometry.width;
  groove_.assign(static_cast<std::size_t>(size()), 0);

  const double half_angle = 0.5 * geometry.groove_circumferential_length / geometry.radius;
  const double half_width = 0.5 * geometry.groove_axial_width;
  auto angular_distance = [&](double a) {
    double d = std::remainder(a - geometry.groove_angle, 2.0 * units::kPi);
    return std::abs(d);
  };
  for (int j = 0; j < n_axial; ++j) {
    if (std::abs(axial(j) - 0.5 * width_) > half_width) continue;
    for (int i = 0; i < n_circ; ++i) {
      if (angular_distance(angle(i)) <= half_angle) {
        groove_[static_cast<std::size_t>(i + n_circ * j)] = 1;
        ++groove_count_;
      }
    }
  }
  if (groove_count_ == 0) {
    // Groove narrower than one cell: use the cell containing its center.
    int i = static_cast<int>(std::floor(std::fmod(geometry.groove_angle + 2.0 * units::kPi,
                                                  2.0 * units::kPi) / dphi_)) % n_circ;
    int j = std::min(n_axial - 1, static_cast<int>(0.5 * width_ / dz_));
    groove_[static_cast<std::size_t>(i + n_circ * j)] = 1;
    groove_count_ = 1;
  }
}

double film_thickness(const BearingGeometry& geometry, const ShaftKinematics& kinematics,
                      double angle) {
  const double h = geometry.radial_clearance - kinematics.eccentricity.x() * std::cos(angle) -
                   kinematics.eccentricity.y() * std::sin(angle);
  if (!(h > 0)) throw ModelError("shaft in contact with the bearing: non-positive film thickness");
  return h;
}

namespace {

// Per-circumferential-index coefficients; h does not vary axially.
struct Stencil {
  int nc = 0;
  int na = 0;
  std::vector<double> circ;     // Poiseuille conductance of face i (between i-1 and i)
  std::vector<double> axial;    // Poiseuille conductance between axial neighbours in column i
  std::vector<double> couette;  // U/2 h dz at face i
  std::vector<double> squeeze;  // dh/dt times cell area at center i
  std::vector<double> h_center;
  double reference_flux = 1.0;
};

Stencil make_stencil(const BearingGeometry& g, const Lubricant& lub, const FilmMesh& mesh,
                     const ShaftKinematics& kin, double source_per_cell) {
  Stencil s;
  s.nc = mesh.n_circ();
  s.na = mesh.n_axial();
  s.circ.resize(static_cast<std::size_t>(s.nc));
  s.axial.resize(static_cast<std::size_t>(s.nc));
  s.couette.resize(static_cast<std::size_t>(s.nc));
  s.squeeze.resize(static_cast<std::size_t>(s.nc));
  s.h_center.resize(static_cast<std::size_t>(s.nc));

  const double dx = mesh.radius() * mesh.dphi();
  const double dz = mesh.dz();
  const double surface_speed = kin.speed * g.radius;
  for (int i = 0; i < s.nc; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double face = i * mesh.dphi();
    const double center = mesh.angle(i);
    const double hf = film_thickness(g, kin, face);
    const double hc = film_thickness(g, kin, center);
    s.h_center[k] = hc;
    s.circ[k] = hf * hf * hf / (12.0 * lub.viscosity) * dz / dx;
    s.axial[k] = hc * hc * hc / (12.0 * lub.viscosity) * dx / dz;
    s.couette[k] = 0.5 * surface_speed * hf * dz;
    const double hdot = -kin.eccentricity_rate.x() * std::cos(center) -
                        kin.eccentricity_rate.y() * std::sin(center);
    s.squeeze[k] = hdot * dx * dz;
  }
  // Pressure-driven scale keeps a stationary shaft from dividing by ~0.
  const double c3 = g.radial_clearance * g.radial_clearance * g.radial_clearance;
  const double pressure_flux =
      c3 / (12.0 * lub.viscosity) * dx / dz * std::abs(lub.supply_pressure);
  s.reference_flux = std::max({0.5 * std::abs(surface_speed) * g.radial_clearance * dz,
                               std::abs(source_per_cell), pressure_flux, 1e-30});
  return s;
}

struct Solver {
  const FilmMesh& mesh;
  const Stencil& st;
  double boundary_pressure;  // ambient, relative to cavitation pressure
  double source_per_cell;
  bool pressure_fed;
  double fixed_groove_pressure;  // relative to cavitation pressure

  // Net outflow minus source of cell (i, j), shifted pressure q = p - p_cav.
  double imbalance(const Eigen::ArrayXXd& p, const Eigen::ArrayXXd& th, int i, int j,
                   bool with_source) const {
    const int nc = st.nc;
    const int ie = (i + 1) % nc;
    const int iw = (i + nc - 1) % nc;
    const auto ui = static_cast<std::size_t>(i);
    const auto ue = static_cast<std::size_t>(ie);
    const double aw = st.circ[ui];
    const double ae = st.circ[ue];
    const double ax = st.axial[ui];
    const double pp = p(i, j);
    double out = ae * (pp - p(ie, j)) + aw * (pp - p(iw, j));
    out += (j > 0) ? ax * (pp - p(i, j - 1)) : 2.0 * ax * (pp - boundary_pressure);
    out += (j + 1 < st.na) ? ax * (pp - p(i, j + 1)) : 2.0 * ax * (pp - boundary_pressure);
    out += st.couette[ue] * th(i, j) - st.couette[ui] * th(iw, j);
    out += st.squeeze[ui] * th(i, j);
    if (with_source && mesh.is_groove(i, j)) out -= source_per_cell;
    return out;
  }

  double max_residual(const Eigen::ArrayXXd& p, const Eigen::ArrayXXd& th) const {
    double worst = 0.0;
    for (int j = 0; j < st.na; ++j)
      for (int i = 0; i < st.nc; ++i) {
        if (pressure_fed && mesh.is_groove(i, j)) continue;
        worst = std::max(worst, std::abs(imbalance(p, th, i, j, true)));
      }
    return worst / st.reference_flux;
  }

  void sweep(Eigen::ArrayXXd& p, Eigen::ArrayXXd& th, double omega) const {
    const int nc = st.nc;
    const int na = st.na;
    for (int j = 0; j < na; ++j) {
      for (int i = 0; i < nc; ++i) {
        const bool groove = mesh.is_groove(i, j);
        if (pressure_fed && groove) continue;
        const int ie = (i + 1) % nc;
        const int iw = (i + nc - 1) % nc;
        const auto ui = static_cast<std::size_t>(i);
        const auto ue = static_cast<std::size_t>(ie);
        const double aw = st.circ[ui];
        const double ae = st.circ[ue];
        const double ax = st.axial[ui];
        const double as = (j > 0) ? ax : 2.0 * ax;
        const double an = (j + 1 < na) ? ax : 2.0 * ax;
        const double ps = (j > 0) ? p(i, j - 1) : boundary_pressure;
        const double pn = (j + 1 < na) ? p(i, j + 1) : boundary_pressure;
        const double neighbours = ae * p(ie, j) + aw * p(iw, j) + as * ps + an * pn;
        const double inflow = st.couette[ui] * th(iw, j) + (groove ? source_per_cell : 0.0);

        double& pc = p(i, j);
        double& tc = th(i, j);
        if (pc > 0.0 || tc >= 1.0) {
          const double gs = (neighbours + inflow - st.couette[ue] - st.squeeze[ui]) /
                            (ae + aw + as + an);
          const double relaxed = pc + omega * (gs - pc);
          if (relaxed > 0.0) {
            pc = relaxed;
            tc = 1.0;
            continue;
          }
          pc = 0.0;
        }
        const double carry = st.couette[ue] + st.squeeze[ui];
        const double theta = carry > 0.0 ? (neighbours + inflow) / carry : 1.0;
        tc = std::clamp(theta, 0.0, 1.0);
      }
    }
  }
};

FilmState run(const BearingGeometry& g, const Lubricant& lub, const FilmMesh& mesh,
              const ShaftKinematics& kin, double supply_flowrate, bool pressure_fed,
              const SolverOptions& opt, const FilmState* warm) {
  g.validate();
  lub.validate();
  if (!pressure_fed && !(supply_flowrate > 0))
    throw ModelError("supply flowrate must be positive");
  const double ecc = kin.eccentricity.norm();
  if (!(ecc < g.radial_clearance))
    throw ModelError("eccentricity outside the clearance circle");

  const double source = pressure_fed ? 0.0 : supply_flowrate / mesh.groove_cell_count();
  const Stencil st = make_stencil(g, lub, mesh, kin, source);
  const double pcav = lub.cavitation_pressure;
  Solver solver{mesh, st, 0.0 - pcav, source, pressure_fed, lub.supply_pressure - pcav};

  FilmState s;
  const int nc = mesh.n_circ();
  const int na = mesh.n_axial();
  if (warm && warm->pressure.rows() == nc && warm->pressure.cols() == na) {
    s.pressure = warm->pressure - pcav;
    s.fluid_fraction = warm->fluid_fraction;
  } else {
    s.pressure = Eigen::ArrayXXd::Zero(nc, na);
    s.fluid_fraction = Eigen::ArrayXXd::Ones(nc, na);
  }
  if (pressure_fed) {
    for (int j = 0; j < na; ++j)
      for (int i = 0; i < nc; ++i)
        if (mesh.is_groove(i, j)) {
          s.pressure(i, j) = solver.fixed_groove_pressure;
          s.fluid_fraction(i, j) = 1.0;
        }
  }

  const int check = std::max(1, opt.check_every);
  double residual = solver.max_residual(s.pressure, s.fluid_fraction);
  int sweeps = 0;
  while (residual >= opt.tolerance) {
    if (sweeps >= opt.max_sweeps) {
      std::ostringstream msg;
      msg << "film solver did not converge in " << sweeps << " sweeps; residual history:";
      const auto& h = s.residual_history;
      const std::size_t from = h.size() > 8 ? h.size() - 8 : 0;
      for (std::size_t k = from; k < h.size(); ++k) msg << ' ' << h[k];
      throw NumericalError(msg.str());
    }
    for (int k = 0; k < check; ++k) solver.sweep(s.pressure, s.fluid_fraction, opt.relaxation);
    sweeps += check;
    residual = solver.max_residual(s.pressure, s.fluid_fraction);
    s.residual_history.push_back(residual);
  }

  s.sweeps = sweeps;
  s.residual = residual;

  double outflow = 0.0;
  double squeeze = 0.0;
  double groove_flow = 0.0;
  for (int i = 0; i < nc; ++i) {
    const double ax = st.axial[static_cast<std::size_t>(i)];
    outflow += 2.0 * ax * (s.pressure(i, 0) - solver.boundary_pressure);
    outflow += 2.0 * ax * (s.pressure(i, na - 1) - solver.boundary_pressure);
    for (int j = 0; j < na; ++j) {
      squeeze += st.squeeze[static_cast<std::size_t>(i)] * s.fluid_fraction(i, j);
      if (pressure_fed && mesh.is_groove(i, j))
        groove_flow += solver.imbalance(s.pressure, s.fluid_fraction, i, j, false);
    }
  }
  s.axial_outflow = outflow;
  s.squeeze_flow = squeeze;
  s.groove_flowrate = pressure_fed ? groove_flow : supply_flowrate;

  s.pressure += pcav;
  s.film_thickness.resize(nc, na);
  for (int i = 0; i < nc; ++i)
    s.film_thickness.row(i).setConstant(st.h_center[static_cast<std::size_t>(i)]);
  return s;
}

}  // namespace

FilmState solve_film(const BearingGeometry& geometry, const Lubricant& lubricant,
                     const FilmMesh& mesh, const ShaftKinematics& kinematics,
                     double supply_flowrate, const SolverOptions& options,
                     const FilmState* warm_start) {
  return run(geometry, lubricant, mesh, kinematics, supply_flowrate, false, options, warm_start);
}

FilmState solve_film_pressure_fed(const BearingGeometry& geometry, const Lubricant& lubricant,
                                  const FilmMesh& mesh, const ShaftKinematics& kinematics,
                                  const SolverOptions& options, const FilmState* warm_start) {
  return run(geometry, lubricant, mesh, kinematics, 0.0, true, options, warm_start);
}

Eigen::Vector2d hydrodynamic_force(const FilmState& state, const FilmMesh& mesh) {
  Eigen::Vector2d f = Eigen::Vector2d::Zero();
  const double area = mesh.cell_area();
  for (int i = 0; i < mesh.n_circ(); ++i) {
    const double column = state.pressure.row(i).sum();
    const double a = mesh.angle(i);
    f.x() -= column * std::cos(a) * area;
    f.y() -= column * std::sin(a) * area;
  }
  return f;
}

double complementarity_violation(const FilmState& state, double cavitation_pressure) {
  const double scale = std::max(1.0, (state.pressure - cavitation_pressure).abs().maxCoeff());
  return ((state.pressure - cavitation_pressure) * (1.0 - state.fluid_fraction)).abs().maxCoeff() /
         scale;
}

double mass_balance_error(const FilmState& state) {
  const double in = state.groove_flowrate;
  return std::abs(in - state.axial_outflow - state.squeeze_flow) / std::max(std::abs(in), 1e-30);
}

}  // namespace oilid::bearing
