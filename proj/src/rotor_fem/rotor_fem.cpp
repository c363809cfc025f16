#include "oilid/rotor_fem.hpp"

#include <algorithm>
#include <cmath>

#include "oilid/errors.hpp"
#include "oilid/units.hpp"

namespace oilid::rotor {

using units::kPi;

void Material::validate() const {
  if (!(young_modulus > 0) || !(density > 0) || !(poisson_ratio > 0) || !(poisson_ratio < 0.5))
    throw ModelError("material: E and density must be positive, 0 < nu < 0.5");
}

double shear_correction_factor(double nu) { return 6.0 * (1.0 + nu) / (7.0 + 6.0 * nu); }

std::vector<double> RotorModel::node_positions() const {
  std::vector<double> z{0.0};
  for (const auto& e : elements) z.push_back(z.back() + e.length);
  return z;
}

double RotorModel::shaft_diameter_at(int node) const {
  double d = 0.0;
  if (node > 0) d = std::max(d, elements[static_cast<std::size_t>(node - 1)].diameter);
  if (node < static_cast<int>(elements.size()))
    d = std::max(d, elements[static_cast<std::size_t>(node)].diameter);
  return d;
}

void RotorModel::validate() const {
  material.validate();
  if (elements.empty()) throw ModelError("rotor has no shaft elements");
  for (const auto& e : elements)
    if (!(e.length > 0) || !(e.diameter > 0))
      throw ModelError("shaft element length and diameter must be positive");
  const int n = node_count();
  for (int b : bearing_nodes)
    if (b < 0 || b >= n) throw ModelError("bearing node out of range");
  if (bearing_nodes[0] == bearing_nodes[1]) throw ModelError("bearing nodes must differ");
  for (const auto& d : discs) {
    if (d.node < 0 || d.node >= n) throw ModelError("disc node out of range");
    const double di = d.internal_diameter.value_or(shaft_diameter_at(d.node));
    if (d.width < 0 || !(d.external_diameter > di) || di < 0)
      throw ModelError("disc needs external diameter > internal diameter >= 0");
  }
  if (unbalance.node < 0 || unbalance.node >= n) throw ModelError("unbalance node out of range");
  if (unbalance.moment != 0.0 && !(speed > 0))
    throw ModelError("unbalance runs need a positive rotational speed");
}

RotorModel RotorModel::turbine() {
  RotorModel m;
  const std::array<std::array<double, 2>, 20> table = {{{30.0, 30.0},   {60.0, 52.5},
                                                        {30.0, 112.5},  {45.0, 52.5},
                                                        {45.0, 90.0},   {45.0, 90.0},
                                                        {120.0, 135.0}, {135.0, 112.5},
                                                        {180.0, 187.5}, {180.0, 187.5},
                                                        {45.0, 262.5},  {240.0, 187.5},
                                                        {240.0, 187.5}, {210.0, 165.0},
                                                        {210.0, 165.0}, {210.0, 150.0},
                                                        {30.0, 165.0},  {60.0, 135.0},
                                                        {78.4, 90.0},   {41.6, 90.0}}};
  for (const auto& row : table) m.elements.push_back({units::mm_to_m(row[0]), units::mm_to_m(row[1])});
  m.discs = {{9, 0.050, 0.525, std::nullopt},
             {12, 0.050, 0.600, std::nullopt},
             {14, 0.050, 0.6975, std::nullopt}};
  m.bearing_nodes = {5, 19};
  m.speed = units::hz_to_rad_s(75.0);
  m.unbalance.node = 12;
  m.unbalance.moment = g25_unbalance_moment(total_mass(m), m.speed);
  m.unbalance.phase = 0.0;
  return m;
}

ElementMatrices beam_element_matrices(const ShaftElement& element, const Material& mat) {
  const double L = element.length;
  const double D = element.diameter;
  const double A = kPi * D * D / 4.0;
  const double I = kPi * D * D * D * D / 64.0;
  const double E = mat.young_modulus;
  const double kappa = shear_correction_factor(mat.poisson_ratio);
  const double phi = 12.0 * E * I / (kappa * mat.shear_modulus() * A * L * L);
  const double p1 = 1.0 + phi;
  const double rho = mat.density;

  // Single bending plane, dofs (w1, slope1, w2, slope2).
  Eigen::Matrix4d kp;
  const double ks = E * I / (p1 * L * L * L);
  kp << 12, 6 * L, -12, 6 * L,                                   //
      6 * L, (4 + phi) * L * L, -6 * L, (2 - phi) * L * L,       //
      -12, -6 * L, 12, -6 * L,                                   //
      6 * L, (2 - phi) * L * L, -6 * L, (4 + phi) * L * L;
  kp *= ks;

  const double m1 = 312 + 588 * phi + 280 * phi * phi;
  const double m2 = (44 + 77 * phi + 35 * phi * phi) * L;
  const double m3 = 108 + 252 * phi + 140 * phi * phi;
  const double m4 = -(26 + 63 * phi + 35 * phi * phi) * L;
  const double m5 = (8 + 14 * phi + 7 * phi * phi) * L * L;
  const double m6 = -(6 + 14 * phi + 7 * phi * phi) * L * L;
  Eigen::Matrix4d mt;
  mt << m1, m2, m3, m4,    //
      m2, m5, -m4, m6,     //
      m3, -m4, m1, -m2,    //
      m4, m6, -m2, m5;
  mt *= rho * A * L / (840.0 * p1 * p1);

  // Integral of the slope shape functions, N^T N over the element.
  const double r1 = 36;
  const double r2 = (3 - 15 * phi) * L;
  const double r3 = (4 + 5 * phi + 10 * phi * phi) * L * L;
  const double r4 = (-1 - 5 * phi + 5 * phi * phi) * L * L;
  Eigen::Matrix4d slope;
  slope << r1, r2, -r1, r2,  //
      r2, r3, -r2, r4,       //
      -r1, -r2, r1, -r2,     //
      r2, r4, -r2, r3;
  slope /= 30.0 * p1 * p1 * L;

  // Plane-local vectors from the 8 element dofs (V1 W1 B1 G1 V2 W2 B2 G2).
  Eigen::Matrix<double, 4, 8> tx = Eigen::Matrix<double, 4, 8>::Zero();
  Eigen::Matrix<double, 4, 8> ty = Eigen::Matrix<double, 4, 8>::Zero();
  tx(0, 0) = 1;
  tx(1, 3) = 1;
  tx(2, 4) = 1;
  tx(3, 7) = 1;
  ty(0, 1) = 1;
  ty(1, 2) = -1;
  ty(2, 5) = 1;
  ty(3, 6) = -1;

  const Eigen::Matrix4d mp = mt + rho * I * slope;
  const Eigen::Matrix4d gp = rho * 2.0 * I * slope;

  ElementMatrices out;
  out.mass = tx.transpose() * mp * tx + ty.transpose() * mp * ty;
  out.stiffness = tx.transpose() * kp * tx + ty.transpose() * kp * ty;
  out.gyroscopic = tx.transpose() * gp * ty - ty.transpose() * gp * tx;
  return out;
}

DiscMatrices disc_matrices(const Disc& disc, const Material& mat, double di) {
  const double de = disc.external_diameter;
  DiscMatrices out;
  out.mass_value = mat.density * kPi / 4.0 * (de * de - di * di) * disc.width;
  out.polar_inertia = out.mass_value / 8.0 * (de * de + di * di);
  out.diametral_inertia =
      out.polar_inertia / 2.0 + out.mass_value * disc.width * disc.width / 12.0;
  out.mass = Eigen::Vector4d(out.mass_value, out.mass_value, out.diametral_inertia,
                             out.diametral_inertia)
                 .asDiagonal();
  out.gyroscopic.setZero();
  out.gyroscopic(kB, kGamma) = out.polar_inertia;
  out.gyroscopic(kGamma, kB) = -out.polar_inertia;
  return out;
}

GlobalMatrices assemble_global(const RotorModel& model) {
  model.validate();
  const int n = model.dof_count();
  GlobalMatrices g;
  g.mass = Eigen::MatrixXd::Zero(n, n);
  g.stiffness = Eigen::MatrixXd::Zero(n, n);
  g.gyroscopic = Eigen::MatrixXd::Zero(n, n);
  g.weight = Eigen::VectorXd::Zero(n);

  for (std::size_t e = 0; e < model.elements.size(); ++e) {
    const auto em = beam_element_matrices(model.elements[e], model.material);
    const int first = dof(static_cast<int>(e), 0);
    g.mass.block<8, 8>(first, first) += em.mass;
    g.stiffness.block<8, 8>(first, first) += em.stiffness;
    g.gyroscopic.block<8, 8>(first, first) += em.gyroscopic;
    const double d = model.elements[e].diameter;
    const double half_weight =
        0.5 * model.material.density * kPi / 4.0 * d * d * model.elements[e].length * model.gravity;
    g.weight[dof(static_cast<int>(e), kW)] += half_weight;
    g.weight[dof(static_cast<int>(e) + 1, kW)] += half_weight;
  }
  for (const auto& disc : model.discs) {
    const double di = disc.internal_diameter.value_or(model.shaft_diameter_at(disc.node));
    const auto dm = disc_matrices(disc, model.material, di);
    const int first = dof(disc.node, 0);
    g.mass.block<4, 4>(first, first) += dm.mass;
    g.gyroscopic.block<4, 4>(first, first) += dm.gyroscopic;
    g.weight[dof(disc.node, kW)] += dm.mass_value * model.gravity;
  }
  g.damping = model.damping_mass_factor * g.mass + model.damping_stiffness_factor * g.stiffness;
  return g;
}

double total_mass(const RotorModel& model) {
  double m = 0.0;
  for (const auto& e : model.elements)
    m += model.material.density * kPi / 4.0 * e.diameter * e.diameter * e.length;
  for (const auto& disc : model.discs) {
    const double di = disc.internal_diameter.value_or(model.shaft_diameter_at(disc.node));
    m += disc_matrices(disc, model.material, di).mass_value;
  }
  return m;
}

Eigen::Vector2d unbalance_force(double moment, double phase, double speed, double time) {
  const double amplitude = moment * speed * speed;
  const double arg = speed * time + phase;
  return {amplitude * std::cos(arg), amplitude * std::sin(arg)};
}

double g25_unbalance_moment(double rotor_mass, double service_speed, double grade) {
  if (!(service_speed > 0)) throw ModelError("service speed must be positive");
  return rotor_mass * grade / service_speed;
}

std::array<Eigen::Vector2d, 2> static_bearing_loads(const RotorModel& model) {
  const GlobalMatrices g = assemble_global(model);
  const int n = g.size();
  std::vector<int> fixed;
  for (int b : model.bearing_nodes) {
    fixed.push_back(dof(b, kV));
    fixed.push_back(dof(b, kW));
  }
  std::vector<int> free;
  for (int k = 0; k < n; ++k)
    if (std::find(fixed.begin(), fixed.end(), k) == fixed.end()) free.push_back(k);

  const Eigen::MatrixXd kff = g.stiffness(free, free);
  const Eigen::VectorXd wf = g.weight(free);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(kff);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0).all())
    throw ModelError("pinned rotor stiffness is singular");
  const Eigen::VectorXd rf = ldlt.solve(wf);
  // Support reactions on the rotor: K r - w at the pinned dofs.
  const Eigen::VectorXd reaction = g.stiffness(fixed, free) * rf - g.weight(fixed);

  std::array<Eigen::Vector2d, 2> loads;
  for (int b = 0; b < 2; ++b) loads[static_cast<std::size_t>(b)] = -reaction.segment<2>(2 * b);
  return loads;
}

}  // namespace oilid::rotor
