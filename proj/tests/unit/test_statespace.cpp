#include <cmath>
#include <random>

#include "doctest.h"
#include "fixture.hpp"
#include "oilid/errors.hpp"
#include "oilid/rotor_fem.hpp"
#include "oilid/statespace.hpp"

using namespace oilid;
using namespace oilid::ss;
using oilid::testing::plant;
using oilid::testing::tables;

namespace {

// Random matrix shifted left of the imaginary axis.
Eigen::MatrixXd random_stable(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  const double shift = A.operatorNorm() + 1.0;
  A.diagonal().array() -= shift;
  return A;
}

Eigen::MatrixXd random_matrix(int r, int c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd B(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) B(i, j) = g(rng);
  return B;
}

std::array<bearing::BearingCoefficients, 2> node_coefficients(int i1, int i2) {
  return {tables()[0].entries[static_cast<std::size_t>(i1)], tables()[1].entries[static_cast<std::size_t>(i2)]};
}

}  // namespace

TEST_CASE("discretize: closed forms and the semigroup property") {
  const Eigen::MatrixXd B = random_matrix(3, 2, 7);
  const auto zero = discretize(Eigen::MatrixXd::Zero(3, 3), B, 0.01);
  CHECK((zero.Ad - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-15);
  CHECK((zero.Bd - 0.01 * B).norm() < 1e-15);

  const auto scalar = discretize(Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::MatrixXd::Ones(1, 1), 1e-3);
  CHECK(scalar.Ad(0, 0) == doctest::Approx(std::exp(-1e-3)).epsilon(1e-14));
  CHECK(scalar.Bd(0, 0) == doctest::Approx(1.0 - std::exp(-1e-3)).epsilon(1e-10));

  for (unsigned seed : {1u, 2u, 3u}) {
    const Eigen::MatrixXd A = random_stable(6, seed);
    const Eigen::MatrixXd Bs = random_matrix(6, 2, seed + 10);
    const auto one = discretize(A, Bs, 1e-3);
    const auto two = discretize(A, Bs, 2e-3);
    const Eigen::MatrixXd sq = one.Ad * one.Ad;
    CHECK((two.Ad - sq).norm() < 1e-10 * sq.norm());
    // Bd over two steps: Ad Bd + Bd.
    const Eigen::MatrixXd b2 = one.Ad * one.Bd + one.Bd;
    CHECK((two.Bd - b2).norm() < 1e-10 * b2.norm());
  }
  CHECK_THROWS_AS(discretize(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 1), 0.0), ModelError);
}

TEST_CASE("(Ad - I)/dt approaches A at first order") {
  const Eigen::MatrixXd A = random_stable(5, 11);
  const Eigen::MatrixXd B = random_matrix(5, 1, 12);
  auto err = [&](double dt) {
    const auto d = discretize(A, B, dt);
    return ((d.Ad - Eigen::MatrixXd::Identity(5, 5)) / dt - A).norm() / A.norm();
  };
  const double e1 = err(1e-3), e2 = err(5e-4);
  CHECK(e1 < 1e-2);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("harmonic discretization: response to a held-phase sinusoid") {
  // Scalar x' = a x + b cos(w t + p): compare one step with the closed form.
  const double a = -3.0, b = 2.0, w = 40.0, dt = 0.01;
  const Eigen::MatrixXd A = Eigen::MatrixXd::Constant(1, 1, a);
  Eigen::MatrixXd Bh(1, 2);
  Bh << b, 0.0;
  const auto h = discretize_harmonic(A, Eigen::MatrixXd::Ones(1, 1), Bh, w, dt);
  // Particular solution x_p = Re(b e^{i w t} / (i w - a)); homogeneous part decays.
  auto xp = [&](double t) {
    const std::complex<double> z = b * std::exp(std::complex<double>(0, w * t)) / std::complex<double>(-a, w);
    return z.real();
  };
  const double x0 = 0.4;
  const double exact = std::exp(a * dt) * (x0 - xp(0)) + xp(dt);
  const double stepped = h.Ad(0, 0) * x0 + h.Gamma(0, 0) * 1.0 + h.Gamma(0, 1) * 0.0;
  CHECK(stepped == doctest::Approx(exact).epsilon(1e-10));
}

TEST_CASE("continuous model structure") {
  const auto& cfg = plant().config();
  const int n = cfg.global.size();
  const auto c = node_coefficients(3, 3);
  const auto ss = build_continuous(cfg.global, cfg.speed, cfg.bearing_nodes, c);
  CHECK(ss.A.rows() == 2 * n);
  CHECK(ss.A.topLeftCorner(n, n).norm() == 0.0);
  CHECK((ss.A.topRightCorner(n, n) - Eigen::MatrixXd::Identity(n, n)).norm() == 0.0);
  CHECK(ss.B.topRows(n).norm() == 0.0);

  // Zero bearing coefficients leave the free rotor.
  std::array<bearing::BearingCoefficients, 2> none{};
  const auto free = build_continuous(cfg.global, cfg.speed, cfg.bearing_nodes, none);
  const Eigen::MatrixXd Minv = cfg.global.mass.inverse();
  const Eigen::MatrixXd k_block = -Minv * cfg.global.stiffness;
  const Eigen::MatrixXd c_block = -Minv * (cfg.global.damping + cfg.speed * cfg.global.gyroscopic);
  CHECK((free.A.bottomLeftCorner(n, n) - k_block).norm() < 1e-9 * k_block.norm());
  CHECK((free.A.bottomRightCorner(n, n) - c_block).norm() < 1e-9 * c_block.norm());

  // Folded bearings sit on the bearing translational dofs only.
  const auto loaded = fold_bearings(cfg.global, cfg.speed, cfg.bearing_nodes, c);
  const Eigen::MatrixXd dk = loaded.stiffness - cfg.global.stiffness;
  const int v = rotor::dof(cfg.bearing_nodes[1], rotor::kV);
  CHECK(dk.block(v, v, 2, 2).isApprox(c[1].stiffness));
  CHECK(dk.norm() == doctest::Approx(std::hypot(c[0].stiffness.norm(), c[1].stiffness.norm())));
}

// The plant forms its constant-input columns from the static solution; they
// must agree with the exponential block of the plain discretization.
TEST_CASE("plant input columns agree with the matrix-exponential block") {
  const auto& cfg = plant().config();
  const int n = cfg.global.size();
  const auto c = node_coefficients(2, 4);
  const auto cont = build_continuous(cfg.global, cfg.speed, cfg.bearing_nodes, c);
  const Eigen::VectorXd u0 = constant_input(cfg.global, cfg.bearing_nodes, c);
  const auto d = discretize(cont.A, cont.B * u0, cfg.sample_period);
  const auto& g1 = tables()[0].flowrate_grid;
  const auto& g2 = tables()[1].flowrate_grid;
  const Eigen::VectorXd drift = plant().model_at(g1[2], g2[4]).drift;
  MESSAGE("relative gap " << (drift - d.Bd.col(0)).norm() / drift.norm());
  CHECK((drift - d.Bd.col(0)).head(n).norm() < 1e-6 * drift.head(n).norm());
  CHECK((drift - d.Bd.col(0)).norm() < 1e-5 * drift.norm());
}

TEST_CASE("measurement matrix and augmentation") {
  const int n = plant().dof_count();
  REQUIRE(n == 84);
  const Eigen::MatrixXd& H = plant().measurement();
  CHECK(H.rows() == 8);
  CHECK(H.cols() == 168);
  for (int r = 0; r < 8; ++r) {
    CHECK((H.row(r).array() != 0).count() == 1);
    CHECK(H.row(r).sum() == 1.0);
  }
  const Eigen::VectorXd s = random_matrix(2 * n, 1, 5);
  const Eigen::VectorXd z = H * s;
  const std::array<int, 2> nodes = {5, 19};
  for (int b = 0; b < 2; ++b)
    for (int k = 0; k < 2; ++k) {
      CHECK(z(2 * b + k) == s(rotor::dof(nodes[b], k)));
      CHECK(z(4 + 2 * b + k) == s(n + rotor::dof(nodes[b], k)));
    }
  CHECK_THROWS_AS(measurement_matrix(n, {5, 30}), ModelError);

  const Eigen::MatrixXd Ha = plant().augmented_measurement();
  CHECK(Ha.cols() == 2 * n + 2);
  CHECK(Ha.rightCols(2).norm() == 0.0);

  const auto d = discretize(random_stable(4, 3), random_matrix(4, 2, 4), 1e-3);
  const auto aug = augment(d, random_matrix(3, 4, 6));
  CHECK(aug.transition.rows() == 6);
  CHECK((aug.transition.bottomRightCorner(2, 2) - Eigen::Matrix2d::Identity()).norm() == 0.0);
  CHECK(aug.transition.topRightCorner(4, 2).norm() == 0.0);
  CHECK(aug.transition.bottomLeftCorner(2, 4).norm() == 0.0);
  CHECK(aug.input.bottomRows(2).norm() == 0.0);
  CHECK(aug.output.rightCols(2).norm() == 0.0);
}

TEST_CASE("transition: equilibrium fixed point and grid-node exactness") {
  const int ns = plant().state_size();
  const auto& g = tables()[0].flowrate_grid;
  for (auto [i1, i2] : {std::pair{3, 3}, std::pair{1, 5}, std::pair{6, 0}}) {
    const double q1 = g[static_cast<std::size_t>(i1)], q2 = tables()[1].flowrate_grid[static_cast<std::size_t>(i2)];
    const LocalModel cached = plant().model_at(q1, q2);
    const LocalModel exact = plant().exact_model(q1, q2);
    CHECK((cached.Ad - exact.Ad).norm() <= 1e-12 * exact.Ad.norm());
    CHECK((cached.drift - exact.drift).norm() <= 1e-12 * exact.drift.norm());
    // Without unbalance the static state maps onto itself.
    const Eigen::VectorXd xs = plant().static_state(q1, q2);
    const Eigen::VectorXd next = cached.Ad * xs + cached.drift;
    // Relative to the terms that cancel: Ad xs carries large velocity entries.
    const double scale = std::max(xs.norm(), (cached.Ad * xs).norm());
    CHECK((next - xs).norm() < 1e-10 * scale);
    CHECK((next - xs).head(ns / 2).norm() < 1e-10 * xs.norm());
  }
  // Off-grid: bilinear blend of the four surrounding entries.
  const double qa = 0.5 * (g[2] + g[3]);
  const LocalModel mid = plant().model_at(qa, g[3]);
  const LocalModel lo = plant().model_at(g[2], g[3]);
  const LocalModel hi = plant().model_at(g[3], g[3]);
  CHECK((mid.Ad - 0.5 * (lo.Ad + hi.Ad)).norm() < 1e-12 * mid.Ad.norm());

  // Flowrates ride along untouched.
  Eigen::VectorXd s = Eigen::VectorXd::Zero(ns + 2);
  s.head(ns) = plant().static_state(g[3], g[3]);
  s.tail(2) << g[3], g[2];
  const Eigen::VectorXd next = plant().transition(s, 0.0);
  CHECK(next.tail(2) == s.tail(2));

  // Clamped lookups outside the table are flagged.
  CHECK(plant().model_at(2 * g.back(), g[3]).clamped[0]);
  CHECK_FALSE(plant().model_at(g[3], g[3]).clamped[0]);
  Eigen::VectorXd bad = s;
  bad(0) = std::nan("");
  CHECK_THROWS_AS(plant().transition(bad, 0.0), NumericalError);
  CHECK_THROWS_AS(plant().transition(s.head(ns), 0.0), ModelError);
}

TEST_CASE("constant flowrate stepping matches a fine trapezoidal integration over 1 s") {
  const auto& cfg = plant().config();
  const int n = cfg.global.size();
  const double q = tables()[0].flowrate_grid[3];
  const auto c = node_coefficients(3, 3);
  const auto cont = build_continuous(cfg.global, cfg.speed, cfg.bearing_nodes, c);
  const Eigen::VectorXd u0 = constant_input(cfg.global, cfg.bearing_nodes, c);

  Eigen::VectorXd unb_x = Eigen::VectorXd::Zero(n), unb_y = Eigen::VectorXd::Zero(n);
  const double amp = cfg.unbalance.moment * cfg.speed * cfg.speed;
  unb_x(rotor::dof(cfg.unbalance.node, rotor::kV)) = amp;
  unb_y(rotor::dof(cfg.unbalance.node, rotor::kW)) = amp;
  auto forcing = [&](double t) {
    const double arg = cfg.speed * t + cfg.unbalance.phase;
    return Eigen::VectorXd(cont.B * (u0 + std::cos(arg) * unb_x + std::sin(arg) * unb_y));
  };

  const double dt = cfg.sample_period;
  const int sub = 100;
  const double h = dt / sub;
  const int N = 2 * n;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lhs(I - 0.5 * h * cont.A);
  const Eigen::MatrixXd rhs = I + 0.5 * h * cont.A;

  Eigen::VectorXd s(N + 2);
  s.head(N) = plant().static_state(q, q);
  s.tail(2) << q, q;
  const Eigen::VectorXd x_static = s.head(N);
  Eigen::VectorXd ref = x_static;
  const Eigen::MatrixXd& H = plant().measurement();
  double worst = 0.0, amplitude = 0.0;
  const int steps = static_cast<int>(std::lround(1.0 / dt));
  for (int k = 0; k < steps; ++k) {
    const double t0 = k * dt;
    s = plant().transition(s, t0);
    for (int j = 0; j < sub; ++j) {
      const double ta = t0 + j * h;
      ref = lhs.solve(rhs * ref + 0.5 * h * (forcing(ta) + forcing(ta + h)));
    }
    const Eigen::VectorXd zd = (H * s.head(N)).head(4), zr = (H * ref).head(4);
    worst = std::max(worst, (zd - zr).cwiseAbs().maxCoeff());
    amplitude = std::max(amplitude, (zr - (H * x_static).head(4)).cwiseAbs().maxCoeff());
  }
  MESSAGE("bearing orbit amplitude " << amplitude * 1e6 << " um, worst deviation " << worst * 1e6 << " um");
  CHECK(amplitude > 0);
  CHECK(worst < 1e-3 * amplitude);
}

TEST_CASE("jacobian: exact rotor block, flowrate columns converge under step halving") {
  const int ns = plant().state_size();
  const auto& g = tables()[0].flowrate_grid;
  Eigen::VectorXd s(ns + 2);
  const double q1 = 0.5 * (g[2] + g[3]) + 0.1 * (g[3] - g[2]);
  const double q2 = 0.5 * (g[4] + g[5]);
  s.head(ns) = plant().static_state(q1, q2);
  s.tail(2) << q1, q2;
  // Shake the rotor off equilibrium so the flowrate sensitivity is generic.
  s.head(ns) += 1e-6 * random_matrix(ns, 1, 9);
  const double dq = 1e-2 * (g[1] - g[0]);
  const Eigen::MatrixXd J = plant().jacobian(s, 0.0123, dq);
  const Eigen::MatrixXd J2 = plant().jacobian(s, 0.0123, 0.5 * dq);
  CHECK((J.topLeftCorner(ns, ns) - plant().model_at(q1, q2).Ad).norm() == 0.0);
  CHECK((J.bottomRows(2).leftCols(ns)).norm() == 0.0);
  CHECK((J.bottomRightCorner(2, 2) - Eigen::Matrix2d::Identity()).norm() == 0.0);
  for (int i = 0; i < 2; ++i) {
    const Eigen::VectorXd a = J.block(0, ns + i, ns, 1), b = J2.block(0, ns + i, ns, 1);
    CHECK((a - b).norm() < 0.01 * b.norm());
  }
  // Linear in the rotor state: a finite difference reproduces Ad exactly.
  const Eigen::VectorXd e = random_matrix(ns, 1, 13) * 1e-7;
  Eigen::VectorXd sp = s;
  sp.head(ns) += e;
  const Eigen::VectorXd diff = plant().transition(sp, 0.0123) - plant().transition(s, 0.0123);
  const Eigen::VectorXd lin = J.topLeftCorner(ns, ns) * e;
  CHECK((diff.head(ns) - lin).norm() < 1e-6 * lin.norm());
}

TEST_CASE("serial and parallel plant builds agree bit for bit") {
  const Plant serial(plant().config(), Build::Serial);
  const auto& g = tables()[0].flowrate_grid;
  for (double q1 : {g[0], 0.5 * (g[2] + g[3]), g[6]}) {
    const auto a = serial.model_at(q1, g[4]);
    const auto b = plant().model_at(q1, g[4]);
    CHECK(a.Ad == b.Ad);
    CHECK(a.drift == b.drift);
    CHECK(a.unbalance == b.unbalance);
  }
}
