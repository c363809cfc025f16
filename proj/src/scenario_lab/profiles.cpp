#include <algorithm>
#include <cmath>

#include "oilid/errors.hpp"
#include "oilid/scenario_lab.hpp"
#include "oilid/units.hpp"

namespace oilid::scenario {

double sigmoid_profile(double q_start, double q_end, double t_center, double duration, double t) {
  if (!(duration > 0)) throw ModelError("sigmoid transition duration must be positive");
  // 1 / (1 + e^{k d/2}) = 0.01 at the window edges.
  const double k = 2.0 * std::log(99.0) / duration;
  const double x = k * (t - t_center);
  const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return q_start + (q_end - q_start) * s;
}

FlowrateProfile FlowrateProfile::constant(double q) {
  FlowrateProfile p;
  p.q_start = p.q_end = q;
  return p;
}

FlowrateProfile FlowrateProfile::sigmoid(double q_start, double q_end, double t_center,
                                         double duration) {
  FlowrateProfile p;
  p.kind = Kind::Sigmoid;
  p.q_start = q_start;
  p.q_end = q_end;
  p.t_center = t_center;
  p.duration = duration;
  return p;
}

FlowrateProfile FlowrateProfile::piecewise(std::vector<std::pair<double, double>> points) {
  FlowrateProfile p;
  p.kind = Kind::Piecewise;
  p.points = std::move(points);
  if (p.points.empty()) throw ModelError("piecewise profile needs at least one point");
  for (std::size_t k = 1; k < p.points.size(); ++k)
    if (!(p.points[k].first > p.points[k - 1].first))
      throw ModelError("piecewise profile times must be strictly increasing");
  return p;
}

double FlowrateProfile::value(double t) const {
  switch (kind) {
    case Kind::Constant:
      return q_start;
    case Kind::Sigmoid:
      return sigmoid_profile(q_start, q_end, t_center, duration, t);
    case Kind::Piecewise: {
      if (t <= points.front().first) return points.front().second;
      if (t >= points.back().first) return points.back().second;
      const auto it = std::upper_bound(points.begin(), points.end(), t,
                                       [](double v, const auto& p) { return v < p.first; });
      const auto& [t1, q1] = *it;
      const auto& [t0, q0] = *(it - 1);
      return q0 + (q1 - q0) * (t - t0) / (t1 - t0);
    }
  }
  return q_start;
}

double FlowrateProfile::min_value() const {
  if (kind != Kind::Piecewise) return std::min(q_start, q_end);
  double m = points.front().second;
  for (const auto& p : points) m = std::min(m, p.second);
  return m;
}

double FlowrateProfile::max_value() const {
  if (kind != Kind::Piecewise) return std::max(q_start, q_end);
  double m = points.front().second;
  for (const auto& p : points) m = std::max(m, p.second);
  return m;
}

void FlowrateProfile::validate(double q_min, double q_max) const {
  if (kind == Kind::Sigmoid && !(duration > 0))
    throw ModelError("sigmoid transition duration must be positive");
  if (kind == Kind::Piecewise && points.empty())
    throw ModelError("piecewise profile needs at least one point");
  // Small slack so that grid endpoints written in ml/min still pass.
  const double slack = 1e-9 * q_max;
  if (min_value() < q_min - slack || max_value() > q_max + slack)
    throw ModelError("flowrate profile leaves the coefficient table range [" +
                     std::to_string(units::m3s_to_ml_min(q_min)) + ", " +
                     std::to_string(units::m3s_to_ml_min(q_max)) + "] ml/min");
}

void ScenarioSpec::validate() const {
  if (!(sample_period > 0)) throw ModelError("sample period must be positive");
  if (!(duration > 0)) throw ModelError("scenario duration must be positive");
  if (!(discard >= 0) || !(discard < duration))
    throw ModelError("discard prefix must satisfy 0 <= discard < duration");
  if (!(sigma_v >= 0)) throw ModelError("measurement noise std must be non-negative");
  if (substeps < 1) throw ModelError("substeps must be at least 1");
  if (!(coefficient_mismatch > -1.0)) throw ModelError("coefficient mismatch must exceed -100%");
}

long ScenarioSpec::sample_count() const {
  return std::lround(duration / sample_period) + 1;
}

double transition_duration(Steepness s) {
  switch (s) {
    case Steepness::Slow:
      return 4.0;
    case Steepness::Intermediate:
      return 1.0;
    case Steepness::Sudden:
      return 0.1;
  }
  return 1.0;
}

}  // namespace oilid::scenario
