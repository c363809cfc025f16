#include <cmath>
#include <random>

#include "oilid/csv.hpp"
#include "oilid/errors.hpp"
#include "oilid/scenario_lab.hpp"

namespace oilid::scenario {

std::vector<Channels> add_noise(const std::vector<Channels>& clean, double sigma,
                                std::uint64_t seed) {
  if (!(sigma >= 0)) throw ModelError("noise std must be non-negative");
  std::vector<Channels> out = clean;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& c : out)
    for (int k = 0; k < 4; ++k) c[k] += normal(rng);
  return out;
}

void estimate_velocities(std::vector<Channels>& s, double dt) {
  if (s.size() < 3) throw ModelError("velocity estimation needs at least 3 samples");
  if (!(dt > 0)) throw ModelError("sample period must be positive");
  const std::size_t n = s.size();
  std::vector<Eigen::Vector4d> vel(n);
  vel[0] = (s[1].head<4>() - s[0].head<4>()) / dt;
  vel[n - 1] = (s[n - 1].head<4>() - s[n - 2].head<4>()) / dt;
  for (std::size_t k = 1; k + 1 < n; ++k) vel[k] = (s[k + 1].head<4>() - s[k - 1].head<4>()) / (2 * dt);
  for (std::size_t k = 0; k < n; ++k) s[k].tail<4>() = vel[k];
}

ekf::Measurements make_measurements(const TruthSeries& truth, const ScenarioSpec& spec) {
  spec.validate();
  std::vector<Channels> noisy = add_noise(truth.channels, spec.sigma_v, spec.seed);
  if (spec.velocity == VelocitySource::Differentiated) {
    estimate_velocities(noisy, spec.sample_period);
  } else if (spec.sigma_v > 0) {
    // A separate stream, so the displacement noise is the same in both modes.
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, spec.sigma_v);
    for (auto& c : noisy)
      for (int k = 4; k < 8; ++k) c[k] += normal(rng);
  }
  const auto first = static_cast<std::size_t>(std::lround(spec.discard / spec.sample_period));
  ekf::Measurements m;
  for (std::size_t k = first; k < noisy.size(); ++k) {
    m.time.push_back(truth.time[k]);
    m.channels.push_back(noisy[k]);
  }
  return m;
}

const std::vector<std::string>& measurement_header() {
  static const std::vector<std::string> h = {
      "time_s",       "b1_x_m",       "b1_y_m",       "b2_x_m",      "b2_y_m",
      "b1_vx_m_s",    "b1_vy_m_s",    "b2_vx_m_s",    "b2_vy_m_s"};
  return h;
}

std::string measurement_csv(const ekf::Measurements& m) {
  io::CsvTable csv;
  csv.header = measurement_header();
  csv.rows.reserve(m.time.size());
  for (std::size_t k = 0; k < m.time.size(); ++k) {
    std::vector<double> row{m.time[k]};
    for (int c = 0; c < 8; ++c) row.push_back(m.channels[k][c]);
    csv.rows.push_back(std::move(row));
  }
  return io::to_csv_string(csv);
}

ekf::Measurements parse_measurement_csv(const std::string& text, const std::string& source) {
  const io::CsvTable csv = io::parse_csv(text, source);
  io::require_header(csv, measurement_header(), source);
  ekf::Measurements m;
  for (const auto& row : csv.rows) {
    m.time.push_back(row[0]);
    Channels c;
    for (int k = 0; k < 8; ++k) c[k] = row[static_cast<std::size_t>(k + 1)];
    m.channels.push_back(c);
  }
  return m;
}

ErrorStats summarize(const std::vector<double>& rel) {
  ErrorStats s;
  s.relative_percent = rel;
  if (rel.empty()) return s;
  double sum = 0.0;
  for (double e : rel) {
    sum += e;
    s.maximum = std::max(s.maximum, e);
  }
  s.average = sum / static_cast<double>(rel.size());
  if (rel.size() > 1) {
    double sq = 0.0;
    for (double e : rel) sq += (e - s.average) * (e - s.average);
    s.std_dev = std::sqrt(sq / static_cast<double>(rel.size() - 1));
  }
  return s;
}

ErrorStats error_stats(const std::vector<double>& identified, const std::vector<double>& truth) {
  if (identified.size() != truth.size()) throw ModelError("identified and truth lengths differ");
  std::vector<double> rel;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (!(truth[k] != 0.0)) throw ModelError("truth flowrate must be nonzero");
    rel.push_back(std::abs(identified[k] - truth[k]) / std::abs(truth[k]) * 100.0);
  }
  return summarize(rel);
}

}  // namespace oilid::scenario
