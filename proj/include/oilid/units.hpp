#pragma once

#include <numbers>

namespace oilid::units {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kMlPerMinToM3PerS = 1e-6 / 60.0;

constexpr double ml_min_to_m3s(double q) { return q * kMlPerMinToM3PerS; }
constexpr double m3s_to_ml_min(double q) { return q / kMlPerMinToM3PerS; }
constexpr double um_to_m(double x) { return x * 1e-6; }
constexpr double m_to_um(double x) { return x * 1e6; }
constexpr double mm_to_m(double x) { return x * 1e-3; }
constexpr double hz_to_rad_s(double f) { return 2.0 * kPi * f; }
constexpr double rad_s_to_hz(double w) { return w / (2.0 * kPi); }

}  // namespace oilid::units
