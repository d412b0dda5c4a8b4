#include "berrynoise/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace berrynoise {

double PrecessionSpec::omega() const {
  return 2.0 * std::numbers::pi * static_cast<double>(n_cycles) / t_total;
}

void PrecessionSpec::validate() const {
  if (!(b0 > 0.0) || !std::isfinite(b0))
    throw std::invalid_argument("b0 must be finite and > 0");
  if (!(theta0 >= 0.0 && theta0 <= std::numbers::pi))
    throw std::invalid_argument("theta0 must lie in [0, pi]");
  if (!(t_total > 0.0) || !std::isfinite(t_total))
    throw std::invalid_argument("t_total must be finite and > 0");
  if (n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");
}

Vec3 control_field(const PrecessionSpec& spec, double t) {
  // grid instants k*dt may overshoot T by rounding
  const double slack = 1e-9 * spec.t_total;
  if (t < -slack || t > spec.t_total + slack)
    throw std::invalid_argument("time " + std::to_string(t) + " outside [0, T]");
  const double wt = spec.omega() * t;
  const double s = std::sin(spec.theta0);
  return spec.b0 * Vec3(s * std::cos(wt), s * std::sin(wt), std::cos(spec.theta0));
}

SphericalAngles polar_angles(const Vec3& v) {
  const double r = v.norm();
  if (!(r > 0.0)) throw DegeneracyError("polar angles undefined at the degeneracy B = 0");
  SphericalAngles a;
  a.theta = std::acos(std::clamp(v[2] / r, -1.0, 1.0));
  a.phi = (v[0] == 0.0 && v[1] == 0.0) ? 0.0 : std::atan2(v[1], v[0]);
  return a;
}

double first_order_cos_theta(const PrecessionSpec& spec, const Vec3& k, double t) {
  const Vec3 b = control_field(spec, t);
  const double bm = spec.b0;
  return b[2] / bm + k[2] / bm - b[2] / (bm * bm * bm) * b.dot(k);
}

FieldSample field_at(const PrecessionSpec& spec, const NoisePath& path, std::size_t i) {
  FieldSample f;
  f.t = path.times.at(i);
  f.b_control = control_field(spec, f.t);
  f.k_noise = path.samples.at(i);
  f.b_total = f.b_control + f.k_noise;
  return f;
}

std::vector<double> unwrapped_azimuth(const PrecessionSpec& spec, const NoisePath& path) {
  std::vector<double> phi(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double raw = polar_angles(field_at(spec, path, i).b_total).phi;
    if (i == 0) {
      phi[i] = raw;
      continue;
    }
    const double jump = std::remainder(raw - phi[i - 1], 2.0 * std::numbers::pi);
    phi[i] = phi[i - 1] + jump;
  }
  return phi;
}

bool AdiabaticityReport::all_pass() const {
  for (const auto& e : entries)
    if (!e.pass) return false;
  return true;
}

AdiabaticityReport adiabaticity_report(const PrecessionSpec& spec, const NoiseModel& model,
                                       const AdiabaticityThresholds& thresholds) {
  AdiabaticityReport report;
  auto add = [&](std::string name, double value, double threshold) {
    const double ratio = value / spec.b0;
    report.entries.push_back({std::move(name), ratio, threshold, ratio <= threshold});
  };
  add("omega/b0", spec.omega(), thresholds.rate);
  add("gamma12/b0", model.transverse.gamma, thresholds.rate);
  add("gamma3/b0", model.longitudinal.gamma, thresholds.rate);
  add("sigma12/b0", model.transverse.sigma, thresholds.amplitude);
  add("sigma3/b0", model.longitudinal.sigma, thresholds.amplitude);
  return report;
}

}  // namespace berrynoise
