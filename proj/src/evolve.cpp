#include "berrynoise/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace berrynoise {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Representative of value (mod 2 pi) closest to target.
double nearest_branch(double value, double target) {
  return value + kTwoPi * std::round((target - value) / kTwoPi);
}

Vec3 midpoint_field(const PrecessionSpec& spec, const NoisePath& path, std::size_t k) {
  const double t_mid = 0.5 * (path.times[k] + path.times[k + 1]);
  return control_field(spec, t_mid) + 0.5 * (path.samples[k] + path.samples[k + 1]);
}

Vec3 interpolated_total_field(const PrecessionSpec& spec, const NoisePath& path, double t) {
  const double x = t / path.dt;
  std::size_t i = static_cast<std::size_t>(std::floor(x));
  if (i + 1 >= path.size()) i = path.size() - 2;
  const double f = std::clamp(x - static_cast<double>(i), 0.0, 1.0);
  const Vec3 k = (1.0 - f) * path.samples[i] + f * path.samples[i + 1];
  return control_field(spec, t) + k;
}

}  // namespace

Vec3 SpinState::bloch() const {
  const Complex c = std::conj(up) * down;
  return {2.0 * c.real(), 2.0 * c.imag(), std::norm(up) - std::norm(down)};
}

Complex SpinState::overlap(const SpinState& other) const {
  return std::conj(up) * other.up + std::conj(down) * other.down;
}

SpinState eigenstate_up(const SphericalAngles& angles) {
  const Complex half_phase = std::polar(1.0, 0.5 * angles.phi);
  return {std::conj(half_phase) * std::cos(0.5 * angles.theta),
          half_phase * std::sin(0.5 * angles.theta)};
}

SpinState eigenstate_down(const SphericalAngles& angles) {
  const Complex half_phase = std::polar(1.0, 0.5 * angles.phi);
  return {std::conj(half_phase) * std::sin(0.5 * angles.theta),
          -half_phase * std::cos(0.5 * angles.theta)};
}

double energy(const SpinState& state, const Vec3& b) { return 0.5 * b.dot(state.bloch()); }

SpinState propagate_step(const SpinState& state, const Vec3& b_total, double dt,
                         bool* degenerate) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagation step must be positive");
  const double b = b_total.norm();
  if (b == 0.0) {
    if (degenerate) *degenerate = true;
    return state;
  }
  const Vec3 n = b_total / b;
  const double c = std::cos(0.5 * b * dt);
  const Complex mis(0.0, -std::sin(0.5 * b * dt));  // -i sin
  const Complex off_minus(n[0], -n[1]);              // nx - i ny
  const Complex off_plus(n[0], n[1]);
  return {c * state.up + mis * (n[2] * state.up + off_minus * state.down),
          c * state.down + mis * (off_plus * state.up - n[2] * state.down)};
}

void IntegratorConfig::validate() const {
  if (steps_per_cycle < 16) throw std::invalid_argument("steps_per_cycle must be >= 16");
  if (!(leakage_warn_threshold >= 0.0))
    throw std::invalid_argument("leakage_warn_threshold must be >= 0");
  if (!(noise_gamma_dt > 0.0)) throw std::invalid_argument("noise_gamma_dt must be > 0");
}

std::size_t grid_steps(const PrecessionSpec& spec, const NoiseModel& model,
                       const IntegratorConfig& config) {
  spec.validate();
  config.validate();
  const double T = spec.t_total;
  std::size_t n = static_cast<std::size_t>(config.steps_per_cycle) *
                  static_cast<std::size_t>(spec.n_cycles);
  n = std::max(n, static_cast<std::size_t>(std::ceil(model.max_gamma() * T / config.noise_gamma_dt)));
  // strict b0 dt < pi/4
  n = std::max(n, static_cast<std::size_t>(std::ceil(spec.b0 * T / (0.25 * kPi))) + 1);
  return n;
}

PhaseExtraction evolve_and_extract(const PrecessionSpec& spec, const NoisePath& path,
                                   const IntegratorConfig& config,
                                   std::vector<TrajectoryPoint>* trajectory) {
  spec.validate();
  config.validate();
  if (path.size() < 2) throw std::invalid_argument("noise path must contain at least one step");
  const std::size_t n_steps = path.size() - 1;
  if (std::abs(path.duration() - spec.t_total) > 1e-9 * spec.t_total)
    throw std::invalid_argument("noise path does not span [0, T]");
  const std::size_t required =
      static_cast<std::size_t>(config.steps_per_cycle) * static_cast<std::size_t>(spec.n_cycles);
  if (n_steps < required)
    throw std::invalid_argument("noise path has " + std::to_string(n_steps) +
                                " steps, integrator needs at least " + std::to_string(required));
  const double dt = path.dt;
  if (!(spec.b0 * dt < 0.25 * kPi))
    throw std::invalid_argument("step too coarse for phase unwrapping: b0 dt = " +
                                std::to_string(spec.b0 * dt) + " >= pi/4");

  // Instantaneous up eigenstates in the gauge with a continuous azimuth.
  const std::vector<double> phi = unwrapped_azimuth(spec, path);
  auto eigen_at = [&](std::size_t i) {
    SphericalAngles angles = polar_angles(field_at(spec, path, i).b_total);
    angles.phi = phi[i];
    return eigenstate_up(angles);
  };
  auto follow = [](double previous, double raw) {
    return previous + std::remainder(raw - previous, kTwoPi);
  };

  const SpinState initial = eigen_at(0);
  PhaseExtraction out;
  SpinState psi = initial;
  double dynamical = 0.0;
  double modulus_integral = 0.0;
  // Phase of <n(t)|psi(t)>. Its modulus stays near 1 while the evolution is
  // adiabatic, so it can be followed step by step.
  double adiabatic = 0.0;
  double pancharatnam = 0.0;  // trajectory only, ill defined where <psi0|psi> = 0

  if (trajectory) {
    trajectory->clear();
    trajectory->reserve(path.size());
    trajectory->push_back({0.0, psi, energy(psi, field_at(spec, path, 0).b_total), 0.0, 0.0});
  }

  for (std::size_t k = 0; k < n_steps; ++k) {
    const Vec3 b = midpoint_field(spec, path, k);
    dynamical -= energy(psi, b) * dt;
    modulus_integral += b.norm() * dt;
    psi = propagate_step(psi, b, dt, &out.degeneracy_touched);
    const Complex ov = eigen_at(k + 1).overlap(psi);
    adiabatic = follow(adiabatic, std::arg(ov));
    out.max_leakage = std::max(out.max_leakage, 1.0 - std::norm(ov));
    if (trajectory) {
      pancharatnam = follow(pancharatnam, std::arg(initial.overlap(psi)));
      trajectory->push_back({path.times[k + 1], psi,
                             energy(psi, field_at(spec, path, k + 1).b_total), pancharatnam,
                             dynamical});
    }
  }

  const SpinState final_up = eigen_at(n_steps);
  out.azimuth_winding = static_cast<int>(std::lround((phi.back() - phi.front()) / kTwoPi));
  // psi(T) ~ e^{i adiabatic} |n(T)>, and <n(0)|n(T)> carries (-1)^winding;
  // the sign -pi per turn puts the geometric phase at minus half the solid angle.
  const double closing =
      follow(-kPi * out.azimuth_winding, std::arg(initial.overlap(final_up)));
  out.total_phase = nearest_branch(std::arg(initial.overlap(psi)), adiabatic + closing);
  out.dynamical_phase = dynamical;
  out.geometric_phase = out.total_phase - dynamical;
  out.delta_integral = modulus_integral;
  out.berry_phase = out.total_phase + 0.5 * modulus_integral + kPi * out.azimuth_winding;

  out.leakage = std::clamp(1.0 - std::norm(final_up.overlap(psi)), 0.0, 1.0);
  out.max_leakage = std::clamp(out.max_leakage, 0.0, 1.0);
  out.non_adiabatic_warning = out.leakage > config.leakage_warn_threshold;
  out.bloch_return = (psi.bloch() - initial.bloch()).norm();
  return out;
}

double connection_phase_discrete(const PrecessionSpec& spec, const NoisePath& path,
                                 std::size_t n_points) {
  spec.validate();
  if (n_points < 64) throw std::invalid_argument("discrete connection needs at least 64 points");
  if (path.size() < 2) throw std::invalid_argument("noise path must contain at least one step");
  if (std::abs(path.duration() - spec.t_total) > 1e-9 * spec.t_total)
    throw std::invalid_argument("noise path does not span [0, T]");

  const double h = spec.t_total / static_cast<double>(n_points);
  SphericalAngles first = polar_angles(interpolated_total_field(spec, path, 0.0));
  SphericalAngles prev_angles = first;
  SpinState prev = eigenstate_up(first);

  double phase_sum = 0.0;
  for (std::size_t j = 1; j <= n_points; ++j) {
    const double t = j == n_points ? spec.t_total : static_cast<double>(j) * h;
    SphericalAngles a = polar_angles(interpolated_total_field(spec, path, t));
    a.phi = prev_angles.phi + std::remainder(a.phi - prev_angles.phi, kTwoPi);
    const SpinState cur = eigenstate_up(a);
    const Complex ov = prev.overlap(cur);
    if (std::abs(ov) < 0.5)
      throw ResolutionError("consecutive eigenstate overlap " + std::to_string(std::abs(ov)) +
                            " below 0.5; use more points");
    phase_sum += std::arg(ov);
    prev = cur;
    prev_angles = a;
  }

  // Close onto the initial eigenstate continued through the same number of
  // azimuthal turns, which keeps the closing overlap near 1.
  const long turns = std::lround((prev_angles.phi - first.phi) / kTwoPi);
  SphericalAngles continued = first;
  continued.phi += kTwoPi * static_cast<double>(turns);
  const Complex closing = prev.overlap(eigenstate_up(continued));
  if (std::abs(closing) < 0.5)
    throw ResolutionError("closing overlap below 0.5; path does not return near its start");
  phase_sum += std::arg(closing);
  return -phase_sum;
}

}  // namespace berrynoise
