#include "berrynoise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace berrynoise {

void OuParams::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("OU sigma must be finite and >= 0, got " + std::to_string(sigma));
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("OU gamma must be finite and > 0, got " + std::to_string(gamma));
}

const OuParams& NoiseModel::axis(int component) const {
  if (component < 0 || component > 2)
    throw std::invalid_argument("noise component index must be 0, 1 or 2");
  return component == 2 ? longitudinal : transverse;
}

void NoiseModel::validate() const {
  transverse.validate();
  longitudinal.validate();
}

NoiseModel NoiseModel::scaled(double factor) const {
  NoiseModel out = *this;
  out.transverse.sigma *= factor;
  out.longitudinal.sigma *= factor;
  return out;
}

double NoiseModel::max_gamma() const {
  return std::max(transverse.gamma, longitudinal.gamma);
}

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

void check_grid(std::size_t n_steps, double dt) {
  if (n_steps == 0) throw std::invalid_argument("noise path needs at least one step");
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("noise path step dt must be positive");
}

std::vector<double> uniform_times(std::size_t n_steps, double dt) {
  std::vector<double> t(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

}  // namespace

NoisePath zero_path(std::size_t n_steps, double dt) {
  check_grid(n_steps, dt);
  NoisePath path;
  path.dt = dt;
  path.times = uniform_times(n_steps, dt);
  path.samples.assign(n_steps + 1, Vec3::Zero());
  return path;
}

NoisePath sample_path(const NoiseModel& model, std::size_t n_steps, double dt,
                      std::uint64_t seed) {
  check_grid(n_steps, dt);
  model.validate();

  NoisePath path = zero_path(n_steps, dt);
  for (int c = 0; c < 3; ++c) {
    const OuParams& p = model.axis(c);
    if (p.sigma == 0.0) continue;
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
    std::normal_distribution<double> normal(0.0, 1.0);

    const double decay = std::exp(-p.gamma * dt);
    // sqrt(1 - e^{-2 gamma dt}) without cancellation for small gamma dt
    const double kick = p.sigma * std::sqrt(-std::expm1(-2.0 * p.gamma * dt));

    double k = p.sigma * normal(rng);
    path.samples[0][c] = k;
    for (std::size_t i = 1; i <= n_steps; ++i) {
      k = k * decay + kick * normal(rng);
      path.samples[i][c] = k;
    }
  }
  return path;
}

double autocovariance(const OuParams& params, double lag) {
  if (!(lag >= 0.0)) throw std::invalid_argument("autocovariance lag must be >= 0");
  return params.variance() * std::exp(-params.gamma * lag);
}

double estimate_autocovariance(const NoisePath& path, int component,
                               std::size_t lag_steps) {
  if (component < 0 || component > 2)
    throw std::invalid_argument("noise component index must be 0, 1 or 2");
  const std::size_t n = path.size();
  if (lag_steps >= n)
    throw std::invalid_argument("lag of " + std::to_string(lag_steps) +
                                " steps out of range for path of length " + std::to_string(n));

  double mean = 0.0;
  for (const auto& s : path.samples) mean += s[component];
  mean /= static_cast<double>(n);

  const std::size_t pairs = n - lag_steps;
  double acc = 0.0;
  for (std::size_t i = 0; i < pairs; ++i)
    acc += (path.samples[i][component] - mean) * (path.samples[i + lag_steps][component] - mean);
  return acc / static_cast<double>(pairs);
}

}  // namespace berrynoise
