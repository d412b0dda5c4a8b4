#pragma once

// Classical field noise: three independent Ornstein-Uhlenbeck components.
//
// Convention: OuParams::sigma is the standard deviation of the stationary
// process, so the stationary variance is sigma^2 and every variance formula
// in this library is quadratic in sigma.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace berrynoise {

using Vec3 = Eigen::Vector3d;

struct OuParams {
  double sigma = 0.0;  // stationary standard deviation
  double gamma = 1.0;  // bandwidth, inverse correlation time

  void validate() const;
  double variance() const { return sigma * sigma; }
};

// K1 and K2 share the transverse parameters, K3 uses the longitudinal ones.
struct NoiseModel {
  OuParams transverse;
  OuParams longitudinal;

  const OuParams& axis(int component) const;
  void validate() const;
  bool silent() const { return transverse.sigma == 0.0 && longitudinal.sigma == 0.0; }
  // Same bandwidths, amplitudes multiplied by factor.
  NoiseModel scaled(double factor) const;
  double max_gamma() const;
};

struct NoisePath {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Vec3> samples;

  std::size_t size() const { return samples.size(); }
  double duration() const { return times.empty() ? 0.0 : times.back(); }
};

// Exact OU transition kernel on a uniform grid of n_steps + 1 instants
// starting at t = 0, initial values drawn from the stationary law.
// Each component has its own generator stream derived from the seed.
NoisePath sample_path(const NoiseModel& model, std::size_t n_steps, double dt,
                      std::uint64_t seed);

// All-zero path on the same grid layout as sample_path.
NoisePath zero_path(std::size_t n_steps, double dt);

// sigma^2 exp(-gamma * lag)
double autocovariance(const OuParams& params, double lag);

// Sample autocovariance of one component at the given lag, mean removed,
// normalised by the number of available pairs.
double estimate_autocovariance(const NoisePath& path, int component,
                               std::size_t lag_steps);

// splitmix64 finaliser; used to derive independent streams from a master seed.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

}  // namespace berrynoise
