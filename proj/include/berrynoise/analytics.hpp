#pragma once

// Closed-form phase statistics for a spin-1/2 following a precessing field
// with additive OU noise, to first order in |K|/B0.
//
// Phase functionals (alpha = gamma + delta):
//   gamma - gamma0 = integral_0^T w_gamma(t) . K(t) dt
//   delta - delta0 = integral_0^T w_delta(t) . K(t) dt,   delta0 = B0 T
// The weight functions are linear in K, so for Gaussian K every phase is
// Gaussian and its law is fixed by the means and the covariance below.

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "berrynoise/field.hpp"
#include "berrynoise/noise.hpp"

namespace berrynoise {

class AccuracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A_theta of the up branch vanishes identically.
inline constexpr double kBerryConnectionTheta = 0.0;

// A_phi of the up branch, 1/2 cos(theta).
double berry_connection_phi(double theta);

// pi cos(theta0) for one cycle of the up branch; the down branch is the negative.
double noiseless_berry_phase(double theta0);

struct WeightFunction {
  std::function<Vec3(double)> rule;
  double t_total = 0.0;

  Vec3 operator()(double t) const { return rule(t); }
};

WeightFunction gamma_weight(const PrecessionSpec& spec);
WeightFunction delta_weight(const PrecessionSpec& spec);
WeightFunction operator+(const WeightFunction& a, const WeightFunction& b);

// Weight evaluated on every instant of a grid.
std::vector<Vec3> sample_weight(const WeightFunction& w, const std::vector<double>& times);

// Trapezoid rule for integral w(t) . K(t) dt on the path grid.
double integrate_weight(const std::vector<Vec3>& weight_samples, const NoisePath& path);
double integrate_weight(const WeightFunction& w, const NoisePath& path);

struct VarianceBreakdown {
  double transverse = 0.0;    // sigma12 contribution
  double longitudinal = 0.0;  // sigma3 contribution
  double total = 0.0;
};

// Ordered double integrals of the OU kernel, u = t - t':
//   transverse:   int_0^T int_0^t cos(omega u) e^{-gamma u} dt' dt
//   longitudinal: int_0^T int_0^t e^{-gamma u} dt' dt
// The transverse form assumes omega T is a multiple of 2 pi.
double transverse_bracket(double gamma, double omega, double t_total);
double longitudinal_bracket(double gamma, double t_total);

VarianceBreakdown var_gamma_closed(const PrecessionSpec& spec, const NoiseModel& model);
VarianceBreakdown var_delta_closed(const PrecessionSpec& spec, const NoiseModel& model);
VarianceBreakdown cov_gamma_delta_closed(const PrecessionSpec& spec, const NoiseModel& model);
VarianceBreakdown var_alpha_closed(const PrecessionSpec& spec, const NoiseModel& model);

// Regime Gamma_i T << 1 and Gamma_i << omega.
double var_gamma_limit_narrowband(const PrecessionSpec& spec, const NoiseModel& model);
// Regime Gamma_i T >> 1 and Gamma_i >> omega.
double var_gamma_limit_broadband(const PrecessionSpec& spec, const NoiseModel& model);

struct PhaseMoments {
  double mean_gamma = 0.0;
  double var_gamma = 0.0;
  double mean_delta = 0.0;
  double var_delta = 0.0;
  double cov_gamma_delta = 0.0;
  double mean_alpha = 0.0;
  double var_alpha = 0.0;
};

PhaseMoments phase_moments(const PrecessionSpec& spec, const NoiseModel& model);

// var_alpha split by origin: var(gamma) terms, var(delta) terms, 2 cov.
struct DephasingSplit {
  double geometric = 0.0;
  double dynamical = 0.0;
  double cross = 0.0;
};

DephasingSplit dephasing_split(const PrecessionSpec& spec, const NoiseModel& model);

struct QuadratureOptions {
  double rel_tol = 1e-11;
  double abs_tol = 0.0;
  std::size_t max_nodes = std::size_t{1} << 22;
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;  // |Q(2n) - Q(n)|
  std::size_t nodes = 0;
};

// Var(integral w . K dt) by panel Gauss-Legendre quadrature of the double
// integral, with the inner integral carried as an exponentially decaying
// running accumulator. Node count doubles until the difference between
// successive levels is below rel_tol; throws AccuracyError otherwise.
QuadratureResult variance_by_quadrature(const WeightFunction& w, const NoiseModel& model,
                                        double t_total, std::size_t n_nodes,
                                        const QuadratureOptions& options = {});

QuadratureResult covariance_by_quadrature(const WeightFunction& w1, const WeightFunction& w2,
                                          const NoiseModel& model, double t_total,
                                          std::size_t n_nodes,
                                          const QuadratureOptions& options = {});

// exp(-2 var_alpha)
double dephasing_factor(double var_alpha);

// Average of |psi'><psi'| over a Gaussian total phase, where
// psi' = a e^{i alpha}|up> + b e^{-i alpha}|down>.
Eigen::Matrix2cd density_matrix_after(std::complex<double> a, std::complex<double> b,
                                      double mean_alpha, double var_alpha);

// Non-cyclic endpoint term A_phi(theta0) dphi(T) that the Pancharatnam
// definition removes. dphi(T) is the extra azimuth swept by the total field
// beyond n_cycles full turns, measured from its own starting azimuth.
double noncyclic_term(const PrecessionSpec& spec, const NoisePath& path);

}  // namespace berrynoise
