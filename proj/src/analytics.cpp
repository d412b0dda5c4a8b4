#include "berrynoise/analytics.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace berrynoise {

namespace {

constexpr double kPi = std::numbers::pi;

void check_theta(double theta) {
  if (!(theta >= 0.0 && theta <= kPi))
    throw std::invalid_argument("polar angle must lie in [0, pi]");
}

// Prefactor of the Berry-phase fluctuation: half the mean azimuthal rate,
// pi/T for a single cycle.
double half_rate(const PrecessionSpec& spec) { return 0.5 * spec.omega(); }

// pi * n_cycles; the noiseless phase over the whole run is this times cos(theta0).
double cycle_phase(const PrecessionSpec& spec) { return kPi * static_cast<double>(spec.n_cycles); }

// Amplitudes of a weight of the form (a cos wt, a sin wt, c).
struct CircularAmplitudes {
  double transverse;
  double longitudinal;
};

CircularAmplitudes gamma_amplitudes(const PrecessionSpec& spec) {
  const double s = std::sin(spec.theta0), c = std::cos(spec.theta0);
  const double k = half_rate(spec) / spec.b0;
  return {-k * c * s, k * s * s};
}

CircularAmplitudes delta_amplitudes(const PrecessionSpec& spec) {
  return {std::sin(spec.theta0), std::cos(spec.theta0)};
}

// Cov of the two linear functionals with circular weights: the transverse
// pair contributes a_t b_t cos(omega (t - t')), the z axis a_z b_z.
VarianceBreakdown circular_covariance(const PrecessionSpec& spec, const NoiseModel& model,
                                      CircularAmplitudes a, CircularAmplitudes b) {
  spec.validate();
  model.validate();
  const double T = spec.t_total;
  VarianceBreakdown out;
  out.transverse = 2.0 * model.transverse.variance() * a.transverse * b.transverse *
                   transverse_bracket(model.transverse.gamma, spec.omega(), T);
  out.longitudinal = 2.0 * model.longitudinal.variance() * a.longitudinal * b.longitudinal *
                     longitudinal_bracket(model.longitudinal.gamma, T);
  out.total = out.transverse + out.longitudinal;
  return out;
}

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// Per-axis sum over the square [0,T]^2 of w1_i(t) w2_i(t') e^{-gamma_i |t - t'|},
// split as int w1 I2 + int w2 I1 with I_f(t) = int_0^t f(t') e^{-gamma (t - t')} dt'.
Vec3 kernel_pairing(const WeightFunction& w1, const WeightFunction& w2, const Vec3& gamma,
                    double t_total, std::size_t panels) {
  const double h = t_total / static_cast<double>(panels);
  Vec3 run1 = Vec3::Zero(), run2 = Vec3::Zero();  // I1, I2 at the panel start
  Vec3 total = Vec3::Zero();

  auto decay = [&](double lag) -> Vec3 {
    return Vec3(std::exp(-gamma[0] * lag), std::exp(-gamma[1] * lag), std::exp(-gamma[2] * lag));
  };
  // int_a^t f(s) e^{-gamma (t - s)} ds for both weights
  auto partial = [&](double a, double t, Vec3& p1, Vec3& p2) {
    p1.setZero();
    p2.setZero();
    const double half = 0.5 * (t - a);
    if (half <= 0.0) return;
    for (std::size_t k = 0; k < kGlNodes.size(); ++k) {
      const double s = a + half * (1.0 + kGlNodes[k]);
      const Vec3 kern = decay(t - s) * (kGlWeights[k] * half);
      p1 += w1(s).cwiseProduct(kern);
      p2 += w2(s).cwiseProduct(kern);
    }
  };

  Vec3 p1, p2;
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) * h;
    const double half = 0.5 * h;
    for (std::size_t j = 0; j < kGlNodes.size(); ++j) {
      const double t = a + half * (1.0 + kGlNodes[j]);
      partial(a, t, p1, p2);
      const Vec3 fade = decay(t - a);
      const Vec3 i1 = fade.cwiseProduct(run1) + p1;
      const Vec3 i2 = fade.cwiseProduct(run2) + p2;
      total += (w1(t).cwiseProduct(i2) + w2(t).cwiseProduct(i1)) * (kGlWeights[j] * half);
    }
    partial(a, a + h, p1, p2);
    const Vec3 fade = decay(h);
    run1 = fade.cwiseProduct(run1) + p1;
    run2 = fade.cwiseProduct(run2) + p2;
  }
  return total;
}

}  // namespace

double berry_connection_phi(double theta) {
  check_theta(theta);
  return 0.5 * std::cos(theta);
}

double noiseless_berry_phase(double theta0) {
  check_theta(theta0);
  return kPi * std::cos(theta0);
}

WeightFunction gamma_weight(const PrecessionSpec& spec) {
  spec.validate();
  const auto amp = gamma_amplitudes(spec);
  const double omega = spec.omega();
  return {[amp, omega](double t) {
            return Vec3(amp.transverse * std::cos(omega * t), amp.transverse * std::sin(omega * t),
                        amp.longitudinal);
          },
          spec.t_total};
}

WeightFunction delta_weight(const PrecessionSpec& spec) {
  spec.validate();
  const auto amp = delta_amplitudes(spec);
  const double omega = spec.omega();
  return {[amp, omega](double t) {
            return Vec3(amp.transverse * std::cos(omega * t), amp.transverse * std::sin(omega * t),
                        amp.longitudinal);
          },
          spec.t_total};
}

WeightFunction operator+(const WeightFunction& a, const WeightFunction& b) {
  return {[ra = a.rule, rb = b.rule](double t) -> Vec3 { return ra(t) + rb(t); }, a.t_total};
}

std::vector<Vec3> sample_weight(const WeightFunction& w, const std::vector<double>& times) {
  std::vector<Vec3> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(w(t));
  return out;
}

double integrate_weight(const std::vector<Vec3>& weight_samples, const NoisePath& path) {
  if (weight_samples.size() != path.size())
    throw std::invalid_argument("weight samples and noise path differ in length");
  const std::size_t n = path.size();
  if (n < 2) return 0.0;
  double acc = 0.5 * (weight_samples.front().dot(path.samples.front()) +
                      weight_samples.back().dot(path.samples.back()));
  for (std::size_t i = 1; i + 1 < n; ++i) acc += weight_samples[i].dot(path.samples[i]);
  return acc * path.dt;
}

double integrate_weight(const WeightFunction& w, const NoisePath& path) {
  return integrate_weight(sample_weight(w, path.times), path);
}

double transverse_bracket(double gamma, double omega, double t_total) {
  const double g2 = gamma * gamma, w2 = omega * omega;
  const double d = g2 + w2;
  return std::expm1(-gamma * t_total) * (g2 - w2) / (d * d) + gamma * t_total / d;
}

double longitudinal_bracket(double gamma, double t_total) {
  const double x = gamma * t_total;
  if (x < 1e-3) {
    // T^2 (1/2 - x/6 + x^2/24 - x^3/120)
    return t_total * t_total * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0);
  }
  return (x + std::expm1(-x)) / (gamma * gamma);
}

VarianceBreakdown var_gamma_closed(const PrecessionSpec& spec, const NoiseModel& model) {
  const auto a = gamma_amplitudes(spec);
  return circular_covariance(spec, model, a, a);
}

VarianceBreakdown var_delta_closed(const PrecessionSpec& spec, const NoiseModel& model) {
  const auto a = delta_amplitudes(spec);
  return circular_covariance(spec, model, a, a);
}

VarianceBreakdown cov_gamma_delta_closed(const PrecessionSpec& spec, const NoiseModel& model) {
  return circular_covariance(spec, model, gamma_amplitudes(spec), delta_amplitudes(spec));
}

VarianceBreakdown var_alpha_closed(const PrecessionSpec& spec, const NoiseModel& model) {
  spec.validate();
  const double s = std::sin(spec.theta0), c = std::cos(spec.theta0);
  const double B = spec.b0, geo = half_rate(spec);
  // (-pi c s / T + B s) / B and (pi s^2 / T + B c) / B
  const CircularAmplitudes a{(-geo * c * s + B * s) / B, (geo * s * s + B * c) / B};
  return circular_covariance(spec, model, a, a);
}

double var_gamma_limit_narrowband(const PrecessionSpec& spec, const NoiseModel& model) {
  spec.validate();
  model.validate();
  const double s = std::sin(spec.theta0), c = std::cos(spec.theta0);
  const double B = spec.b0, T = spec.t_total, P = cycle_phase(spec);
  const double two_pi_n = 2.0 * P;
  const double trans = P * c * s / B, longi = P * s * s / B;
  return 4.0 * model.transverse.variance() * trans * trans * model.transverse.gamma * T /
             (two_pi_n * two_pi_n) +
         2.0 * model.longitudinal.variance() * longi * longi *
             (0.5 - model.longitudinal.gamma * T / 6.0);
}

double var_gamma_limit_broadband(const PrecessionSpec& spec, const NoiseModel& model) {
  spec.validate();
  model.validate();
  const double s = std::sin(spec.theta0), c = std::cos(spec.theta0);
  const double B = spec.b0, T = spec.t_total, P = cycle_phase(spec);
  const double trans = P * c * s / B, longi = P * s * s / B;
  return 2.0 * model.transverse.variance() * trans * trans / (model.transverse.gamma * T) +
         2.0 * model.longitudinal.variance() * longi * longi / (model.longitudinal.gamma * T);
}

PhaseMoments phase_moments(const PrecessionSpec& spec, const NoiseModel& model) {
  PhaseMoments m;
  m.mean_gamma = static_cast<double>(spec.n_cycles) * noiseless_berry_phase(spec.theta0);
  m.var_gamma = var_gamma_closed(spec, model).total;
  m.mean_delta = spec.b0 * spec.t_total;
  m.var_delta = var_delta_closed(spec, model).total;
  m.cov_gamma_delta = cov_gamma_delta_closed(spec, model).total;
  m.mean_alpha = m.mean_gamma + m.mean_delta;
  m.var_alpha = var_alpha_closed(spec, model).total;
  return m;
}

DephasingSplit dephasing_split(const PrecessionSpec& spec, const NoiseModel& model) {
  return {var_gamma_closed(spec, model).total, var_delta_closed(spec, model).total,
          2.0 * cov_gamma_delta_closed(spec, model).total};
}

QuadratureResult covariance_by_quadrature(const WeightFunction& w1, const WeightFunction& w2,
                                          const NoiseModel& model, double t_total,
                                          std::size_t n_nodes, const QuadratureOptions& options) {
  if (n_nodes < 64) throw std::invalid_argument("quadrature needs at least 64 nodes");
  if (!(t_total > 0.0)) throw std::invalid_argument("quadrature interval must be positive");
  model.validate();

  const Vec3 gamma(model.transverse.gamma, model.transverse.gamma, model.longitudinal.gamma);
  const Vec3 var(model.transverse.variance(), model.transverse.variance(),
                 model.longitudinal.variance());
  auto evaluate = [&](std::size_t panels) {
    return var.dot(kernel_pairing(w1, w2, gamma, t_total, panels));
  };

  const std::size_t order = kGlNodes.size();
  std::size_t panels = (n_nodes + order - 1) / order;
  double previous = evaluate(panels);
  for (;;) {
    panels *= 2;
    const double current = evaluate(panels);
    const double err = std::abs(current - previous);
    if (err <= options.rel_tol * std::abs(current) || err <= options.abs_tol) return {current, err, panels * order};
    if (2 * panels * order > options.max_nodes)
      throw AccuracyError("quadrature did not converge: error estimate " + std::to_string(err) +
                          " at " + std::to_string(panels * order) + " nodes");
    previous = current;
  }
}

QuadratureResult variance_by_quadrature(const WeightFunction& w, const NoiseModel& model,
                                        double t_total, std::size_t n_nodes,
                                        const QuadratureOptions& options) {
  return covariance_by_quadrature(w, w, model, t_total, n_nodes, options);
}

double dephasing_factor(double var_alpha) {
  if (!(var_alpha >= 0.0)) throw std::invalid_argument("phase variance must be >= 0");
  return std::exp(-2.0 * var_alpha);
}

Eigen::Matrix2cd density_matrix_after(std::complex<double> a, std::complex<double> b,
                                      double mean_alpha, double var_alpha) {
  const double norm = std::norm(a) + std::norm(b);
  if (std::abs(norm - 1.0) > 1e-12)
    throw std::invalid_argument("amplitudes must be normalised, |a|^2 + |b|^2 = " +
                                std::to_string(norm));
  const std::complex<double> coherence =
      a * std::conj(b) * std::polar(dephasing_factor(var_alpha), 2.0 * mean_alpha);
  Eigen::Matrix2cd rho;
  rho << std::norm(a), coherence, std::conj(coherence), std::norm(b);
  return rho;
}

double noncyclic_term(const PrecessionSpec& spec, const NoisePath& path) {
  const auto phi = unwrapped_azimuth(spec, path);
  const double swept = phi.back() - phi.front();
  const double extra = swept - 2.0 * kPi * static_cast<double>(spec.n_cycles);
  return berry_connection_phi(spec.theta0) * extra;
}

}  // namespace berrynoise
