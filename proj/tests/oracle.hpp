#pragma once

// Reference computations for the tests, kept independent of the library's
// own quadrature: Legendre nodes come from Newton iteration here, and the
// double integral is taken in lag coordinates u = t - t' as a nested
// composite rule.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace oracle {

using Vec3 = Eigen::Vector3d;
using Weight = std::function<Vec3(double)>;

inline std::vector<std::pair<double, double>> gauss_legendre(int n) {
  std::vector<std::pair<double, double>> out(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    out[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
  }
  return out;
}

// Composite Gauss-Legendre on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, int panels,
                        int order = 20) {
  static thread_local std::vector<std::pair<double, double>> rule;
  if (static_cast<int>(rule.size()) != order) rule = gauss_legendre(order);
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (const auto& [x, w] : rule) sum += w * f(mid + 0.5 * h * x);
  }
  return 0.5 * h * sum;
}

// Cov(int w1 . K, int w2 . K) for independent OU components with stationary
// variances var[i] and bandwidths gamma[i].
inline double covariance(const Weight& w1, const Weight& w2, const Vec3& var, const Vec3& gamma,
                         double t_total, int panels = 16) {
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (var[i] == 0.0) continue;
    const double g = gamma[i];
    // e^{-60} is far below double precision relative to the u ~ 0 part.
    const double reach = std::min(t_total, 60.0 / g);
    auto inner = [&](double u) {
      return integrate(
          [&](double t) { return w1(t)[i] * w2(t - u)[i] + w2(t)[i] * w1(t - u)[i]; }, u, t_total,
          panels);
    };
    total += var[i] * integrate([&](double u) { return std::exp(-g * u) * inner(u); }, 0.0, reach,
                                panels);
  }
  return total;
}

// Weight functions written out from the first-order phase expansions, with
// prefactor (pi n / T) for n cycles.
inline Weight gamma_weight(double b0, double theta0, double t_total, int n_cycles = 1) {
  const double omega = 2.0 * std::numbers::pi * n_cycles / t_total;
  const double pre = std::numbers::pi * n_cycles / t_total;
  const double s = std::sin(theta0), c = std::cos(theta0);
  return [=](double t) {
    // (pi n/T) [K3/B - (B3/B^3) B.K], B = b0 (s cos wt, s sin wt, c)
    const Vec3 bhat(s * std::cos(omega * t), s * std::sin(omega * t), c);
    return Vec3(pre / b0 * (Vec3(0, 0, 1) - c * bhat));
  };
}

inline Weight delta_weight(double theta0, double t_total, int n_cycles = 1) {
  const double omega = 2.0 * std::numbers::pi * n_cycles / t_total;
  const double s = std::sin(theta0), c = std::cos(theta0);
  return [=](double t) { return Vec3(s * std::cos(omega * t), s * std::sin(omega * t), c); };
}

inline Weight sum(const Weight& a, const Weight& b) {
  return [=](double t) { return Vec3(a(t) + b(t)); };
}

}  // namespace oracle
