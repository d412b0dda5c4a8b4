#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "berrynoise/noise.hpp"
#include "stats.hpp"

using namespace berrynoise;

namespace {

std::vector<double> component(const NoisePath& p, int c, std::size_t from = 0,
                              std::size_t to = static_cast<std::size_t>(-1)) {
  to = std::min(to, p.size());
  std::vector<double> out;
  out.reserve(to - from);
  for (std::size_t i = from; i < to; ++i) out.push_back(p.samples[i][c]);
  return out;
}

// Standard error of the sample variance of an AR(1) sequence with lag-one
// correlation rho and variance v.
double se_variance_ar1(double v, double rho, std::size_t n) {
  return v * std::sqrt(2.0 / static_cast<double>(n) * (1.0 + rho * rho) / (1.0 - rho * rho));
}

// Bartlett's formula for the sample autocovariance at lag k of an AR(1)
// sequence with c_m = v rho^|m|.
double se_autocov_ar1(double v, double rho, std::size_t k, std::size_t n) {
  double s = 0.0;
  const long kk = static_cast<long>(k);
  for (long m = -4000; m <= 4000; ++m) {
    auto c = [&](long j) { return v * std::pow(rho, std::abs(static_cast<double>(j))); };
    s += c(m) * c(m) + c(m + kk) * c(m - kk);
  }
  return std::sqrt(s / static_cast<double>(n));
}

}  // namespace

TEST_CASE("silent model samples exact zeros") {
  const NoiseModel m{{0.0, 0.3}, {0.0, 2.0}};
  const NoisePath p = sample_path(m, 1000, 0.1, 99);
  CHECK(p.size() == 1001);
  for (const auto& s : p.samples) CHECK(s == Vec3::Zero());
}

TEST_CASE("grid layout") {
  const NoisePath p = sample_path({{1.0, 1.0}, {1.0, 1.0}}, 10, 0.25, 1);
  REQUIRE(p.times.size() == p.samples.size());
  CHECK(p.dt == 0.25);
  for (std::size_t i = 0; i < p.times.size(); ++i) CHECK(p.times[i] == doctest::Approx(0.25 * i));
  CHECK(p.duration() == doctest::Approx(2.5));
}

TEST_CASE("stationary variance, sigma=1 gamma=1 dt=0.1, 1e6 samples") {
  const NoiseModel m{{0.0, 1.0}, {1.0, 1.0}};
  const NoisePath p = sample_path(m, 999'999, 0.1, 2024);
  const auto k3 = component(p, 2);
  const double v = stats::variance(k3);
  const double se = se_variance_ar1(1.0, std::exp(-0.1), k3.size());
  INFO("variance " << v << " se " << se);
  CHECK(std::abs(v - 1.0) <= 3.0 * se);
}

TEST_CASE("same inputs give bit-identical paths") {
  const NoiseModel m{{0.3, 0.7}, {0.2, 0.1}};
  const NoisePath a = sample_path(m, 5000, 0.05, 77);
  const NoisePath b = sample_path(m, 5000, 0.05, 77);
  CHECK(a.samples == b.samples);
  const NoisePath c = sample_path(m, 5000, 0.05, 78);
  CHECK(a.samples != c.samples);
}

TEST_CASE("component streams do not disturb each other") {
  const NoisePath a = sample_path({{0.3, 0.7}, {0.0, 0.1}}, 2000, 0.05, 5);
  const NoisePath b = sample_path({{0.3, 0.7}, {0.9, 3.0}}, 2000, 0.05, 5);
  CHECK(component(a, 0) == component(b, 0));
  CHECK(component(a, 1) == component(b, 1));
  CHECK(component(a, 0) != component(a, 1));
}

TEST_CASE("sample_path argument errors") {
  const NoiseModel m{{1.0, 1.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(sample_path(m, 0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_path(m, 10, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_path(m, 10, -0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_path({{-1.0, 1.0}, {1.0, 1.0}}, 10, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_path({{1.0, 0.0}, {1.0, 1.0}}, 10, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_path({{1.0, 1.0}, {1.0, -2.0}}, 10, 0.1, 1), std::invalid_argument);
}

TEST_CASE("OuParams and NoiseModel helpers") {
  const OuParams p{0.1, 0.2};
  CHECK(p.variance() == doctest::Approx(0.01));
  const NoiseModel m{{0.1, 0.2}, {0.3, 0.5}};
  CHECK(&m.axis(0) == &m.transverse);
  CHECK(&m.axis(1) == &m.transverse);
  CHECK(&m.axis(2) == &m.longitudinal);
  CHECK_THROWS_AS(m.axis(3), std::invalid_argument);
  CHECK(m.max_gamma() == 0.5);
  const NoiseModel h = m.scaled(0.5);
  CHECK(h.transverse.sigma == 0.05);
  CHECK(h.longitudinal.sigma == 0.15);
  CHECK(h.transverse.gamma == 0.2);
  CHECK_FALSE(m.silent());
  CHECK(m.scaled(0.0).silent());
}

TEST_CASE("autocovariance closed form") {
  CHECK(autocovariance({0.1, 0.2}, 0.0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(autocovariance({1.0, 1.0}, 1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK(autocovariance({1.0, 1e6}, 0.01) < 1e-300);
  CHECK(autocovariance({1.0, 1e3}, 1.0) == 0.0);
  CHECK_THROWS_AS(autocovariance({1.0, 1.0}, -1e-9), std::invalid_argument);
}

TEST_CASE("estimate_autocovariance") {
  SUBCASE("zero path") {
    const NoisePath z = zero_path(100, 0.1);
    for (std::size_t lag : {0u, 1u, 50u, 100u}) CHECK(estimate_autocovariance(z, 2, lag) == 0.0);
  }
  SUBCASE("lag out of range") {
    const NoisePath z = zero_path(100, 0.1);
    CHECK_THROWS_AS(estimate_autocovariance(z, 0, z.size()), std::invalid_argument);
    CHECK_THROWS_AS(estimate_autocovariance(z, 3, 0), std::invalid_argument);
  }
  SUBCASE("sigma=1 gamma=0.5 at lag 2/gamma") {
    const double dt = 0.1, gamma = 0.5;
    const NoisePath p = sample_path({{1.0, gamma}, {1.0, gamma}}, 1'000'000, dt, 31);
    const std::size_t lag = 40;  // 2/gamma
    const double c = estimate_autocovariance(p, 0, lag);
    const double se = se_autocov_ar1(1.0, std::exp(-gamma * dt), lag, p.size());
    INFO("c " << c << " se " << se);
    CHECK(std::abs(c - std::exp(-2.0)) <= 3.0 * se);
  }
}

TEST_CASE("autocovariance at lags 0, 1/gamma, 2/gamma on long paths") {
  const double dt = 0.05;
  for (const OuParams p : {OuParams{0.3, 0.2}, OuParams{2.0, 1.0}, OuParams{0.05, 4.0}}) {
    const NoisePath path = sample_path({p, p}, 400'000, dt, 11);
    const double rho = std::exp(-p.gamma * dt);
    for (double mult : {0.0, 1.0, 2.0}) {
      const auto lag = static_cast<std::size_t>(std::lround(mult / (p.gamma * dt)));
      for (int c : {0, 2}) {
        const double est = estimate_autocovariance(path, c, lag);
        const double se = se_autocov_ar1(p.variance(), rho, lag, path.size());
        INFO("sigma " << p.sigma << " gamma " << p.gamma << " lag " << lag << " comp " << c);
        CHECK(std::abs(est - autocovariance(p, lag * dt)) <= 3.0 * se);
      }
    }
  }
}

TEST_CASE("stationarity: halves agree and the mean is zero") {
  const double dt = 0.1;
  for (const OuParams p : {OuParams{1.0, 1.0}, OuParams{0.2, 0.05}}) {
    const NoisePath path = sample_path({p, p}, 600'000, dt, 3);
    const double rho = std::exp(-p.gamma * dt);
    const std::size_t half = path.size() / 2;
    const auto a = component(path, 2, 0, half);
    const auto b = component(path, 2, half);
    const double se = std::hypot(se_variance_ar1(p.variance(), rho, a.size()),
                                 se_variance_ar1(p.variance(), rho, b.size()));
    CHECK(std::abs(stats::variance(a) - stats::variance(b)) <= 3.0 * se);

    const auto all = component(path, 1);
    const double se_mean =
        p.sigma * std::sqrt((1.0 + rho) / (1.0 - rho) / static_cast<double>(all.size()));
    CHECK(std::abs(stats::mean(all)) <= 3.0 * se_mean);
  }
}

TEST_CASE("exact update keeps the N(0, sigma^2) marginal at any dt") {
  const std::size_t n_paths = 20'000;
  for (double dt : {0.01, 3.0}) {
    std::vector<double> last;
    last.reserve(n_paths);
    for (std::size_t k = 0; k < n_paths; ++k) {
      const NoisePath p = sample_path({{0.0, 1.0}, {2.0, 1.0}}, 5, dt, mix_seed(9, k));
      last.push_back(p.samples.back()[2]);
    }
    const double n = static_cast<double>(n_paths);
    const double v = stats::variance(last);
    std::vector<double> fourth;
    for (double x : last) fourth.push_back(x * x * x * x);
    const double m4 = stats::mean(fourth);
    INFO("dt " << dt << " variance " << v << " m4 " << m4);
    CHECK(std::abs(stats::mean(last)) <= 3.0 * 2.0 / std::sqrt(n));
    CHECK(std::abs(v - 4.0) <= 3.0 * 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(m4 - 3.0 * 16.0) <= 3.0 * 16.0 * std::sqrt(96.0 / n));
  }
}

TEST_CASE("mix_seed spreads nearby inputs") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(42, 7) == mix_seed(42, 7));
}
