// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "berrynoise/analytics.hpp"
#include "berrynoise/cli.hpp"
#include "berrynoise/evolve.hpp"
#include "berrynoise/montecarlo.hpp"

using namespace berrynoise;
using std::numbers::pi;

namespace {

const PrecessionSpec kRefSpec{1.0, pi / 4, 100.0, 1};
const NoiseModel kRefModel{{0.05, 0.1}, {0.05, 0.1}};
constexpr unsigned kThreads = 4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body,
            double time_limit = 0.0) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream line;
  line.precision(4);
  line << o.detail << "; " << secs << " s";
  if (time_limit > 0.0) {
    line << " (limit " << time_limit << " s)";
    if (secs >= time_limit) o.pass = false;
  }
  if (!o.pass) ++g_failures;
  std::printf("%s  %2d  %-34s %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(),
              line.str().c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// The 27-point grid: theta0, gamma3 T and gamma12 / omega.
struct GridPoint {
  double theta0, gamma3_t, gamma12_over_omega;
};

std::vector<GridPoint> grid27() {
  std::vector<GridPoint> g;
  for (double th : {pi / 6, pi / 4, pi / 2})
    for (double gt : {0.01, 1.0, 100.0})
      for (double gw : {0.01, 1.0, 100.0}) g.push_back({th, gt, gw});
  return g;
}

NoiseModel grid_model(const PrecessionSpec& spec, const GridPoint& p, double sigma) {
  return {{sigma, p.gamma12_over_omega * spec.omega()}, {sigma, p.gamma3_t / spec.t_total}};
}

const std::vector<TrialRecord>& reference_records() {
  static const auto r =
      run_ensemble(kRefSpec, kRefModel, 10'000, 42, Mode::first_order, IntegratorConfig{}, kThreads);
  return r;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Outcome noiseless_phase() {
  double worst_sim = 0.0, worst_conn = 0.0;
  for (double th : {pi / 6, pi / 4, pi / 3, pi / 2}) {
    const PrecessionSpec spec{1.0, th, 2.0 * pi * 200.0, 1};
    IntegratorConfig c;
    c.steps_per_cycle = 4096;
    const std::size_t n = grid_steps(spec, NoiseModel{}, c);
    const NoisePath flat = zero_path(n, spec.t_total / static_cast<double>(n));
    const double target = noiseless_berry_phase(th);
    worst_sim = std::max(worst_sim, std::abs(evolve_and_extract(spec, flat, c).berry_phase - target));
    worst_conn = std::max(worst_conn, std::abs(connection_phase_discrete(spec, flat, 4096) - target));
  }
  return {worst_sim <= 0.02 && worst_conn <= 1e-4,
          "max |sim - pi cos| " + fmt(worst_sim) + " (<= 0.02), max |connection - pi cos| " +
              fmt(worst_conn) + " (<= 1e-4)"};
}

Outcome oracle_equality() {
  double worst_g = 0.0, worst_a = 0.0;
  for (const auto& p : grid27()) {
    const PrecessionSpec spec{1.0, p.theta0, 100.0, 1};
    const NoiseModel m = grid_model(spec, p, 0.05);
    const auto wg = gamma_weight(spec), wd = delta_weight(spec);
    worst_g = std::max(worst_g, rel(var_gamma_closed(spec, m).total,
                                    variance_by_quadrature(wg, m, 100.0, 64).value));
    worst_a = std::max(worst_a, rel(var_alpha_closed(spec, m).total,
                                    variance_by_quadrature(wg + wd, m, 100.0, 64).value));
  }
  return {worst_g <= 1e-6 && worst_a <= 1e-6,
          "27 points, max rel diff gamma " + fmt(worst_g) + ", alpha " + fmt(worst_a) +
              " (<= 1e-6)"};
}

Outcome limits() {
  const PrecessionSpec spec = kRefSpec;
  const double omega = spec.omega();
  // gamma3 from gamma3 T, gamma12 from gamma12 / omega
  const NoiseModel broad{{0.05, 1e3 * omega}, {0.05, 1e3 / spec.t_total}};
  const NoiseModel narrow{{0.05, 1e-2 * omega}, {0.05, 1e-2 / spec.t_total}};
  double worst = 0.0;
  std::string detail;
  for (double th : {pi / 6, pi / 4, pi / 3, pi / 2}) {
    const PrecessionSpec s{1.0, th, spec.t_total, 1};
    const double rb = rel(var_gamma_limit_broadband(s, broad), var_gamma_closed(s, broad).total);
    const double rn = rel(var_gamma_limit_narrowband(s, narrow), var_gamma_closed(s, narrow).total);
    worst = std::max({worst, rb, rn});
    if (th == pi / 4) detail = "theta0 pi/4: broadband " + fmt(rb) + ", narrowband " + fmt(rn);
  }
  return {worst <= 0.05, detail + "; worst over theta0 " + fmt(worst) + " (<= 0.05)"};
}

Outcome monte_carlo() {
  const auto s = summarize(reference_records());
  const PhaseMoments m = phase_moments(kRefSpec, kRefModel);
  const double cov_q = covariance_by_quadrature(gamma_weight(kRefSpec), delta_weight(kRefSpec),
                                                kRefModel, 100.0, 64)
                           .value;
  const double zg = (s.gamma.variance - m.var_gamma) / s.gamma.sem_variance;
  const double zd = (s.delta.variance - m.var_delta) / s.delta.sem_variance;
  const double za = (s.alpha.variance - m.var_alpha) / s.alpha.sem_variance;
  const double zc = (s.cov_gamma_delta - cov_q) / s.sem_cov;
  const double z0 = s.cov_gamma_delta / s.sem_cov;
  const bool pass = std::abs(zg) <= 3 && std::abs(zd) <= 3 && std::abs(za) <= 3 &&
                    std::abs(zc) <= 3 && std::abs(z0) > 3;
  return {pass, "n 1e4, z var gamma " + fmt(zg) + ", delta " + fmt(zd) + ", alpha " + fmt(za) +
                    ", cov " + fmt(zc) + "; cov/SE " + fmt(z0) + " (> 3)"};
}

Outcome scaling() {
  const NoiseModel m{{0.05, 1.0}, {0.05, 1.0}};
  std::vector<double> ts, vg, vd;
  for (int k = 0; k <= 8; ++k) {
    const double T = 100.0 * std::pow(10.0, k / 8.0);  // gamma T from 100 to 1000
    const PrecessionSpec s{1.0, pi / 4, T, 1};
    ts.push_back(T);
    vg.push_back(var_gamma_closed(s, m).total);
    vd.push_back(variance_by_quadrature(delta_weight(s), m, T, 64).value);
  }
  const double sg = cli::loglog_slope(ts, vg), sd = cli::loglog_slope(ts, vd);
  return {std::abs(sg + 1.0) <= 0.02 && std::abs(sd - 1.0) <= 0.02,
          "slope var gamma " + fmt(sg) + ", var delta " + fmt(sd) + " (+-0.02)"};
}

Outcome dephasing() {
  const PhaseMoments m = phase_moments(kRefSpec, kRefModel);
  const auto c = coherence(reference_records(), m.var_alpha);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::complex<double> a(g(rng), g(rng)), b(g(rng), g(rng));
    const double n = std::sqrt(std::norm(a) + std::norm(b));
    const auto rho = density_matrix_after(a / n, b / n, 10.0 * g(rng), u(rng));
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> eig(rho);
    worst = std::max({worst, (rho - rho.adjoint()).cwiseAbs().maxCoeff(),
                      std::abs(rho.trace() - std::complex<double>(1.0, 0.0)),
                      std::max(0.0, -eig.eigenvalues().minCoeff())});
  }
  return {std::abs(c.z_score) <= 3.0 && worst <= 1e-12,
          "coherence " + fmt(c.measured) + " vs " + fmt(c.predicted) + ", z " + fmt(c.z_score) +
              "; density matrix worst defect " + fmt(worst) + " on 100 inputs"};
}

Outcome gaussianity() {
  // Skewness and kurtosis of a linear functional do not depend on the noise
  // amplitude, so one sigma covers both grid amplitudes: verify that once on
  // identical seeds, then scan the 27 points.
  IntegratorConfig c;
  c.steps_per_cycle = 512;
  c.noise_gamma_dt = 0.5;
  const GridPoint probe{pi / 4, 1.0, 1.0};
  double invariance = 0.0;
  {
    const PrecessionSpec spec{1.0, probe.theta0, 100.0, 1};
    const auto a = summarize(run_ensemble(spec, grid_model(spec, probe, 0.02), 2000, 3,
                                          Mode::first_order, c, kThreads));
    const auto b = summarize(run_ensemble(spec, grid_model(spec, probe, 0.05), 2000, 3,
                                          Mode::first_order, c, kThreads));
    invariance = std::max(std::abs(a.gamma.skewness - b.gamma.skewness),
                          std::abs(a.gamma.excess_kurtosis - b.gamma.excess_kurtosis));
  }
  double worst = 0.0;
  std::uint64_t seed = 100;
  for (const auto& p : grid27()) {
    const PrecessionSpec spec{1.0, p.theta0, 100.0, 1};
    const auto s = summarize(run_ensemble(spec, grid_model(spec, p, 0.05), 10'000, seed++,
                                          Mode::first_order, c, kThreads));
    worst = std::max({worst, std::abs(s.gamma.skewness) / s.gamma.se_skewness,
                      std::abs(s.gamma.excess_kurtosis) / s.gamma.se_kurtosis});
  }
  return {worst <= 4.0 && invariance <= 1e-9,
          "27 points, n 1e4, worst |moment|/SE " + fmt(worst) + " (<= 4); sigma 0.02 vs 0.05 moment gap " +
              fmt(invariance)};
}

Outcome first_order_regime() {
  const PrecessionSpec spec{1.0, pi / 4, 2.0 * pi * 100.0, 1};
  const NoiseModel model{{0.04, 1e-3}, {0.04, 1e-3}};
  IntegratorConfig c;
  c.steps_per_cycle = 4096;
  const auto r = first_order_regime_check(spec, model, c, {64, 7, 3.5, 1.0});
  return {r.shrink_ratio >= 3.5,
          "sigma/b0 0.04 -> 0.02, rms residual " + fmt(r.full.rms_residual) + " -> " +
              fmt(r.half.rms_residual) + ", ratio " + fmt(r.shrink_ratio) + " (>= 3.5)"};
}

Outcome dominance() {
  int points = 0, failures = 0;
  double tightest = 1e300;
  for (double ratio : {20.0, 200.0, 2000.0}) {
    for (const auto& p : grid27()) {
      const PrecessionSpec spec{1.0, p.theta0, 2.0 * pi * ratio, 1};
      if (spec.omega() / spec.b0 > 0.05) continue;
      const auto split = dephasing_split(spec, grid_model(spec, p, 0.05));
      ++points;
      if (!(split.dynamical > split.geometric)) ++failures;
      tightest = std::min(tightest, split.dynamical / split.geometric);
    }
  }
  return {points == 81 && failures == 0,
          std::to_string(points) + " points with omega/b0 <= 0.05, min dynamical/geometric " +
              fmt(tightest)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "berrynoise_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run = [&](const std::string& name, unsigned threads) {
    cli::RunConfig c;
    c.output_path = (dir / name).string();
    cli::CommandOptions o;
    o.quiet = true;
    o.threads = threads;
    std::ostringstream out, err;
    const int code = cli::run_guarded(cli::cmd_mc, c, o, out, err);
    std::ifstream in(dir / (name + "_records.csv"), std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return std::make_pair(code, s.str());
  };
  const auto a = run("serial_a", 1), b = run("serial_b", 1), p = run("parallel", kThreads);
  const bool same = !a.second.empty() && a.second == b.second && a.second == p.second;
  fs::remove_all(dir);
  return {same && a.first == 0, std::string(same ? "identical" : "DIFFERENT") +
                                    " records CSV (serial x2, " + std::to_string(kThreads) +
                                    " threads), " + std::to_string(a.second.size()) + " bytes"};
}

}  // namespace

int main() {
  report(1, "noiseless Berry phase", noiseless_phase, 5.0);
  report(2, "closed form equals quadrature", oracle_equality, 10.0);
  report(3, "limit formulas", limits);
  report(4, "Monte Carlo variances", monte_carlo, 60.0);
  report(5, "T-scaling slopes", scaling);
  report(6, "dephasing and density matrix", dephasing);
  report(7, "Gaussianity over the grid", gaussianity);
  report(8, "first-order regime", first_order_regime);
  report(9, "dynamical dephasing dominates", dominance);
  report(10, "determinism of mc output", determinism);
  std::printf("%s: %d of 10 criteria failed\n", g_failures ? "FAIL" : "PASS", g_failures);
  return g_failures ? 1 : 0;
}
