#include "berrynoise/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace berrynoise {

std::string to_string(Mode mode) {
  return mode == Mode::first_order ? "first_order" : "full_sim";
}

Mode parse_mode(const std::string& text) {
  if (text == "first_order") return Mode::first_order;
  if (text == "full_sim") return Mode::full_sim;
  throw std::invalid_argument("unknown mode '" + text + "' (expected first_order or full_sim)");
}

std::vector<TrialRecord> run_ensemble(const PrecessionSpec& spec, const NoiseModel& model,
                                      std::size_t n_trials, std::uint64_t master_seed, Mode mode,
                                      const IntegratorConfig& config, unsigned threads) {
  if (n_trials < 1) throw std::invalid_argument("ensemble needs at least one trial");
  spec.validate();
  model.validate();
  config.validate();

  const std::size_t n_steps = grid_steps(spec, model, config);
  const double dt = spec.t_total / static_cast<double>(n_steps);
  const NoisePath grid = zero_path(n_steps, dt);
  const std::vector<Vec3> w_gamma = sample_weight(gamma_weight(spec), grid.times);
  const std::vector<Vec3> w_delta = sample_weight(delta_weight(spec), grid.times);

  std::vector<TrialRecord> records(n_trials);
  auto run_trial = [&](std::size_t k) {
    const NoisePath path = sample_path(model, n_steps, dt, mix_seed(master_seed, k));
    TrialRecord& r = records[k];
    r.trial_index = k;
    r.gamma_fo = integrate_weight(w_gamma, path);
    r.delta_fo = integrate_weight(w_delta, path);
    r.alpha_fo = r.gamma_fo + r.delta_fo;
    if (mode == Mode::full_sim) {
      const PhaseExtraction ex = evolve_and_extract(spec, path, config);
      r.gamma_sim = ex.berry_phase;
      r.leakage = ex.leakage;
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_trials));
  if (threads <= 1) {
    for (std::size_t k = 0; k < n_trials; ++k) run_trial(k);
    return records;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n_trials; k += threads) run_trial(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return records;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

double mean_of(std::span<const double> v) {
  return pairwise_sum(v) / static_cast<double>(v.size());
}

std::vector<double> powers_about(std::span<const double> v, double centre, int power) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::pow(v[i] - centre, power);
  return out;
}

}  // namespace

MomentSummary summarize_values(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("moment summary needs at least two values");
  const double nd = static_cast<double>(n);

  MomentSummary m;
  m.mean = mean_of(values);
  const double m2 = mean_of(powers_about(values, m.mean, 2));
  const double m3 = mean_of(powers_about(values, m.mean, 3));
  const double m4 = mean_of(powers_about(values, m.mean, 4));

  m.variance = m2 * nd / (nd - 1.0);
  m.sem = std::sqrt(m.variance / nd);
  m.sem_variance = std::sqrt(std::max(0.0, (m4 - (nd - 3.0) / (nd - 1.0) * m.variance * m.variance) / nd));
  if (m2 > 0.0) {
    m.skewness = m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  if (n > 3) {
    m.se_skewness = std::sqrt(6.0 * nd * (nd - 1.0) / ((nd - 2.0) * (nd + 1.0) * (nd + 3.0)));
    m.se_kurtosis = 2.0 * m.se_skewness * std::sqrt((nd * nd - 1.0) / ((nd - 3.0) * (nd + 5.0)));
  }
  return m;
}

EnsembleStats summarize(std::span<const TrialRecord> records) {
  const std::size_t n = records.size();
  if (n < 2) throw std::invalid_argument("ensemble summary needs at least two records");

  std::vector<double> g(n), d(n), a(n), sim;
  bool have_sim = true;
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = records[i].gamma_fo;
    d[i] = records[i].delta_fo;
    a[i] = records[i].alpha_fo;
    have_sim = have_sim && records[i].gamma_sim.has_value();
  }

  EnsembleStats s;
  s.n = n;
  s.gamma = summarize_values(g);
  s.delta = summarize_values(d);
  s.alpha = summarize_values(a);
  if (have_sim) {
    sim.reserve(n);
    for (const auto& r : records) sim.push_back(*r.gamma_sim);
    s.gamma_sim = summarize_values(sim);
  }

  std::vector<double> prod(n);
  for (std::size_t i = 0; i < n; ++i) prod[i] = (g[i] - s.gamma.mean) * (d[i] - s.delta.mean);
  const double nd = static_cast<double>(n);
  const double cov_biased = mean_of(prod);
  s.cov_gamma_delta = cov_biased * nd / (nd - 1.0);
  for (auto& p : prod) p = p * p;
  s.sem_cov = std::sqrt(std::max(0.0, (mean_of(prod) - cov_biased * cov_biased) / nd));
  return s;
}

CoherenceEstimate coherence(std::span<const TrialRecord> records, double analytic_var_alpha,
                            double mean_alpha) {
  const std::size_t n = records.size();
  if (n < 100) throw std::invalid_argument("coherence estimate needs at least 100 records");
  const double nd = static_cast<double>(n);

  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * (records[i].alpha_fo - mean_alpha);
    re[i] = std::cos(phase);
    im[i] = std::sin(phase);
  }
  const double sum_re = pairwise_sum(re), sum_im = pairwise_sum(im);

  CoherenceEstimate c;
  c.measured = std::hypot(sum_re, sum_im) / nd;
  c.predicted = dephasing_factor(analytic_var_alpha);

  // Jackknife over leave-one-out means.
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i)
    loo[i] = std::hypot(sum_re - re[i], sum_im - im[i]) / (nd - 1.0);
  const double loo_mean = mean_of(loo);
  for (auto& v : loo) v = (v - loo_mean) * (v - loo_mean);
  c.std_error = std::sqrt((nd - 1.0) / nd * pairwise_sum(loo));
  c.z_score = z_score(c.measured, c.predicted, c.std_error);
  return c;
}

double z_score(double empirical, double reference, double std_error) {
  const double diff = empirical - reference;
  if (std_error > 0.0) return diff / std_error;
  const double scale = std::max({1.0, std::abs(empirical), std::abs(reference)});
  if (std::abs(diff) <= 1e-12 * scale) return 0.0;
  return diff > 0.0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
}

Comparison compare_to_analytic(const EnsembleStats& stats, const PhaseMoments& analytic,
                               double z_limit) {
  Comparison c;
  auto add = [&](std::string name, double empirical, double reference, double se) {
    ZScore z{std::move(name), empirical, reference, se, z_score(empirical, reference, se), true};
    z.pass = std::abs(z.z) <= z_limit;
    c.pass = c.pass && z.pass;
    c.entries.push_back(std::move(z));
  };
  add("mean_gamma", analytic.mean_gamma + stats.gamma.mean, analytic.mean_gamma, stats.gamma.sem);
  add("mean_delta", analytic.mean_delta + stats.delta.mean, analytic.mean_delta, stats.delta.sem);
  add("mean_alpha", analytic.mean_alpha + stats.alpha.mean, analytic.mean_alpha, stats.alpha.sem);
  add("var_gamma", stats.gamma.variance, analytic.var_gamma, stats.gamma.sem_variance);
  add("var_delta", stats.delta.variance, analytic.var_delta, stats.delta.sem_variance);
  add("var_alpha", stats.alpha.variance, analytic.var_alpha, stats.alpha.sem_variance);
  add("cov_gamma_delta", stats.cov_gamma_delta, analytic.cov_gamma_delta, stats.sem_cov);
  return c;
}

FirstOrderRegimeCheck first_order_regime_check(const PrecessionSpec& spec, const NoiseModel& model,
                                               const IntegratorConfig& config,
                                               const FirstOrderRegimeOptions& options) {
  if (options.n_paths < 2) throw std::invalid_argument("regime check needs at least two paths");
  const std::size_t n_steps = grid_steps(spec, model, config);
  const double dt = spec.t_total / static_cast<double>(n_steps);

  FirstOrderRegimeCheck out;
  out.gamma_ref = evolve_and_extract(spec, zero_path(n_steps, dt), config).berry_phase;

  const std::vector<Vec3> w_gamma =
      sample_weight(gamma_weight(spec), zero_path(n_steps, dt).times);
  auto level = [&](double scale) {
    const NoiseModel scaled = model.scaled(scale);
    std::vector<double> resid, fo;
    ResidualLevel lv;
    lv.sigma_scale = scale;
    for (std::size_t k = 0; k < options.n_paths; ++k) {
      const NoisePath path = sample_path(scaled, n_steps, dt, mix_seed(options.seed, k));
      const PhaseExtraction ex = evolve_and_extract(spec, path, config);
      const double first = integrate_weight(w_gamma, path);
      resid.push_back(ex.berry_phase - out.gamma_ref - first);
      fo.push_back(first);
      lv.max_leakage = std::max(lv.max_leakage, ex.leakage);
    }
    auto rms = [](std::vector<double> v) {
      for (auto& x : v) x = x * x;
      return std::sqrt(pairwise_sum(v) / static_cast<double>(v.size()));
    };
    lv.mean_residual = mean_of(resid);
    lv.rms_residual = rms(resid);
    lv.rms_first_order = rms(fo);
    lv.residuals = std::move(resid);
    return lv;
  };

  out.full = level(1.0);
  out.half = level(0.5);
  if (model.silent()) {
    out.pass = true;
    return out;
  }
  out.shrink_ratio = out.half.rms_residual > 0.0
                         ? out.full.rms_residual / out.half.rms_residual
                         : std::numeric_limits<double>::infinity();
  out.relative_residual = out.full.rms_first_order > 0.0
                              ? out.full.rms_residual / out.full.rms_first_order
                              : 0.0;
  out.pass = out.shrink_ratio >= options.min_shrink_ratio &&
             out.relative_residual <= options.max_relative_residual;
  return out;
}

}  // namespace berrynoise
