#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "berrynoise/analytics.hpp"
#include "berrynoise/cli.hpp"

namespace berrynoise::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr double kPi = std::numbers::pi;
constexpr double kOracleTolerance = 1e-6;
constexpr double kLimitTolerance = 0.05;
constexpr double kZLimit = 3.0;
constexpr double kGaussianLimit = 4.0;
constexpr double kSlopeTolerance = 0.02;
constexpr double kBerryTolerance = 0.02;
constexpr double kConnectionTolerance = 1e-4;

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path);
  f << content;
  if (!f) throw ConfigError("write failed for " + path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Builds CSV text with 17 significant digits; empty cells for absent values.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
    text_ += '\n';
  }
  CsvWriter& cell(double v) { return raw(format_double(v)); }
  CsvWriter& cell(std::optional<double> v) { return raw(v ? format_double(*v) : std::string()); }
  CsvWriter& cell(std::size_t v) { return raw(std::to_string(v)); }
  CsvWriter& cell(const std::string& s) { return raw(s); }
  void end_row() {
    text_ += '\n';
    first_ = true;
  }
  const std::string& text() const { return text_; }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!first_) text_ += ',';
    text_ += s;
    first_ = false;
    return *this;
  }
  std::string text_;
  bool first_ = true;
};

double relative_difference(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

json config_json(const RunConfig& c) {
  return {{"b0", c.b0},
          {"theta0", c.theta0},
          {"t_total", c.t_total},
          {"n_cycles", c.n_cycles},
          {"sigma12", c.sigma12},
          {"gamma12", c.gamma12},
          {"sigma3", c.sigma3},
          {"gamma3", c.gamma3},
          {"n_trials", c.n_trials},
          {"steps_per_cycle", c.steps_per_cycle},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"output_path", c.output_path},
          {"output_format", to_string(c.output_format)}};
}

json adiabaticity_json(const AdiabaticityReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"name", e.name}, {"ratio", e.ratio}, {"threshold", e.threshold}, {"pass", e.pass}});
  return {{"entries", entries}, {"all_pass", r.all_pass()}};
}

json breakdown_json(const VarianceBreakdown& b) {
  return {{"transverse", b.transverse}, {"longitudinal", b.longitudinal}, {"total", b.total}};
}

json moments_json(const PhaseMoments& m) {
  return {{"mean_gamma", m.mean_gamma}, {"var_gamma", m.var_gamma},
          {"mean_delta", m.mean_delta}, {"var_delta", m.var_delta},
          {"mean_alpha", m.mean_alpha}, {"var_alpha", m.var_alpha},
          {"cov_gamma_delta", m.cov_gamma_delta}};
}

json summary_json(const MomentSummary& m, double offset) {
  return {{"mean", offset + m.mean},
          {"mean_deviation", m.mean},
          {"variance", m.variance},
          {"sem", m.sem},
          {"sem_variance", m.sem_variance},
          {"skewness", m.skewness},
          {"se_skewness", m.se_skewness},
          {"excess_kurtosis", m.excess_kurtosis},
          {"se_kurtosis", m.se_kurtosis}};
}

void report_adiabaticity(const AdiabaticityReport& r, std::ostream& out) {
  for (const auto& e : r.entries)
    if (!e.pass)
      out << "note: " << e.name << " = " << e.ratio << " exceeds " << e.threshold
          << " (outside the adiabatic regime)\n";
}

QuadratureResult oracle(const WeightFunction& w1, const WeightFunction& w2, const NoiseModel& model,
                        const PrecessionSpec& spec, double closed_scale) {
  QuadratureOptions opts;
  opts.abs_tol = 1e-14 * closed_scale;
  const std::size_t start = std::max<std::size_t>(64, 64 * static_cast<std::size_t>(spec.n_cycles));
  return covariance_by_quadrature(w1, w2, model, spec.t_total, start, opts);
}

struct OracleRow {
  std::string name;
  double mean = 0.0;
  VarianceBreakdown closed;
  QuadratureResult quad;
  std::optional<double> narrowband;
  std::optional<double> broadband;
};

std::vector<OracleRow> analytic_rows(const PrecessionSpec& spec, const NoiseModel& model) {
  const PhaseMoments m = phase_moments(spec, model);
  const WeightFunction wg = gamma_weight(spec);
  const WeightFunction wd = delta_weight(spec);
  const WeightFunction wa = wg + wd;

  std::vector<OracleRow> rows(4);
  rows[0] = {"gamma", m.mean_gamma, var_gamma_closed(spec, model), {},
             var_gamma_limit_narrowband(spec, model), var_gamma_limit_broadband(spec, model)};
  rows[1] = {"delta", m.mean_delta, var_delta_closed(spec, model), {}, {}, {}};
  rows[2] = {"alpha", m.mean_alpha, var_alpha_closed(spec, model), {}, {}, {}};
  rows[3] = {"cov_gamma_delta", 0.0, cov_gamma_delta_closed(spec, model), {}, {}, {}};
  const double cov_scale = std::sqrt(rows[0].closed.total * rows[1].closed.total);
  rows[0].quad = oracle(wg, wg, model, spec, rows[0].closed.total);
  rows[1].quad = oracle(wd, wd, model, spec, rows[1].closed.total);
  rows[2].quad = oracle(wa, wa, model, spec, rows[2].closed.total);
  rows[3].quad = oracle(wg, wd, model, spec, cov_scale);
  return rows;
}

double oracle_difference(const OracleRow& row, double scale) {
  // The covariance can vanish while the variances do not; measure it
  // against sqrt(var_gamma var_delta) in that case.
  const double ref = std::max({std::abs(row.closed.total), std::abs(row.quad.value), scale});
  return ref > 0.0 ? std::abs(row.closed.total - row.quad.value) / ref : 0.0;
}

// Ensemble run shared by mc and compare.
struct McOutcome {
  std::vector<TrialRecord> records;
  EnsembleStats stats;
  PhaseMoments analytic;
  Comparison comparison;
  std::optional<CoherenceEstimate> coherence;
  bool pass = true;
};

McOutcome run_mc(const RunConfig& config, const CommandOptions& options) {
  const PrecessionSpec spec = config.spec();
  const NoiseModel model = config.model();
  McOutcome o;
  o.records = run_ensemble(spec, model, config.n_trials, config.seed, config.mode,
                           config.integrator(), options.threads);
  o.stats = summarize(o.records);
  o.analytic = phase_moments(spec, model);
  o.analytic.var_gamma *= options.tamper_variance;
  o.analytic.var_delta *= options.tamper_variance;
  o.analytic.var_alpha *= options.tamper_variance;
  o.comparison = compare_to_analytic(o.stats, o.analytic, kZLimit);
  o.pass = o.comparison.pass;
  if (o.records.size() >= 100) {
    o.coherence = coherence(o.records, o.analytic.var_alpha);
    o.pass = o.pass && std::abs(o.coherence->z_score) <= kZLimit;
  }
  return o;
}

json mc_summary_json(const RunConfig& config, const McOutcome& o) {
  json empirical = {{"n", o.stats.n},
                    {"gamma", summary_json(o.stats.gamma, o.analytic.mean_gamma)},
                    {"delta", summary_json(o.stats.delta, o.analytic.mean_delta)},
                    {"alpha", summary_json(o.stats.alpha, o.analytic.mean_alpha)},
                    {"cov_gamma_delta", o.stats.cov_gamma_delta},
                    {"sem_cov", o.stats.sem_cov}};
  if (o.stats.gamma_sim) {
    empirical["gamma_sim"] = summary_json(*o.stats.gamma_sim, 0.0);
    double worst = 0.0;
    for (const auto& r : o.records) worst = std::max(worst, r.leakage.value_or(0.0));
    empirical["max_leakage"] = worst;
  }
  json z = json::array();
  for (const auto& e : o.comparison.entries)
    z.push_back({{"name", e.name}, {"empirical", e.empirical}, {"analytic", e.analytic},
                 {"std_error", e.std_error}, {"z", e.z}, {"pass", e.pass}});
  json coh = nullptr;
  if (o.coherence)
    coh = {{"measured", o.coherence->measured},
           {"predicted", o.coherence->predicted},
           {"std_error", o.coherence->std_error},
           {"z_score", o.coherence->z_score},
           {"pass", std::abs(o.coherence->z_score) <= kZLimit}};
  return {{"config", config_json(config)},
          {"analytic", moments_json(o.analytic)},
          {"empirical", empirical},
          {"z_scores", z},
          {"coherence", coh},
          {"adiabaticity", adiabaticity_json(adiabaticity_report(config.spec(), config.model()))},
          {"pass", o.pass}};
}

std::string records_csv(const std::vector<TrialRecord>& records) {
  CsvWriter csv({"trial_index", "gamma_fo", "delta_fo", "alpha_fo", "gamma_sim", "leakage"});
  for (const auto& r : records) {
    csv.cell(r.trial_index).cell(r.gamma_fo).cell(r.delta_fo).cell(r.alpha_fo);
    csv.cell(r.gamma_sim).cell(r.leakage);
    csv.end_row();
  }
  return csv.text();
}

// Deep adiabatic probe carrying the configured sigma/B0 and theta0.
FirstOrderRegimeCheck first_order_probe(const RunConfig& config) {
  const double ratio = 100.0;  // B0 / omega
  const PrecessionSpec spec{config.b0, config.theta0, 2.0 * kPi * ratio / config.b0, 1};
  const double gamma = 1e-3 * config.b0;
  const NoiseModel model{{config.sigma12, gamma}, {config.sigma3, gamma}};
  IntegratorConfig ic;
  ic.steps_per_cycle = 4096;
  FirstOrderRegimeOptions opts;
  opts.n_paths = 64;
  opts.seed = config.seed;
  opts.min_shrink_ratio = 0.0;  // reported, not gated: see README
  opts.max_relative_residual = 0.25;
  return first_order_regime_check(spec, model, ic, opts);
}

struct Battery {
  std::vector<CheckResult> checks;
  json details;
};

Battery run_battery(const RunConfig& config, const CommandOptions& options, std::ostream* log) {
  Battery b;
  auto add = [&](std::string name, double value, double threshold, bool pass, std::string note = {}) {
    b.checks.push_back({std::move(name), value, threshold, pass, std::move(note)});
  };
  auto progress = [&](const std::string& what) {
    if (log) *log << "  " << what << "...\n" << std::flush;
  };
  const PrecessionSpec spec = config.spec();
  const NoiseModel model = config.model();

  progress("quadrature oracle");
  const auto rows = analytic_rows(spec, model);
  const double cov_scale = std::sqrt(rows[0].closed.total * rows[1].closed.total);
  for (const auto& row : rows) {
    const double d = oracle_difference(row, row.name == "cov_gamma_delta" ? cov_scale : 0.0);
    add("oracle_" + std::string(row.name == "cov_gamma_delta" ? "" : "var_") + row.name, d,
        kOracleTolerance, d <= kOracleTolerance);
  }

  progress("limit regimes");
  {
    const double omega = spec.omega();
    auto probe = [&](double gamma3_t, double gamma12_over_omega) {
      NoiseModel m = model;
      m.longitudinal.gamma = gamma3_t / spec.t_total;
      m.transverse.gamma = gamma12_over_omega * omega;
      return m;
    };
    const NoiseModel broad = probe(1e3, 1e3);
    const NoiseModel narrow = probe(1e-2, 1e-2);
    const double db = relative_difference(var_gamma_limit_broadband(spec, broad),
                                          var_gamma_closed(spec, broad).total);
    const double dn = relative_difference(var_gamma_limit_narrowband(spec, narrow),
                                          var_gamma_closed(spec, narrow).total);
    add("limit_broadband", db, kLimitTolerance, db <= kLimitTolerance, "gamma3 T = gamma12/omega = 1e3");
    add("limit_narrowband", dn, kLimitTolerance, dn <= kLimitTolerance, "gamma3 T = gamma12/omega = 1e-2");
  }

  progress("monte carlo, " + std::to_string(config.n_trials) + " trials");
  const McOutcome mc = run_mc(config, options);
  for (const auto& e : mc.comparison.entries)
    add("z_" + e.name, std::abs(e.z), kZLimit, e.pass);
  if (mc.coherence)
    add("coherence_z", std::abs(mc.coherence->z_score), kZLimit,
        std::abs(mc.coherence->z_score) <= kZLimit);
  else
    add("coherence_z", 0.0, kZLimit, true, "skipped: fewer than 100 trials");
  {
    const double cov = mc.analytic.cov_gamma_delta;
    const double se = mc.stats.sem_cov;
    if (se > 0.0 && std::abs(cov) > 6.0 * se) {
      const double sig = std::abs(mc.stats.cov_gamma_delta) / se;
      add("cov_nonzero", sig, kZLimit, sig > kZLimit);
    } else {
      add("cov_nonzero", se > 0.0 ? std::abs(mc.stats.cov_gamma_delta) / se : 0.0, kZLimit, true,
          "skipped: analytic covariance not resolvable at this n");
    }
  }
  auto gaussian = [&](const std::string& name, const MomentSummary& m) {
    const double zs = m.se_skewness > 0.0 ? std::abs(m.skewness) / m.se_skewness : 0.0;
    const double zk = m.se_kurtosis > 0.0 ? std::abs(m.excess_kurtosis) / m.se_kurtosis : 0.0;
    add("skewness_" + name, zs, kGaussianLimit, zs <= kGaussianLimit);
    add("kurtosis_" + name, zk, kGaussianLimit, zk <= kGaussianLimit);
  };
  gaussian("gamma", mc.stats.gamma);
  gaussian("delta", mc.stats.delta);
  gaussian("alpha", mc.stats.alpha);

  progress("scaling in T");
  {
    const double gmin = std::min(model.transverse.gamma, model.longitudinal.gamma);
    const double t0 = std::max(spec.t_total, 100.0 / gmin);
    std::vector<double> ts, vg, vd;
    for (int k = 0; k <= 4; ++k) {
      PrecessionSpec s = spec;
      s.t_total = t0 * std::pow(10.0, 0.25 * k);
      ts.push_back(s.t_total);
      vg.push_back(var_gamma_closed(s, model).total);
      vd.push_back(var_delta_closed(s, model).total);
    }
    auto slope_check = [&](const std::string& name, const std::vector<double>& v, double target) {
      if (*std::min_element(v.begin(), v.end()) <= 0.0) {
        add(name, 0.0, kSlopeTolerance, true, "skipped: variance vanishes");
        return;
      }
      const double s = loglog_slope(ts, v);
      add(name, s, kSlopeTolerance, std::abs(s - target) <= kSlopeTolerance,
          "target " + format_double(target));
    };
    slope_check("slope_var_gamma", vg, -1.0);
    slope_check("slope_var_delta", vd, 1.0);
  }

  {
    const double rate = spec.omega() / spec.b0;
    const DephasingSplit split = dephasing_split(spec, model);
    if (rate <= 0.05)
      add("dynamical_dominance", split.dynamical - split.geometric, 0.0,
          split.dynamical > split.geometric || (split.dynamical == 0.0 && split.geometric == 0.0));
    else
      add("dynamical_dominance", split.dynamical - split.geometric, 0.0, true,
          "skipped: omega/b0 > 0.05");
  }

  progress("noiseless evolution");
  {
    const PrecessionSpec s{spec.b0, spec.theta0, 2.0 * kPi * 200.0 / spec.b0, 1};
    IntegratorConfig ic;
    ic.steps_per_cycle = 4096;
    const std::size_t n = grid_steps(s, NoiseModel{}, ic);
    const NoisePath flat = zero_path(n, s.t_total / static_cast<double>(n));
    const double target = noiseless_berry_phase(s.theta0);
    const double dg = std::abs(evolve_and_extract(s, flat, ic).berry_phase - target);
    const double dc = std::abs(connection_phase_discrete(s, flat, 4096) - target);
    add("noiseless_berry_phase", dg, kBerryTolerance, dg <= kBerryTolerance, "b0/omega = 200");
    add("discrete_connection", dc, kConnectionTolerance, dc <= kConnectionTolerance, "4096 points");
  }

  progress("first-order regime probe");
  FirstOrderRegimeCheck fo;
  if (model.silent()) {
    fo.pass = true;
    add("first_order_regime", 0.0, 0.25, true, "silent noise");
  } else {
    fo = first_order_probe(config);
    add("first_order_regime", fo.relative_residual, 0.25, fo.pass,
        "b0/omega = 100, gamma = 1e-3 b0; shrink ratio " + format_double(fo.shrink_ratio));
  }

  {
    const Eigen::Matrix2cd rho = density_matrix_after(std::sqrt(0.5), std::sqrt(0.5),
                                                      mc.analytic.mean_alpha, mc.analytic.var_alpha);
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    const double trace = std::abs(rho.trace() - std::complex<double>(1.0, 0.0));
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> eig(0.5 * (rho + rho.adjoint()));
    const double neg = std::max(0.0, -eig.eigenvalues().minCoeff());
    const double worst = std::max({herm, trace, neg});
    add("density_matrix", worst, 1e-12, worst <= 1e-12);
  }

  b.details = mc_summary_json(config, mc);
  b.details["first_order_probe"] = {
      {"gamma_ref", fo.gamma_ref},
      {"rms_residual", fo.full.rms_residual},
      {"rms_residual_half_sigma", fo.half.rms_residual},
      {"rms_first_order", fo.full.rms_first_order},
      {"shrink_ratio", fo.shrink_ratio},
      {"relative_residual", fo.relative_residual},
      {"max_leakage", fo.full.max_leakage}};
  return b;
}

std::string checks_csv(const std::vector<CheckResult>& checks) {
  CsvWriter csv({"check", "value", "threshold", "pass", "note"});
  for (const auto& c : checks) {
    std::string note = c.note;
    std::replace(note.begin(), note.end(), ',', ';');
    csv.cell(c.name).cell(c.value).cell(c.threshold).cell(std::string(c.pass ? "1" : "0")).cell(note);
    csv.end_row();
  }
  return csv.text();
}

json checks_json(const std::vector<CheckResult>& checks) {
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold},
                   {"pass", c.pass}, {"note", c.note}});
  return arr;
}

void apply_sweep_value(RunConfig& c, const std::string& parameter, double value) {
  if (parameter == "t_total") c.t_total = value;
  else if (parameter == "gamma12") c.gamma12 = value;
  else if (parameter == "gamma3") c.gamma3 = value;
  else if (parameter == "theta0") c.theta0 = value;
  else throw ConfigError("cannot sweep '" + parameter + "' (expected t_total, gamma12, gamma3 or theta0)");
}

}  // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("slope fit needs two or more matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("log-log fit needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw std::invalid_argument("slope fit needs distinct abscissae");
  return (n * sxy - sx * sy) / den;
}

int cmd_analytic(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  const PrecessionSpec spec = config.spec();
  const NoiseModel model = config.model();
  const auto rows = analytic_rows(spec, model);
  const double cov_scale = std::sqrt(rows[0].closed.total * rows[1].closed.total);
  const auto adiab = adiabaticity_report(spec, model);
  const PhaseMoments m = phase_moments(spec, model);
  const DephasingSplit split = dephasing_split(spec, model);

  const std::string stem = output_stem(config, "analytic");
  std::string path;
  if (config.output_format == OutputFormat::csv) {
    CsvWriter csv({"quantity", "mean", "closed_form", "closed_transverse", "closed_longitudinal",
                   "quadrature", "quadrature_error", "relative_difference", "narrowband_limit",
                   "broadband_limit"});
    for (const auto& r : rows) {
      csv.cell(r.name).cell(r.mean).cell(r.closed.total).cell(r.closed.transverse);
      csv.cell(r.closed.longitudinal).cell(r.quad.value).cell(r.quad.error_estimate);
      csv.cell(oracle_difference(r, r.name == "cov_gamma_delta" ? cov_scale : 0.0));
      csv.cell(r.narrowband).cell(r.broadband);
      csv.end_row();
    }
    path = stem + ".csv";
    write_file(path, csv.text());
  } else {
    json analytic = moments_json(m);
    analytic["noiseless_berry_phase"] = noiseless_berry_phase(spec.theta0) * spec.n_cycles;
    for (const auto& r : rows) {
      json entry = {{"closed", breakdown_json(r.closed)},
                    {"quadrature", r.quad.value},
                    {"quadrature_error", r.quad.error_estimate},
                    {"quadrature_nodes", r.quad.nodes},
                    {"relative_difference",
                     oracle_difference(r, r.name == "cov_gamma_delta" ? cov_scale : 0.0)}};
      if (r.narrowband) entry["narrowband_limit"] = *r.narrowband;
      if (r.broadband) entry["broadband_limit"] = *r.broadband;
      analytic[r.name == "cov_gamma_delta" ? "cov_gamma_delta_detail" : "var_" + r.name + "_detail"] = entry;
    }
    analytic["dephasing_factor"] = dephasing_factor(m.var_alpha);
    analytic["dephasing_split"] = {
        {"geometric", split.geometric}, {"dynamical", split.dynamical}, {"cross", split.cross}};
    path = stem + ".json";
    write_file(path, dump({{"config", config_json(config)},
                           {"analytic", analytic},
                           {"adiabaticity", adiabaticity_json(adiab)},
                           {"pass", true}}));
  }

  if (!options.quiet) {
    out << std::setprecision(10);
    out << "mean gamma " << m.mean_gamma << "  mean delta " << m.mean_delta << '\n';
    for (const auto& r : rows)
      out << r.name << ": closed " << r.closed.total << "  quadrature " << r.quad.value
          << "  rel diff "
          << oracle_difference(r, r.name == "cov_gamma_delta" ? cov_scale : 0.0) << '\n';
    out << "limits for var gamma: narrowband " << *rows[0].narrowband << "  broadband "
        << *rows[0].broadband << '\n';
    out << "dephasing factor exp(-2 var alpha) " << dephasing_factor(m.var_alpha) << '\n';
    report_adiabaticity(adiab, out);
    out << "wrote " << path << '\n';
  }
  return kSuccess;
}

int cmd_mc(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  if (!options.quiet)
    out << "running " << config.n_trials << " " << to_string(config.mode) << " trials\n" << std::flush;
  const McOutcome o = run_mc(config, options);
  const std::string stem = output_stem(config, "mc");
  write_file(stem + "_records.csv", records_csv(o.records));
  write_file(stem + "_summary.json", dump(mc_summary_json(config, o)));

  if (!options.quiet) {
    out << std::setprecision(6);
    for (const auto& e : o.comparison.entries)
      out << (e.pass ? "PASS " : "FAIL ") << e.name << ": empirical " << e.empirical
          << "  analytic " << e.analytic << "  z " << e.z << '\n';
    if (o.coherence)
      out << (std::abs(o.coherence->z_score) <= kZLimit ? "PASS " : "FAIL ")
          << "coherence: measured " << o.coherence->measured << "  predicted "
          << o.coherence->predicted << "  z " << o.coherence->z_score << '\n';
    report_adiabaticity(adiabaticity_report(config.spec(), config.model()), out);
    out << "wrote " << stem << "_records.csv and " << stem << "_summary.json\n";
  }
  return o.pass ? kSuccess : kCheckFailed;
}

int cmd_sweep(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  if (options.sweep_values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<RunConfig> points;
  for (double v : options.sweep_values) {
    RunConfig c = config;
    apply_sweep_value(c, options.sweep_parameter, v);
    c.validate();
    points.push_back(c);
  }

  std::vector<std::string> header = {options.sweep_parameter, "var_gamma", "var_delta", "var_alpha",
                                     "cov_gamma_delta", "var_gamma_quadrature",
                                     "var_gamma_narrowband", "var_gamma_broadband"};
  if (options.sweep_with_mc)
    for (const char* h : {"mc_var_gamma", "mc_var_delta", "mc_var_alpha"}) header.push_back(h);
  CsvWriter csv(header);
  json rows = json::array();
  std::vector<double> ts, vg, vd;

  for (std::size_t i = 0; i < points.size(); ++i) {
    const PrecessionSpec spec = points[i].spec();
    const NoiseModel model = points[i].model();
    const double g = var_gamma_closed(spec, model).total;
    const double d = var_delta_closed(spec, model).total;
    const double a = var_alpha_closed(spec, model).total;
    const double cv = cov_gamma_delta_closed(spec, model).total;
    const WeightFunction wg = gamma_weight(spec);
    const double q = oracle(wg, wg, model, spec, g).value;
    const double nb = var_gamma_limit_narrowband(spec, model);
    const double bb = var_gamma_limit_broadband(spec, model);
    csv.cell(options.sweep_values[i]).cell(g).cell(d).cell(a).cell(cv).cell(q).cell(nb).cell(bb);
    json row = {{options.sweep_parameter, options.sweep_values[i]},
                {"var_gamma", g}, {"var_delta", d}, {"var_alpha", a}, {"cov_gamma_delta", cv},
                {"var_gamma_quadrature", q}, {"var_gamma_narrowband", nb},
                {"var_gamma_broadband", bb}};
    if (options.sweep_with_mc) {
      RunConfig c = points[i];
      c.mode = Mode::first_order;
      const auto stats = summarize(run_ensemble(spec, model, c.n_trials, c.seed, Mode::first_order,
                                                c.integrator(), options.threads));
      csv.cell(stats.gamma.variance).cell(stats.delta.variance).cell(stats.alpha.variance);
      row["mc_var_gamma"] = stats.gamma.variance;
      row["mc_var_delta"] = stats.delta.variance;
      row["mc_var_alpha"] = stats.alpha.variance;
    }
    csv.end_row();
    rows.push_back(row);
    ts.push_back(spec.t_total);
    vg.push_back(g);
    vd.push_back(d);
  }

  json fit = nullptr;
  if (options.sweep_parameter == "t_total" && points.size() >= 2) {
    auto slope = [&](const std::vector<double>& v) -> json {
      try {
        return loglog_slope(ts, v);
      } catch (const std::invalid_argument&) {
        return nullptr;
      }
    };
    fit = {{"slope_var_gamma", slope(vg)}, {"slope_var_delta", slope(vd)}};
  }

  const std::string stem = output_stem(config, "sweep");
  std::string path;
  if (config.output_format == OutputFormat::csv) {
    path = stem + ".csv";
    write_file(path, csv.text());
    if (!fit.is_null()) {
      CsvWriter f({"quantity", "loglog_slope"});
      for (const char* k : {"slope_var_gamma", "slope_var_delta"}) {
        f.cell(std::string(k));
        if (fit[k].is_null()) f.cell(std::string());
        else f.cell(fit[k].get<double>());
        f.end_row();
      }
      write_file(stem + "_fit.csv", f.text());
    }
  } else {
    path = stem + ".json";
    write_file(path, dump({{"config", config_json(config)},
                           {"parameter", options.sweep_parameter},
                           {"rows", rows},
                           {"fit", fit},
                           {"pass", true}}));
  }

  if (!options.quiet) {
    out << "swept " << options.sweep_parameter << " over " << points.size() << " values\n";
    if (!fit.is_null())
      out << "log-log slope: var gamma " << fit["slope_var_gamma"].dump() << "  var delta "
          << fit["slope_var_delta"].dump() << '\n';
    out << "wrote " << path << '\n';
  }
  return kSuccess;
}

int cmd_simulate(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  const PrecessionSpec spec = config.spec();
  const NoiseModel model = config.model();
  const IntegratorConfig ic = config.integrator();
  const std::size_t n = grid_steps(spec, model, ic);
  const double dt = spec.t_total / static_cast<double>(n);
  // Same path as trial 0 of an mc run with this seed.
  const NoisePath path = sample_path(model, n, dt, mix_seed(config.seed, 0));
  std::vector<TrajectoryPoint> traj;
  const PhaseExtraction ex = evolve_and_extract(spec, path, ic, &traj);
  const double gamma_fo = integrate_weight(gamma_weight(spec), path);
  const double expected = noiseless_berry_phase(spec.theta0) * spec.n_cycles;

  json discrete = nullptr;
  try {
    discrete = connection_phase_discrete(spec, path, std::max<std::size_t>(64, n));
  } catch (const ResolutionError&) {
  }

  CsvWriter tc({"t", "re_up", "im_up", "re_down", "im_down", "energy", "total_phase",
                "dynamical_phase", "bx", "by", "bz", "kx", "ky", "kz"});
  CsvWriter nc({"t", "K1", "K2", "K3"});
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& p = traj[i];
    const FieldSample f = field_at(spec, path, i);
    tc.cell(p.t).cell(p.state.up.real()).cell(p.state.up.imag());
    tc.cell(p.state.down.real()).cell(p.state.down.imag()).cell(p.energy);
    tc.cell(p.total_phase).cell(p.dynamical_phase);
    tc.cell(f.b_control.x()).cell(f.b_control.y()).cell(f.b_control.z());
    tc.cell(f.k_noise.x()).cell(f.k_noise.y()).cell(f.k_noise.z());
    tc.end_row();
    nc.cell(path.times[i]).cell(path.samples[i].x()).cell(path.samples[i].y()).cell(path.samples[i].z());
    nc.end_row();
  }

  json warnings = json::array();
  if (ex.non_adiabatic_warning)
    warnings.push_back("leakage " + format_double(ex.leakage) + " exceeds threshold " +
                       format_double(ic.leakage_warn_threshold));
  if (ex.degeneracy_touched) warnings.push_back("total field vanished on a step");

  const std::string stem = output_stem(config, "simulate");
  write_file(stem + "_trajectory.csv", tc.text());
  write_file(stem + "_noise.csv", nc.text());
  write_file(stem + ".json",
             dump({{"config", config_json(config)},
                   {"simulation",
                    {{"steps", n},
                     {"total_phase", ex.total_phase},
                     {"dynamical_phase", ex.dynamical_phase},
                     {"geometric_phase", ex.geometric_phase},
                     {"berry_phase", ex.berry_phase},
                     {"noiseless_berry_phase", expected},
                     {"first_order_berry_phase", expected + gamma_fo},
                     {"discrete_connection_phase", discrete},
                     {"delta_integral", ex.delta_integral},
                     {"eigenvalue_dynamical_phase", -0.5 * ex.delta_integral},
                     {"azimuth_winding", ex.azimuth_winding},
                     {"leakage", ex.leakage},
                     {"max_leakage", ex.max_leakage},
                     {"bloch_return", ex.bloch_return},
                     {"non_adiabatic_warning", ex.non_adiabatic_warning},
                     {"degeneracy_touched", ex.degeneracy_touched}}},
                   {"warnings", warnings},
                   {"adiabaticity", adiabaticity_json(adiabaticity_report(spec, model))},
                   {"pass", true}}));

  if (!options.quiet) {
    out << std::setprecision(10);
    out << "berry phase " << ex.berry_phase << "  (noiseless " << expected << ", first order "
        << expected + gamma_fo << ")\n";
    out << "total " << ex.total_phase << "  dynamical " << ex.dynamical_phase << "  geometric "
        << ex.geometric_phase << "  leakage " << ex.leakage << '\n';
    for (const auto& w : warnings) out << "warning: " << w.get<std::string>() << '\n';
    out << "wrote " << stem << "_trajectory.csv, " << stem << "_noise.csv and " << stem << ".json\n";
  }
  return kSuccess;
}

std::vector<CheckResult> compare_battery(const RunConfig& config, const CommandOptions& options) {
  return run_battery(config, options, nullptr).checks;
}

int cmd_compare(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  const Battery b = run_battery(config, options, options.quiet ? nullptr : &out);
  bool pass = true;
  for (const auto& c : b.checks) pass = pass && c.pass;

  const std::string stem = output_stem(config, "compare");
  std::string path;
  if (config.output_format == OutputFormat::csv) {
    path = stem + ".csv";
    write_file(path, checks_csv(b.checks));
  } else {
    json j = b.details;
    j["checks"] = checks_json(b.checks);
    j["pass"] = pass;
    path = stem + ".json";
    write_file(path, dump(j));
  }

  if (!options.quiet) {
    std::size_t width = 0;
    for (const auto& c : b.checks) width = std::max(width, c.name.size());
    for (const auto& c : b.checks) {
      out << (c.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width) + 2)
          << c.name << std::setprecision(4) << std::setw(12) << c.value << " / "
          << c.threshold;
      if (!c.note.empty()) out << "  (" << c.note << ")";
      out << '\n';
    }
    out << (pass ? "all checks passed" : "some checks FAILED") << "\nwrote " << path << '\n';
  }
  return pass ? kSuccess : kCheckFailed;
}

int run_guarded(int (*command)(const RunConfig&, const CommandOptions&, std::ostream&),
                const RunConfig& config, const CommandOptions& options, std::ostream& out,
                std::ostream& err) {
  try {
    config.validate();
    return command(config, options, out);
  } catch (const AccuracyError& e) {
    err << "accuracy error: " << e.what() << '\n';
    return kAccuracyError;
  } catch (const ResolutionError& e) {
    err << "accuracy error: " << e.what() << '\n';
    return kAccuracyError;
  } catch (const DegeneracyError& e) {
    err << "accuracy error: " << e.what() << '\n';
    return kAccuracyError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
}

}  // namespace berrynoise::cli
