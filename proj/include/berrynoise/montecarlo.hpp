#pragma once

// Monte Carlo ensembles of the phase functionals.
//
// Trial k draws its noise path from mix_seed(master_seed, k), so any subset
// of trials can be run on any thread and the record sequence is fixed by the
// inputs alone. Aggregates use pairwise summation in trial order.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "berrynoise/analytics.hpp"
#include "berrynoise/evolve.hpp"

namespace berrynoise {

enum class Mode { first_order, full_sim };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

// Phases are deviations from the noiseless values: gamma_fo = gamma - gamma0,
// delta_fo = delta - B0 T. gamma_sim is the full simulated Berry phase
// (PhaseExtraction::berry_phase), not a deviation.
struct TrialRecord {
  std::size_t trial_index = 0;
  double gamma_fo = 0.0;
  double delta_fo = 0.0;
  double alpha_fo = 0.0;
  std::optional<double> gamma_sim;
  std::optional<double> leakage;
};

std::vector<TrialRecord> run_ensemble(const PrecessionSpec& spec, const NoiseModel& model,
                                      std::size_t n_trials, std::uint64_t master_seed, Mode mode,
                                      const IntegratorConfig& config, unsigned threads = 1);

// Sum in fixed pairwise order; the result depends only on the sequence.
double pairwise_sum(std::span<const double> values);

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double sem = 0.0;
  double sem_variance = 0.0;  // fourth-moment standard error
  double skewness = 0.0;
  double se_skewness = 0.0;
  double excess_kurtosis = 0.0;
  double se_kurtosis = 0.0;
};

MomentSummary summarize_values(std::span<const double> values);

struct EnsembleStats {
  std::size_t n = 0;
  MomentSummary gamma;
  MomentSummary delta;
  MomentSummary alpha;
  std::optional<MomentSummary> gamma_sim;
  double cov_gamma_delta = 0.0;
  double sem_cov = 0.0;
};

EnsembleStats summarize(std::span<const TrialRecord> records);

struct CoherenceEstimate {
  double measured = 0.0;   // |<e^{2 i alpha}>|
  double predicted = 0.0;  // exp(-2 var_alpha)
  double std_error = 0.0;  // jackknife
  double z_score = 0.0;
};

CoherenceEstimate coherence(std::span<const TrialRecord> records, double analytic_var_alpha,
                            double mean_alpha = 0.0);

struct ZScore {
  std::string name;
  double empirical = 0.0;
  double analytic = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  bool pass = true;
};

struct Comparison {
  std::vector<ZScore> entries;
  bool pass = true;
};

// (empirical - analytic) / SE for the means, variances and covariance.
// Empirical means are the analytic noiseless means plus the mean deviation.
Comparison compare_to_analytic(const EnsembleStats& stats, const PhaseMoments& analytic,
                               double z_limit = 3.0);

// z-score with the convention 0/0 = 0 and x/0 = +-inf.
double z_score(double empirical, double reference, double std_error);

// Full simulation against the first-order prediction on identical paths.
// The residual of a path is gamma_sim - gamma_ref - gamma_fo, with gamma_ref
// the noiseless simulation on the same grid; it is evaluated at the given
// noise amplitudes and at half of them with the same seeds.
struct ResidualLevel {
  double sigma_scale = 1.0;
  double rms_residual = 0.0;
  double mean_residual = 0.0;
  double rms_first_order = 0.0;
  double max_leakage = 0.0;
  std::vector<double> residuals;  // per path, in seed order
};

struct FirstOrderRegimeCheck {
  double gamma_ref = 0.0;
  ResidualLevel full;
  ResidualLevel half;
  double shrink_ratio = 0.0;  // full.rms_residual / half.rms_residual
  double relative_residual = 0.0;  // full.rms_residual / full.rms_first_order
  bool pass = false;
};

struct FirstOrderRegimeOptions {
  std::size_t n_paths = 16;
  std::uint64_t seed = 7;
  double min_shrink_ratio = 3.5;
  double max_relative_residual = 0.25;
};

FirstOrderRegimeCheck first_order_regime_check(const PrecessionSpec& spec, const NoiseModel& model,
                                               const IntegratorConfig& config,
                                               const FirstOrderRegimeOptions& options = {});

}  // namespace berrynoise
