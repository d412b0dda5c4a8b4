#pragma once

// Run configuration and the five commands behind the berrynoise executable.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "berrynoise/evolve.hpp"
#include "berrynoise/field.hpp"
#include "berrynoise/montecarlo.hpp"
#include "berrynoise/noise.hpp"

namespace berrynoise::cli {

enum ExitCode : int {
  kSuccess = 0,
  kCheckFailed = 1,
  kUsageError = 2,
  kAccuracyError = 3,
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OutputFormat { csv, json };

// Defaults are the reference parameter set.
struct RunConfig {
  double b0 = 1.0;
  double theta0 = 0.78539816339744828;  // pi/4
  double t_total = 100.0;
  int n_cycles = 1;
  double sigma12 = 0.05;
  double gamma12 = 0.1;
  double sigma3 = 0.05;
  double gamma3 = 0.1;
  std::size_t n_trials = 10000;
  int steps_per_cycle = 2048;
  std::uint64_t seed = 42;
  Mode mode = Mode::first_order;
  std::string output_path;  // file stem; empty means <output dir>/<command>
  OutputFormat output_format = OutputFormat::csv;

  PrecessionSpec spec() const;
  NoiseModel model() const;
  IntegratorConfig integrator() const;
  void validate() const;  // throws ConfigError

  bool operator==(const RunConfig&) const = default;
};

// Field names, in file order.
const std::vector<std::string>& config_keys();

// Throws ConfigError on unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// key=value lines; '#' starts a comment, blank lines are ignored.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

// Every key, doubles at 17 significant digits, so parse(emit(c)) == c.
std::string emit_config(const RunConfig& config);

std::string to_string(OutputFormat format);
std::string format_double(double value);  // %.17g

// Directory used when output_path is empty: $BERRYNOISE_OUTPUT_DIR or ".".
std::string default_output_dir();
std::string output_stem(const RunConfig& config, const std::string& command);

struct CommandOptions {
  bool quiet = false;
  unsigned threads = 1;
  // Multiplies the analytic variances before the Monte Carlo comparison.
  double tamper_variance = 1.0;
  // Sweep only.
  std::string sweep_parameter;
  std::vector<double> sweep_values;
  bool sweep_with_mc = false;
};

// Commands write their files under output_stem and print a short report to
// out unless quiet. They return an ExitCode; exceptions are mapped by
// run_guarded.
int cmd_analytic(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_mc(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_sweep(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_simulate(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_compare(const RunConfig& config, const CommandOptions& options, std::ostream& out);

// Validates the config, runs the command and maps exceptions to exit codes:
// ConfigError / invalid_argument -> 2, AccuracyError / ResolutionError -> 3.
int run_guarded(int (*command)(const RunConfig&, const CommandOptions&, std::ostream&),
                const RunConfig& config, const CommandOptions& options, std::ostream& out,
                std::ostream& err);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// One row of the acceptance battery run by cmd_compare.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = true;
  std::string note;
};

std::vector<CheckResult> compare_battery(const RunConfig& config, const CommandOptions& options);

}  // namespace berrynoise::cli
