#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <system_error>

#include "berrynoise/cli.hpp"

namespace berrynoise::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  const double v = parse_number<double>(key, text);
  if (!std::isfinite(v)) throw ConfigError(key + " must be finite");
  return v;
}

}  // namespace

PrecessionSpec RunConfig::spec() const { return {b0, theta0, t_total, n_cycles}; }

NoiseModel RunConfig::model() const { return {{sigma12, gamma12}, {sigma3, gamma3}}; }

IntegratorConfig RunConfig::integrator() const {
  IntegratorConfig c;
  c.steps_per_cycle = steps_per_cycle;
  return c;
}

void RunConfig::validate() const {
  if (!(b0 > 0.0)) throw ConfigError("b0 must be > 0");
  if (!(theta0 >= 0.0 && theta0 <= std::numbers::pi)) throw ConfigError("theta0 must lie in [0, pi]");
  if (!(t_total > 0.0)) throw ConfigError("t_total must be > 0");
  if (n_cycles < 1) throw ConfigError("n_cycles must be >= 1");
  if (!(sigma12 >= 0.0)) throw ConfigError("sigma12 must be >= 0");
  if (!(sigma3 >= 0.0)) throw ConfigError("sigma3 must be >= 0");
  if (!(gamma12 > 0.0)) throw ConfigError("gamma12 must be > 0");
  if (!(gamma3 > 0.0)) throw ConfigError("gamma3 must be > 0");
  if (n_trials < 2) throw ConfigError("n_trials must be >= 2");
  if (steps_per_cycle < 16) throw ConfigError("steps_per_cycle must be >= 16");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "b0",       "theta0",   "t_total",         "n_cycles", "sigma12",
      "gamma12",  "sigma3",   "gamma3",          "n_trials", "steps_per_cycle",
      "seed",     "mode",     "output_path",     "output_format"};
  return keys;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "b0") c.b0 = parse_real(key, value);
  else if (key == "theta0") c.theta0 = parse_real(key, value);
  else if (key == "t_total") c.t_total = parse_real(key, value);
  else if (key == "n_cycles") c.n_cycles = parse_number<int>(key, value);
  else if (key == "sigma12") c.sigma12 = parse_real(key, value);
  else if (key == "gamma12") c.gamma12 = parse_real(key, value);
  else if (key == "sigma3") c.sigma3 = parse_real(key, value);
  else if (key == "gamma3") c.gamma3 = parse_real(key, value);
  else if (key == "n_trials") c.n_trials = parse_number<std::size_t>(key, value);
  else if (key == "steps_per_cycle") c.steps_per_cycle = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "mode") {
    try {
      c.mode = parse_mode(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "output_path") c.output_path = value;
  else if (key == "output_format") {
    if (value == "csv") c.output_format = OutputFormat::csv;
    else if (value == "json") c.output_format = OutputFormat::json;
    else throw ConfigError("output_format must be csv or json, got '" + value + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string to_string(OutputFormat format) { return format == OutputFormat::csv ? "csv" : "json"; }

std::string emit_config(const RunConfig& c) {
  std::ostringstream out;
  out << "b0=" << format_double(c.b0) << '\n'
      << "theta0=" << format_double(c.theta0) << '\n'
      << "t_total=" << format_double(c.t_total) << '\n'
      << "n_cycles=" << c.n_cycles << '\n'
      << "sigma12=" << format_double(c.sigma12) << '\n'
      << "gamma12=" << format_double(c.gamma12) << '\n'
      << "sigma3=" << format_double(c.sigma3) << '\n'
      << "gamma3=" << format_double(c.gamma3) << '\n'
      << "n_trials=" << c.n_trials << '\n'
      << "steps_per_cycle=" << c.steps_per_cycle << '\n'
      << "seed=" << c.seed << '\n'
      << "mode=" << to_string(c.mode) << '\n'
      << "output_path=" << c.output_path << '\n'
      << "output_format=" << to_string(c.output_format) << '\n';
  return out.str();
}

std::string default_output_dir() {
  const char* env = std::getenv("BERRYNOISE_OUTPUT_DIR");
  return env && *env ? std::string(env) : std::string(".");
}

std::string output_stem(const RunConfig& config, const std::string& command) {
  if (!config.output_path.empty()) return config.output_path;
  return default_output_dir() + "/" + command;
}

}  // namespace berrynoise::cli
