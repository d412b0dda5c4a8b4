#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "berrynoise/cli.hpp"

namespace bc = berrynoise::cli;

namespace {

struct Shared {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  bc::CommandOptions options;
};

void add_common(CLI::App* sub, Shared& s) {
  sub->add_option("-c,--config", s.config_file, "key=value configuration file");
  for (const auto& key : bc::config_keys())
    sub->add_option_function<std::string>(
        "--" + key, [&s, key](const std::string& v) { s.overrides[key] = v; },
        "override " + key);
  sub->add_flag("-q,--quiet", s.options.quiet, "suppress progress output");
  sub->add_option("-j,--threads", s.options.threads, "worker threads for ensembles (0 = all cores)");
  sub->add_option("--tamper-variance", s.options.tamper_variance)->group("");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Berry phase of a spin-1/2 under Ornstein-Uhlenbeck field noise"};
  app.require_subcommand(1);
  Shared s;

  using Command = int (*)(const bc::RunConfig&, const bc::CommandOptions&, std::ostream&);
  std::map<CLI::App*, Command> commands;
  auto sub = [&](const char* name, const char* help, Command cmd) {
    CLI::App* a = app.add_subcommand(name, help);
    add_common(a, s);
    commands[a] = cmd;
    return a;
  };
  sub("analytic", "closed-form means and variances with the quadrature oracle", bc::cmd_analytic);
  sub("mc", "Monte Carlo ensemble against the closed forms", bc::cmd_mc);
  CLI::App* sweep = sub("sweep", "closed-form variances over a parameter", bc::cmd_sweep);
  sweep->add_option("-p,--parameter", s.options.sweep_parameter, "t_total, gamma12, gamma3 or theta0")
      ->required();
  sweep->add_option("--values", s.options.sweep_values, "comma separated values")
      ->delimiter(',')
      ->required();
  sweep->add_flag("--with-mc", s.options.sweep_with_mc, "add first-order Monte Carlo variances");
  sub("simulate", "one full evolution with trajectory dump", bc::cmd_simulate);
  sub("compare", "acceptance battery with a pass/fail table", bc::cmd_compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bc::kUsageError;
  }

  bc::RunConfig config;
  try {
    if (!s.config_file.empty()) config = bc::load_config_file(s.config_file);
    for (const auto& key : bc::config_keys()) {
      const auto it = s.overrides.find(key);
      if (it != s.overrides.end()) bc::apply_setting(config, key, it->second);
    }
  } catch (const bc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bc::kUsageError;
  }

  for (const auto& [app_ptr, cmd] : commands)
    if (app_ptr->parsed()) return bc::run_guarded(cmd, config, s.options, std::cout, std::cerr);
  return bc::kUsageError;
}
