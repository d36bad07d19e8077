// Command-line driver: fd-sweep, kinetic-table, bottleneck, micro.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <mptraffic/scenarios.hpp>

namespace {

enum Exit { ok = 0, config_error = 2, numerical_failure = 3 };

mpt::ScenarioConfig effective_config(const std::string& path, const std::vector<std::string>& sets) {
  mpt::ScenarioConfig c = path.empty() ? mpt::ScenarioConfig{} : mpt::load_config(path);
  for (auto& kv : sets) mpt::apply_override(c, kv);
  mpt::validate(c);
  return c;
}

void report_bottleneck(const mpt::BottleneckSummary& s) {
  std::cout << "x,rho_amplitude,rho_period,flow_mean,flow_amplitude\n";
  for (auto& p : s.probes)
    std::cout << p.x << ',' << p.rho.amplitude << ',' << p.rho.dominant_period << ',' << p.flow.mean << ',' << p.flow.amplitude << '\n';
  std::cout << "inflow_flow," << s.inflow_flow << "\nsteps," << s.run.steps << "\nrho_range," << s.run.stats.rho_min << ','
            << s.run.stats.rho_max << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-phase traffic models: equilibria, kinetic tables, bottleneck and car-following runs"};
  app.footer(mpt::config_help());
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "flat key = value configuration file");
  app.add_option("--set", sets, "override one key, key=value (repeatable)")->take_all();

  auto* sweep = app.add_subcommand("fd-sweep", "equilibria of all closures over a density grid, forcing raster and cut");
  auto* table = app.add_subcommand("kinetic-table", "u^e(k) table, nu(k) and the fitted braking profile");
  auto* bottleneck = app.add_subcommand("bottleneck", "lane-reduction run with probes and wave metrics");
  auto* micro = app.add_subcommand("micro", "car-following run (GM, GM with a multi-valued closure, ATD)");
  for (auto* s : {sweep, table, bottleneck, micro}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? ok : config_error;
  }

  try {
    auto c = effective_config(config_path, sets);
    for (auto& note : mpt::validate(c.params)) std::cerr << "note: " << note << '\n';
    if (*sweep) {
      auto rows = mpt::cmd_fd_sweep(c);
      std::cout << "equilibria: " << rows.size() << " rows in " << c.output_dir << '\n';
    } else if (*table) {
      auto ks = mpt::cmd_kinetic_table(c);
      std::cout << "u_e(0) = " << ks.model->table().ue.front() << ", u_e(1) = " << ks.model->table().ue.back() << '\n';
      if (ks.calibration) {
        std::cout << "calibration max deviation = " << ks.calibration->max_deviation << '\n';
        if (!ks.calibration->ok) std::cerr << "warning: calibration above threshold, using best fit\n";
      }
    } else if (*bottleneck) {
      report_bottleneck(mpt::cmd_bottleneck(c));
    } else if (*micro) {
      auto s = mpt::cmd_micro(c);
      std::cout << "final speeds: min " << s.v_min << " max " << s.v_max << " mean " << s.v_mean << '\n';
    }
  } catch (const mpt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const mpt::DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical_failure;
  }
  return ok;
}
