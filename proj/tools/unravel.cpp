#include <cstdint>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "unravel/run.hpp"

namespace {

int exit_code(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const unravel::DegenerateEnsemble& x) {
    std::cerr << "degenerate ensemble: " << x.what() << '\n';
    return 4;
  } catch (const unravel::NumericalError& x) {
    std::cerr << "numerical error: " << x.what() << '\n';
    return 3;
  } catch (const unravel::Error& x) {
    std::cerr << "config error: " << x.what() << '\n';
    return 2;
  } catch (const std::exception& x) {
    std::cerr << "error: " << x.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unravelings of canonical master equations"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run the engine named in the config");
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out_dir, "Output directory");

  std::string cp_config;
  auto* cp = app.add_subcommand("check-cp", "Choi spectrum of the flow on the grid");
  cp->add_option("--config", cp_config, "Run configuration (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      unravel::RunConfig cfg = unravel::load_run_config(config_path);
      if (seed) {
        cfg.seed = *seed;
        cfg.source["seed"] = *seed;
      }
      const auto outcome = unravel::execute_run(cfg, out_dir);
      for (const auto& f : outcome.files) std::cout << f << '\n';
    } else {
      const auto report = unravel::check_cp(unravel::load_run_config(cp_config));
      unravel::write_cp_report(std::cout, report);
    }
  } catch (...) {
    return exit_code(std::current_exception());
  }
  return 0;
}
