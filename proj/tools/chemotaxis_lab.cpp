#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chemlab/cli.hpp"

int main(int argc, char** argv) {
  using namespace chemlab;
  CLI::App app{"chemotaxis-lab: regimes, blow-up bounds and radial simulations"};
  app.require_subcommand(1);

  std::string config_path, out_dir, restart;
  int workers = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "TOML run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
  };
  auto* classify = app.add_subcommand("classify", "check H1-H5 and print the critical exponents");
  auto* bound = app.add_subcommand("bound", "lower bounds for the blow-up time from ODI coefficients");
  auto* simulate = app.add_subcommand("simulate", "integrate the radial system");
  auto* blowup = app.add_subcommand("blowup", "run the blow-up experiment and its verdicts");
  auto* sweep = app.add_subcommand("sweep", "run a command over a parameter grid");
  for (auto* s : {classify, bound, simulate, blowup, sweep}) add_common(s);
  simulate->add_option("--restart", restart, "CHLB snapshot to continue from");
  sweep->add_option("--workers", workers, "concurrent runs (overrides sweep.workers)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::config_error;
  }

  cli::logger();
  return cli::guarded(
      [&] {
        cli::Context c;
        c.cfg = config::load(config_path);
        c.out = cli::output_dir(c.cfg, out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir));
        io::ensure_dir(c.out);
        if (!restart.empty()) c.restart = restart;
        auto* sub = app.get_subcommands().front();
        if (sub == sweep) return cli::cmd_sweep(c, workers > 0 ? std::optional<int>(workers) : std::nullopt);
        return cli::dispatch(sub->get_name(), c);
      },
      std::cerr);
}
