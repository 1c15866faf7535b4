// Command-line front end: declarative experiment configs, sweep execution,
// summary tables and figure emission.

#include "tabcl/cli/commands.hpp"
#include "tabcl/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"continual-learning benchmark harness for tabular streams"};
  app.require_subcommand(1);

  tabcl::RunOptions run_opts;
  std::string out_root;
  std::string plot_kind = "accuracy_curves";

  auto* run = app.add_subcommand("run", "execute the (strategy x seed x fraction) sweep");
  run->add_option("--config", run_opts.config_path, "sweep config JSON")->required();
  run->add_option("--out", run_opts.out_root, "output root (default: config, then $TABCL_OUT)");
  run->add_option("--seeds", run_opts.seeds, "override seed list");
  run->add_option("--strategies", run_opts.strategies, "override strategy list");
  run->add_option("--fractions", run_opts.fractions, "override pjr fraction list");
  run->add_flag("--force", run_opts.force, "re-run cells that are already persisted");
  run->add_option("--jobs", run_opts.jobs, "parallel worker processes")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "aggregate persisted runs into the summary table");
  report->add_option("--out", out_root, "output root");

  auto* plot = app.add_subcommand("plot", "emit accuracy/time figures (svg + png)");
  plot->add_option("--out", out_root, "output root");
  plot->add_option("--kind", plot_kind, "accuracy_curves | time_curves");

  auto* list = app.add_subcommand("list", "list persisted runs");
  list->add_option("--out", out_root, "output root");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return tabcl::cmd_run(run_opts);
    const std::string root = tabcl::resolve_out_root(out_root, "");
    if (report->parsed()) return tabcl::cmd_report(root);
    if (plot->parsed()) return tabcl::cmd_plot(root, plot_kind);
    if (list->parsed()) return tabcl::cmd_list(root);
  } catch (const tabcl::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
