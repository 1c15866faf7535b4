#include "tabcl/cli/commands.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/harness/persist.hpp"
#include "tabcl/harness/run.hpp"
#include "tabcl/report/plot.hpp"
#include "tabcl/report/table.hpp"

#include <nlohmann/json.hpp>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace tabcl {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

} // namespace

SweepDocument parse_sweep_document(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  SweepDocument sweep;
  if (doc.contains("strategies"))
    sweep.strategies = doc.at("strategies").get<std::vector<std::string>>();
  if (doc.contains("fractions"))
    sweep.fractions = doc.at("fractions").get<std::vector<Scalar>>();
  if (doc.contains("seeds"))
    sweep.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  if (doc.contains("output_dir"))
    sweep.output_dir = doc.at("output_dir").get<std::string>();
  doc.erase("strategies");
  doc.erase("fractions");
  doc.erase("seeds");
  doc.erase("output_dir");
  sweep.base = experiment_config_from_json(doc.dump());
  return sweep;
}

std::vector<ExperimentConfig> materialize_cells(const SweepDocument& doc,
                                                const RunOptions& opts) {
  std::vector<std::string> strategies =
      !opts.strategies.empty() ? opts.strategies : doc.strategies;
  if (strategies.empty()) strategies = {doc.base.strategy_label()};
  std::vector<std::uint64_t> seeds = !opts.seeds.empty() ? opts.seeds : doc.seeds;
  if (seeds.empty()) seeds = {doc.base.seed};
  std::vector<Scalar> fractions = !opts.fractions.empty() ? opts.fractions : doc.fractions;

  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) throw ConfigError("sweep: seeds must be distinct");

  std::vector<ExperimentConfig> cells;
  for (const std::string& label : strategies) {
    Scalar label_fraction = -1.0;
    StrategyKind kind;
    {
      Scalar f = doc.base.params.pjr_fraction;
      kind = strategy_kind_from_string(label, &f);
      if (label.find(':') != std::string::npos || label.find('=') != std::string::npos)
        label_fraction = f;
    }
    std::vector<Scalar> cell_fractions = {doc.base.params.pjr_fraction};
    if (kind == StrategyKind::pjr) {
      if (label_fraction >= 0.0)
        cell_fractions = {label_fraction};
      else if (!fractions.empty())
        cell_fractions = fractions;
    }
    for (const Scalar fraction : cell_fractions) {
      for (const std::uint64_t seed : seeds) {
        ExperimentConfig cfg = doc.base;
        cfg.strategy = kind;
        if (kind == StrategyKind::pjr) cfg.params.pjr_fraction = fraction;
        cfg.seed = seed;
        validate_pairing(cfg.strategy, cfg.scenario.kind);
        cells.push_back(std::move(cfg));
      }
      if (kind != StrategyKind::pjr) break;
    }
  }
  return cells;
}

std::string resolve_out_root(const std::string& flag_value, const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  if (const char* env = std::getenv("TABCL_OUT"); env && *env) return env;
  return "tabcl_results";
}

namespace {

// Executes one cell; returns false on a runtime failure (after writing the
// diagnostic record into the run directory).
bool execute_cell(const ExperimentConfig& cfg, const std::string& out_root) {
  try {
    const RunResult result = run_experiment(cfg);
    persist_run(result, out_root);
    return true;
  } catch (const std::exception& e) {
    const std::string dir = run_dir_for(cfg, out_root);
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out(fs::path(dir) / "failed.json", std::ios::trunc);
    if (out) {
      json diag = {{"config", json::parse(experiment_config_to_json(cfg))},
                   {"error", e.what()}};
      out << diag.dump(2) << "\n";
    }
    std::cerr << "run failed (" << cfg.strategy_label() << ", seed " << cfg.seed
              << "): " << e.what() << "\n";
    return false;
  }
}

} // namespace

int cmd_run(const RunOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("run: --config is required");
  const SweepDocument doc = parse_sweep_document(read_file(opts.config_path));
  const std::string out_root = resolve_out_root(opts.out_root, doc.output_dir);
  fs::create_directories(out_root);

  const std::vector<ExperimentConfig> cells = materialize_cells(doc, opts);
  std::vector<const ExperimentConfig*> pending;
  int skipped = 0;
  for (const auto& cfg : cells) {
    if (!opts.force && run_exists(cfg, out_root)) {
      ++skipped;
      continue;
    }
    pending.push_back(&cfg);
  }

  int failures = 0;
  if (opts.jobs <= 1) {
    for (const auto* cfg : pending)
      if (!execute_cell(*cfg, out_root)) ++failures;
  } else {
    // Independent runs in OS-level workers; each writes to its own run
    // directory and appends its own index record.
    std::map<pid_t, const ExperimentConfig*> active;
    std::size_t next = 0;
    while (next < pending.size() || !active.empty()) {
      while (static_cast<int>(active.size()) < opts.jobs && next < pending.size()) {
        std::cout.flush();
        std::cerr.flush();
        const pid_t pid = fork();
        if (pid < 0) throw IoError("fork failed");
        if (pid == 0) {
          const bool ok = execute_cell(*pending[next], out_root);
          std::cout.flush();
          std::cerr.flush();
          _exit(ok ? 0 : 1);
        }
        active.emplace(pid, pending[next]);
        ++next;
      }
      int status = 0;
      const pid_t done = waitpid(-1, &status, 0);
      if (done > 0) {
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failures;
        active.erase(done);
      }
    }
  }

  std::cout << "executed " << (pending.size() - static_cast<std::size_t>(failures))
            << " run(s), skipped " << skipped << " already-persisted, " << failures
            << " failed\n";
  return failures == 0 ? 0 : 1;
}

int cmd_report(const std::string& out_root) {
  const std::vector<RunResult> runs = load_all_runs(out_root);
  if (runs.empty()) throw ConfigError("report: no persisted runs under " + out_root);
  const ReportTable table = build_report(runs);
  std::cout << table.render_text();
  const std::string csv_path = (fs::path(out_root) / "report.csv").string();
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << table.render_csv();
  std::cout << "wrote " << csv_path << "\n";
  return 0;
}

int cmd_plot(const std::string& out_root, const std::string& kind) {
  if (kind != "accuracy_curves" && kind != "time_curves")
    throw ConfigError("plot: kind must be accuracy_curves or time_curves");
  const std::vector<RunResult> runs = load_all_runs(out_root);
  if (runs.empty()) throw ConfigError("plot: no persisted runs under " + out_root);
  std::set<std::string> scenarios;
  for (const auto& r : runs) scenarios.insert(r.scenario);
  const std::string plot_dir = (fs::path(out_root) / "plots").string();
  fs::create_directories(plot_dir);
  for (const std::string& scenario : scenarios) {
    const PlotSpec spec = kind == "accuracy_curves"
                              ? accuracy_curves_spec(runs, scenario)
                              : time_curves_spec(runs, scenario);
    const std::string stem = (fs::path(plot_dir) / (scenario + "_" + kind)).string();
    write_svg(spec, stem + ".svg");
    write_png(spec, stem + ".png");
    std::cout << "wrote " << stem << ".svg and .png\n";
  }
  return 0;
}

int cmd_list(const std::string& out_root) {
  const auto entries = read_index(out_root);
  for (const auto& e : entries)
    std::cout << e.scenario << "  " << e.strategy << "  seed " << e.seed << "  " << e.dir
              << "\n";
  std::cout << entries.size() << " run(s)\n";
  return 0;
}

} // namespace tabcl
