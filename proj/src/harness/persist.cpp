#include "tabcl/harness/persist.hpp"

#include "tabcl/errors.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace tabcl {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string hash_hex_of(const std::string& canonical) {
  const std::uint64_t h = fnv1a_hash(canonical.data(), canonical.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

std::string relative_run_dir(const std::string& scenario, const std::string& path_label,
                             std::uint64_t seed, const std::string& hash8) {
  return "runs/" + scenario + "/" + path_label + "/seed" + std::to_string(seed) + "_" + hash8;
}

std::string path_label_of(const std::string& strategy_label) {
  std::string out;
  for (const char c : strategy_label)
    if (c != ':') out.push_back(c);
  return out;
}

json ledger_to_json(const std::vector<TaskLedgerEntry>& ledger) {
  json arr = json::array();
  for (const auto& e : ledger)
    arr.push_back({
        {"task", e.task},
        {"steps", e.steps},
        {"epochs_run", e.epochs_run},
        {"current_pool", e.current_pool},
        {"replay_pool", e.replay_pool},
        {"trained_samples", e.trained_samples},
        {"buffer_draws", e.buffer_draws},
        {"generated", e.generated},
    });
  return arr;
}

} // namespace

std::string run_dir_for(const ExperimentConfig& cfg, const std::string& out_root) {
  const std::string canonical = experiment_config_to_json(cfg);
  return (fs::path(out_root) /
          relative_run_dir(to_string(cfg.scenario.kind), cfg.strategy_path_label(), cfg.seed,
                           hash_hex_of(canonical).substr(0, 8)))
      .string();
}

bool run_exists(const ExperimentConfig& cfg, const std::string& out_root) {
  return fs::exists(fs::path(run_dir_for(cfg, out_root)) / "run.json");
}

std::string persist_run(const RunResult& result, const std::string& out_root) {
  const ExperimentConfig cfg = experiment_config_from_json(result.config_json);
  const std::string dir = run_dir_for(cfg, out_root);
  fs::create_directories(dir);

  json doc;
  doc["schema_version"] = result.schema_version;
  doc["config"] = json::parse(result.config_json);
  doc["seed"] = result.seed;
  doc["scenario"] = result.scenario;
  doc["strategy"] = result.strategy;
  doc["accuracy_matrix"] = result.accuracy_matrix;
  doc["per_increment"] = result.per_increment;
  doc["mean"] = result.mean;
  doc["min"] = result.min;
  doc["ledger"] = ledger_to_json(result.ledger);
  if (!result.sample_audit.empty()) {
    json audit = json::array();
    for (const auto& counts : result.sample_audit) {
      json task_counts = json::object();
      for (const auto& [row, n] : counts) task_counts[std::to_string(row)] = n;
      audit.push_back(task_counts);
    }
    doc["sample_audit"] = audit;
  }
  {
    std::ofstream out(fs::path(dir) / "run.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + dir + "/run.json");
    out << doc.dump(2) << "\n";
  }
  {
    json timing;
    timing["schema_version"] = result.schema_version;
    json walls = json::array();
    for (const auto& e : result.ledger) walls.push_back(e.wall_seconds);
    timing["wall_seconds"] = walls;
    std::ofstream out(fs::path(dir) / "timing.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + dir + "/timing.json");
    out << timing.dump(2) << "\n";
  }

  // Append-only index; a run re-persisted into the same directory keeps its
  // single entry.
  const std::string rel =
      fs::relative(fs::path(dir), fs::path(out_root)).string();
  bool already_listed = false;
  for (const auto& entry : read_index(out_root))
    if (entry.dir == rel) {
      already_listed = true;
      break;
    }
  if (!already_listed) {
    json line = {
        {"dir", rel},
        {"scenario", result.scenario},
        {"strategy", result.strategy},
        {"seed", result.seed},
        {"config_hash", hash_hex_of(result.config_json)},
    };
    std::ofstream out(fs::path(out_root) / "index.jsonl", std::ios::app);
    if (!out) throw IoError("cannot append to index.jsonl");
    out << line.dump() << "\n";
  }
  return dir;
}

RunResult load_run(const std::string& run_dir) {
  const std::string run_path = (fs::path(run_dir) / "run.json").string();
  std::ifstream in(run_path);
  if (!in) throw IoError("cannot open " + run_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(run_path + ": " + e.what());
  }
  RunResult r;
  try {
    r.schema_version = doc.at("schema_version").get<int>();
    r.config_json = doc.at("config").dump();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.scenario = doc.at("scenario").get<std::string>();
    r.strategy = doc.at("strategy").get<std::string>();
    r.accuracy_matrix = doc.at("accuracy_matrix").get<std::vector<std::vector<Scalar>>>();
    r.per_increment = doc.at("per_increment").get<std::vector<Scalar>>();
    r.mean = doc.at("mean").get<Scalar>();
    r.min = doc.at("min").get<Scalar>();
    for (const auto& e : doc.at("ledger")) {
      TaskLedgerEntry entry;
      entry.task = e.at("task").get<int>();
      entry.steps = e.at("steps").get<long long>();
      entry.epochs_run = e.at("epochs_run").get<int>();
      entry.current_pool = e.at("current_pool").get<long long>();
      entry.replay_pool = e.at("replay_pool").get<long long>();
      entry.trained_samples = e.at("trained_samples").get<long long>();
      entry.buffer_draws = e.at("buffer_draws").get<long long>();
      entry.generated = e.at("generated").get<long long>();
      r.ledger.push_back(entry);
    }
    if (doc.contains("sample_audit"))
      for (const auto& task_counts : doc.at("sample_audit")) {
        std::map<Index, long long> counts;
        for (const auto& [row, n] : task_counts.items())
          counts[static_cast<Index>(std::stoll(row))] = n.get<long long>();
        r.sample_audit.push_back(std::move(counts));
      }
  } catch (const json::exception& e) {
    throw FormatError(run_path + ": malformed run document: " + e.what());
  }

  const std::string timing_path = (fs::path(run_dir) / "timing.json").string();
  if (fs::exists(timing_path)) {
    std::ifstream tin(timing_path);
    json timing;
    try {
      timing = json::parse(tin);
      const auto walls = timing.at("wall_seconds").get<std::vector<Scalar>>();
      for (std::size_t i = 0; i < walls.size() && i < r.ledger.size(); ++i)
        r.ledger[i].wall_seconds = walls[i];
    } catch (const json::exception& e) {
      throw FormatError(timing_path + ": " + e.what());
    }
  }
  return r;
}

std::vector<IndexEntry> read_index(const std::string& out_root) {
  std::vector<IndexEntry> out;
  const std::string path = (fs::path(out_root) / "index.jsonl").string();
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    IndexEntry entry;
    entry.dir = j.at("dir").get<std::string>();
    entry.scenario = j.at("scenario").get<std::string>();
    entry.strategy = j.at("strategy").get<std::string>();
    entry.seed = j.at("seed").get<std::uint64_t>();
    entry.config_hash = j.at("config_hash").get<std::string>();
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<RunResult> load_all_runs(const std::string& out_root) {
  std::vector<RunResult> out;
  for (const auto& entry : read_index(out_root))
    out.push_back(load_run((fs::path(out_root) / entry.dir).string()));
  return out;
}

} // namespace tabcl
