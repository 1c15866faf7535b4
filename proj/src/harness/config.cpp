#include "tabcl/harness/config.hpp"

#include "tabcl/errors.hpp"
#include "../json_codecs.hpp"

#include <set>
#include <sstream>

namespace tabcl {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

json strategy_params_to_json(const StrategyParams& p) {
  return {
      {"lambda", p.lambda},
      {"gamma", p.gamma},
      {"si_c", p.si_c},
      {"si_xi", p.si_xi},
      {"lwf_lambda0", p.lwf_lambda0},
      {"temperature", p.temperature},
      {"fisher_samples", p.fisher_samples},
      {"fisher_mode", p.fisher_mode},
      {"er_capacity", p.er_capacity},
      {"agem_capacity", p.agem_capacity},
      {"icarl_capacity", p.icarl_capacity},
      {"pjr_fraction", p.pjr_fraction},
      {"generative_weight", p.generative_weight},
      {"vae_latent", p.vae_latent},
      {"vae_widths", p.vae_widths},
      {"gate_fraction", p.gate_fraction},
      {"internal_replay_layer", p.internal_replay_layer},
  };
}

StrategyParams strategy_params_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"lambda", "gamma", "si_c", "si_xi", "lwf_lambda0", "temperature",
                       "fisher_samples", "fisher_mode", "er_capacity", "agem_capacity",
                       "icarl_capacity", "pjr_fraction", "generative_weight", "vae_latent",
                       "vae_widths", "gate_fraction", "internal_replay_layer"},
                      "strategy_params");
  StrategyParams p;
  p.lambda = j.value("lambda", p.lambda);
  p.gamma = j.value("gamma", p.gamma);
  p.si_c = j.value("si_c", p.si_c);
  p.si_xi = j.value("si_xi", p.si_xi);
  p.lwf_lambda0 = j.value("lwf_lambda0", p.lwf_lambda0);
  p.temperature = j.value("temperature", p.temperature);
  p.fisher_samples = j.value("fisher_samples", p.fisher_samples);
  p.fisher_mode = j.value("fisher_mode", p.fisher_mode);
  p.er_capacity = j.value("er_capacity", p.er_capacity);
  p.agem_capacity = j.value("agem_capacity", p.agem_capacity);
  p.icarl_capacity = j.value("icarl_capacity", p.icarl_capacity);
  p.pjr_fraction = j.value("pjr_fraction", p.pjr_fraction);
  p.generative_weight = j.value("generative_weight", p.generative_weight);
  p.vae_latent = j.value("vae_latent", p.vae_latent);
  p.vae_widths = j.value("vae_widths", p.vae_widths);
  p.gate_fraction = j.value("gate_fraction", p.gate_fraction);
  p.internal_replay_layer = j.value("internal_replay_layer", p.internal_replay_layer);
  return p;
}

json synthetic_to_json(const SyntheticStreamConfig& s) {
  json births = json::object();
  for (const auto& [cls, month] : s.class_birth_month)
    births[std::to_string(cls)] = month;
  return {
      {"n_classes", s.n_classes},
      {"n_features", s.n_features},
      {"samples_per_class_per_month", s.samples_per_class_per_month},
      {"n_months", s.n_months},
      {"drift_magnitude", s.drift_magnitude},
      {"class_birth_month", births},
      {"seed", s.seed},
      {"class_separation", s.class_separation},
      {"noise_stddev", s.noise_stddev},
  };
}

SyntheticStreamConfig synthetic_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"n_classes", "n_features", "samples_per_class_per_month", "n_months",
                       "drift_magnitude", "class_birth_month", "seed", "class_separation",
                       "noise_stddev"},
                      "dataset.synthetic");
  SyntheticStreamConfig s;
  s.n_classes = j.value("n_classes", s.n_classes);
  s.n_features = j.value("n_features", s.n_features);
  s.samples_per_class_per_month =
      j.value("samples_per_class_per_month", s.samples_per_class_per_month);
  s.n_months = j.value("n_months", s.n_months);
  s.drift_magnitude = j.value("drift_magnitude", s.drift_magnitude);
  if (j.contains("class_birth_month"))
    for (const auto& [key, value] : j.at("class_birth_month").items())
      s.class_birth_month[std::stoi(key)] = value.get<int>();
  s.seed = j.value("seed", s.seed);
  s.class_separation = j.value("class_separation", s.class_separation);
  s.noise_stddev = j.value("noise_stddev", s.noise_stddev);
  return s;
}

std::string class_order_to_string(ClassOrder o) {
  switch (o) {
    case ClassOrder::frequency_desc: return "frequency_desc";
    case ClassOrder::label_order: return "label_order";
    case ClassOrder::shuffled: return "shuffled";
  }
  return "?";
}

ClassOrder class_order_from_string(const std::string& s) {
  if (s == "frequency_desc") return ClassOrder::frequency_desc;
  if (s == "label_order") return ClassOrder::label_order;
  if (s == "shuffled") return ClassOrder::shuffled;
  throw ConfigError("unknown class_order '" + s + "'");
}

} // namespace

std::string ExperimentConfig::strategy_label() const {
  if (strategy != StrategyKind::pjr) return to_string(strategy);
  std::ostringstream out;
  out << "pjr:" << params.pjr_fraction;
  return out.str();
}

std::string ExperimentConfig::strategy_path_label() const {
  std::string label = strategy_label();
  std::string out;
  for (const char c : label)
    if (c != ':') out.push_back(c);
  return out;
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json scenario = {
      {"kind", to_string(cfg.scenario.kind)},
      {"classes_per_task", cfg.scenario.classes_per_task},
      {"initial_classes", cfg.scenario.initial_classes},
      {"increment", cfg.scenario.increment},
      {"train_ratio", cfg.scenario.train_ratio},
      {"class_order", class_order_to_string(cfg.scenario.class_order)},
  };
  json dataset = {
      {"source", cfg.dataset.source == DatasetSpec::Source::synthetic ? "synthetic" : "file"},
      {"synthetic", synthetic_to_json(cfg.dataset.synthetic)},
      {"path", cfg.dataset.path},
      {"format", cfg.dataset.format == TabularFormat::csv          ? "csv"
                 : cfg.dataset.format == TabularFormat::jsonlines ? "jsonlines"
                                                                   : "binary_cache"},
  };
  json doc = {
      {"scenario", scenario},
      {"strategy", cfg.strategy_label()},
      {"strategy_params", strategy_params_to_json(cfg.params)},
      {"dataset", dataset},
      {"model", mlp_config_to_json(cfg.model)},
      {"optimizer", optimizer_spec_to_json(cfg.optimizer)},
      {"batch_size", cfg.batch_size},
      {"epochs_per_task", cfg.epochs_per_task},
      {"early_stopping",
       {{"patience", cfg.early_stopping.patience},
        {"holdout_fraction", cfg.early_stopping.holdout_fraction}}},
      {"variance_threshold", cfg.variance_threshold},
      {"standardize", cfg.standardize},
      {"audit_samples", cfg.audit_samples},
      {"seed", cfg.seed},
  };
  if (cfg.early_stopping_enabled.has_value())
    doc["early_stopping_enabled"] = *cfg.early_stopping_enabled;
  return doc.dump();
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(doc,
                      {"scenario", "strategy", "strategy_params", "dataset", "model",
                       "optimizer", "batch_size", "epochs_per_task", "early_stopping",
                       "early_stopping_enabled", "variance_threshold", "standardize",
                       "audit_samples", "seed"},
                      "config");
  ExperimentConfig cfg;
  if (doc.contains("scenario")) {
    const json& s = doc.at("scenario");
    reject_unknown_keys(s,
                        {"kind", "classes_per_task", "initial_classes", "increment",
                         "train_ratio", "class_order"},
                        "scenario");
    cfg.scenario.kind = scenario_from_string(s.value("kind", "class_il"));
    cfg.scenario.classes_per_task = s.value("classes_per_task", cfg.scenario.classes_per_task);
    cfg.scenario.initial_classes = s.value("initial_classes", cfg.scenario.initial_classes);
    cfg.scenario.increment = s.value("increment", cfg.scenario.increment);
    cfg.scenario.train_ratio = s.value("train_ratio", cfg.scenario.train_ratio);
    cfg.scenario.class_order =
        class_order_from_string(s.value("class_order", "frequency_desc"));
  }
  if (doc.contains("strategy")) {
    Scalar fraction = cfg.params.pjr_fraction;
    cfg.strategy = strategy_kind_from_string(doc.at("strategy").get<std::string>(), &fraction);
    cfg.params.pjr_fraction = fraction;
  }
  if (doc.contains("strategy_params")) {
    const Scalar fraction_from_label = cfg.params.pjr_fraction;
    const bool label_had_fraction =
        doc.contains("strategy") &&
        doc.at("strategy").get<std::string>().find(':') != std::string::npos;
    cfg.params = strategy_params_from_json(doc.at("strategy_params"));
    if (label_had_fraction) cfg.params.pjr_fraction = fraction_from_label;
  }
  if (doc.contains("dataset")) {
    const json& d = doc.at("dataset");
    reject_unknown_keys(d, {"source", "synthetic", "path", "format"}, "dataset");
    const std::string source = d.value("source", "synthetic");
    if (source == "synthetic")
      cfg.dataset.source = DatasetSpec::Source::synthetic;
    else if (source == "file")
      cfg.dataset.source = DatasetSpec::Source::file;
    else
      throw ConfigError("unknown dataset source '" + source + "'");
    if (d.contains("synthetic")) cfg.dataset.synthetic = synthetic_from_json(d.at("synthetic"));
    cfg.dataset.path = d.value("path", "");
    const std::string format = d.value("format", "csv");
    if (format == "csv")
      cfg.dataset.format = TabularFormat::csv;
    else if (format == "jsonlines")
      cfg.dataset.format = TabularFormat::jsonlines;
    else if (format == "binary_cache")
      cfg.dataset.format = TabularFormat::binary_cache;
    else
      throw ConfigError("unknown dataset format '" + format + "'");
  }
  if (doc.contains("model")) {
    reject_unknown_keys(doc.at("model"),
                        {"hidden_widths", "dropout_rate", "use_batch_norm", "activation",
                         "input_dim", "n_output_units"},
                        "model");
    cfg.model = mlp_config_from_json(doc.at("model"));
  }
  if (doc.contains("optimizer")) {
    reject_unknown_keys(doc.at("optimizer"),
                        {"kind", "learning_rate", "momentum", "weight_decay", "beta1",
                         "beta2", "adam_eps"},
                        "optimizer");
    cfg.optimizer = optimizer_spec_from_json(doc.at("optimizer"));
  }
  cfg.batch_size = doc.value("batch_size", cfg.batch_size);
  cfg.epochs_per_task = doc.value("epochs_per_task", cfg.epochs_per_task);
  if (doc.contains("early_stopping_enabled"))
    cfg.early_stopping_enabled = doc.at("early_stopping_enabled").get<bool>();
  if (doc.contains("early_stopping")) {
    const json& e = doc.at("early_stopping");
    reject_unknown_keys(e, {"patience", "holdout_fraction"}, "early_stopping");
    cfg.early_stopping.patience = e.value("patience", cfg.early_stopping.patience);
    cfg.early_stopping.holdout_fraction =
        e.value("holdout_fraction", cfg.early_stopping.holdout_fraction);
  }
  cfg.variance_threshold = doc.value("variance_threshold", cfg.variance_threshold);
  cfg.standardize = doc.value("standardize", cfg.standardize);
  cfg.audit_samples = doc.value("audit_samples", cfg.audit_samples);
  cfg.seed = doc.value("seed", cfg.seed);
  return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string canonical = experiment_config_to_json(cfg);
  return fnv1a_hash(canonical.data(), canonical.size());
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return std::string(buf, 16);
}

} // namespace tabcl
