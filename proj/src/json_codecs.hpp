#ifndef TABCL_SRC_JSON_CODECS_HPP
#define TABCL_SRC_JSON_CODECS_HPP

// Private JSON (de)serializers shared by checkpointing, run persistence and
// the CLI config loader.

#include "tabcl/data/dataset.hpp"
#include "tabcl/model/merged.hpp"
#include "tabcl/model/mlp.hpp"
#include "tabcl/model/optimizer.hpp"
#include "tabcl/model/vae.hpp"

#include <nlohmann/json.hpp>

namespace tabcl {

inline nlohmann::json mlp_config_to_json(const MLPConfig& cfg) {
  return {
      {"hidden_widths", cfg.hidden_widths},
      {"dropout_rate", cfg.dropout_rate},
      {"use_batch_norm", cfg.use_batch_norm},
      {"activation", cfg.activation},
      {"input_dim", cfg.input_dim},
      {"n_output_units", cfg.n_output_units},
  };
}

inline MLPConfig mlp_config_from_json(const nlohmann::json& j) {
  MLPConfig cfg;
  cfg.hidden_widths = j.value("hidden_widths", cfg.hidden_widths);
  cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
  cfg.use_batch_norm = j.value("use_batch_norm", cfg.use_batch_norm);
  cfg.activation = j.value("activation", cfg.activation);
  cfg.input_dim = j.value("input_dim", Index{0});
  cfg.n_output_units = j.value("n_output_units", Index{0});
  return cfg;
}

inline nlohmann::json optimizer_spec_to_json(const OptimizerSpec& s) {
  return {
      {"kind", to_string(s.kind)},
      {"learning_rate", s.learning_rate},
      {"momentum", s.momentum},
      {"weight_decay", s.weight_decay},
      {"beta1", s.beta1},
      {"beta2", s.beta2},
      {"adam_eps", s.adam_eps},
  };
}

inline OptimizerSpec optimizer_spec_from_json(const nlohmann::json& j) {
  OptimizerSpec s;
  s.kind = optimizer_kind_from_string(j.value("kind", "sgd"));
  s.learning_rate = j.value("learning_rate", 0.01);
  s.momentum = j.value("momentum", 0.9);
  s.weight_decay = j.value("weight_decay", 0.0);
  s.beta1 = j.value("beta1", 0.9);
  s.beta2 = j.value("beta2", 0.999);
  s.adam_eps = j.value("adam_eps", 1e-8);
  return s;
}

inline nlohmann::json merged_config_to_json(const MergedConfig& cfg) {
  return {
      {"classifier", mlp_config_to_json(cfg.classifier)},
      {"latent_dim", cfg.latent_dim},
      {"internal_replay_layer", cfg.internal_replay_layer},
      {"prior", cfg.prior == LatentPrior::gaussian_mixture ? "gaussian_mixture"
                                                           : "standard_normal"},
      {"n_modes", cfg.n_modes},
      {"gating", cfg.gating},
      {"gate_fraction", cfg.gate_fraction},
      {"recon_kind", cfg.recon_kind == FeatureKind::boolean ? "boolean" : "real"},
      {"logvar_clamp", cfg.logvar_clamp},
  };
}

inline MergedConfig merged_config_from_json(const nlohmann::json& j) {
  MergedConfig cfg;
  cfg.classifier = mlp_config_from_json(j.at("classifier"));
  cfg.latent_dim = j.at("latent_dim").get<Index>();
  cfg.internal_replay_layer = j.at("internal_replay_layer").get<int>();
  cfg.prior = j.at("prior").get<std::string>() == "gaussian_mixture"
                  ? LatentPrior::gaussian_mixture
                  : LatentPrior::standard_normal;
  cfg.n_modes = j.at("n_modes").get<int>();
  cfg.gating = j.at("gating").get<bool>();
  cfg.gate_fraction = j.at("gate_fraction").get<Scalar>();
  cfg.recon_kind = j.at("recon_kind").get<std::string>() == "boolean"
                       ? FeatureKind::boolean
                       : FeatureKind::real;
  cfg.logvar_clamp = j.at("logvar_clamp").get<Scalar>();
  return cfg;
}

} // namespace tabcl

#endif
