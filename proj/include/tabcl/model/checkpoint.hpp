#ifndef TABCL_MODEL_CHECKPOINT_HPP
#define TABCL_MODEL_CHECKPOINT_HPP

#include "tabcl/model/merged.hpp"
#include "tabcl/model/mlp.hpp"
#include "tabcl/model/optimizer.hpp"

#include <string>

namespace tabcl {

// Versioned binary checkpoints: model config, flat parameter vector,
// batch-norm running statistics, optimizer state and (for the merged model)
// the gating-mask registry.

void save_checkpoint(const std::string& path, ClassifierModel& model,
                     const Optimizer* opt = nullptr);
ClassifierModel load_classifier_checkpoint(const std::string& path,
                                           Optimizer* opt = nullptr);

void save_checkpoint(const std::string& path, MergedGenerativeClassifier& model,
                     const Optimizer* opt = nullptr);
MergedGenerativeClassifier load_merged_checkpoint(const std::string& path,
                                                  Optimizer* opt = nullptr);

} // namespace tabcl

#endif
