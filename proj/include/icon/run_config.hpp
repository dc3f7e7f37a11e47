#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "icon/context_disentanglement.hpp"
#include "icon/losses.hpp"
#include "icon/semantic_regularization.hpp"
#include "icon/spatial_intervention.hpp"
#include "icon/synthetic_data.hpp"
#include "icon/toy_model.hpp"

namespace icon {

// Module switches: A spatial intervention, B context disentanglement,
// C semantic regularization, D prototype alignment.
struct AblationFlags {
  bool a = true;
  bool b = true;
  bool c = true;
  bool d = true;

  // "A,B,C,D" style; "none" or "" for all off.
  static AblationFlags parse(const std::string& text);
  std::string label() const;  // "A,B,D", "none"
  bool operator==(const AblationFlags&) const = default;
};

struct ContextSettings {
  double foreground_ratio = 0.5;
  ActivationRanking ranking = ActivationRanking::kColumnMean;
  bool derangement = true;
  bool forbid_same_pid = false;
};

struct SaliencySettings {
  double mask_ratio = 0.5;
  SaliencyCombination combination = SaliencyCombination::kProduct;
  ReconstructionScoring scoring = ReconstructionScoring::kMaskedOnly;
  bool detach_target = true;  // stop-gradient on F_orig
};

struct PrototypeSettings {
  double epsilon = 0.05;
  double gamma = 0.5;
};

struct OimSettings {
  int queue_size = 64;
  double sigma = 1.0 / 30.0;
  double momentum = 0.5;
  int distractors_per_step = 2;
};

struct OptimizerSettings {
  std::string kind = "adam";  // "adam" or "sgd"
  double learning_rate = 1e-3;
  double warmup_fraction = 0.1;
  double decay_at = 0.6;
  double decay_factor = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 5.0;  // global norm; 0 disables
};

struct RunConfig {
  DatasetConfig dataset;
  ModelConfig model;
  InterventionConfig intervention;
  ContextSettings context;
  SaliencySettings saliency;
  PrototypeSettings prototype;
  LossWeights lambdas;
  OimSettings oim;
  double sdm_temperature = 0.05;
  OptimizerSettings optimizer;
  int batch_size = 8;
  int instances_per_identity = 2;
  int steps = 5000;
  std::uint64_t seed = 42;
  AblationFlags flags;
  int checkpoint_interval = 0;  // 0: final checkpoint only
  bool verbose_assignment = false;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
std::string run_config_hash(const RunConfig& config);
std::string dataset_hash(const DatasetConfig& config);

}  // namespace icon
