#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "icon/evaluation.hpp"
#include "icon/run_config.hpp"
#include "icon/trainer.hpp"

namespace icon {

struct SuiteMetrics {
  std::string suite;  // "clean" or kind:severity
  EvalMetrics metrics;
};

struct SimilaritySnapshot {
  std::vector<double> positive;
  std::vector<double> hardest_negative;
  double median_gap = 0.0;
};

struct MetricsReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string variant;
  std::vector<SuiteMetrics> suites;  // clean first
  SimilaritySnapshot before;         // step 0 (random init); empty when unknown
  SimilaritySnapshot after;
  std::vector<LossRow> loss_curve;

  const SuiteMetrics* find(const std::string& suite) const;
  // Mean mAP over the non-clean suites; clean mAP when there are none.
  double perturbed_mean_map() const;
};

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

SimilaritySnapshot similarity_snapshot(const EvalMetrics& clean);

// box_jitter:0.2, occlusion:0.3, background_swap:1.
std::vector<PerturbationSpec> default_perturbed_suites(std::uint64_t seed = 7);

// Clean evaluation followed by each suite, each on a freshly perturbed gallery.
MetricsReport evaluate(const ModelParams& params, const Dataset& dataset, const std::vector<PerturbationSpec>& suites,
                       const std::string& config_hash, std::uint64_t seed);

// Throws CheckpointMismatch when the checkpoint was trained on another dataset config.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint_dir, const Dataset& dataset,
                                  const std::vector<PerturbationSpec>& suites);

struct RunOutcome {
  TrainResult training;
  MetricsReport report;
};

// Trains, evaluates clean + suites and records the before/after similarity gap.
// With a non-empty out_dir the checkpoint, logs and metrics are written there.
RunOutcome train_and_evaluate(const RunConfig& config, const Dataset& dataset,
                              const std::vector<PerturbationSpec>& suites, const std::filesystem::path& out_dir = {});

struct AblationVariant {
  std::string name;  // FULL, w/o A, ...
  AblationFlags flags;
};

std::vector<AblationVariant> ablation_variants();

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::string config_hash;
  double clean_map = 0.0;
  double clean_top1 = 0.0;
  double perturbed_map = 0.0;
  std::vector<std::pair<std::string, double>> suite_map;
};

// Five variants per seed, in ablation_variants() order.
std::vector<AblationRow> ablate(const RunConfig& base, const Dataset& dataset, const std::vector<std::uint64_t>& seeds,
                                const std::vector<PerturbationSpec>& suites,
                                const std::filesystem::path& out_dir = {},
                                const std::function<void(const AblationRow&)>& on_row = {});

nlohmann::json to_json(const std::vector<AblationRow>& rows);
std::vector<AblationRow> ablation_rows_from_json(const nlohmann::json& j);

nlohmann::json to_json(const std::vector<SweepRow>& rows, const std::string& config_hash, std::uint64_t seed);

// Held-out reconstruction error with the paired description versus a
// description of a different identity, per gallery person.
struct BottleneckCheck {
  std::vector<double> paired;
  std::vector<double> mismatched;
  int wins = 0;    // paired strictly lower
  int losses = 0;  // paired strictly higher
  double p_value = 1.0;  // one-sided sign test
};

BottleneckCheck causal_bottleneck_check(const ModelParams& params, const Dataset& dataset, const RunConfig& config,
                                        int samples, std::uint64_t seed);

// P(X ≥ wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p_value(int wins, int losses);

}  // namespace icon
