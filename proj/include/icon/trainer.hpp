#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "icon/run_config.hpp"

namespace icon {

struct LossRow {
  long step = 0;
  double sdm = 0.0;
  double oim = 0.0;
  double reg = 0.0;
  double cf = 0.0;
  double total = 0.0;
  double learning_rate = 0.0;
};

struct InterventionRow {
  long step = 0;
  int scene_id = 0;
  double iou = 0.0;
  double visibility = 0.0;
  double s_adv = 0.0;
  double s_geo = 0.0;
  double s_stab = 0.0;
  double j = 0.0;
};

struct AssignmentRow {
  long step = 0;
  std::vector<int> permutation;
  double cost = 0.0;
};

struct WeightRow {
  long step = 0;
  std::string side;  // "image" / "text"
  double min = 0.0;
  double max = 0.0;
  double entropy = 0.0;
};

struct TrainLogs {
  std::vector<LossRow> losses;
  std::vector<InterventionRow> interventions;
  std::vector<AssignmentRow> assignments;
  std::vector<WeightRow> weights;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  std::function<void(const LossRow&)> on_step;
};

struct TrainResult {
  RunConfig config;  // with the model vocabulary filled in
  ModelParams initial;
  ModelParams params;
  TrainLogs logs;
  std::string run_hash;
  std::string dataset_hash;
};

// Linear warm-up over the first warmup_fraction of steps, then ×decay_factor
// from decay_at onwards.
double scheduled_learning_rate(const OptimizerSettings& opt, long step, long total_steps);

// Throws NonFiniteLoss and propagates module errors.
TrainResult train(const RunConfig& config, const Dataset& dataset, const TrainOptions& options = {});

// loss_log.csv, intervention_log.csv, weight_log.csv and, when non-empty,
// assignment_log.csv.
void write_train_logs(const TrainLogs& logs, const std::filesystem::path& dir);

}  // namespace icon
