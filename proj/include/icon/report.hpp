#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icon/harness.hpp"

namespace icon {

// metrics.json (full report), summary.json (per suite mAP/top-k with config
// hash) and per_query.csv (suite, query_id, AP, first_hit_rank, config_hash, seed).
void write_metrics_files(const MetricsReport& report, const std::filesystem::path& dir);

struct ReportInputs {
  std::optional<MetricsReport> metrics;
  std::vector<AblationRow> ablation;
  std::vector<SweepRow> sweep;
  std::string sweep_hash;
  std::uint64_t sweep_seed = 0;
};

// Reads metrics.json, ablation.json and sweep.json from `dir` when present.
ReportInputs load_report_inputs(const std::filesystem::path& dir);

struct ReportOutput {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> notices;  // skipped plots
};

// SVG plots (similarity gap, robustness, sweep, loss curves) and CSV tables.
ReportOutput write_report(const ReportInputs& inputs, const std::filesystem::path& dir);

}  // namespace icon
