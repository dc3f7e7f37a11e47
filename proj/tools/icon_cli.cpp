// Command-line front end: dataset build, train, eval, ablate, sweep-gallery, report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "icon/dataset_io.hpp"
#include "icon/error.hpp"
#include "icon/harness.hpp"
#include "icon/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string dataset_dir;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string flags;
  std::vector<std::string> suites;
};

icon::RunConfig resolve_config(const Common& c, CLI::App* app) {
  icon::RunConfig cfg = c.config.empty() ? icon::RunConfig{} : icon::load_run_config(c.config);
  if (app->count("--seed")) cfg.seed = c.seed;
  if (app->count("--flags")) cfg.flags = icon::AblationFlags::parse(c.flags);
  return cfg;
}

icon::Dataset resolve_dataset(const Common& c, const icon::RunConfig& cfg) {
  if (!c.dataset_dir.empty()) return icon::load_dataset(c.dataset_dir);
  return icon::build_dataset(cfg.dataset);
}

std::vector<icon::PerturbationSpec> resolve_suites(const Common& c, bool default_when_empty) {
  std::vector<icon::PerturbationSpec> out;
  for (const std::string& s : c.suites) out.push_back(icon::parse_perturbation(s));
  if (out.empty() && default_when_empty) out = icon::default_perturbed_suites();
  return out;
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path);
  if (!out) throw icon::Error(icon::ErrorKind::kIoError, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

void print_summary(const icon::MetricsReport& r) {
  for (const icon::SuiteMetrics& s : r.suites) {
    std::cout << s.suite << ": mAP=" << s.metrics.map << " top1=" << s.metrics.top1 << " top5=" << s.metrics.top5
              << " top10=" << s.metrics.top10 << '\n';
  }
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ICON desk-scale laboratory"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub, bool with_suites) {
    sub->add_option("--config", c.config, "run config JSON");
    sub->add_option("--dataset", c.dataset_dir, "dataset directory (built from the config when omitted)");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "override the training seed");
    sub->add_option("--flags", c.flags, "enabled modules, e.g. A,B,C,D or none");
    if (with_suites) sub->add_option("--suite", c.suites, "perturbation suite kind:severity (repeatable)");
  };

  CLI::App* dataset = app.add_subcommand("dataset", "dataset tools");
  dataset->require_subcommand(1);
  CLI::App* build = dataset->add_subcommand("build", "generate and save the synthetic dataset");
  build->add_option("--config", c.config, "run config JSON (dataset section used)");
  build->add_option("--out", c.out, "output directory");
  build->add_option("--seed", c.seed, "override the dataset seed");

  CLI::App* train = app.add_subcommand("train", "train one model and evaluate it");
  add_common(train, true);
  int steps = -1;
  train->add_option("--steps", steps, "override the step count");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, true);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "FULL and w/o A..D over several seeds");
  add_common(ablate, true);
  std::string seeds = "42,43,44";
  ablate->add_option("--seeds", seeds, "comma-separated seeds");
  ablate->add_option("--steps", steps, "override the step count");

  CLI::App* sweep = app.add_subcommand("sweep-gallery", "mAP/top-1 against gallery size");
  add_common(sweep, false);
  sweep->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  std::string sizes = "25,50,100,200";
  int repeats = 5;
  sweep->add_option("--sizes", sizes, "comma-separated gallery sizes");
  sweep->add_option("--repeats", repeats, "random draws per size");

  CLI::App* report = app.add_subcommand("report", "plots and tables from saved results");
  std::string from;
  report->add_option("--from", from, "directory with metrics.json / ablation.json / sweep.json")->required();
  report->add_option("--out", c.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", e.what());
  }

  try {
    const fs::path out(c.out);
    if (*build) {
      icon::RunConfig cfg = c.config.empty() ? icon::RunConfig{} : icon::load_run_config(c.config);
      if (build->count("--seed")) cfg.dataset.seed = c.seed;
      const icon::Dataset ds = icon::build_dataset(cfg.dataset);
      icon::save_dataset(ds, out);
      std::cout << json{{"train_scenes", ds.train.size()},
                        {"gallery_scenes", ds.gallery.size()},
                        {"queries", ds.queries.size()},
                        {"config_hash", icon::dataset_hash(ds.config)}}
                       .dump()
                << '\n';
    } else if (*train) {
      icon::RunConfig cfg = resolve_config(c, train);
      if (steps >= 0) cfg.steps = steps;
      const icon::Dataset ds = resolve_dataset(c, cfg);
      const icon::RunOutcome run = icon::train_and_evaluate(cfg, ds, resolve_suites(c, true), out);
      write_json(out / "run_config.json", icon::to_json(run.training.config));
      print_summary(run.report);
    } else if (*eval) {
      const icon::RunConfig cfg = resolve_config(c, eval);
      const icon::Dataset ds = resolve_dataset(c, cfg);
      const icon::MetricsReport r = icon::evaluate_checkpoint(checkpoint, ds, resolve_suites(c, false));
      icon::write_metrics_files(r, out);
      print_summary(r);
    } else if (*ablate) {
      icon::RunConfig cfg = resolve_config(c, ablate);
      if (steps >= 0) cfg.steps = steps;
      const icon::Dataset ds = resolve_dataset(c, cfg);
      std::vector<std::uint64_t> seed_list;
      for (int s : parse_ints(seeds)) seed_list.push_back(static_cast<std::uint64_t>(s));
      const auto rows = icon::ablate(cfg, ds, seed_list, resolve_suites(c, true), out, [](const icon::AblationRow& r) {
        std::cout << r.variant << " seed=" << r.seed << " clean_mAP=" << r.clean_map
                  << " perturbed_mAP=" << r.perturbed_map << std::endl;
      });
      write_json(out / "ablation.json", icon::to_json(rows));
      icon::write_report({std::nullopt, rows, {}, {}, 0}, out);
    } else if (*sweep) {
      const icon::RunConfig cfg = resolve_config(c, sweep);
      const icon::Dataset ds = resolve_dataset(c, cfg);
      const icon::LoadedCheckpoint ck = icon::load_checkpoint(checkpoint);
      if (ck.config_hash != icon::dataset_hash(ds.config)) {
        throw icon::Error(icon::ErrorKind::kCheckpointMismatch, "checkpoint was trained on another dataset");
      }
      const auto rows = icon::gallery_size_sweep(ck.params, ds, parse_ints(sizes), cfg.seed, repeats);
      const std::string hash = ck.metadata.value("run_hash", ck.config_hash);
      write_json(out / "sweep.json", icon::to_json(rows, hash, cfg.seed));
      for (const icon::SweepRow& r : rows) std::cout << r.size << ": mAP=" << r.map << " top1=" << r.top1 << '\n';
    } else if (*report) {
      const icon::ReportOutput r = icon::write_report(icon::load_report_inputs(from), out);
      for (const std::string& n : r.notices) std::cerr << "notice: " << n << '\n';
      for (const fs::path& p : r.written) std::cout << p.string() << '\n';
    }
  } catch (const icon::Error& e) {
    return fail(std::string(icon::error_kind_name(e.kind())), e.what());
  } catch (const std::exception& e) {
    return fail("InternalError", e.what());
  }
  return 0;
}
