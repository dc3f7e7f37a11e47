#include "icon/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "icon/dataset_io.hpp"
#include "icon/error.hpp"
#include "icon/report.hpp"
#include "icon/rng.hpp"

namespace icon {
namespace {

using nlohmann::json;

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json snapshot_json(const SimilaritySnapshot& s) {
  return {{"positive", s.positive}, {"hardest_negative", s.hardest_negative}, {"median_gap", s.median_gap}};
}

SimilaritySnapshot snapshot_from(const json& j) {
  SimilaritySnapshot s;
  s.positive = j.value("positive", std::vector<double>{});
  s.hardest_negative = j.value("hardest_negative", std::vector<double>{});
  s.median_gap = j.value("median_gap", 0.0);
  return s;
}

}  // namespace

const SuiteMetrics* MetricsReport::find(const std::string& suite) const {
  for (const SuiteMetrics& s : suites)
    if (s.suite == suite) return &s;
  return nullptr;
}

double MetricsReport::perturbed_mean_map() const {
  double sum = 0.0;
  int n = 0;
  for (const SuiteMetrics& s : suites) {
    if (s.suite == "clean") continue;
    sum += s.metrics.map;
    ++n;
  }
  if (n == 0) return suites.empty() ? 0.0 : suites.front().metrics.map;
  return sum / n;
}

json to_json(const MetricsReport& r) {
  json suites = json::array();
  for (const SuiteMetrics& s : r.suites) {
    json per_query = json::array();
    for (const QueryResult& q : s.metrics.per_query) {
      per_query.push_back({{"query_id", q.query_id},
                           {"ap", q.ap},
                           {"first_hit_rank", q.first_hit},
                           {"positive_similarity", q.positive_similarity},
                           {"hardest_negative", q.hardest_negative}});
    }
    suites.push_back({{"suite", s.suite},
                      {"mAP", s.metrics.map},
                      {"top1", s.metrics.top1},
                      {"top5", s.metrics.top5},
                      {"top10", s.metrics.top10},
                      {"median_gap", s.metrics.median_similarity_gap()},
                      {"per_query", per_query}});
  }
  json losses = json::array();
  for (const LossRow& l : r.loss_curve) {
    losses.push_back({l.step, l.sdm, l.oim, l.reg, l.cf, l.total, l.learning_rate});
  }
  return {{"config_hash", r.config_hash}, {"seed", r.seed},  {"variant", r.variant},
          {"suites", suites},             {"before", snapshot_json(r.before)},
          {"after", snapshot_json(r.after)}, {"loss_curve", losses}};
}

MetricsReport metrics_report_from_json(const json& j) {
  MetricsReport r;
  try {
    r.config_hash = j.value("config_hash", std::string());
    r.seed = j.value("seed", std::uint64_t{0});
    r.variant = j.value("variant", std::string());
    for (const json& s : j.value("suites", json::array())) {
      SuiteMetrics m;
      m.suite = s.at("suite").get<std::string>();
      m.metrics.map = s.at("mAP").get<double>();
      m.metrics.top1 = s.at("top1").get<double>();
      m.metrics.top5 = s.at("top5").get<double>();
      m.metrics.top10 = s.at("top10").get<double>();
      for (const json& q : s.value("per_query", json::array())) {
        m.metrics.per_query.push_back({q.at("query_id").get<int>(), q.at("ap").get<double>(),
                                       q.at("first_hit_rank").get<int>(), q.at("positive_similarity").get<double>(),
                                       q.at("hardest_negative").get<double>()});
      }
      r.suites.push_back(std::move(m));
    }
    if (j.contains("before")) r.before = snapshot_from(j.at("before"));
    if (j.contains("after")) r.after = snapshot_from(j.at("after"));
    for (const json& l : j.value("loss_curve", json::array())) {
      r.loss_curve.push_back({l.at(0).get<long>(), l.at(1).get<double>(), l.at(2).get<double>(), l.at(3).get<double>(),
                              l.at(4).get<double>(), l.at(5).get<double>(), l.at(6).get<double>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfigError, std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

SimilaritySnapshot similarity_snapshot(const EvalMetrics& clean) {
  SimilaritySnapshot s;
  for (const QueryResult& q : clean.per_query) {
    s.positive.push_back(q.positive_similarity);
    s.hardest_negative.push_back(q.hardest_negative);
  }
  s.median_gap = median_of(s.positive) - median_of(s.hardest_negative);
  return s;
}

std::vector<PerturbationSpec> default_perturbed_suites(std::uint64_t seed) {
  return {{PerturbationKind::kBoxJitter, 0.2, seed},
          {PerturbationKind::kOcclusion, 0.3, seed},
          {PerturbationKind::kBackgroundSwap, 1.0, seed}};
}

MetricsReport evaluate(const ModelParams& params, const Dataset& ds, const std::vector<PerturbationSpec>& suites,
                       const std::string& config_hash, std::uint64_t seed) {
  MetricsReport r;
  r.config_hash = config_hash;
  r.seed = seed;
  const ad::Matrix queries = encode_queries(ds.queries, ds.vocab, params);
  auto run = [&](const PerturbationSpec& spec) {
    return evaluate_retrieval(queries, ds.queries, encode_gallery(ds.gallery, params, spec), ds.gallery);
  };
  r.suites.push_back({"clean", run({})});
  for (const PerturbationSpec& spec : suites) r.suites.push_back({spec.label(), run(spec)});
  r.after = similarity_snapshot(r.suites.front().metrics);
  return r;
}

MetricsReport evaluate_checkpoint(const std::filesystem::path& dir, const Dataset& ds,
                                  const std::vector<PerturbationSpec>& suites) {
  const LoadedCheckpoint ck = load_checkpoint(dir);
  const std::string expected = dataset_hash(ds.config);
  if (ck.config_hash != expected) {
    throw Error(ErrorKind::kCheckpointMismatch,
                "checkpoint dataset hash " + ck.config_hash + " differs from dataset hash " + expected);
  }
  const std::string run_hash = ck.metadata.value("run_hash", ck.config_hash);
  std::uint64_t seed = 0;
  if (ck.metadata.contains("run_config")) seed = ck.metadata["run_config"].value("seed", std::uint64_t{0});
  MetricsReport r = evaluate(ck.params, ds, suites, run_hash, seed);
  if (ck.metadata.contains("run_config") && ck.metadata["run_config"].contains("flags")) {
    r.variant = ck.metadata["run_config"]["flags"].get<std::string>();
  }
  return r;
}

RunOutcome train_and_evaluate(const RunConfig& config, const Dataset& ds, const std::vector<PerturbationSpec>& suites,
                              const std::filesystem::path& out_dir) {
  RunOutcome out;
  out.training = train(config, ds, TrainOptions{out_dir, {}});
  out.report = evaluate(out.training.params, ds, suites, out.training.run_hash, config.seed);
  out.report.variant = config.flags.label();
  out.report.loss_curve = out.training.logs.losses;
  {
    const ad::Matrix queries = encode_queries(ds.queries, ds.vocab, out.training.initial);
    out.report.before = similarity_snapshot(
        evaluate_retrieval(queries, ds.queries, encode_gallery(ds.gallery, out.training.initial), ds.gallery));
  }
  if (!out_dir.empty()) write_metrics_files(out.report, out_dir);
  return out;
}

std::vector<AblationVariant> ablation_variants() {
  return {{"FULL", AblationFlags{true, true, true, true}},
          {"w/o A", AblationFlags{false, true, true, true}},
          {"w/o B", AblationFlags{true, false, true, true}},
          {"w/o C", AblationFlags{true, true, false, true}},
          {"w/o D", AblationFlags{true, true, true, false}}};
}

std::vector<AblationRow> ablate(const RunConfig& base, const Dataset& ds, const std::vector<std::uint64_t>& seeds,
                                const std::vector<PerturbationSpec>& suites, const std::filesystem::path& out_dir,
                                const std::function<void(const AblationRow&)>& on_row) {
  if (seeds.empty()) throw Error(ErrorKind::kConfigError, "ablation needs at least one seed");
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    for (const AblationVariant& v : ablation_variants()) {
      RunConfig cfg = base;
      cfg.seed = seed;
      cfg.flags = v.flags;
      std::filesystem::path dir;
      if (!out_dir.empty()) {
        std::string slug = v.name;
        std::replace(slug.begin(), slug.end(), '/', '_');
        std::replace(slug.begin(), slug.end(), ' ', '_');
        dir = out_dir / ("seed_" + std::to_string(seed)) / slug;
      }
      const RunOutcome run = train_and_evaluate(cfg, ds, suites, dir);
      AblationRow row;
      row.variant = v.name;
      row.seed = seed;
      row.config_hash = run.report.config_hash;
      row.clean_map = run.report.suites.front().metrics.map;
      row.clean_top1 = run.report.suites.front().metrics.top1;
      row.perturbed_map = run.report.perturbed_mean_map();
      for (const SuiteMetrics& s : run.report.suites) row.suite_map.emplace_back(s.suite, s.metrics.map);
      rows.push_back(row);
      if (on_row) on_row(row);
    }
  }
  return rows;
}

nlohmann::json to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const AblationRow& r : rows) {
    json suites = json::object();
    for (const auto& [name, map] : r.suite_map) suites[name] = map;
    out.push_back({{"variant", r.variant},
                   {"seed", r.seed},
                   {"config_hash", r.config_hash},
                   {"clean_mAP", r.clean_map},
                   {"clean_top1", r.clean_top1},
                   {"perturbed_mAP", r.perturbed_map},
                   {"suite_mAP", suites}});
  }
  return out;
}

std::vector<AblationRow> ablation_rows_from_json(const nlohmann::json& j) {
  std::vector<AblationRow> rows;
  for (const json& r : j) {
    AblationRow row;
    row.variant = r.at("variant").get<std::string>();
    row.seed = r.at("seed").get<std::uint64_t>();
    row.config_hash = r.at("config_hash").get<std::string>();
    row.clean_map = r.at("clean_mAP").get<double>();
    row.clean_top1 = r.at("clean_top1").get<double>();
    row.perturbed_map = r.at("perturbed_mAP").get<double>();
    for (const auto& [name, v] : r.at("suite_mAP").items()) row.suite_map.emplace_back(name, v.get<double>());
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const std::vector<SweepRow>& rows, const std::string& config_hash, std::uint64_t seed) {
  json out = json::array();
  for (const SweepRow& r : rows) {
    out.push_back({{"size", r.size}, {"mAP", r.map}, {"top1", r.top1}, {"config_hash", config_hash}, {"seed", seed}});
  }
  return out;
}

double sign_test_p_value(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  // Σ_{k ≥ wins} C(n, k) / 2^n, accumulated in log space.
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

BottleneckCheck causal_bottleneck_check(const ModelParams& params, const Dataset& ds, const RunConfig& cfg,
                                        int samples, std::uint64_t seed) {
  ad::NoGradGuard no_grad;
  BottleneckCheck check;
  Rng rng(derive_seed(seed, {11}));
  for (const SceneRecord& scene : ds.gallery) {
    for (const PersonAnnotation& person : scene.persons) {
      if (static_cast<int>(check.paired.size()) >= samples) break;
      const ImageEncoding enc = encode_image(scene, person.box, params);
      const MaskedView view = adversarial_mask(enc.fmap, token_saliency(enc.fmap, cfg.saliency.combination),
                                               cfg.saliency.mask_ratio, params.decoder.mask_token);
      int other = person.attrs.identity_id;
      while (other == person.attrs.identity_id) {
        other = static_cast<int>(rng.integer(0, static_cast<std::int64_t>(ds.identities.size()) - 1));
      }
      const std::uint64_t text_seed = rng.next();
      const TextEncoding paired = encode_text(describe_person(person.attrs, text_seed), ds.vocab, params);
      const TextEncoding wrong =
          encode_text(describe_person(ds.identities[static_cast<std::size_t>(other)], text_seed), ds.vocab, params);
      const double lp = reconstruction_loss(view, paired.tokens, enc.fmap.tokens, params, cfg.saliency.scoring).scalar();
      const double lm = reconstruction_loss(view, wrong.tokens, enc.fmap.tokens, params, cfg.saliency.scoring).scalar();
      check.paired.push_back(lp);
      check.mismatched.push_back(lm);
      if (lp < lm) ++check.wins;
      if (lp > lm) ++check.losses;
    }
  }
  check.p_value = sign_test_p_value(check.wins, check.losses);
  return check;
}

}  // namespace icon
