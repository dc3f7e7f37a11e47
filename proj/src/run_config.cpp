#include "icon/run_config.hpp"

#include <fstream>
#include <sstream>

#include "icon/dataset_io.hpp"
#include "icon/error.hpp"

namespace icon {
namespace {

using nlohmann::json;

json window_json(const TriangularWindow& w) { return json::array({w.lo, w.peak, w.hi}); }

TriangularWindow window_from(const json& j, TriangularWindow fallback) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::kConfigError, "window must be [lo, peak, hi]");
  fallback.lo = j[0].get<double>();
  fallback.peak = j[1].get<double>();
  fallback.hi = j[2].get<double>();
  return fallback;
}

template <class E>
E enum_from(const json& j, const char* key, E fallback, std::initializer_list<std::pair<const char*, E>> names) {
  if (!j.contains(key)) return fallback;
  const std::string v = j.at(key).get<std::string>();
  for (const auto& [n, e] : names)
    if (v == n) return e;
  throw Error(ErrorKind::kConfigError, std::string("unknown value '") + v + "' for " + key);
}

}  // namespace

AblationFlags AblationFlags::parse(const std::string& text) {
  AblationFlags f{false, false, false, false};
  if (text.empty() || text == "none") return f;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "A" || item == "a") f.a = true;
    else if (item == "B" || item == "b") f.b = true;
    else if (item == "C" || item == "c") f.c = true;
    else if (item == "D" || item == "d") f.d = true;
    else throw Error(ErrorKind::kConfigError, "unknown flag '" + item + "' (expected A, B, C, D)");
  }
  return f;
}

std::string AblationFlags::label() const {
  std::string s;
  auto add = [&](bool on, const char* n) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += n;
  };
  add(a, "A");
  add(b, "B");
  add(c, "C");
  add(d, "D");
  return s.empty() ? "none" : s;
}

void RunConfig::validate() const {
  icon::validate(dataset);
  intervention.validate();
  if (batch_size < 2) throw Error(ErrorKind::kConfigError, "batch size must be at least 2");
  if (instances_per_identity < 1) throw Error(ErrorKind::kConfigError, "instances_per_identity must be positive");
  if (steps < 0) throw Error(ErrorKind::kConfigError, "steps must be non-negative");
  if (!(context.foreground_ratio >= 0.0 && context.foreground_ratio <= 1.0))
    throw Error(ErrorKind::kConfigError, "foreground_ratio must lie in [0, 1]");
  if (!(saliency.mask_ratio >= 0.0 && saliency.mask_ratio <= 1.0))
    throw Error(ErrorKind::kConfigError, "mask_ratio must lie in [0, 1]");
  if (!(prototype.epsilon > 0.0) || prototype.gamma < 0.0)
    throw Error(ErrorKind::kConfigError, "prototype epsilon must be positive and gamma non-negative");
  if (oim.queue_size < 0 || !(oim.sigma > 0.0) || oim.momentum < 0.0 || oim.momentum > 1.0)
    throw Error(ErrorKind::kConfigError, "invalid OIM settings");
  if (!(sdm_temperature > 0.0)) throw Error(ErrorKind::kConfigError, "sdm_temperature must be positive");
  if (optimizer.kind != "adam" && optimizer.kind != "sgd")
    throw Error(ErrorKind::kConfigError, "optimizer must be 'adam' or 'sgd'");
  if (!(optimizer.learning_rate > 0.0)) throw Error(ErrorKind::kConfigError, "learning rate must be positive");
  if (model.embed_dim < 1 || model.token_dim < 1 || model.token_dim % model.heads != 0)
    throw Error(ErrorKind::kConfigError, "token_dim must be a positive multiple of heads");
}

json to_json(const RunConfig& c) {
  const InterventionConfig& iv = c.intervention;
  return json{
      {"dataset", to_json(c.dataset)},
      {"model", to_json(c.model)},
      {"intervention",
       {{"warmup", iv.warmup},
        {"tau", iv.tau},
        {"iou_window", window_json(iv.iou_window)},
        {"vis_window", window_json(iv.vis_window)},
        {"alpha_adv", iv.alpha_adv},
        {"alpha_geo", iv.alpha_geo},
        {"fuzzy_and", iv.fuzzy_and == FuzzyAnd::kMin ? "min" : "product"},
        {"shift_fracs", iv.shift_fracs},
        {"scale_facs", iv.scale_facs},
        {"count_iterations", iv.count_iterations}}},
      {"context",
       {{"foreground_ratio", c.context.foreground_ratio},
        {"ranking", c.context.ranking == ActivationRanking::kColumnMean ? "column_mean" : "row_mean"},
        {"derangement", c.context.derangement},
        {"forbid_same_pid", c.context.forbid_same_pid}}},
      {"saliency",
       {{"mask_ratio", c.saliency.mask_ratio},
        {"combination", c.saliency.combination == SaliencyCombination::kProduct ? "product" : "additive"},
        {"scoring", c.saliency.scoring == ReconstructionScoring::kMaskedOnly ? "masked" : "full"},
        {"detach_target", c.saliency.detach_target}}},
      {"prototype", {{"epsilon", c.prototype.epsilon}, {"gamma", c.prototype.gamma}}},
      {"lambdas", {{"sdm", c.lambdas.sdm}, {"oim", c.lambdas.oim}, {"reg", c.lambdas.reg}, {"cf", c.lambdas.cf}}},
      {"oim",
       {{"queue_size", c.oim.queue_size},
        {"sigma", c.oim.sigma},
        {"momentum", c.oim.momentum},
        {"distractors_per_step", c.oim.distractors_per_step}}},
      {"sdm_temperature", c.sdm_temperature},
      {"optimizer",
       {{"kind", c.optimizer.kind},
        {"learning_rate", c.optimizer.learning_rate},
        {"warmup_fraction", c.optimizer.warmup_fraction},
        {"decay_at", c.optimizer.decay_at},
        {"decay_factor", c.optimizer.decay_factor},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon},
        {"grad_clip", c.optimizer.grad_clip}}},
      {"batch_size", c.batch_size},
      {"instances_per_identity", c.instances_per_identity},
      {"steps", c.steps},
      {"seed", c.seed},
      {"flags", c.flags.label()},
      {"checkpoint_interval", c.checkpoint_interval},
      {"verbose_assignment", c.verbose_assignment},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("dataset")) c.dataset = dataset_config_from_json(j.at("dataset"));
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("intervention")) {
      const json& v = j.at("intervention");
      InterventionConfig& iv = c.intervention;
      iv.warmup = v.value("warmup", iv.warmup);
      iv.tau = v.value("tau", iv.tau);
      if (v.contains("iou_window")) iv.iou_window = window_from(v.at("iou_window"), iv.iou_window);
      if (v.contains("vis_window")) iv.vis_window = window_from(v.at("vis_window"), iv.vis_window);
      iv.alpha_adv = v.value("alpha_adv", iv.alpha_adv);
      iv.alpha_geo = v.value("alpha_geo", iv.alpha_geo);
      iv.fuzzy_and = enum_from(v, "fuzzy_and", iv.fuzzy_and, {{"min", FuzzyAnd::kMin}, {"product", FuzzyAnd::kProduct}});
      iv.shift_fracs = v.value("shift_fracs", iv.shift_fracs);
      iv.scale_facs = v.value("scale_facs", iv.scale_facs);
      iv.count_iterations = v.value("count_iterations", iv.count_iterations);
    }
    if (j.contains("context")) {
      const json& v = j.at("context");
      c.context.foreground_ratio = v.value("foreground_ratio", c.context.foreground_ratio);
      c.context.ranking = enum_from(v, "ranking", c.context.ranking,
                                    {{"column_mean", ActivationRanking::kColumnMean},
                                     {"row_mean", ActivationRanking::kRowMean}});
      c.context.derangement = v.value("derangement", c.context.derangement);
      c.context.forbid_same_pid = v.value("forbid_same_pid", c.context.forbid_same_pid);
    }
    if (j.contains("saliency")) {
      const json& v = j.at("saliency");
      c.saliency.mask_ratio = v.value("mask_ratio", c.saliency.mask_ratio);
      c.saliency.combination = enum_from(v, "combination", c.saliency.combination,
                                         {{"product", SaliencyCombination::kProduct},
                                          {"additive", SaliencyCombination::kAdditiveZScore}});
      c.saliency.scoring = enum_from(v, "scoring", c.saliency.scoring,
                                     {{"masked", ReconstructionScoring::kMaskedOnly},
                                      {"full", ReconstructionScoring::kFullMap}});
      c.saliency.detach_target = v.value("detach_target", c.saliency.detach_target);
    }
    if (j.contains("prototype")) {
      c.prototype.epsilon = j["prototype"].value("epsilon", c.prototype.epsilon);
      c.prototype.gamma = j["prototype"].value("gamma", c.prototype.gamma);
    }
    if (j.contains("lambdas")) {
      const json& v = j.at("lambdas");
      c.lambdas.sdm = v.value("sdm", c.lambdas.sdm);
      c.lambdas.oim = v.value("oim", c.lambdas.oim);
      c.lambdas.reg = v.value("reg", c.lambdas.reg);
      c.lambdas.cf = v.value("cf", c.lambdas.cf);
    }
    if (j.contains("oim")) {
      const json& v = j.at("oim");
      c.oim.queue_size = v.value("queue_size", c.oim.queue_size);
      c.oim.sigma = v.value("sigma", c.oim.sigma);
      c.oim.momentum = v.value("momentum", c.oim.momentum);
      c.oim.distractors_per_step = v.value("distractors_per_step", c.oim.distractors_per_step);
    }
    c.sdm_temperature = j.value("sdm_temperature", c.sdm_temperature);
    if (j.contains("optimizer")) {
      const json& v = j.at("optimizer");
      OptimizerSettings& o = c.optimizer;
      o.kind = v.value("kind", o.kind);
      o.learning_rate = v.value("learning_rate", o.learning_rate);
      o.warmup_fraction = v.value("warmup_fraction", o.warmup_fraction);
      o.decay_at = v.value("decay_at", o.decay_at);
      o.decay_factor = v.value("decay_factor", o.decay_factor);
      o.beta1 = v.value("beta1", o.beta1);
      o.beta2 = v.value("beta2", o.beta2);
      o.epsilon = v.value("epsilon", o.epsilon);
      o.grad_clip = v.value("grad_clip", o.grad_clip);
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.instances_per_identity = j.value("instances_per_identity", c.instances_per_identity);
    c.steps = j.value("steps", c.steps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("flags")) c.flags = AblationFlags::parse(j.at("flags").get<std::string>());
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.verbose_assignment = j.value("verbose_assignment", c.verbose_assignment);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfigError, std::string("malformed run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

std::string run_config_hash(const RunConfig& config) { return config_hash(to_json(config)); }

std::string dataset_hash(const DatasetConfig& config) { return config_hash(to_json(config)); }

}  // namespace icon
