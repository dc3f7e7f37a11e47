#include "icon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "icon/dataset_io.hpp"
#include "icon/error.hpp"
#include "icon/prototype_alignment.hpp"
#include "icon/rng.hpp"

namespace icon {
namespace {

using ad::Matrix;
using ad::Var;

struct Instance {
  int scene = 0;   // index into dataset.train
  int person = 0;  // index into the scene's persons
  int identity = 0;
};

class Adam {
 public:
  Adam(std::vector<Var> params, const OptimizerSettings& opt) : params_(std::move(params)), opt_(opt) {
    for (const Var& p : params_) {
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }

  void step(double lr) {
    ++t_;
    double sq = 0.0;
    for (const Var& p : params_)
      if (p.has_grad()) sq += p.grad().squaredNorm();
    const double norm = std::sqrt(sq);
    const double clip = opt_.grad_clip > 0.0 && norm > opt_.grad_clip ? opt_.grad_clip / norm : 1.0;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      const Var& p = params_[k];
      if (!p.has_grad()) {
        m_[k] *= opt_.beta1;
        v_[k] *= opt_.beta2;
      } else {
        const Matrix g = p.grad() * clip;
        if (opt_.kind == "sgd") {
          p.mutable_value() -= lr * g;
          continue;
        }
        m_[k] = opt_.beta1 * m_[k] + (1.0 - opt_.beta1) * g;
        v_[k] = opt_.beta2 * v_[k] + (1.0 - opt_.beta2) * g.cwiseProduct(g);
      }
      if (opt_.kind == "sgd") continue;
      p.mutable_value().array() -=
          lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + opt_.epsilon);
    }
  }

  void zero_grad() {
    for (const Var& p : params_) p.zero_grad();
  }

 private:
  std::vector<Var> params_;
  OptimizerSettings opt_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

std::vector<Instance> sample_batch(const std::map<int, std::vector<Instance>>& by_identity,
                                   const std::vector<int>& identities, int batch, int per_identity, Rng& rng) {
  std::vector<int> pool = identities;
  std::vector<Instance> out;
  int taken = 0;
  while (static_cast<int>(out.size()) < batch) {
    if (taken == static_cast<int>(pool.size())) taken = 0;
    const auto j = static_cast<std::size_t>(rng.integer(taken, static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[static_cast<std::size_t>(taken)], pool[j]);
    std::vector<Instance> members = by_identity.at(pool[static_cast<std::size_t>(taken)]);
    ++taken;
    const int n = static_cast<int>(members.size());
    for (int k = 0; k < per_identity && static_cast<int>(out.size()) < batch; ++k) {
      if (k < n) {
        const auto pick = static_cast<std::size_t>(rng.integer(k, n - 1));
        std::swap(members[static_cast<std::size_t>(k)], members[pick]);
        out.push_back(members[static_cast<std::size_t>(k)]);
      } else {
        out.push_back(members[static_cast<std::size_t>(rng.integer(0, n - 1))]);
      }
    }
  }
  return out;
}

// Random person-sized box mostly off the annotated persons.
BoundingBox distractor_box(const SceneRecord& scene, Rng& rng) {
  const ImageBounds b = scene.bounds();
  BoundingBox best;
  double best_overlap = 2.0;
  for (int attempt = 0; attempt < 20; ++attempt) {
    const double h = std::round(rng.uniform(18.0, 40.0));
    const double w = std::max(6.0, std::round(0.4 * h));
    const BoundingBox c{std::floor(rng.uniform(0.0, b.width - w)), std::floor(rng.uniform(0.0, b.height - h)), w, h};
    double overlap = 0.0;
    for (const PersonAnnotation& p : scene.persons) overlap = std::max(overlap, iou(c, p.box));
    if (overlap < best_overlap) {
      best = c;
      best_overlap = overlap;
    }
    if (overlap < 0.1) break;
  }
  return best;
}

Matrix stack_rows(const std::vector<Var>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().cols());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].value().row(0);
  return m;
}

AlignmentWeights side_weights(const std::vector<Var>& embs, const std::vector<int>& pids, const RunConfig& cfg,
                              WeightSide side) {
  if (!cfg.flags.d) return uniform_weights(embs.size(), side);
  const Matrix feats = stack_rows(embs);
  const PrototypeTable protos = compute_prototypes(feats, pids);
  return alignment_weights(confidence_scores(feats, pids, protos), cfg.prototype.epsilon, cfg.prototype.gamma, side);
}

}  // namespace

double scheduled_learning_rate(const OptimizerSettings& opt, long step, long total_steps) {
  const double warm = std::ceil(opt.warmup_fraction * static_cast<double>(total_steps));
  double lr = opt.learning_rate;
  if (warm > 0.0 && static_cast<double>(step) < warm) lr *= static_cast<double>(step + 1) / warm;
  if (static_cast<double>(step) >= opt.decay_at * static_cast<double>(total_steps)) lr *= opt.decay_factor;
  return lr;
}

TrainResult train(const RunConfig& input, const Dataset& ds, const TrainOptions& options) {
  RunConfig cfg = input;
  if (cfg.model.vocab_size == 0) cfg.model.vocab_size = ds.vocab.size();
  cfg.validate();

  TrainResult result;
  result.config = cfg;
  result.run_hash = run_config_hash(cfg);
  result.dataset_hash = dataset_hash(ds.config);

  std::vector<Instance> instances;
  std::map<int, std::vector<Instance>> by_identity;
  for (std::size_t s = 0; s < ds.train.size(); ++s) {
    for (std::size_t k = 0; k < ds.train[s].persons.size(); ++k) {
      const Instance inst{static_cast<int>(s), static_cast<int>(k), ds.train[s].persons[k].attrs.identity_id};
      instances.push_back(inst);
      by_identity[inst.identity].push_back(inst);
    }
  }
  if (instances.empty()) throw Error(ErrorKind::kConfigError, "training split has no persons");
  std::vector<int> identities;
  for (const auto& [id, list] : by_identity) identities.push_back(id);
  std::map<int, int> label_of;
  for (int id : ds.train_identity_ids) label_of.emplace(id, static_cast<int>(label_of.size()));

  ModelParams params = ModelParams::initialize(cfg.model, derive_seed(cfg.seed, {1}));
  result.initial = params.clone();
  OimState oim(static_cast<int>(label_of.size()), cfg.model.embed_dim, cfg.oim.queue_size, cfg.oim.sigma,
               cfg.oim.momentum, derive_seed(cfg.seed, {2}));
  Adam adam(params.all(), cfg.optimizer);
  const std::vector<double> shifts = cfg.intervention.shift_fracs;
  const std::vector<double> scales = cfg.intervention.scale_facs;
  const int B = cfg.batch_size;

  for (long step = 0; step < cfg.steps; ++step) {
    Rng rng(derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(step)}));
    const std::vector<Instance> batch = sample_batch(by_identity, identities, B, cfg.instances_per_identity, rng);
    const double t = cfg.intervention.count_iterations
                         ? static_cast<double>(step)
                         : std::floor(static_cast<double>(step) * B / static_cast<double>(instances.size()));

    std::vector<int> pids, labels;
    std::vector<ImageEncoding> images;
    std::vector<TextEncoding> texts;
    std::vector<Var> img_embs, txt_embs;
    for (const Instance& inst : batch) {
      const SceneRecord& scene = ds.train[static_cast<std::size_t>(inst.scene)];
      const PersonAnnotation& person = scene.persons[static_cast<std::size_t>(inst.person)];
      BoundingBox box = person.box;
      if (cfg.flags.a) {
        Matrix attention;
        {
          ad::NoGradGuard no_grad;
          attention = encode_image(scene, person.box, params).fmap.attention;
        }
        const CandidatePool pool = generate_candidate_pool(person.box, shifts, scales, scene.bounds());
        const ScoredCandidate pick = select_intervention(pool, attention, cfg.model.grid_rows, cfg.model.grid_cols,
                                                         person.box, t, cfg.intervention);
        box = pick.box;
        result.logs.interventions.push_back({step, scene.scene_id, iou(box, person.box),
                                             visibility(box, person.box), pick.s_adv, pick.s_geo, pick.s_stab,
                                             pick.j});
      }
      images.push_back(encode_image(scene, box, params));
      texts.push_back(encode_text(describe_person(person.attrs, rng.next()), ds.vocab, params));
      img_embs.push_back(images.back().embedding);
      txt_embs.push_back(texts.back().embedding);
      pids.push_back(inst.identity);
      auto label = label_of.find(inst.identity);
      if (label == label_of.end()) throw Error(ErrorKind::kUnknownPid, "training identity without a label");
      labels.push_back(label->second);
    }

    const AlignmentWeights w_img = side_weights(img_embs, pids, cfg, WeightSide::kImage);
    const AlignmentWeights w_txt = side_weights(txt_embs, pids, cfg, WeightSide::kText);
    if (cfg.flags.d) {
      const WeightStats si = weight_stats(w_img), st = weight_stats(w_txt);
      result.logs.weights.push_back({step, "image", si.min, si.max, si.entropy});
      result.logs.weights.push_back({step, "text", st.min, st.max, st.entropy});
    }

    LossComponents comp;
    comp.sdm = sdm_loss(ad::vconcat(img_embs), ad::vconcat(txt_embs), pids, w_img.weights, w_txt.weights,
                        cfg.sdm_temperature);
    {
      std::vector<Var> parts;
      for (int i = 0; i < B; ++i) parts.push_back(oim_loss(img_embs[static_cast<std::size_t>(i)],
                                                           labels[static_cast<std::size_t>(i)], oim));
      comp.oim = ad::weighted_sum(parts, std::vector<double>(parts.size(), 1.0 / B));
    }

    if (cfg.flags.b) {
      std::vector<Matrix> maps;
      std::vector<DisentanglementMask> masks;
      for (const ImageEncoding& e : images) {
        maps.push_back(e.fmap.attention);
        masks.push_back(saliency_mask(e.fmap, cfg.context.foreground_ratio, cfg.context.ranking));
      }
      AssignmentOptions ao;
      ao.derangement = cfg.context.derangement;
      if (cfg.context.forbid_same_pid) ao.forbid_same_pid = pids;
      const BatchAssignment plan = optimal_context_assignment(maps, ao);
      if (cfg.verbose_assignment) result.logs.assignments.push_back({step, plan.permutation, plan.cost});
      std::vector<Var> parts;
      for (int i = 0; i < B; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const TokenFeatureMap cf = synthesize_counterfactual(
            images[si].fmap, images[static_cast<std::size_t>(plan.permutation[si])].fmap, masks[si]);
        const Var cf_emb = pool_image_embedding(cf.tokens, params);
        parts.push_back(counterfactual_consistency_loss(img_embs[si], cf_emb, labels[si], oim).total);
      }
      comp.cf = ad::weighted_sum(parts, std::vector<double>(parts.size(), 1.0 / B));
    }

    if (cfg.flags.c) {
      std::vector<Var> parts;
      for (int i = 0; i < B; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const TokenFeatureMap& fmap = images[si].fmap;
        const MaskedView view = adversarial_mask(fmap, token_saliency(fmap, cfg.saliency.combination),
                                                 cfg.saliency.mask_ratio, params.decoder.mask_token);
        const Var target = cfg.saliency.detach_target ? ad::detach(fmap.tokens) : fmap.tokens;
        parts.push_back(reconstruction_loss(view, texts[si].tokens, target, params, cfg.saliency.scoring));
      }
      comp.reg = weighted_loss_aggregate(parts, w_img);
    }

    const Var total = total_loss(comp, cfg.lambdas);
    const double lr = scheduled_learning_rate(cfg.optimizer, step, cfg.steps);
    LossRow row{step, comp.sdm.scalar(), comp.oim.scalar(), comp.reg ? comp.reg.scalar() : 0.0,
                comp.cf ? comp.cf.scalar() : 0.0, total.scalar(), lr};
    adam.zero_grad();
    ad::backward(total);
    adam.step(lr);
    adam.zero_grad();

    for (int i = 0; i < B; ++i) {
      oim.update(labels[static_cast<std::size_t>(i)], img_embs[static_cast<std::size_t>(i)].value().row(0));
    }
    if (cfg.oim.queue_size > 0) {
      ad::NoGradGuard no_grad;
      for (int k = 0; k < cfg.oim.distractors_per_step; ++k) {
        const SceneRecord& scene =
            ds.train[static_cast<std::size_t>(batch[static_cast<std::size_t>(rng.integer(0, B - 1))].scene)];
        oim.push_unlabeled(encode_image(scene, distractor_box(scene, rng), params).embedding.value().row(0));
      }
    }

    result.logs.losses.push_back(row);
    if (options.on_step) options.on_step(row);
    if (!options.out_dir.empty() && cfg.checkpoint_interval > 0 && (step + 1) % cfg.checkpoint_interval == 0 &&
        step + 1 < cfg.steps) {
      save_checkpoint(params, options.out_dir / ("checkpoint_" + std::to_string(step + 1)), result.dataset_hash,
                      step + 1, {{"run_config", to_json(cfg)}, {"run_hash", result.run_hash}});
    }
  }

  result.params = params;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    save_checkpoint(params, options.out_dir / "checkpoint", result.dataset_hash, cfg.steps,
                    {{"run_config", to_json(cfg)}, {"run_hash", result.run_hash}});
    write_train_logs(result.logs, options.out_dir);
  }
  return result;
}

void write_train_logs(const TrainLogs& logs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw Error(ErrorKind::kIoError, "cannot write " + (dir / name).string());
    out.precision(17);
    return out;
  };
  {
    std::ofstream out = open("loss_log.csv");
    out << "step,L_sdm,L_oim,L_reg,L_cf,total,lr\n";
    for (const LossRow& r : logs.losses)
      out << r.step << ',' << r.sdm << ',' << r.oim << ',' << r.reg << ',' << r.cf << ',' << r.total << ','
          << r.learning_rate << '\n';
  }
  {
    std::ofstream out = open("intervention_log.csv");
    out << "step,scene_id,iou,visibility,s_adv,s_geo,s_stab,j\n";
    for (const InterventionRow& r : logs.interventions)
      out << r.step << ',' << r.scene_id << ',' << r.iou << ',' << r.visibility << ',' << r.s_adv << ',' << r.s_geo
          << ',' << r.s_stab << ',' << r.j << '\n';
  }
  {
    std::ofstream out = open("weight_log.csv");
    out << "step,side,min,max,entropy\n";
    for (const WeightRow& r : logs.weights)
      out << r.step << ',' << r.side << ',' << r.min << ',' << r.max << ',' << r.entropy << '\n';
  }
  if (!logs.assignments.empty()) {
    std::ofstream out = open("assignment_log.csv");
    out << "step,permutation,cost\n";
    for (const AssignmentRow& r : logs.assignments) {
      out << r.step << ',';
      for (std::size_t k = 0; k < r.permutation.size(); ++k) out << (k ? " " : "") << r.permutation[k];
      out << ',' << r.cost << '\n';
    }
  }
}

}  // namespace icon
