#include "icon/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "icon/error.hpp"
#include "icon/rng.hpp"

namespace icon {
namespace {

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BoundingBox jitter_box(const BoundingBox& b, double s, const ImageBounds& bounds, Rng& rng) {
  const double limit = s * std::max(b.w, b.h);
  for (int attempt = 0; attempt < 16; ++attempt) {
    const double dx = rng.uniform(-1.0, 1.0) * s * b.w / std::sqrt(2.0);
    const double dy = rng.uniform(-1.0, 1.0) * s * b.h / std::sqrt(2.0);
    const double w = b.w * (1.0 + rng.uniform(-s, s));
    const double h = b.h * (1.0 + rng.uniform(-s, s));
    const BoundingBox j = clip_box({b.center_x() + dx - 0.5 * w, b.center_y() + dy - 0.5 * h, w, h}, bounds);
    if (j.w < 1.0 || j.h < 1.0) continue;
    if (std::hypot(j.center_x() - b.center_x(), j.center_y() - b.center_y()) <= limit) return j;
  }
  return b;
}

}  // namespace

RankedRetrievalList rank_gallery(int query_id, const Eigen::RowVectorXd& q, const std::vector<GalleryItem>& gallery) {
  if (gallery.empty()) throw Error(ErrorKind::kEmptyGallery, "cannot rank an empty gallery");
  RankedRetrievalList out;
  out.query_id = query_id;
  out.entries.reserve(gallery.size());
  for (const GalleryItem& g : gallery) out.entries.push_back({g.scene_id, g.box, similarity(q, g.embedding)});
  std::sort(out.entries.begin(), out.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
    return box_less(a.box, b.box);
  });
  return out;
}

int GroundTruth::count() const {
  int n = 0;
  for (const auto& [scene, list] : boxes) n += static_cast<int>(list.size());
  return n;
}

GroundTruth ground_truth_for(int identity_id, const std::vector<SceneRecord>& scenes, const std::set<int>* filter) {
  GroundTruth gt;
  for (const SceneRecord& s : scenes) {
    if (filter && !filter->count(s.scene_id)) continue;
    for (const PersonAnnotation& p : s.persons) {
      if (p.attrs.identity_id == identity_id) gt.boxes[s.scene_id].push_back(p.box);
    }
  }
  return gt;
}

bool is_true_positive(const RankedEntry& entry, const std::vector<BoundingBox>& gt_boxes, std::vector<char>& matched) {
  if (matched.size() != gt_boxes.size()) matched.assign(gt_boxes.size(), 0);
  int best = -1;
  double best_iou = kTruePositiveIou;
  for (std::size_t k = 0; k < gt_boxes.size(); ++k) {
    if (matched[k]) continue;
    const double o = iou(entry.box, gt_boxes[k]);
    if (o >= best_iou) {
      best_iou = o;
      best = static_cast<int>(k);
    }
  }
  if (best < 0) return false;
  matched[static_cast<std::size_t>(best)] = 1;
  return true;
}

std::vector<char> relevance(const RankedRetrievalList& ranked, const GroundTruth& gt) {
  std::map<int, std::vector<char>> matched;
  for (const auto& [scene, list] : gt.boxes) matched[scene].assign(list.size(), 0);
  std::vector<char> rel(ranked.entries.size(), 0);
  for (std::size_t k = 0; k < ranked.entries.size(); ++k) {
    const RankedEntry& e = ranked.entries[k];
    auto it = gt.boxes.find(e.scene_id);
    if (it == gt.boxes.end()) continue;
    rel[k] = is_true_positive(e, it->second, matched[e.scene_id]) ? 1 : 0;
  }
  return rel;
}

double average_precision(const RankedRetrievalList& ranked, const GroundTruth& gt) {
  const int total = gt.count();
  if (total == 0) throw Error(ErrorKind::kNoPositives, "query has no ground-truth boxes");
  const std::vector<char> rel = relevance(ranked, gt);
  double sum = 0.0;
  int hits = 0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / total;
}

int first_hit_rank(const RankedRetrievalList& ranked, const GroundTruth& gt) {
  const std::vector<char> rel = relevance(ranked, gt);
  for (std::size_t k = 0; k < rel.size(); ++k)
    if (rel[k]) return static_cast<int>(k) + 1;
  return 0;
}

std::map<int, double> cmc_topk(const std::vector<RankedRetrievalList>& lists, const std::vector<GroundTruth>& gts,
                               const std::vector<int>& ks) {
  if (lists.size() != gts.size()) throw Error(ErrorKind::kLengthMismatch, "ranked lists and ground truths differ");
  std::map<int, double> out;
  for (int k : ks) out[k] = 0.0;
  if (lists.empty()) return out;
  for (std::size_t q = 0; q < lists.size(); ++q) {
    const int hit = first_hit_rank(lists[q], gts[q]);
    for (int k : ks)
      if (hit > 0 && hit <= k) out[k] += 1.0;
  }
  for (auto& [k, v] : out) v /= static_cast<double>(lists.size());
  return out;
}

std::string perturbation_name(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::kNone: return "clean";
    case PerturbationKind::kBoxJitter: return "box_jitter";
    case PerturbationKind::kOcclusion: return "occlusion";
    case PerturbationKind::kBackgroundSwap: return "background_swap";
  }
  return "clean";
}

PerturbationKind perturbation_from_name(const std::string& name) {
  if (name == "clean" || name == "none") return PerturbationKind::kNone;
  if (name == "box_jitter") return PerturbationKind::kBoxJitter;
  if (name == "occlusion") return PerturbationKind::kOcclusion;
  if (name == "background_swap") return PerturbationKind::kBackgroundSwap;
  throw Error(ErrorKind::kConfigError, "unknown perturbation kind '" + name + "'");
}

std::string PerturbationSpec::label() const {
  std::ostringstream s;
  s << perturbation_name(kind) << ':' << severity;
  return s.str();
}

PerturbationSpec parse_perturbation(const std::string& text, std::uint64_t seed) {
  PerturbationSpec spec;
  spec.seed = seed;
  const auto colon = text.find(':');
  spec.kind = perturbation_from_name(text.substr(0, colon));
  if (colon == std::string::npos) {
    spec.severity = spec.kind == PerturbationKind::kNone ? 0.0 : 1.0;
  } else {
    try {
      spec.severity = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfigError, "bad severity in suite '" + text + "'");
    }
  }
  if (!(spec.severity >= 0.0 && spec.severity <= 1.0)) {
    throw Error(ErrorKind::kConfigError, "severity must lie in [0, 1]");
  }
  return spec;
}

PerturbedScene apply_perturbation(const SceneRecord& scene, const PerturbationSpec& spec) {
  PerturbedScene out{scene, {}, {}};
  for (const PersonAnnotation& p : scene.persons) out.eval_boxes.push_back(p.box);
  if (spec.kind == PerturbationKind::kNone || spec.severity <= 0.0) return out;

  const double s = spec.severity;
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(spec.kind), static_cast<std::uint64_t>(scene.scene_id)}));
  Image& px = out.scene.pixels;
  switch (spec.kind) {
    case PerturbationKind::kBoxJitter:
      for (BoundingBox& b : out.eval_boxes) b = jitter_box(b, s, scene.bounds(), rng);
      break;
    case PerturbationKind::kOcclusion:
      for (const PersonAnnotation& p : scene.persons) {
        const int bx = static_cast<int>(p.box.x), by = static_cast<int>(p.box.y);
        const int bw = static_cast<int>(p.box.w), bh = static_cast<int>(p.box.h);
        BoundingBox occ;
        if (rng.bernoulli(0.5)) {
          const int rows = static_cast<int>(std::lround(s * bh));
          occ = {static_cast<double>(bx), static_cast<double>(by + rng.integer(0, bh - rows)),
                 static_cast<double>(bw), static_cast<double>(rows)};
        } else {
          const int cols = static_cast<int>(std::lround(s * bw));
          occ = {static_cast<double>(bx + rng.integer(0, bw - cols)), static_cast<double>(by),
                 static_cast<double>(cols), static_cast<double>(bh)};
        }
        const std::array<double, 3> base = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
        for (int y = static_cast<int>(occ.y); y < static_cast<int>(occ.bottom()); ++y)
          for (int x = static_cast<int>(occ.x); x < static_cast<int>(occ.right()); ++x)
            for (int c = 0; c < 3; ++c) px.at(y, x, c) = quantize(base[static_cast<std::size_t>(c)] + rng.uniform(-0.2, 0.2));
        out.occluders.push_back(occ);
      }
      break;
    case PerturbationKind::kBackgroundSwap: {
      const int family = (scene.background_id + 1 + static_cast<int>(rng.integer(0, kNumBackgroundFamilies - 2))) %
                         kNumBackgroundFamilies;
      const Image fresh = render_background(family, px.width, px.height, rng.next());
      std::vector<char> covered(static_cast<std::size_t>(px.width) * px.height, 0);
      for (const PersonAnnotation& p : scene.persons) {
        const Sprite sprite = render_person(p.attrs, p.sprite_seed);
        for (int y = 0; y < sprite.pixels.height; ++y)
          for (int x = 0; x < sprite.pixels.width; ++x) {
            const int gy = static_cast<int>(p.box.y) + y, gx = static_cast<int>(p.box.x) + x;
            if (sprite.covered(y, x) && gy >= 0 && gx >= 0 && gy < px.height && gx < px.width)
              covered[static_cast<std::size_t>(gy) * px.width + gx] = 1;
          }
      }
      for (int y = 0; y < px.height; ++y)
        for (int x = 0; x < px.width; ++x) {
          if (covered[static_cast<std::size_t>(y) * px.width + x]) continue;
          for (int c = 0; c < 3; ++c) px.at(y, x, c) = quantize((1.0 - s) * px.at(y, x, c) + s * fresh.at(y, x, c));
        }
      out.scene.background_id = family;
      break;
    }
    case PerturbationKind::kNone:
      break;
  }
  return out;
}

double EvalMetrics::median_similarity_gap() const {
  std::vector<double> pos, neg;
  for (const QueryResult& q : per_query) {
    pos.push_back(q.positive_similarity);
    neg.push_back(q.hardest_negative);
  }
  return median(pos) - median(neg);
}

std::vector<GalleryItem> encode_gallery(const std::vector<SceneRecord>& scenes, const ModelParams& params,
                                        const PerturbationSpec& spec) {
  ad::NoGradGuard no_grad;
  std::vector<GalleryItem> items;
  for (const SceneRecord& s : scenes) {
    const PerturbedScene ps = apply_perturbation(s, spec);
    for (std::size_t k = 0; k < s.persons.size(); ++k) {
      const ImageEncoding enc = encode_image(ps.scene, ps.eval_boxes[k], params);
      items.push_back({s.scene_id, ps.eval_boxes[k], enc.embedding.value().row(0), s.persons[k].attrs.identity_id});
    }
  }
  return items;
}

ad::Matrix encode_queries(const std::vector<TextQuery>& queries, const Vocabulary& vocab, const ModelParams& params) {
  ad::NoGradGuard no_grad;
  ad::Matrix out(static_cast<Eigen::Index>(queries.size()), params.config.embed_dim);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    out.row(static_cast<Eigen::Index>(q)) = encode_text(queries[q], vocab, params).embedding.value().row(0);
  }
  return out;
}

EvalMetrics evaluate_retrieval(const ad::Matrix& query_embeddings, const std::vector<TextQuery>& queries,
                               const std::vector<GalleryItem>& gallery, const std::vector<SceneRecord>& scenes,
                               const std::vector<std::set<int>>* per_query_scenes) {
  if (query_embeddings.rows() != static_cast<Eigen::Index>(queries.size())) {
    throw Error(ErrorKind::kLengthMismatch, "query embeddings and queries differ");
  }
  EvalMetrics m;
  std::vector<RankedRetrievalList> lists;
  std::vector<GroundTruth> gts;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const std::set<int>* filter = per_query_scenes ? &(*per_query_scenes)[q] : nullptr;
    std::vector<GalleryItem> subset;
    if (filter) {
      for (const GalleryItem& g : gallery)
        if (filter->count(g.scene_id)) subset.push_back(g);
    }
    const std::vector<GalleryItem>& items = filter ? subset : gallery;
    const Eigen::RowVectorXd e = query_embeddings.row(static_cast<Eigen::Index>(q));
    RankedRetrievalList ranked = rank_gallery(queries[q].query_id, e, items);
    GroundTruth gt = ground_truth_for(queries[q].identity_id, scenes, filter);

    QueryResult r;
    r.query_id = queries[q].query_id;
    r.ap = average_precision(ranked, gt);
    r.first_hit = first_hit_rank(ranked, gt);
    r.positive_similarity = -1.0;
    r.hardest_negative = -1.0;
    for (const GalleryItem& g : items) {
      const double sim = similarity(e, g.embedding);
      double& slot = g.identity_id == queries[q].identity_id ? r.positive_similarity : r.hardest_negative;
      slot = std::max(slot, sim);
    }
    m.per_query.push_back(r);
    lists.push_back(std::move(ranked));
    gts.push_back(std::move(gt));
  }
  double ap_sum = 0.0;
  for (const QueryResult& r : m.per_query) ap_sum += r.ap;
  m.map = m.per_query.empty() ? 0.0 : ap_sum / static_cast<double>(m.per_query.size());
  const auto cmc = cmc_topk(lists, gts, {1, 5, 10});
  m.top1 = cmc.at(1);
  m.top5 = cmc.at(5);
  m.top10 = cmc.at(10);
  return m;
}

EvalMetrics evaluate_model(const ModelParams& params, const Dataset& ds, const PerturbationSpec& spec) {
  const auto gallery = encode_gallery(ds.gallery, params, spec);
  const auto queries = encode_queries(ds.queries, ds.vocab, params);
  return evaluate_retrieval(queries, ds.queries, gallery, ds.gallery);
}

std::vector<SweepRow> gallery_size_sweep(const ModelParams& params, const Dataset& ds, const std::vector<int>& sizes,
                                         std::uint64_t seed, int repeats) {
  const int total = static_cast<int>(ds.gallery.size());
  for (int size : sizes) {
    if (size < 1 || size > total) {
      throw Error(ErrorKind::kSizeTooLarge, "gallery size " + std::to_string(size) + " outside [1, " +
                                                std::to_string(total) + "]");
    }
  }
  const auto gallery = encode_gallery(ds.gallery, params);
  const auto query_emb = encode_queries(ds.queries, ds.vocab, params);
  std::vector<SweepRow> rows;
  for (int size : sizes) {
    SweepRow row;
    row.size = size;
    if (size == total) {
      const EvalMetrics m = evaluate_retrieval(query_emb, ds.queries, gallery, ds.gallery);
      row.map = m.map;
      row.top1 = m.top1;
      rows.push_back(row);
      continue;
    }
    for (int r = 0; r < repeats; ++r) {
      std::vector<std::set<int>> per_query;
      for (const TextQuery& q : ds.queries) {
        std::set<int> chosen;
        std::vector<int> others;
        for (const SceneRecord& s : ds.gallery) {
          const bool positive = std::any_of(s.persons.begin(), s.persons.end(), [&](const PersonAnnotation& p) {
            return p.attrs.identity_id == q.identity_id;
          });
          if (positive) {
            chosen.insert(s.scene_id);
          } else {
            others.push_back(s.scene_id);
          }
        }
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(r),
                                   static_cast<std::uint64_t>(q.query_id)}));
        const int need = std::max(0, size - static_cast<int>(chosen.size()));
        for (int k = 0; k < need && k < static_cast<int>(others.size()); ++k) {
          const auto j = static_cast<std::size_t>(rng.integer(k, static_cast<std::int64_t>(others.size()) - 1));
          std::swap(others[static_cast<std::size_t>(k)], others[j]);
          chosen.insert(others[static_cast<std::size_t>(k)]);
        }
        per_query.push_back(std::move(chosen));
      }
      const EvalMetrics m = evaluate_retrieval(query_emb, ds.queries, gallery, ds.gallery, &per_query);
      row.map += m.map / repeats;
      row.top1 += m.top1 / repeats;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace icon
