#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "icon/geometry.hpp"
#include "icon/synthetic_data.hpp"
#include "icon/toy_model.hpp"

namespace icon {

struct RankedEntry {
  int scene_id = 0;
  BoundingBox box;
  double score = 0.0;
};

struct RankedRetrievalList {
  int query_id = 0;
  std::vector<RankedEntry> entries;
};

struct GalleryItem {
  int scene_id = 0;
  BoundingBox box;
  Eigen::RowVectorXd embedding;
  int identity_id = -1;  // annotation the box was derived from; bookkeeping only
};

// Sorted by cosine similarity descending; ties by (scene_id, box). Throws EmptyGallery.
RankedRetrievalList rank_gallery(int query_id, const Eigen::RowVectorXd& query_embedding,
                                 const std::vector<GalleryItem>& gallery);

// Ground-truth boxes of one query identity, per scene.
struct GroundTruth {
  std::map<int, std::vector<BoundingBox>> boxes;
  int count() const;
};

GroundTruth ground_truth_for(int identity_id, const std::vector<SceneRecord>& scenes,
                             const std::set<int>* scene_filter = nullptr);

inline constexpr double kTruePositiveIou = 0.5;

// True when some not-yet-matched gt box in the entry's scene overlaps it with
// IoU ≥ 0.5; that box (the best-overlapping one) is then marked matched.
bool is_true_positive(const RankedEntry& entry, const std::vector<BoundingBox>& gt_boxes_in_scene,
                      std::vector<char>& matched);

// Relevance flag per ranked entry under the one-match-per-gt rule.
std::vector<char> relevance(const RankedRetrievalList& ranked, const GroundTruth& gt);

// Σ_k precision@k · rel_k / |gt|. Throws NoPositives.
double average_precision(const RankedRetrievalList& ranked, const GroundTruth& gt);

// 1-based rank of the first true positive; 0 when there is none.
int first_hit_rank(const RankedRetrievalList& ranked, const GroundTruth& gt);

std::map<int, double> cmc_topk(const std::vector<RankedRetrievalList>& lists, const std::vector<GroundTruth>& gts,
                               const std::vector<int>& ks = {1, 5, 10});

enum class PerturbationKind { kNone, kBoxJitter, kOcclusion, kBackgroundSwap };

std::string perturbation_name(PerturbationKind kind);
PerturbationKind perturbation_from_name(const std::string& name);

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::kNone;
  double severity = 0.0;  // in [0, 1]
  std::uint64_t seed = 0;

  std::string label() const;
};

// Parses "kind:severity" (severity defaults to 1 for background_swap).
PerturbationSpec parse_perturbation(const std::string& text, std::uint64_t seed = 7);

struct PerturbedScene {
  SceneRecord scene;
  std::vector<BoundingBox> eval_boxes;  // one per person, in annotation order
  std::vector<BoundingBox> occluders;   // occlusion only
};

// box_jitter moves evaluation boxes (pixels untouched); occlusion pastes a
// noise band covering `severity` of each person box; background_swap blends
// the background toward a different texture family with persons re-composited.
PerturbedScene apply_perturbation(const SceneRecord& scene, const PerturbationSpec& spec);

struct QueryResult {
  int query_id = 0;
  double ap = 0.0;
  int first_hit = 0;
  double positive_similarity = 0.0;   // best similarity among positives
  double hardest_negative = 0.0;      // best similarity among negatives
};

struct EvalMetrics {
  double map = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double top10 = 0.0;
  std::vector<QueryResult> per_query;

  double median_similarity_gap() const;
};

std::vector<GalleryItem> encode_gallery(const std::vector<SceneRecord>& scenes, const ModelParams& params,
                                        const PerturbationSpec& spec = {});
ad::Matrix encode_queries(const std::vector<TextQuery>& queries, const Vocabulary& vocab, const ModelParams& params);

// Scores every query against the gallery items whose scene passes the
// optional per-query scene filter.
EvalMetrics evaluate_retrieval(const ad::Matrix& query_embeddings, const std::vector<TextQuery>& queries,
                               const std::vector<GalleryItem>& gallery, const std::vector<SceneRecord>& scenes,
                               const std::vector<std::set<int>>* per_query_scenes = nullptr);

EvalMetrics evaluate_model(const ModelParams& params, const Dataset& dataset, const PerturbationSpec& spec = {});

struct SweepRow {
  int size = 0;
  double map = 0.0;
  double top1 = 0.0;
};

// Per-query galleries of `size` scenes: all scenes holding the query identity
// plus random distractor scenes, averaged over `repeats` draws.
// Throws SizeTooLarge.
std::vector<SweepRow> gallery_size_sweep(const ModelParams& params, const Dataset& dataset,
                                         const std::vector<int>& sizes, std::uint64_t seed, int repeats = 1);

}  // namespace icon
