#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "icon/autodiff.hpp"
#include "icon/geometry.hpp"
#include "icon/synthetic_data.hpp"

namespace icon {

struct ModelConfig {
  int grid_rows = 8;
  int grid_cols = 4;
  int patch_h = 4;
  int patch_w = 4;
  int token_dim = 64;   // D
  int embed_dim = 64;   // C
  int heads = 2;
  int image_blocks = 1;
  int mlp_hidden = 128;
  int max_text_len = 32;
  int vocab_size = 0;
  // Block whose head-averaged self-attention is exported as A; -1 = last block.
  int attention_block = -1;

  int num_tokens() const { return grid_rows * grid_cols; }
  int patch_dim() const { return patch_h * patch_w * 3; }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Flattened visual token sequence F (L × D) together with the self-attention
// map A (L × L, row-stochastic) of the encoder.
struct TokenFeatureMap {
  ad::Var tokens;
  ad::Matrix attention;
  int grid_rows = 0;
  int grid_cols = 0;

  int num_tokens() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }
};

// Column means of A: the attention each token receives. Sums to 1.
Eigen::VectorXd token_importance(const ad::Matrix& attention);

struct TransformerBlock {
  ad::Var ln1_gain, ln1_bias, wq, wk, wv, wo;
  ad::Var ln2_gain, ln2_bias, w1, b1, w2, b2;
};

struct CrossAttentionDecoder {
  ad::Var position, mask_token;
  ad::Var ln_gain, ln_bias, wq, wk, wv, wo;
  ad::Var ln2_gain, ln2_bias, w1, b1, w2, b2;
};

struct ModelParams {
  ModelConfig config;
  ad::Var patch_proj, patch_bias, image_position;
  std::vector<TransformerBlock> image_blocks;
  ad::Var image_head;
  ad::Var token_table, text_position;
  TransformerBlock text_block;
  ad::Var text_pool_query, text_head;
  CrossAttentionDecoder decoder;

  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  // Stable, named enumeration of every trainable array.
  std::vector<std::pair<std::string, ad::Var>> named() const;
  std::vector<ad::Var> all() const;
  ModelParams clone() const;
};

struct ImageEncoding {
  TokenFeatureMap fmap;
  ad::Var embedding;  // 1 × C, unit norm
};

struct TextEncoding {
  ad::Var tokens;     // n × D contextualized tokens T
  ad::Var embedding;  // 1 × C, unit norm
};

// Resamples the box region into the token grid of patches (L × patch_dim),
// centered to [-0.5, 0.5]. Throws DegenerateBox.
ad::Matrix crop_patches(const Image& pixels, const BoundingBox& box, const ModelConfig& config);

ImageEncoding encode_image(const SceneRecord& scene, const BoundingBox& box, const ModelParams& params);
ImageEncoding encode_patches(const ad::Matrix& patches, const ModelParams& params);

// Mean-pool tokens, project with the image head and normalize.
ad::Var pool_image_embedding(const ad::Var& tokens, const ModelParams& params);

std::vector<int> tokenize(const TextQuery& query, const Vocabulary& vocab);
// Throws UnknownToken.
TextEncoding encode_text(const TextQuery& query, const Vocabulary& vocab, const ModelParams& params);
TextEncoding encode_token_ids(const std::vector<int>& ids, const ModelParams& params);

double similarity(const Eigen::RowVectorXd& text_embedding, const Eigen::RowVectorXd& image_embedding);

// Cross-attention from visual tokens (queries) to text tokens (keys/values)
// plus a residual MLP head; returns the reconstruction F̂ (L × D).
// Throws ShapeMismatch.
ad::Var decode(const ad::Var& corrupted_tokens, const ad::Var& text_tokens, const ModelParams& params);

// Checkpoint directory: params.bin (raw float64 arrays in named() order) and
// manifest.json (shapes, config hash, step, free-form metadata).
void save_checkpoint(const ModelParams& params, const std::filesystem::path& dir,
                     const std::string& config_hash, long step, const nlohmann::json& metadata);

struct LoadedCheckpoint {
  ModelParams params;
  std::string config_hash;
  long step = 0;
  nlohmann::json metadata;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace icon
