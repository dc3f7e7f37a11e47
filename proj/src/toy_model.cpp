#include "icon/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "icon/error.hpp"
#include "icon/rng.hpp"

namespace icon {
namespace {

using ad::Matrix;
using ad::Var;

Matrix gaussian(Rng& rng, int rows, int cols, double stddev) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = stddev * rng.normal();
  return m;
}

Var weight(Rng& rng, int fan_in, int fan_out) {
  return Var::parameter(gaussian(rng, fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in))));
}
Var ones_row(int n) { return Var::parameter(Matrix::Ones(1, n)); }
Var zeros_row(int n) { return Var::parameter(Matrix::Zero(1, n)); }

TransformerBlock make_block(Rng& rng, int d, int hidden) {
  TransformerBlock b;
  b.ln1_gain = ones_row(d);
  b.ln1_bias = zeros_row(d);
  b.wq = weight(rng, d, d);
  b.wk = weight(rng, d, d);
  b.wv = weight(rng, d, d);
  b.wo = weight(rng, d, d);
  b.ln2_gain = ones_row(d);
  b.ln2_bias = zeros_row(d);
  b.w1 = weight(rng, d, hidden);
  b.b1 = zeros_row(hidden);
  b.w2 = weight(rng, hidden, d);
  b.b2 = zeros_row(d);
  return b;
}

void append_block(std::vector<std::pair<std::string, Var>>& out, const std::string& p,
                  const TransformerBlock& b) {
  out.emplace_back(p + ".ln1_gain", b.ln1_gain);
  out.emplace_back(p + ".ln1_bias", b.ln1_bias);
  out.emplace_back(p + ".wq", b.wq);
  out.emplace_back(p + ".wk", b.wk);
  out.emplace_back(p + ".wv", b.wv);
  out.emplace_back(p + ".wo", b.wo);
  out.emplace_back(p + ".ln2_gain", b.ln2_gain);
  out.emplace_back(p + ".ln2_bias", b.ln2_bias);
  out.emplace_back(p + ".w1", b.w1);
  out.emplace_back(p + ".b1", b.b1);
  out.emplace_back(p + ".w2", b.w2);
  out.emplace_back(p + ".b2", b.b2);
}

// Multi-head attention where queries come from `xq` and keys/values from `xkv`.
// Returns the projected output and writes the head-averaged attention.
Var attention(const Var& xq, const Var& xkv, const Var& wq, const Var& wk, const Var& wv, const Var& wo,
              int heads, Matrix* attention_out) {
  const Var q = ad::matmul(xq, wq);
  const Var k = ad::matmul(xkv, wk);
  const Var v = ad::matmul(xkv, wv);
  const Eigen::Index dh = q.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  Matrix mean_attn = Matrix::Zero(xq.rows(), xkv.rows());
  for (int h = 0; h < heads; ++h) {
    const Var qh = ad::cols(q, h * dh, dh);
    const Var kh = ad::cols(k, h * dh, dh);
    const Var vh = ad::cols(v, h * dh, dh);
    const Var a = ad::softmax_rows(ad::scale(ad::matmul_transposed(qh, kh), inv_sqrt));
    mean_attn += a.value();
    outs.push_back(ad::matmul(a, vh));
  }
  if (attention_out) *attention_out = mean_attn / static_cast<double>(heads);
  return ad::matmul(heads == 1 ? outs.front() : ad::hconcat(outs), wo);
}

Var block_forward(const Var& x, const TransformerBlock& b, int heads, Matrix* attention_out) {
  const Var xn = ad::layer_norm_rows(x, b.ln1_gain, b.ln1_bias);
  const Var x1 = x + attention(xn, xn, b.wq, b.wk, b.wv, b.wo, heads, attention_out);
  const Var h = ad::gelu(ad::add_row(ad::matmul(ad::layer_norm_rows(x1, b.ln2_gain, b.ln2_bias), b.w1), b.b1));
  return x1 + ad::add_row(ad::matmul(h, b.w2), b.b2);
}

Var clone_var(const Var& v) { return Var::parameter(v.value()); }

TransformerBlock clone_block(const TransformerBlock& b) {
  return {clone_var(b.ln1_gain), clone_var(b.ln1_bias), clone_var(b.wq), clone_var(b.wk),
          clone_var(b.wv),       clone_var(b.wo),       clone_var(b.ln2_gain), clone_var(b.ln2_bias),
          clone_var(b.w1),       clone_var(b.b1),       clone_var(b.w2),   clone_var(b.b2)};
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"grid_rows", c.grid_rows},         {"grid_cols", c.grid_cols},
          {"patch_h", c.patch_h},             {"patch_w", c.patch_w},
          {"token_dim", c.token_dim},         {"embed_dim", c.embed_dim},
          {"heads", c.heads},                 {"image_blocks", c.image_blocks},
          {"mlp_hidden", c.mlp_hidden},       {"max_text_len", c.max_text_len},
          {"vocab_size", c.vocab_size},       {"attention_block", c.attention_block}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.grid_rows = j.value("grid_rows", c.grid_rows);
  c.grid_cols = j.value("grid_cols", c.grid_cols);
  c.patch_h = j.value("patch_h", c.patch_h);
  c.patch_w = j.value("patch_w", c.patch_w);
  c.token_dim = j.value("token_dim", c.token_dim);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.heads = j.value("heads", c.heads);
  c.image_blocks = j.value("image_blocks", c.image_blocks);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.max_text_len = j.value("max_text_len", c.max_text_len);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.attention_block = j.value("attention_block", c.attention_block);
  return c;
}

Eigen::VectorXd token_importance(const Matrix& attention) {
  return attention.colwise().mean().transpose();
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  if (config.vocab_size <= 0) throw Error(ErrorKind::kConfigError, "model vocab_size must be positive");
  if (config.token_dim % config.heads != 0) {
    throw Error(ErrorKind::kConfigError, "token_dim must be divisible by heads");
  }
  if (config.image_blocks < 1) throw Error(ErrorKind::kConfigError, "image_blocks must be >= 1");
  Rng rng(derive_seed(seed, {0x6d6f64656cULL}));
  const int d = config.token_dim, l = config.num_tokens();
  ModelParams p;
  p.config = config;
  p.patch_proj = weight(rng, config.patch_dim(), d);
  p.patch_bias = zeros_row(d);
  p.image_position = Var::parameter(gaussian(rng, l, d, 0.1));
  for (int b = 0; b < config.image_blocks; ++b) p.image_blocks.push_back(make_block(rng, d, config.mlp_hidden));
  p.image_head = weight(rng, d, config.embed_dim);
  p.token_table = Var::parameter(gaussian(rng, config.vocab_size, d, 1.0));
  p.text_position = Var::parameter(gaussian(rng, config.max_text_len, d, 0.1));
  p.text_block = make_block(rng, d, config.mlp_hidden);
  p.text_pool_query = Var::parameter(gaussian(rng, d, 1, 1.0 / std::sqrt(static_cast<double>(d))));
  p.text_head = weight(rng, d, config.embed_dim);

  CrossAttentionDecoder& dec = p.decoder;
  dec.position = Var::parameter(gaussian(rng, l, d, 0.1));
  dec.mask_token = Var::parameter(gaussian(rng, 1, d, 0.1));
  dec.ln_gain = ones_row(d);
  dec.ln_bias = zeros_row(d);
  dec.wq = weight(rng, d, d);
  dec.wk = weight(rng, d, d);
  dec.wv = weight(rng, d, d);
  dec.wo = weight(rng, d, d);
  dec.ln2_gain = ones_row(d);
  dec.ln2_bias = zeros_row(d);
  dec.w1 = weight(rng, d, config.mlp_hidden);
  dec.b1 = zeros_row(config.mlp_hidden);
  dec.w2 = weight(rng, config.mlp_hidden, d);
  dec.b2 = zeros_row(d);
  return p;
}

std::vector<std::pair<std::string, Var>> ModelParams::named() const {
  std::vector<std::pair<std::string, Var>> out;
  out.emplace_back("image.patch_proj", patch_proj);
  out.emplace_back("image.patch_bias", patch_bias);
  out.emplace_back("image.position", image_position);
  for (std::size_t b = 0; b < image_blocks.size(); ++b) {
    append_block(out, "image.block" + std::to_string(b), image_blocks[b]);
  }
  out.emplace_back("image.head", image_head);
  out.emplace_back("text.token_table", token_table);
  out.emplace_back("text.position", text_position);
  append_block(out, "text.block", text_block);
  out.emplace_back("text.pool_query", text_pool_query);
  out.emplace_back("text.head", text_head);
  const CrossAttentionDecoder& d = decoder;
  out.emplace_back("decoder.position", d.position);
  out.emplace_back("decoder.mask_token", d.mask_token);
  out.emplace_back("decoder.ln_gain", d.ln_gain);
  out.emplace_back("decoder.ln_bias", d.ln_bias);
  out.emplace_back("decoder.wq", d.wq);
  out.emplace_back("decoder.wk", d.wk);
  out.emplace_back("decoder.wv", d.wv);
  out.emplace_back("decoder.wo", d.wo);
  out.emplace_back("decoder.ln2_gain", d.ln2_gain);
  out.emplace_back("decoder.ln2_bias", d.ln2_bias);
  out.emplace_back("decoder.w1", d.w1);
  out.emplace_back("decoder.b1", d.b1);
  out.emplace_back("decoder.w2", d.w2);
  out.emplace_back("decoder.b2", d.b2);
  return out;
}

std::vector<Var> ModelParams::all() const {
  std::vector<Var> out;
  for (auto& [name, v] : named()) out.push_back(v);
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  p.config = config;
  p.patch_proj = clone_var(patch_proj);
  p.patch_bias = clone_var(patch_bias);
  p.image_position = clone_var(image_position);
  for (const TransformerBlock& b : image_blocks) p.image_blocks.push_back(clone_block(b));
  p.image_head = clone_var(image_head);
  p.token_table = clone_var(token_table);
  p.text_position = clone_var(text_position);
  p.text_block = clone_block(text_block);
  p.text_pool_query = clone_var(text_pool_query);
  p.text_head = clone_var(text_head);
  const CrossAttentionDecoder& d = decoder;
  p.decoder = {clone_var(d.position), clone_var(d.mask_token), clone_var(d.ln_gain), clone_var(d.ln_bias),
               clone_var(d.wq),       clone_var(d.wk),         clone_var(d.wv),      clone_var(d.wo),
               clone_var(d.ln2_gain), clone_var(d.ln2_bias),   clone_var(d.w1),      clone_var(d.b1),
               clone_var(d.w2),       clone_var(d.b2)};
  return p;
}

Matrix crop_patches(const Image& pixels, const BoundingBox& box, const ModelConfig& cfg) {
  if (!(box.w >= 1.0) || !(box.h >= 1.0) || !std::isfinite(box.x) || !std::isfinite(box.y)) {
    throw Error(ErrorKind::kDegenerateBox, "box region is smaller than one pixel");
  }
  const int out_h = cfg.grid_rows * cfg.patch_h;
  const int out_w = cfg.grid_cols * cfg.patch_w;
  Matrix patches(cfg.num_tokens(), cfg.patch_dim());
  const double max_x = pixels.width - 1, max_y = pixels.height - 1;
  for (int py = 0; py < out_h; ++py) {
    const double sy = std::clamp(box.y + (py + 0.5) * box.h / out_h - 0.5, 0.0, max_y);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, pixels.height - 1);
    const double fy = sy - y0;
    for (int px = 0; px < out_w; ++px) {
      const double sx = std::clamp(box.x + (px + 0.5) * box.w / out_w - 0.5, 0.0, max_x);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, pixels.width - 1);
      const double fx = sx - x0;
      const int token = (py / cfg.patch_h) * cfg.grid_cols + px / cfg.patch_w;
      const int offset = ((py % cfg.patch_h) * cfg.patch_w + px % cfg.patch_w) * 3;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - fx) * pixels.at(y0, x0, c) + fx * pixels.at(y0, x1, c);
        const double bot = (1 - fx) * pixels.at(y1, x0, c) + fx * pixels.at(y1, x1, c);
        patches(token, offset + c) = (1 - fy) * top + fy * bot - 0.5;
      }
    }
  }
  return patches;
}

Var pool_image_embedding(const Var& tokens, const ModelParams& p) {
  return ad::l2_normalize_rows(ad::matmul(ad::mean_rows(tokens), p.image_head));
}

ImageEncoding encode_patches(const Matrix& patches, const ModelParams& p) {
  const ModelConfig& cfg = p.config;
  Var x = ad::add_row(ad::matmul(Var::constant(patches), p.patch_proj), p.patch_bias) + p.image_position;
  const int n_blocks = static_cast<int>(p.image_blocks.size());
  const int source = cfg.attention_block < 0 ? n_blocks + cfg.attention_block : cfg.attention_block;
  if (source < 0 || source >= n_blocks) throw Error(ErrorKind::kConfigError, "attention_block out of range");
  ImageEncoding enc;
  for (int b = 0; b < n_blocks; ++b) {
    x = block_forward(x, p.image_blocks[static_cast<std::size_t>(b)], cfg.heads,
                      b == source ? &enc.fmap.attention : nullptr);
  }
  enc.fmap.tokens = x;
  enc.fmap.grid_rows = cfg.grid_rows;
  enc.fmap.grid_cols = cfg.grid_cols;
  enc.embedding = pool_image_embedding(x, p);
  return enc;
}

ImageEncoding encode_image(const SceneRecord& scene, const BoundingBox& box, const ModelParams& p) {
  return encode_patches(crop_patches(scene.pixels, box, p.config), p);
}

std::vector<int> tokenize(const TextQuery& query, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(query.tokens.size());
  for (const std::string& t : query.tokens) ids.push_back(vocab.id(t));
  return ids;
}

TextEncoding encode_token_ids(const std::vector<int>& ids, const ModelParams& p) {
  const ModelConfig& cfg = p.config;
  if (ids.empty() || static_cast<int>(ids.size()) > cfg.max_text_len) {
    throw Error(ErrorKind::kShapeMismatch, "text length must be in [1, max_text_len]");
  }
  for (int id : ids) {
    if (id < 0 || id >= cfg.vocab_size) throw Error(ErrorKind::kUnknownToken, "token id outside the vocabulary");
  }
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
  const Var x = ad::gather_rows(p.token_table, ids) + ad::gather_rows(p.text_position, positions);
  TextEncoding enc;
  enc.tokens = block_forward(x, p.text_block, cfg.heads, nullptr);
  const Var pool = ad::softmax_rows(ad::transpose(ad::matmul(enc.tokens, p.text_pool_query)));
  enc.embedding = ad::l2_normalize_rows(ad::matmul(ad::matmul(pool, enc.tokens), p.text_head));
  return enc;
}

TextEncoding encode_text(const TextQuery& query, const Vocabulary& vocab, const ModelParams& p) {
  return encode_token_ids(tokenize(query, vocab), p);
}

double similarity(const Eigen::RowVectorXd& t, const Eigen::RowVectorXd& v) { return t.dot(v); }

Var decode(const Var& corrupted, const Var& text_tokens, const ModelParams& p) {
  const CrossAttentionDecoder& d = p.decoder;
  if (corrupted.rows() != d.position.rows() || corrupted.cols() != d.position.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "decode: corrupted map must be L x D");
  }
  if (text_tokens.cols() != corrupted.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "decode: text tokens must have D columns");
  }
  const Var x = corrupted + d.position;
  const Var xn = ad::layer_norm_rows(x, d.ln_gain, d.ln_bias);
  const Var y = x + attention(xn, text_tokens, d.wq, d.wk, d.wv, d.wo, p.config.heads, nullptr);
  const Var h = ad::gelu(ad::add_row(ad::matmul(ad::layer_norm_rows(y, d.ln2_gain, d.ln2_bias), d.w1), d.b1));
  return y + ad::add_row(ad::matmul(h, d.w2), d.b2);
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& dir, const std::string& hash,
                     long step, const nlohmann::json& metadata) {
  std::filesystem::create_directories(dir);
  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw Error(ErrorKind::kIoError, "cannot write " + (dir / "params.bin").string());
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& [name, v] : params.named()) {
    const Matrix& m = v.value();
    // Row-major on disk.
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double x = m(i, j);
        bin.write(reinterpret_cast<const char*>(&x), sizeof(double));
      }
    arrays.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  nlohmann::json manifest = {{"arrays", arrays},
                             {"model", to_json(params.config)},
                             {"config_hash", hash},
                             {"step", step},
                             {"dtype", "float64"},
                             {"layout", "row-major"},
                             {"metadata", metadata}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw Error(ErrorKind::kIoError, "missing " + (dir / "manifest.json").string());
  const nlohmann::json manifest = nlohmann::json::parse(min);
  LoadedCheckpoint ck;
  ck.params = ModelParams::initialize(model_config_from_json(manifest.at("model")), 0);
  ck.config_hash = manifest.at("config_hash").get<std::string>();
  ck.step = manifest.at("step").get<long>();
  ck.metadata = manifest.value("metadata", nlohmann::json::object());
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw Error(ErrorKind::kIoError, "missing " + (dir / "params.bin").string());
  const auto named = ck.params.named();
  const auto& arrays = manifest.at("arrays");
  if (arrays.size() != named.size()) throw Error(ErrorKind::kCheckpointMismatch, "parameter count differs");
  for (std::size_t k = 0; k < named.size(); ++k) {
    Matrix& m = named[k].second.mutable_value();
    if (arrays[k].at("name") != named[k].first || arrays[k].at("rows").get<Eigen::Index>() != m.rows() ||
        arrays[k].at("cols").get<Eigen::Index>() != m.cols()) {
      throw Error(ErrorKind::kCheckpointMismatch, "array '" + named[k].first + "' does not match the model");
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) bin.read(reinterpret_cast<char*>(&m(i, j)), sizeof(double));
  }
  if (!bin) throw Error(ErrorKind::kIoError, "params.bin is truncated");
  return ck;
}

}  // namespace icon
