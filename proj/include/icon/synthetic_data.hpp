#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "icon/geometry.hpp"

namespace icon {

enum class Color : std::uint8_t { kRed, kGreen, kBlue, kYellow, kBlack, kWhite, kGray, kPurple };
enum class Accessory : std::uint8_t { kNone, kHat, kBag };

inline constexpr int kNumColors = 8;
inline constexpr int kNumAccessories = 3;
inline constexpr int kNumBackgroundFamilies = 4;  // checker, stripes, noise, gradient

std::string_view color_name(Color c);
std::string_view accessory_name(Accessory a);
Color color_from_name(std::string_view name);
Accessory accessory_from_name(std::string_view name);
std::array<double, 3> color_rgb(Color c);

struct PersonAttributes {
  int identity_id = 0;
  Color torso_color = Color::kRed;
  Color leg_color = Color::kBlack;
  Accessory accessory = Accessory::kNone;
  double height_scale = 1.0;  // in [0.7, 1.3]

  friend bool operator==(const PersonAttributes&, const PersonAttributes&) = default;
};

// H×W×3 raster, values in [0, 1], row-major with interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// Rows/cols are half-open [begin, end) pixel ranges inside the sprite.
struct SpriteLayout {
  int height = 0;
  int width = 0;
  int body_width = 0;
  int hat_end = 0;
  int head_end = 0;
  int torso_end = 0;
  int bag_begin = 0;
  int bag_end = 0;
};

SpriteLayout sprite_layout(const PersonAttributes& attrs);

struct Sprite {
  Image pixels;
  std::vector<std::uint8_t> alpha;  // 1 where the sprite covers the pixel
  SpriteLayout layout;

  bool covered(int y, int x) const { return alpha[static_cast<std::size_t>(y) * pixels.width + x] != 0; }
};

Sprite render_person(const PersonAttributes& attrs, std::uint64_t rng_seed);

struct PersonAnnotation {
  PersonAttributes attrs;
  BoundingBox box;
  std::uint64_t sprite_seed = 0;
};

struct SceneRecord {
  int scene_id = 0;
  int background_id = 0;
  Image pixels;
  std::vector<PersonAnnotation> persons;

  ImageBounds bounds() const {
    return {static_cast<double>(pixels.width), static_cast<double>(pixels.height)};
  }
};

struct SceneOptions {
  int width = 128;
  int height = 96;
  double max_overlap_iou = 0.7;
  int max_attempts = 100;
};

// Procedural background texture of the given family; pixels quantized to 1/255.
Image render_background(int background_id, int width, int height, std::uint64_t rng_seed);

// Places each identity by rejection sampling. Throws PlacementFailure.
SceneRecord generate_scene(const std::vector<PersonAttributes>& identities, int background_id,
                           std::uint64_t rng_seed, int scene_id = 0,
                           const SceneOptions& options = {});

// Paints the sprite for `person` over `pixels` at its box position.
void composite_person(Image& pixels, const PersonAnnotation& person);

struct TextQuery {
  int query_id = 0;
  int identity_id = 0;
  std::vector<std::string> tokens;

  std::string text() const;
};

// Closed vocabulary: every token any template or clause can produce.
class Vocabulary {
 public:
  Vocabulary();

  int size() const { return static_cast<int>(tokens_.size()); }
  // Throws UnknownToken.
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

int num_description_templates();
TextQuery describe_person(const PersonAttributes& attrs, std::uint64_t rng_seed, int query_id = 0);

struct DatasetConfig {
  int num_identities = 60;
  int train_scenes = 500;
  int gallery_scenes = 200;
  int queries = 100;
  int persons_min = 1;
  int persons_max = 3;
  int width = 128;
  int height = 96;
  std::uint64_t seed = 42;
  // Train and gallery identities partitioned when set (zero-shot style split).
  bool disjoint_identities = false;
  int train_identities = 40;  // used only with disjoint_identities
  // Train scenes use families {0,1} and the gallery {2,3} when set.
  bool disjoint_backgrounds = false;
  // Probability that a scene uses its first person's home background (the
  // gallery follows it too unless disjoint_backgrounds is set).
  double background_correlation = 0.8;
};

struct Dataset {
  DatasetConfig config;
  std::vector<PersonAttributes> identities;  // indexed by identity_id
  std::vector<int> train_identity_ids;
  std::vector<SceneRecord> train;
  std::vector<SceneRecord> gallery;
  std::vector<TextQuery> queries;
  Vocabulary vocab;

  int home_background(int identity_id) const;
};

// Throws ConfigError on inconsistent counts.
void validate(const DatasetConfig& config);
Dataset build_dataset(const DatasetConfig& config);

}  // namespace icon
