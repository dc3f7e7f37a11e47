#include "icon/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "icon/error.hpp"
#include "icon/rng.hpp"

namespace icon {
namespace {

constexpr std::array<std::string_view, kNumColors> kColorNames = {
    "red", "green", "blue", "yellow", "black", "white", "gray", "purple"};
constexpr std::array<std::string_view, kNumAccessories> kAccessoryNames = {"none", "hat", "bag"};

constexpr std::array<double, 3> kSkin = {0.87, 0.70, 0.55};
constexpr std::array<double, 3> kHat = {0.12, 0.12, 0.30};
constexpr std::array<double, 3> kBag = {0.45, 0.28, 0.12};

constexpr double kBaseHeight = 30.0;

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

struct Template {
  const char* before_torso;
  const char* between;
  const char* after_legs;
};

// {torso} and {legs} are inserted between the three fragments.
constexpr std::array<Template, 4> kTemplates = {{
    {"a person wearing a", "shirt and", "trousers"},
    {"a pedestrian in a", "top and", "pants"},
    {"someone with a", "jacket and", "jeans"},
    {"the walker in a", "coat with", "shorts"},
}};

constexpr std::array<const char*, 2> kHatClauses = {"wearing a hat", "with a hat on the head"};
constexpr std::array<const char*, 2> kBagClauses = {"carrying a bag", "with a bag"};

void append_words(std::vector<std::string>& out, std::string_view words) {
  std::istringstream in{std::string(words)};
  std::string w;
  while (in >> w) out.push_back(w);
}

std::array<double, 3> random_color(Rng& rng) {
  return {rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
}

void set_pixel(Image& img, int y, int x, const std::array<double, 3>& rgb) {
  for (int c = 0; c < 3; ++c) img.at(y, x, c) = quantize(rgb[c]);
}

}  // namespace

std::string_view color_name(Color c) { return kColorNames[static_cast<std::size_t>(c)]; }
std::string_view accessory_name(Accessory a) { return kAccessoryNames[static_cast<std::size_t>(a)]; }

Color color_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kColorNames.size(); ++i) {
    if (kColorNames[i] == name) return static_cast<Color>(i);
  }
  throw Error(ErrorKind::kConfigError, "unknown color '" + std::string(name) + "'");
}

Accessory accessory_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kAccessoryNames.size(); ++i) {
    if (kAccessoryNames[i] == name) return static_cast<Accessory>(i);
  }
  throw Error(ErrorKind::kConfigError, "unknown accessory '" + std::string(name) + "'");
}

std::array<double, 3> color_rgb(Color c) {
  switch (c) {
    case Color::kRed: return {0.85, 0.10, 0.10};
    case Color::kGreen: return {0.10, 0.70, 0.20};
    case Color::kBlue: return {0.10, 0.25, 0.85};
    case Color::kYellow: return {0.92, 0.85, 0.10};
    case Color::kBlack: return {0.08, 0.08, 0.08};
    case Color::kWhite: return {0.95, 0.95, 0.95};
    case Color::kGray: return {0.50, 0.50, 0.50};
    case Color::kPurple: return {0.55, 0.15, 0.70};
  }
  return {0.0, 0.0, 0.0};
}

SpriteLayout sprite_layout(const PersonAttributes& attrs) {
  SpriteLayout s;
  s.height = static_cast<int>(std::lround(kBaseHeight * attrs.height_scale));
  s.body_width = std::max(5, static_cast<int>(std::lround(0.36 * s.height)));
  const int bag_width = std::max(3, static_cast<int>(std::lround(0.18 * s.height)));
  s.width = s.body_width + bag_width;
  s.hat_end = static_cast<int>(std::lround(0.10 * s.height));
  s.head_end = static_cast<int>(std::lround(0.26 * s.height));
  s.torso_end = static_cast<int>(std::lround(0.60 * s.height));
  s.bag_begin = static_cast<int>(std::lround(0.34 * s.height));
  s.bag_end = static_cast<int>(std::lround(0.56 * s.height));
  return s;
}

Sprite render_person(const PersonAttributes& attrs, std::uint64_t rng_seed) {
  Rng rng(derive_seed(rng_seed, {static_cast<std::uint64_t>(attrs.identity_id)}));
  Sprite sprite;
  sprite.layout = sprite_layout(attrs);
  const SpriteLayout& L = sprite.layout;
  sprite.pixels = Image(L.width, L.height);
  sprite.alpha.assign(static_cast<std::size_t>(L.width) * L.height, 0);

  auto shade = [&rng](std::array<double, 3> base) {
    for (double& v : base) v += rng.uniform(-0.04, 0.04);
    return base;
  };
  const auto skin = shade(kSkin);
  const auto hat = shade(kHat);
  const auto torso = shade(color_rgb(attrs.torso_color));
  const auto legs = shade(color_rgb(attrs.leg_color));
  const auto bag = shade(kBag);

  auto paint = [&](int y, int x, const std::array<double, 3>& rgb) {
    std::array<double, 3> px = rgb;
    for (double& v : px) v += rng.uniform(-0.02, 0.02);
    set_pixel(sprite.pixels, y, x, px);
    sprite.alpha[static_cast<std::size_t>(y) * L.width + x] = 1;
  };

  const int head_w = std::max(2, static_cast<int>(std::lround(0.5 * L.body_width)));
  const int head_x0 = (L.body_width - head_w) / 2;
  const int hat_w = std::min(L.body_width, head_w + 2);
  const int hat_x0 = (L.body_width - hat_w) / 2;
  const int leg_w = std::max(2, static_cast<int>(std::lround(0.4 * L.body_width)));

  for (int y = 0; y < L.height; ++y) {
    for (int x = 0; x < L.width; ++x) {
      if (y < L.hat_end) {
        if (attrs.accessory == Accessory::kHat && x >= hat_x0 && x < hat_x0 + hat_w) paint(y, x, hat);
      } else if (y < L.head_end) {
        if (x >= head_x0 && x < head_x0 + head_w) paint(y, x, skin);
      } else if (y < L.torso_end) {
        if (x < L.body_width) paint(y, x, torso);
      } else if (x < leg_w || (x >= L.body_width - leg_w && x < L.body_width)) {
        paint(y, x, legs);
      }
      if (attrs.accessory == Accessory::kBag && x >= L.body_width && y >= L.bag_begin &&
          y < L.bag_end) {
        paint(y, x, bag);
      }
    }
  }
  return sprite;
}

Image render_background(int background_id, int width, int height, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  Image img(width, height);
  const auto c1 = random_color(rng);
  const auto c2 = random_color(rng);
  switch (((background_id % kNumBackgroundFamilies) + kNumBackgroundFamilies) %
          kNumBackgroundFamilies) {
    case 0: {  // checker
      const int cell = static_cast<int>(rng.integer(6, 12));
      const int off = static_cast<int>(rng.integer(0, cell - 1));
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          set_pixel(img, y, x, (((x + off) / cell + (y + off) / cell) % 2) ? c1 : c2);
      break;
    }
    case 1: {  // stripes
      const int period = static_cast<int>(rng.integer(6, 14));
      const int orientation = static_cast<int>(rng.integer(0, 2));
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const int coord = orientation == 0 ? y : orientation == 1 ? x : x + y;
          set_pixel(img, y, x, (coord % period) < period / 2 ? c1 : c2);
        }
      }
      break;
    }
    case 2: {  // noise
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          std::array<double, 3> px = c1;
          for (double& v : px) v += rng.uniform(-0.15, 0.15);
          set_pixel(img, y, x, px);
        }
      }
      break;
    }
    default: {  // gradient
      const double angle = rng.uniform(0.0, 6.283185307179586);
      const double dx = std::cos(angle), dy = std::sin(angle);
      const double span = std::abs(dx) * width + std::abs(dy) * height;
      const double base = std::min(0.0, dx * width) + std::min(0.0, dy * height);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double t = std::clamp((dx * x + dy * y - base) / span, 0.0, 1.0);
          set_pixel(img, y, x,
                    {c1[0] + t * (c2[0] - c1[0]), c1[1] + t * (c2[1] - c1[1]),
                     c1[2] + t * (c2[2] - c1[2])});
        }
      }
      break;
    }
  }
  return img;
}

void composite_person(Image& pixels, const PersonAnnotation& person) {
  const Sprite sprite = render_person(person.attrs, person.sprite_seed);
  const int x0 = static_cast<int>(person.box.x);
  const int y0 = static_cast<int>(person.box.y);
  for (int y = 0; y < sprite.pixels.height; ++y) {
    for (int x = 0; x < sprite.pixels.width; ++x) {
      if (!sprite.covered(y, x)) continue;
      const int py = y0 + y, px = x0 + x;
      if (py < 0 || px < 0 || py >= pixels.height || px >= pixels.width) continue;
      for (int c = 0; c < 3; ++c) pixels.at(py, px, c) = sprite.pixels.at(y, x, c);
    }
  }
}

SceneRecord generate_scene(const std::vector<PersonAttributes>& identities, int background_id,
                           std::uint64_t rng_seed, int scene_id, const SceneOptions& options) {
  if (identities.empty()) {
    throw Error(ErrorKind::kConfigError, "generate_scene needs at least one identity");
  }
  Rng rng(rng_seed);
  SceneRecord scene;
  scene.scene_id = scene_id;
  scene.background_id = background_id;
  scene.pixels = render_background(background_id, options.width, options.height, rng.next());

  for (const PersonAttributes& attrs : identities) {
    const SpriteLayout layout = sprite_layout(attrs);
    if (layout.width > options.width || layout.height > options.height) {
      throw Error(ErrorKind::kPlacementFailure, "sprite larger than canvas");
    }
    const std::uint64_t sprite_seed = rng.next();
    bool placed = false;
    for (int attempt = 0; attempt < options.max_attempts && !placed; ++attempt) {
      const BoundingBox box{static_cast<double>(rng.integer(0, options.width - layout.width)),
                            static_cast<double>(rng.integer(0, options.height - layout.height)),
                            static_cast<double>(layout.width), static_cast<double>(layout.height)};
      const bool ok = std::all_of(scene.persons.begin(), scene.persons.end(),
                                  [&](const PersonAnnotation& p) {
                                    return iou(p.box, box) <= options.max_overlap_iou;
                                  });
      if (ok) {
        scene.persons.push_back({attrs, box, sprite_seed});
        placed = true;
      }
    }
    if (!placed) {
      std::ostringstream msg;
      msg << "could not place identity " << attrs.identity_id << " in scene " << scene_id
          << " within " << options.max_attempts << " attempts";
      throw Error(ErrorKind::kPlacementFailure, msg.str());
    }
  }
  for (const PersonAnnotation& p : scene.persons) composite_person(scene.pixels, p);
  return scene;
}

std::string TextQuery::text() const {
  std::string out;
  for (const std::string& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Vocabulary::Vocabulary() {
  std::vector<std::string> words;
  for (const Template& t : kTemplates) {
    append_words(words, t.before_torso);
    append_words(words, t.between);
    append_words(words, t.after_legs);
  }
  for (const char* c : kHatClauses) append_words(words, c);
  for (const char* c : kBagClauses) append_words(words, c);
  for (std::string_view c : kColorNames) words.emplace_back(c);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  tokens_ = std::move(words);
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw Error(ErrorKind::kUnknownToken, "unknown token '" + token + "'");
  return it->second;
}

int num_description_templates() { return static_cast<int>(kTemplates.size()); }

TextQuery describe_person(const PersonAttributes& attrs, std::uint64_t rng_seed, int query_id) {
  Rng rng(rng_seed);
  const Template& t = kTemplates[static_cast<std::size_t>(rng.integer(0, kTemplates.size() - 1))];
  const auto clause = static_cast<std::size_t>(rng.integer(0, 1));
  TextQuery q;
  q.query_id = query_id;
  q.identity_id = attrs.identity_id;
  append_words(q.tokens, t.before_torso);
  q.tokens.emplace_back(color_name(attrs.torso_color));
  append_words(q.tokens, t.between);
  q.tokens.emplace_back(color_name(attrs.leg_color));
  append_words(q.tokens, t.after_legs);
  if (attrs.accessory == Accessory::kHat) append_words(q.tokens, kHatClauses[clause]);
  if (attrs.accessory == Accessory::kBag) append_words(q.tokens, kBagClauses[clause]);
  return q;
}

int Dataset::home_background(int identity_id) const {
  const int families = config.disjoint_backgrounds ? 2 : kNumBackgroundFamilies;
  return identity_id % families;
}

void validate(const DatasetConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConfigError, msg); };
  if (c.num_identities < 1) fail("num_identities must be >= 1");
  if (c.num_identities > kNumColors * kNumColors * kNumAccessories) {
    fail("num_identities exceeds the number of distinct attribute tuples");
  }
  if (c.train_scenes < 1 || c.gallery_scenes < 1 || c.queries < 1) {
    fail("train_scenes, gallery_scenes and queries must all be >= 1");
  }
  if (c.persons_min < 1 || c.persons_max < c.persons_min) fail("need 1 <= persons_min <= persons_max");
  if (c.width < 48 || c.height < 48) fail("canvas must be at least 48x48 to fit the tallest sprite");
  if (c.background_correlation < 0.0 || c.background_correlation > 1.0) {
    fail("background_correlation must lie in [0, 1]");
  }
  if (c.disjoint_identities) {
    if (c.train_identities < 1 || c.train_identities >= c.num_identities) {
      fail("disjoint_identities needs 1 <= train_identities < num_identities");
    }
    if (c.persons_max > c.num_identities - c.train_identities || c.persons_max > c.train_identities) {
      fail("persons_max exceeds the identity pool of a split");
    }
  } else if (c.persons_max > c.num_identities) {
    fail("persons_max exceeds num_identities");
  }
}

Dataset build_dataset(const DatasetConfig& config) {
  validate(config);
  Dataset ds;
  ds.config = config;

  Rng id_rng(derive_seed(config.seed, {1}));
  std::vector<int> tuples(kNumColors * kNumColors * kNumAccessories);
  std::iota(tuples.begin(), tuples.end(), 0);
  for (std::size_t i = tuples.size() - 1; i > 0; --i) {
    std::swap(tuples[i], tuples[static_cast<std::size_t>(id_rng.integer(0, static_cast<std::int64_t>(i)))]);
  }
  for (int id = 0; id < config.num_identities; ++id) {
    const int t = tuples[static_cast<std::size_t>(id)];
    PersonAttributes a;
    a.identity_id = id;
    a.torso_color = static_cast<Color>(t % kNumColors);
    a.leg_color = static_cast<Color>((t / kNumColors) % kNumColors);
    a.accessory = static_cast<Accessory>(t / (kNumColors * kNumColors));
    a.height_scale = id_rng.uniform(0.7, 1.3);
    ds.identities.push_back(a);
  }

  std::vector<int> train_pool, gallery_pool;
  for (int id = 0; id < config.num_identities; ++id) {
    const bool in_train = !config.disjoint_identities || id < config.train_identities;
    (in_train ? train_pool : gallery_pool).push_back(id);
    if (!config.disjoint_identities) gallery_pool.push_back(id);
  }
  ds.train_identity_ids = train_pool;

  const SceneOptions opts{config.width, config.height, 0.7, 100};
  auto pick = [&](Rng& rng, const std::vector<int>& pool) {
    const int count = static_cast<int>(rng.integer(config.persons_min, config.persons_max));
    std::vector<int> order = pool;
    std::vector<PersonAttributes> chosen;
    for (int i = 0; i < count; ++i) {
      const auto j = static_cast<std::size_t>(
          rng.integer(i, static_cast<std::int64_t>(order.size()) - 1));
      std::swap(order[static_cast<std::size_t>(i)], order[j]);
      chosen.push_back(ds.identities[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    }
    return chosen;
  };

  const int train_families = config.disjoint_backgrounds ? 2 : kNumBackgroundFamilies;
  for (int s = 0; s < config.train_scenes; ++s) {
    Rng rng(derive_seed(config.seed, {2, static_cast<std::uint64_t>(s)}));
    const auto persons = pick(rng, train_pool);
    int bg = static_cast<int>(rng.integer(0, train_families - 1));
    if (rng.bernoulli(config.background_correlation)) bg = ds.home_background(persons.front().identity_id);
    ds.train.push_back(
        generate_scene(persons, bg, derive_seed(config.seed, {3, static_cast<std::uint64_t>(s)}), s, opts));
  }
  for (int g = 0; g < config.gallery_scenes; ++g) {
    const int scene_id = config.train_scenes + g;
    Rng rng(derive_seed(config.seed, {4, static_cast<std::uint64_t>(scene_id)}));
    const auto persons = pick(rng, gallery_pool);
    int bg = static_cast<int>(rng.integer(0, kNumBackgroundFamilies - 1));
    if (config.disjoint_backgrounds) {
      bg = 2 + static_cast<int>(rng.integer(0, 1));
    } else if (rng.bernoulli(config.background_correlation)) {
      bg = ds.home_background(persons.front().identity_id);
    }
    ds.gallery.push_back(generate_scene(
        persons, bg, derive_seed(config.seed, {3, static_cast<std::uint64_t>(scene_id)}), scene_id, opts));
  }

  std::vector<int> present;
  for (const SceneRecord& s : ds.gallery)
    for (const PersonAnnotation& p : s.persons) present.push_back(p.attrs.identity_id);
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  Rng q_rng(derive_seed(config.seed, {5}));
  for (std::size_t i = present.size() - 1; i > 0; --i) {
    std::swap(present[i], present[static_cast<std::size_t>(q_rng.integer(0, static_cast<std::int64_t>(i)))]);
  }
  for (int q = 0; q < config.queries; ++q) {
    const int id = present[static_cast<std::size_t>(q) % present.size()];
    ds.queries.push_back(describe_person(ds.identities[static_cast<std::size_t>(id)],
                                         derive_seed(config.seed, {6, static_cast<std::uint64_t>(q)}), q));
  }
  return ds;
}

}  // namespace icon
