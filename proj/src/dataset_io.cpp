#include "icon/dataset_io.hpp"

#include <algorithm>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "icon/error.hpp"

namespace icon {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_lines(const fs::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  for (const json& j : lines) out << j.dump() << '\n';
}

std::vector<json> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

json box_json(const BoundingBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

BoundingBox box_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

std::string scene_file(int scene_id) {
  std::ostringstream s;
  s << std::setw(6) << std::setfill('0') << scene_id << ".png";
  return s.str();
}

void save_split(const std::vector<SceneRecord>& scenes, const fs::path& dir) {
  fs::create_directories(dir / "scenes");
  std::vector<json> lines;
  for (const SceneRecord& s : scenes) {
    lines.push_back(scene_annotation_json(s));
    write_png(dir / "scenes" / scene_file(s.scene_id), s.pixels);
  }
  write_lines(dir / "annotations.jsonl", lines);
}

std::vector<SceneRecord> load_split(const fs::path& dir) {
  std::vector<SceneRecord> scenes;
  for (const json& j : read_lines(dir / "annotations.jsonl")) {
    SceneRecord s;
    s.scene_id = j.at("scene_id").get<int>();
    s.background_id = j.at("background_id").get<int>();
    for (const json& p : j.at("persons")) {
      PersonAnnotation a;
      a.attrs = person_attributes_from_json(p.at("attrs"));
      a.box = box_from_json(p.at("box"));
      a.sprite_seed = p.at("sprite_seed").get<std::uint64_t>();
      s.persons.push_back(a);
    }
    s.pixels = read_png(dir / "scenes" / scene_file(s.scene_id));
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace

json to_json(const DatasetConfig& c) {
  return {{"num_identities", c.num_identities},
          {"train_scenes", c.train_scenes},
          {"gallery_scenes", c.gallery_scenes},
          {"queries", c.queries},
          {"persons_min", c.persons_min},
          {"persons_max", c.persons_max},
          {"width", c.width},
          {"height", c.height},
          {"seed", c.seed},
          {"disjoint_identities", c.disjoint_identities},
          {"train_identities", c.train_identities},
          {"disjoint_backgrounds", c.disjoint_backgrounds},
          {"background_correlation", c.background_correlation}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig c;
  c.num_identities = j.value("num_identities", c.num_identities);
  c.train_scenes = j.value("train_scenes", c.train_scenes);
  c.gallery_scenes = j.value("gallery_scenes", c.gallery_scenes);
  c.queries = j.value("queries", c.queries);
  c.persons_min = j.value("persons_min", c.persons_min);
  c.persons_max = j.value("persons_max", c.persons_max);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.seed = j.value("seed", c.seed);
  c.disjoint_identities = j.value("disjoint_identities", c.disjoint_identities);
  c.train_identities = j.value("train_identities", c.train_identities);
  c.disjoint_backgrounds = j.value("disjoint_backgrounds", c.disjoint_backgrounds);
  c.background_correlation = j.value("background_correlation", c.background_correlation);
  return c;
}

json to_json(const PersonAttributes& a) {
  return {{"identity_id", a.identity_id},
          {"torso_color", std::string(color_name(a.torso_color))},
          {"leg_color", std::string(color_name(a.leg_color))},
          {"accessory", std::string(accessory_name(a.accessory))},
          {"height_scale", a.height_scale}};
}

PersonAttributes person_attributes_from_json(const json& j) {
  PersonAttributes a;
  a.identity_id = j.at("identity_id").get<int>();
  a.torso_color = color_from_name(j.at("torso_color").get<std::string>());
  a.leg_color = color_from_name(j.at("leg_color").get<std::string>());
  a.accessory = accessory_from_name(j.at("accessory").get<std::string>());
  a.height_scale = j.at("height_scale").get<double>();
  return a;
}

json scene_annotation_json(const SceneRecord& s) {
  json persons = json::array();
  for (const PersonAnnotation& p : s.persons) {
    persons.push_back({{"identity_id", p.attrs.identity_id},
                       {"box", box_json(p.box)},
                       {"attrs", to_json(p.attrs)},
                       {"sprite_seed", p.sprite_seed}});
  }
  return {{"scene_id", s.scene_id}, {"background_id", s.background_id}, {"persons", persons}};
}

json to_json(const TextQuery& q) {
  return {{"query_id", q.query_id}, {"identity_id", q.identity_id}, {"text", q.text()}};
}

std::string config_hash(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

void write_png(const fs::path& path, const Image& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::kIoError, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[static_cast<std::size_t>(x) * 3 + c] =
            static_cast<png_byte>(std::lround(std::clamp(image.at(y, x, c), 0.0, 1.0) * 255.0));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const fs::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw Error(ErrorKind::kIoError, "cannot read " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::kIoError, "libpng failed reading " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::kIoError, path.string() + " is not an 8-bit RGB PNG");
  }
  Image image(static_cast<int>(png_get_image_width(png, info)),
              static_cast<int>(png_get_image_height(png, info)));
  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 3);
  for (int y = 0; y < image.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json cfg = to_json(ds.config);
  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    if (!out) throw Error(ErrorKind::kIoError, "cannot write " + (dir / "config.json").string());
    out << json{{"dataset", cfg}, {"config_hash", config_hash(cfg)}}.dump(2) << '\n';
  }
  std::vector<json> ids;
  for (const PersonAttributes& a : ds.identities) ids.push_back(to_json(a));
  write_lines(dir / "identities.jsonl", ids);
  std::vector<json> queries;
  for (const TextQuery& q : ds.queries) queries.push_back(to_json(q));
  write_lines(dir / "queries.jsonl", queries);
  save_split(ds.train, dir / "train");
  save_split(ds.gallery, dir / "gallery");
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw Error(ErrorKind::kIoError, "missing " + (dir / "config.json").string());
  const json top = json::parse(in);
  Dataset ds;
  ds.config = dataset_config_from_json(top.at("dataset"));
  for (const json& j : read_lines(dir / "identities.jsonl")) ds.identities.push_back(person_attributes_from_json(j));
  for (const PersonAttributes& a : ds.identities) {
    if (!ds.config.disjoint_identities || a.identity_id < ds.config.train_identities) {
      ds.train_identity_ids.push_back(a.identity_id);
    }
  }
  for (const json& j : read_lines(dir / "queries.jsonl")) {
    TextQuery q;
    q.query_id = j.at("query_id").get<int>();
    q.identity_id = j.at("identity_id").get<int>();
    std::istringstream words(j.at("text").get<std::string>());
    std::string w;
    while (words >> w) q.tokens.push_back(w);
    ds.queries.push_back(std::move(q));
  }
  ds.train = load_split(dir / "train");
  ds.gallery = load_split(dir / "gallery");
  return ds;
}

}  // namespace icon
