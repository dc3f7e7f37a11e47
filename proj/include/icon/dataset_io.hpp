#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "icon/synthetic_data.hpp"

namespace icon {

nlohmann::json to_json(const DatasetConfig& config);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PersonAttributes& attrs);
PersonAttributes person_attributes_from_json(const nlohmann::json& j);

// One annotations.jsonl line (everything but the pixels).
nlohmann::json scene_annotation_json(const SceneRecord& scene);
nlohmann::json to_json(const TextQuery& query);

// 64-bit FNV-1a over the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

// 8-bit RGB PNG. Pixels are expected on the 1/255 lattice so the round trip is exact.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

// Layout:
//   config.json, identities.jsonl, queries.jsonl,
//   train/annotations.jsonl, train/scenes/<scene_id>.png,
//   gallery/annotations.jsonl, gallery/scenes/<scene_id>.png
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace icon
