#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "agglo/error.hpp"
#include "agglo/ground_truth.hpp"
#include "agglo/io.hpp"
#include "agglo/mask.hpp"

namespace agglo {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kGeneratorVersion = "agglosynth 1.0.0";

struct ManifestEntry {
  std::int64_t image_id = 0;
  std::string file_name;
};

struct DatasetManifest {
  std::string name;
  std::string split;
  std::vector<ManifestEntry> images;
  std::uint64_t seed = 0;
  std::string generator_version = kGeneratorVersion;
};

inline json to_json(const DatasetManifest& m) {
  json images = json::array();
  for (const auto& e : m.images) images.push_back({{"id", e.image_id}, {"file_name", e.file_name}});
  return {{"name", m.name},
          {"split", m.split},
          {"images", images},
          {"seed", m.seed},
          {"generator_version", m.generator_version}};
}

// Builds the shared annotations/detections document. Annotation ids are
// assigned sequentially from 1 in image order; records carrying a score
// are written with a "score" field.
inline json annotations_to_json(std::vector<AnnotatedImage>& images) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["images"] = json::array();
  doc["annotations"] = json::array();
  std::int64_t next_id = 1;
  for (auto& img : images) {
    doc["images"].push_back({{"id", img.image_id},
                             {"file_name", img.file_name},
                             {"width", img.size.width},
                             {"height", img.size.height}});
    for (auto& p : img.particles) {
      p.annotation_id = next_id++;
      json a{{"id", p.annotation_id},
             {"image_id", img.image_id},
             {"particle_id", p.particle_id},
             {"category_id", 1},
             {"rle", p.mask.runs},
             {"bbox", {p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h}},
             {"visible_fraction", p.visible_fraction},
             {"max_feret", p.max_feret}};
      if (p.agglomerate_id >= 0) a["agglomerate_id"] = p.agglomerate_id;
      if (p.diameter > 0) a["diameter"] = p.diameter;
      if (p.score) a["score"] = *p.score;
      doc["annotations"].push_back(std::move(a));
    }
  }
  doc["categories"] = json::array({{{"id", 1}, {"name", kParticleCategory}}});
  return doc;
}

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& pointer, const std::string& what) {
  throw Error(ErrorKind::invalid_input, "schema violation at " + pointer + ": " + what, pointer);
}

inline const json& require(const json& obj, const std::string& key, const std::string& at) {
  if (!obj.is_object()) schema_fail(at, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(at + "/" + key, "missing field");
  return *it;
}

inline std::int64_t require_int(const json& obj, const std::string& key, const std::string& at) {
  const json& v = require(obj, key, at);
  if (!v.is_number_integer()) schema_fail(at + "/" + key, "expected an integer");
  return v.get<std::int64_t>();
}

inline double require_number(const json& obj, const std::string& key, const std::string& at) {
  const json& v = require(obj, key, at);
  if (!v.is_number()) schema_fail(at + "/" + key, "expected a number");
  return v.get<double>();
}

}  // namespace detail

// Checks a parsed annotations (or, with require_score, detections)
// document. Errors name the offending JSON pointer.
inline void validate_annotations(const json& doc, bool require_score) {
  using detail::require;
  using detail::require_int;
  using detail::require_number;
  using detail::schema_fail;
  if (!doc.is_object()) schema_fail("", "document must be an object");
  const json& version = require(doc, "schema_version", "");
  if (!version.is_string() || version.get<std::string>() != kSchemaVersion)
    schema_fail("/schema_version", "expected \"1\"");

  const json& images = require(doc, "images", "");
  if (!images.is_array()) schema_fail("/images", "expected an array");
  std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> dims;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string at = "/images/" + std::to_string(i);
    const auto id = require_int(images[i], "id", at);
    if (!require(images[i], "file_name", at).is_string()) schema_fail(at + "/file_name", "expected a string");
    const auto w = require_int(images[i], "width", at);
    const auto h = require_int(images[i], "height", at);
    if (w <= 0) schema_fail(at + "/width", "must be positive");
    if (h <= 0) schema_fail(at + "/height", "must be positive");
    if (!dims.emplace(id, std::pair{w, h}).second) schema_fail(at + "/id", "duplicate image id");
  }

  const json& anns = require(doc, "annotations", "");
  if (!anns.is_array()) schema_fail("/annotations", "expected an array");
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string at = "/annotations/" + std::to_string(i);
    const json& a = anns[i];
    if (!ids.insert(require_int(a, "id", at)).second) schema_fail(at + "/id", "duplicate annotation id");
    const auto image_id = require_int(a, "image_id", at);
    const auto dim = dims.find(image_id);
    if (dim == dims.end()) schema_fail(at + "/image_id", "unknown image id");
    require_int(a, "particle_id", at);
    if (require_int(a, "category_id", at) != 1) schema_fail(at + "/category_id", "expected 1");
    const json& rle = require(a, "rle", at);
    if (!rle.is_array()) schema_fail(at + "/rle", "expected an array");
    std::uint64_t total = 0;
    for (std::size_t r = 0; r < rle.size(); ++r) {
      if (!rle[r].is_number_unsigned()) schema_fail(at + "/rle/" + std::to_string(r), "expected a nonnegative integer");
      total += rle[r].get<std::uint64_t>();
    }
    const auto [w, h] = dim->second;
    if (total != static_cast<std::uint64_t>(w * h))
      schema_fail(at + "/rle", "runs sum to " + std::to_string(total) + ", expected " + std::to_string(w * h));
    const json& bbox = require(a, "bbox", at);
    if (!bbox.is_array() || bbox.size() != 4) schema_fail(at + "/bbox", "expected [x, y, w, h]");
    for (std::size_t b = 0; b < 4; ++b)
      if (!bbox[b].is_number()) schema_fail(at + "/bbox/" + std::to_string(b), "expected a number");
    const double vf = require_number(a, "visible_fraction", at);
    if (!(vf > 0 && vf <= 1)) schema_fail(at + "/visible_fraction", "must lie in (0, 1]");
    if (!(require_number(a, "max_feret", at) >= 0)) schema_fail(at + "/max_feret", "must be >= 0");
    if (require_score || a.contains("score")) {
      const double s = require_number(a, "score", at);
      if (!(s >= 0 && s <= 1)) schema_fail(at + "/score", "must lie in [0, 1]");
    }
  }

  const json& cats = require(doc, "categories", "");
  if (!cats.is_array() || cats.empty()) schema_fail("/categories", "expected a nonempty array");
  bool found = false;
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string at = "/categories/" + std::to_string(i);
    const auto id = require_int(cats[i], "id", at);
    const json& name = require(cats[i], "name", at);
    if (id == 1 && name.is_string() && name.get<std::string>() == kParticleCategory) found = true;
  }
  if (!found) schema_fail("/categories", "missing category {id: 1, name: primary_particle}");
}

// Parses a validated document back into per-image records. Pixels are not
// loaded.
inline std::vector<AnnotatedImage> annotations_from_json(const json& doc, bool require_score = false) {
  validate_annotations(doc, require_score);
  std::vector<AnnotatedImage> images;
  std::map<std::int64_t, std::size_t> index;
  for (const auto& e : doc["images"]) {
    AnnotatedImage img;
    img.image_id = e["id"].get<std::int64_t>();
    img.file_name = e["file_name"].get<std::string>();
    img.size = {e["width"].get<int>(), e["height"].get<int>()};
    index[img.image_id] = images.size();
    images.push_back(std::move(img));
  }
  for (const auto& a : doc["annotations"]) {
    AnnotatedImage& img = images[index.at(a["image_id"].get<std::int64_t>())];
    ParticleRecord p;
    p.annotation_id = a["id"].get<std::int64_t>();
    p.particle_id = a["particle_id"].get<int>();
    p.mask = {img.size.width, img.size.height, a["rle"].get<std::vector<std::uint32_t>>()};
    const auto& b = a["bbox"];
    p.bbox = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    p.visible_fraction = a["visible_fraction"].get<double>();
    p.max_feret = a["max_feret"].get<double>();
    if (a.contains("agglomerate_id")) p.agglomerate_id = a["agglomerate_id"].get<int>();
    if (a.contains("diameter")) p.diameter = a["diameter"].get<double>();
    if (a.contains("score")) p.score = a["score"].get<double>();
    img.particles.push_back(std::move(p));
  }
  return images;
}

inline json load_json(const fs::path& path) {
  const std::string text = read_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::invalid_input, "malformed JSON", path.string());
  return doc;
}

inline std::vector<AnnotatedImage> load_annotations(const fs::path& path, bool require_score = false) {
  try {
    return annotations_from_json(load_json(path), require_score);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::invalid_input && !e.path().empty() && e.path()[0] == '/')
      throw Error(e.kind(), path.string() + ": " + e.what(), e.path());
    throw;
  }
}

// Writes <out_dir>/images/*.png, annotations.json and manifest.json. The
// images' file_name fields are relative to out_dir.
inline DatasetManifest export_dataset(std::vector<AnnotatedImage>& images, const fs::path& out_dir,
                                      const std::string& name, const std::string& split,
                                      std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw Error(ErrorKind::io, "cannot create directory: " + ec.message(), (out_dir / "images").string());
  DatasetManifest manifest{name, split, {}, seed, kGeneratorVersion};
  for (const auto& img : images) {
    if (!img.pixels.empty()) write_png(out_dir / img.file_name, img.pixels);
    manifest.images.push_back({img.image_id, img.file_name});
  }
  write_file_atomic(out_dir / "annotations.json", annotations_to_json(images).dump() + "\n");
  write_file_atomic(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  return manifest;
}

}  // namespace agglo
