#include "shearo/datamodel/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "shearo/core/error.hpp"
#include "shearo/core/rng.hpp"

namespace shearo::datamodel {

using nlohmann::json;

void BoundingBox::validate(const std::string& context) const {
  if (!valid())
    throw ValidationError("degenerate bounding box in " + context + ": [" + std::to_string(x_min) +
                          ", " + std::to_string(y_min) + ", " + std::to_string(x_max) + ", " +
                          std::to_string(y_max) + "]");
}

std::string to_string(Condition c) { return c == Condition::fixed ? "fixed" : "deformed"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

Condition condition_from_string(const std::string& s) {
  if (s == "fixed") return Condition::fixed;
  if (s == "deformed") return Condition::deformed;
  throw ValidationError("unknown condition: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  throw ValidationError("unknown split: " + s);
}

void SampleRecord::validate() const {
  if (id.empty()) throw ValidationError("sample with empty id");
  if (path.empty()) throw ValidationError("sample " + id + " has an empty path");
  if (defective != !boxes.empty())
    throw ValidationError("sample " + id + ": defective flag must match box presence");
  for (const auto& b : boxes) b.validate("sample " + id);
}

void DatasetManifest::validate() const {
  if (samples.empty()) throw ValidationError("manifest contains no samples");
  std::set<std::string> seen;
  for (const auto& s : samples) {
    s.validate();
    if (!seen.insert(s.id).second) throw ValidationError("duplicate sample id: " + s.id);
  }
}

const SampleRecord* DatasetManifest::find(const std::string& id) const {
  for (const auto& s : samples)
    if (s.id == id) return &s;
  return nullptr;
}

std::vector<const SampleRecord*> DatasetManifest::with_split(Split split) const {
  std::vector<const SampleRecord*> out;
  for (const auto& s : samples)
    if (s.split == split) out.push_back(&s);
  return out;
}

bool operator==(const BoundingBox& a, const BoundingBox& b) {
  return a.x_min == b.x_min && a.y_min == b.y_min && a.x_max == b.x_max && a.y_max == b.y_max;
}

bool operator==(const SampleRecord& a, const SampleRecord& b) {
  return a.id == b.id && a.path == b.path && a.condition == b.condition &&
         a.defective == b.defective && a.boxes == b.boxes && a.split == b.split;
}

bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
  return a.version == b.version && a.generator_config_hash == b.generator_config_hash &&
         a.samples == b.samples;
}

namespace {

json box_to_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BoundingBox box_from_json(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 4)
    throw ValidationError("bounding box in " + context + " must be [x_min, y_min, x_max, y_max]");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  b.validate(context);
  return b;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest JSON in " + path.string() + ": " + e.what());
  }

  DatasetManifest m;
  try {
    m.version = j.at("version").get<std::string>();
    m.generator_config_hash = j.value("generator_config_hash", "");
    for (const auto& js : j.at("samples")) {
      SampleRecord r;
      r.id = js.at("id").get<std::string>();
      r.path = js.at("path").get<std::string>();
      r.condition = condition_from_string(js.at("condition").get<std::string>());
      r.defective = js.at("defective").get<bool>();
      for (const auto& jb : js.at("boxes")) r.boxes.push_back(box_from_json(jb, "sample " + r.id));
      r.split = split_from_string(js.value("split", "unassigned"));
      m.samples.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw IoError("manifest schema error in " + path.string() + ": " + e.what());
  }
  m.validate();

  const auto base = path.parent_path();
  std::string missing;
  for (const auto& s : m.samples) {
    if (!std::filesystem::exists(base / s.path)) {
      if (!missing.empty()) missing += ", ";
      missing += s.path;
    }
  }
  if (!missing.empty())
    throw IoError("manifest " + path.string() + " references missing files: " + missing);
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  json j;
  j["version"] = manifest.version;
  j["generator_config_hash"] = manifest.generator_config_hash;
  j["samples"] = json::array();
  for (const auto& s : manifest.samples) {
    json js;
    js["id"] = s.id;
    js["path"] = s.path;
    js["condition"] = to_string(s.condition);
    js["defective"] = s.defective;
    js["boxes"] = json::array();
    for (const auto& b : s.boxes) js["boxes"].push_back(box_to_json(b));
    js["split"] = to_string(s.split);
    j["samples"].push_back(std::move(js));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

void SplitRatios::validate() const {
  if (!(train > 0.0) || !(val > 0.0) || !(test > 0.0))
    throw ValidationError("split ratios must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw ValidationError("split ratios must sum to 1");
}

DatasetManifest build_subset(const DatasetManifest& manifest, const SubsetDefinition& def,
                             const SplitRatios& ratios, std::uint64_t seed) {
  manifest.validate();
  ratios.validate();

  DatasetManifest out = manifest;
  std::vector<std::size_t> normal_idx, defective_idx;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    auto& s = out.samples[i];
    s.split = Split::unassigned;
    if (s.defective)
      defective_idx.push_back(i);
    else if (def.admits(s.condition))
      normal_idx.push_back(i);
  }

  Rng rng(seed);
  rng.shuffle(normal_idx);
  const auto n = static_cast<double>(normal_idx.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * ratios.train));
  const auto n_val = static_cast<std::size_t>(std::llround(n * ratios.val));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= normal_idx.size())
    throw ValidationError("not enough defect-free samples for a non-empty train/val/test split");
  for (std::size_t k = 0; k < normal_idx.size(); ++k) {
    auto& s = out.samples[normal_idx[k]];
    s.split = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
  }

  rng.shuffle(defective_idx);
  const auto d_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(defective_idx.size()) * kDefectiveValShare));
  for (std::size_t k = 0; k < defective_idx.size(); ++k)
    out.samples[defective_idx[k]].split = k < d_val ? Split::val : Split::test;

  return out;
}

PredictionMap ingest_external_predictions(const std::filesystem::path& path,
                                          const DatasetManifest& manifest) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed predictions JSON in " + path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw ValidationError("predictions file must be a JSON list");

  PredictionMap map;
  for (const auto& s : manifest.samples) map[s.id] = {};
  for (const auto& entry : j) {
    const std::string id = entry.at("id").get<std::string>();
    if (manifest.find(id) == nullptr)
      throw ValidationError("predictions reference unknown sample id: " + id);
    auto& list = map[id];
    for (const auto& row : entry.at("boxes")) {
      if (!row.is_array() || row.size() != 5)
        throw ValidationError("prediction rows must be [x_min, y_min, x_max, y_max, confidence]");
      Prediction p;
      p.box = BoundingBox{row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
                          row[3].get<double>()};
      p.box.validate("prediction for " + id);
      p.confidence = row[4].get<double>();
      if (p.confidence < 0.0 || p.confidence > 1.0)
        throw ValidationError("prediction confidence outside [0,1] for sample " + id);
      list.push_back(p);
    }
  }
  return map;
}

void save_predictions(const PredictionMap& predictions, const std::filesystem::path& path) {
  json j = json::array();
  for (const auto& [id, list] : predictions) {
    json entry;
    entry["id"] = id;
    entry["boxes"] = json::array();
    for (const auto& p : list)
      entry["boxes"].push_back(
          json::array({p.box.x_min, p.box.y_min, p.box.x_max, p.box.y_max, p.confidence}));
    j.push_back(std::move(entry));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write predictions: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace shearo::datamodel
