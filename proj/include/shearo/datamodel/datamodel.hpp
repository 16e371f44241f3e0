#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "shearo/core/error.hpp"

namespace shearo::datamodel {

/// Axis-aligned defect region, pixel coordinates, x_min < x_max and
/// y_min < y_max.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  void validate(const std::string& context) const;
};

enum class Condition { fixed, deformed };
enum class Split { train, val, test, unassigned };

std::string to_string(Condition c);
std::string to_string(Split s);
Condition condition_from_string(const std::string& s);
Split split_from_string(const std::string& s);

struct SampleRecord {
  std::string id;
  std::string path;  // relative to the manifest directory
  Condition condition = Condition::fixed;
  bool defective = false;
  std::vector<BoundingBox> boxes;
  Split split = Split::unassigned;

  void validate() const;
};

struct DatasetManifest {
  std::string version = "1";
  std::vector<SampleRecord> samples;
  std::string generator_config_hash;

  void validate() const;
  const SampleRecord* find(const std::string& id) const;
  std::vector<const SampleRecord*> with_split(Split s) const;
};

bool operator==(const BoundingBox& a, const BoundingBox& b);
bool operator==(const SampleRecord& a, const SampleRecord& b);
bool operator==(const DatasetManifest& a, const DatasetManifest& b);

/// Manifest JSON round-trip. Loading validates invariants and checks that
/// every referenced file exists next to the manifest.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Training population selector: Subset A admits fixed-condition defect-free
/// samples only, Subset B admits fixed and deformed.
struct SubsetDefinition {
  enum class Name { A, B } name = Name::A;

  static SubsetDefinition subset_a() { return {Name::A}; }
  static SubsetDefinition subset_b() { return {Name::B}; }
  bool admits(Condition c) const {
    return name == Name::B || c == Condition::fixed;
  }
  std::string label() const { return name == Name::A ? "A" : "B"; }
};

/// Defective samples never train: they are split between val and test at
/// this fixed proportion.
inline constexpr double kDefectiveValShare = 391.0 / (391.0 + 714.0);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  void validate() const;
};

/// Returns a copy of the manifest with split assignments: defect-free
/// samples of admitted conditions are shuffled (seeded) and partitioned by
/// the ratios; defective samples go to val/test only. Non-admitted
/// defect-free samples stay unassigned.
DatasetManifest build_subset(const DatasetManifest& manifest, const SubsetDefinition& def,
                             const SplitRatios& ratios, std::uint64_t seed);

struct Prediction {
  BoundingBox box;
  double confidence = 0.0;
};

using PredictionMap = std::map<std::string, std::vector<Prediction>>;

/// Reads external detections (JSON list of {id, boxes: [[x_min, y_min,
/// x_max, y_max, confidence]]}). Every manifest sample gets an entry;
/// samples absent from the file map to empty lists.
PredictionMap ingest_external_predictions(const std::filesystem::path& path,
                                          const DatasetManifest& manifest);

/// Serializes predictions in the same schema ingest reads.
void save_predictions(const PredictionMap& predictions, const std::filesystem::path& path);

}  // namespace shearo::datamodel
