#pragma once

#include <filesystem>
#include <string>

#include "shearo/datamodel/datamodel.hpp"
#include "shearo/eval/features.hpp"
#include "shearo/eval/tsne.hpp"
#include "shearo/models/model.hpp"
#include "shearo/scoring/scoring.hpp"
#include "shearo/synthgen/synthgen.hpp"

namespace shearo::cli {

struct SubsetSection {
  datamodel::SubsetDefinition definition;
  datamodel::SplitRatios ratios;
};

struct ModelSection {
  models::ModelKind kind = models::ModelKind::stfpm;
  models::AeConfig ae;
  models::ConvAeConfig conv_ae;
  models::StfpmConfig stfpm;
  models::TrainOptions train_ae;
  models::TrainOptions train_conv_ae;
  models::TrainOptions train_stfpm;

  const models::TrainOptions& train_for(models::ModelKind k) const;
  models::TrainOptions& train_for(models::ModelKind k);
};

struct ScoringSection {
  scoring::Strategy strategy = scoring::Strategy::peaks;
  double sigma = 4.0;
  double threshold = 0.1;
  std::int64_t min_area = 4;
  bool tune_threshold = false;  // validation grid search overrides `threshold`
};

struct EvalSection {
  eval::TsneOptions tsne;
  eval::FeatureSource feature_source = eval::FeatureSource::pooled_backbone;
  std::int64_t overlay_count = 4;  // heatmap overlay images per evaluation
};

struct TeacherSection {
  std::string checkpoint;  // empty: pretrain on the synthetic pretext task
  models::PretextOptions pretext;
};

/// One self-contained run description. The hash (seed included, output_dir
/// excluded) keys the artifact directory.
struct RunConfig {
  std::uint64_t seed = 7611;
  std::filesystem::path output_dir = "runs";
  synthgen::GeneratorConfig generator;
  SubsetSection subset;
  ModelSection model;
  ScoringSection scoring;
  EvalSection eval;
  TeacherSection teacher;

  void validate() const;
  std::string hash() const;
  std::filesystem::path run_root() const { return output_dir / hash().substr(0, 12); }
};

/// Defaults sized for a desktop-scale run: the reference-faithful model
/// shapes where the source pins them (autoencoder widths, 96x50 inputs),
/// desk-scale backbone and epochs where it does not.
RunConfig default_config();

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config, bool include_output_dir);
RunConfig run_config_from_json(const std::string& text);

}  // namespace shearo::cli
