#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shearo/cli/config.hpp"

namespace shearo::cli {

/// Canonical artifact locations inside one run directory (keyed by the
/// config hash, so re-runs with a changed config never overwrite).
struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path config_file;
  std::filesystem::path dataset_dir;
  std::filesystem::path dataset_manifest;
  std::filesystem::path subset_manifest;  // lives next to the dataset manifest
  std::filesystem::path models_dir;
  std::filesystem::path eval_dir;
  std::filesystem::path embed_dir;
  std::filesystem::path ledger;

  std::filesystem::path checkpoint(models::ModelKind kind) const;
  std::filesystem::path teacher_checkpoint() const;
  std::filesystem::path report(models::ModelKind kind, scoring::Strategy strategy) const;
};
RunPaths run_paths(const RunConfig& config);

/// Stage log: which artifacts a pipeline run produced and when.
struct RunLedger {
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> stage_timestamps;  // (stage, iso8601)
  std::vector<std::string> artifacts;  // paths relative to the run root
};
void save_ledger(const RunLedger& ledger, const std::filesystem::path& path);

std::filesystem::path cmd_generate(const RunConfig& config);
std::filesystem::path cmd_subset(const RunConfig& config);

/// Trains one detector (pretraining the teacher first for the student-
/// teacher model when no checkpoint is configured). Skips work when the
/// checkpoint already exists and loads cleanly.
std::filesystem::path cmd_train(const RunConfig& config, models::ModelKind kind);

struct EvaluateOutcome {
  std::vector<std::filesystem::path> reports;
};

/// Runs the selected model over val+test: classification metrics (test
/// split), curves, plots; for the student-teacher model also the
/// localization pipeline, heatmaps, detections and overlays. With an
/// external-predictions file, metrics come from the ingested boxes instead
/// of a checkpoint.
EvaluateOutcome cmd_evaluate(const RunConfig& config, models::ModelKind kind,
                             const std::optional<std::filesystem::path>& external_predictions);

std::filesystem::path cmd_embed(const RunConfig& config);

/// Validates an external predictions file against the subset manifest and
/// stores a normalized copy in the run directory.
std::filesystem::path cmd_ingest_predictions(const RunConfig& config,
                                             const std::filesystem::path& predictions_file);

/// generate -> subset -> train (all three kinds) -> evaluate -> embed.
/// Stages skip when their artifacts already exist; any failure carries the
/// stage name.
RunLedger cmd_pipeline(const RunConfig& config);

}  // namespace shearo::cli
