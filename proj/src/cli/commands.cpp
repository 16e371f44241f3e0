#include "shearo/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "shearo/cli/plots.hpp"
#include "shearo/core/image_io.hpp"
#include "shearo/core/sha256.hpp"
#include "shearo/eval/detection.hpp"
#include "shearo/eval/metrics.hpp"
#include "shearo/eval/reference.hpp"
#include "shearo/kernels/resize.hpp"
#include "shearo/models/preprocess.hpp"
#include "shearo/models/serialize.hpp"
#include "shearo/models/teacher.hpp"

namespace shearo::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::filesystem::path RunPaths::checkpoint(models::ModelKind kind) const {
  return models_dir / (models::to_string(kind) + ".shck");
}

std::filesystem::path RunPaths::teacher_checkpoint() const {
  return models_dir / "teacher.shck";
}

std::filesystem::path RunPaths::report(models::ModelKind kind, scoring::Strategy strategy) const {
  return eval_dir /
         ("report_" + models::to_string(kind) + "_" + scoring::to_string(strategy) + ".json");
}

RunPaths run_paths(const RunConfig& config) {
  RunPaths p;
  p.root = config.run_root();
  p.config_file = p.root / "config.json";
  p.dataset_dir = p.root / "dataset";
  p.dataset_manifest = p.dataset_dir / "manifest.json";
  p.subset_manifest =
      p.dataset_dir / ("manifest_subset_" + config.subset.definition.label() + ".json");
  p.models_dir = p.root / "models";
  p.eval_dir = p.root / "eval";
  p.embed_dir = p.root / "embed";
  p.ledger = p.root / "ledger.json";
  return p;
}

namespace {

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what) {}
};

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

void persist_config(const RunConfig& config, const RunPaths& paths) {
  fs::create_directories(paths.root);
  if (fs::exists(paths.config_file)) return;
  // Canonical form only: output_dir is location metadata, not run content.
  std::ofstream out(paths.config_file, std::ios::trunc);
  if (!out) throw IoError("cannot write config copy: " + paths.config_file.string());
  out << run_config_to_json(config, /*include_output_dir=*/false) << "\n";
}

/// Loaded evaluation split: wrapped phase images with their records.
struct SplitData {
  std::vector<const datamodel::SampleRecord*> records;
  std::vector<Tensor> phases;
};

SplitData load_split(const datamodel::DatasetManifest& manifest, const fs::path& base,
                     datamodel::Split split) {
  SplitData out;
  for (const auto* rec : manifest.with_split(split)) {
    out.records.push_back(rec);
    out.phases.push_back(read_tensor_file(base / rec->path, kPhaseMagic));
  }
  return out;
}

Tensor stack_ae_inputs(const std::vector<Tensor>& phases) {
  Tensor out({static_cast<std::int64_t>(phases.size()), models::kAeWidth * models::kAeHeight});
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Tensor row = models::preprocess_ae(phases[i]);
    for (std::int64_t k = 0; k < row.numel(); ++k) out.at2(static_cast<std::int64_t>(i), k) = row[k];
  }
  return out;
}

Tensor stack_convae_inputs(const std::vector<Tensor>& phases) {
  Tensor out({static_cast<std::int64_t>(phases.size()), 1, models::kAeHeight, models::kAeWidth});
  const std::int64_t len = models::kAeWidth * models::kAeHeight;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Tensor img = models::preprocess_convae(phases[i]);
    for (std::int64_t k = 0; k < len; ++k) out[static_cast<std::int64_t>(i) * len + k] = img[k];
  }
  return out;
}

Tensor stack_stfpm_inputs(const std::vector<Tensor>& phases, const models::StfpmConfig& cfg) {
  const std::int64_t len = 3 * cfg.input_height * cfg.input_width;
  Tensor out({static_cast<std::int64_t>(phases.size()), 3, cfg.input_height, cfg.input_width});
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Tensor img = models::preprocess_stfpm(phases[i], cfg.input_height, cfg.input_width,
                                                cfg.norm_mean, cfg.norm_std);
    for (std::int64_t k = 0; k < len; ++k) out[static_cast<std::int64_t>(i) * len + k] = img[k];
  }
  return out;
}

datamodel::DatasetManifest load_subset_manifest(const RunPaths& paths) {
  if (!fs::exists(paths.subset_manifest))
    throw ValidationError("subset manifest missing; run the subset stage first: " +
                          paths.subset_manifest.string());
  return datamodel::load_manifest(paths.subset_manifest);
}

}  // namespace

void save_ledger(const RunLedger& ledger, const fs::path& path) {
  json j;
  j["config_hash"] = ledger.config_hash;
  j["stages"] = json::array();
  for (const auto& [stage, ts] : ledger.stage_timestamps)
    j["stages"].push_back(json{{"stage", stage}, {"completed_at", ts}});
  j["artifacts"] = ledger.artifacts;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write ledger: " + path.string());
  out << j.dump(2) << "\n";
}

std::filesystem::path cmd_generate(const RunConfig& config) {
  config.validate();
  const RunPaths paths = run_paths(config);
  persist_config(config, paths);

  const std::string expected_hash = synthgen::generator_config_hash(config.generator, config.seed);
  if (fs::exists(paths.dataset_manifest)) {
    const auto existing = datamodel::load_manifest(paths.dataset_manifest);
    if (existing.generator_config_hash == expected_hash) return paths.dataset_manifest;
  }
  const auto manifest = synthgen::generate_dataset(config.generator, config.seed, paths.dataset_dir);
  std::int64_t defective = 0, fixed = 0, deformed = 0;
  for (const auto& s : manifest.samples) {
    if (s.defective)
      ++defective;
    else if (s.condition == datamodel::Condition::fixed)
      ++fixed;
    else
      ++deformed;
  }
  std::cout << "generated " << manifest.samples.size() << " samples (defective " << defective
            << ", fixed defect-free " << fixed << ", deformed defect-free " << deformed << ") -> "
            << paths.dataset_manifest.string() << "\n";
  return paths.dataset_manifest;
}

std::filesystem::path cmd_subset(const RunConfig& config) {
  const RunPaths paths = run_paths(config);
  if (!fs::exists(paths.dataset_manifest)) (void)cmd_generate(config);
  if (fs::exists(paths.subset_manifest)) return paths.subset_manifest;

  const auto manifest = datamodel::load_manifest(paths.dataset_manifest);
  const auto split = datamodel::build_subset(manifest, config.subset.definition,
                                             config.subset.ratios, config.seed);
  datamodel::save_manifest(split, paths.subset_manifest);
  std::size_t train = 0, val = 0, test = 0;
  for (const auto& s : split.samples) {
    train += s.split == datamodel::Split::train;
    val += s.split == datamodel::Split::val;
    test += s.split == datamodel::Split::test;
  }
  std::cout << "subset " << config.subset.definition.label() << ": train " << train << ", val "
            << val << ", test " << test << " -> " << paths.subset_manifest.string() << "\n";
  return paths.subset_manifest;
}

namespace {

/// Teacher provenance: configured checkpoint if given, otherwise a teacher
/// pretrained here on the synthetic pretext task (cached per run).
std::string ensure_teacher(const RunConfig& config, const RunPaths& paths, models::Stfpm& model) {
  if (!config.teacher.checkpoint.empty())
    return models::load_teacher(config.teacher.checkpoint, model);
  const fs::path cached = paths.teacher_checkpoint();
  if (fs::exists(cached)) return models::load_teacher(cached, model);

  models::PretextOptions pretext = config.teacher.pretext;
  pretext.seed = derive_subseed(config.seed, 0x7EAC);
  const auto accuracy = models::pretrain_teacher(model, config.generator, pretext);
  const std::string hash = models::save_teacher(cached, model.teacher(), model.config().norm_mean,
                                                model.config().norm_std, accuracy);
  std::cout << "pretrained teacher (pretext accuracy "
            << (accuracy.empty() ? 0.0 : accuracy.back()) << ") -> " << cached.string() << "\n";
  return hash;
}

void check_training_split(const SplitData& train) {
  if (train.records.empty()) throw ValidationError("training split is empty");
  for (const auto* rec : train.records)
    if (rec->defective)
      throw ValidationError("defective sample in the training split: " + rec->id);
}

}  // namespace

std::filesystem::path cmd_train(const RunConfig& config, models::ModelKind kind) {
  const RunPaths paths = run_paths(config);
  (void)cmd_subset(config);

  const fs::path checkpoint = paths.checkpoint(kind);
  if (fs::exists(checkpoint)) {
    // Reuse only if the artifact is intact.
    (void)models::TrainedModel::load(checkpoint);
    return checkpoint;
  }

  const auto manifest = load_subset_manifest(paths);
  const SplitData train = load_split(manifest, paths.dataset_dir, datamodel::Split::train);
  check_training_split(train);
  // Validation loss tracks defect-free samples only.
  SplitData val_all = load_split(manifest, paths.dataset_dir, datamodel::Split::val);
  std::vector<Tensor> val_normal;
  for (std::size_t i = 0; i < val_all.records.size(); ++i)
    if (!val_all.records[i]->defective) val_normal.push_back(val_all.phases[i]);

  models::TrainOptions options = config.model.train_for(kind);
  options.seed = derive_subseed(config.seed, static_cast<std::uint64_t>(kind) + 11);

  models::TrainedModel model = [&] {
    switch (kind) {
      case models::ModelKind::ae: return models::TrainedModel::make_ae(config.model.ae, options.seed);
      case models::ModelKind::conv_ae:
        return models::TrainedModel::make_conv_ae(config.model.conv_ae, options.seed);
      case models::ModelKind::stfpm:
      default:
        return models::TrainedModel::make_stfpm(config.model.stfpm, options.seed);
    }
  }();

  models::TrainHistory history;
  switch (kind) {
    case models::ModelKind::ae: {
      const Tensor train_x = stack_ae_inputs(train.phases);
      const Tensor val_x = val_normal.empty()
                               ? Tensor({0, models::kAeWidth * models::kAeHeight})
                               : stack_ae_inputs(val_normal);
      history = models::train_dense_ae(model.dense_ae(), train_x, val_x, options);
      break;
    }
    case models::ModelKind::conv_ae: {
      const Tensor train_x = stack_convae_inputs(train.phases);
      const Tensor val_x = val_normal.empty()
                               ? Tensor({0, 1, models::kAeHeight, models::kAeWidth})
                               : stack_convae_inputs(val_normal);
      history = models::train_conv_ae(model.conv_ae(), train_x, val_x, options);
      break;
    }
    case models::ModelKind::stfpm: {
      model.meta().teacher_hash = ensure_teacher(config, paths, model.stfpm());
      const auto& scfg = config.model.stfpm;
      const Tensor train_x = stack_stfpm_inputs(train.phases, scfg);
      const Tensor val_x = val_normal.empty()
                               ? Tensor({0, 3, scfg.input_height, scfg.input_width})
                               : stack_stfpm_inputs(val_normal, scfg);
      history = models::train_stfpm(model.stfpm(), train_x, val_x, options);
      break;
    }
  }
  model.meta().seed = options.seed;
  model.meta().train_losses = history.train_losses;
  model.meta().val_losses = history.val_losses;
  model.save(checkpoint);
  std::cout << "trained " << models::to_string(kind) << " for " << history.epochs()
            << " epochs (final train loss " << history.final_train_loss() << ") -> "
            << checkpoint.string() << "\n";
  return checkpoint;
}

namespace {

struct ClassificationBlock {
  eval::RocResult roc;
  eval::PrResult pr;
  double chance = 0.0;
};

ClassificationBlock classify(const std::vector<eval::ScoredSample>& samples) {
  ClassificationBlock block;
  block.roc = eval::roc_auc(samples);
  block.pr = eval::pr_ap(samples);
  block.chance = eval::chance_ap(samples);
  return block;
}

json classification_to_json(const ClassificationBlock& block, bool with_curves) {
  json j;
  j["auc"] = block.roc.auc;
  j["ap"] = block.pr.ap;
  j["chance_ap"] = block.chance;
  if (with_curves) {
    j["roc_points"] = json::array();
    for (const auto& [fpr, tpr] : block.roc.points) j["roc_points"].push_back({fpr, tpr});
    j["pr_points"] = json::array();
    for (const auto& [recall, precision] : block.pr.points)
      j["pr_points"].push_back({recall, precision});
  }
  return j;
}

json reference_to_json(const std::string& subset) {
  json j;
  j["note"] =
      "published reference values, reported verbatim for comparison; the reported chance level "
      "follows a different convention than the prevalence-based chance_ap computed here";
  j["reported_chance_ap"] = eval::reference_chance_ap(subset);
  j["classification"] = json::array();
  for (const auto& row : eval::reference_classification_rows())
    if (row.subset == subset)
      j["classification"].push_back(json{{"model", row.model}, {"auc", row.auc}, {"ap", row.ap}});
  j["localization"] = json::array();
  for (const auto& row : eval::reference_localization_rows())
    j["localization"].push_back(json{{"model", row.model},
                                     {"iou", row.iou},
                                     {"map", row.map},
                                     {"map50", row.map50},
                                     {"map75", row.map75},
                                     {"mar1", row.mar1},
                                     {"mar10", row.mar10}});
  return j;
}

void write_curves(const RunPaths& paths, const std::string& tag, const ClassificationBlock& block) {
  std::vector<std::vector<double>> roc_rows, pr_rows;
  for (const auto& [fpr, tpr] : block.roc.points) roc_rows.push_back({fpr, tpr});
  for (const auto& [recall, precision] : block.pr.points) pr_rows.push_back({recall, precision});
  write_csv(paths.eval_dir / ("roc_" + tag + ".csv"), "fpr,tpr", roc_rows);
  write_csv(paths.eval_dir / ("pr_" + tag + ".csv"), "recall,precision", pr_rows);
  write_curve_svg(paths.eval_dir / ("roc_" + tag + ".svg"), "ROC " + tag, "false positive rate",
                  "true positive rate", {{tag, "#1f5fbf", block.roc.points}}, true);
  write_curve_svg(paths.eval_dir / ("pr_" + tag + ".svg"), "PR " + tag, "recall", "precision",
                  {{tag, "#1f5fbf", block.pr.points}}, false);
}

/// Resamples a model-grid heatmap onto the original image grid, undoing the
/// aspect padding.
Tensor heatmap_to_original(const Tensor& heatmap, const models::AspectTransform& t,
                           std::int64_t orig_h, std::int64_t orig_w) {
  Tensor out({orig_h, orig_w});
  const std::int64_t hm_h = heatmap.dim(0), hm_w = heatmap.dim(1);
  for (std::int64_t y = 0; y < orig_h; ++y) {
    for (std::int64_t x = 0; x < orig_w; ++x) {
      const double fy = std::clamp(static_cast<double>(y) * t.scale + t.pad_y, 0.0,
                                   static_cast<double>(hm_h - 1));
      const double fx = std::clamp(static_cast<double>(x) * t.scale + t.pad_x, 0.0,
                                   static_cast<double>(hm_w - 1));
      const auto y0 = static_cast<std::int64_t>(fy);
      const auto x0 = static_cast<std::int64_t>(fx);
      const std::int64_t y1 = std::min(y0 + 1, hm_h - 1), x1 = std::min(x0 + 1, hm_w - 1);
      const double wy = fy - static_cast<double>(y0), wx = fx - static_cast<double>(x0);
      out.at2(y, x) = heatmap.at2(y0, x0) * (1 - wy) * (1 - wx) +
                      heatmap.at2(y0, x1) * (1 - wy) * wx + heatmap.at2(y1, x0) * wy * (1 - wx) +
                      heatmap.at2(y1, x1) * wy * wx;
    }
  }
  return out;
}

datamodel::BoundingBox box_to_original(const datamodel::BoundingBox& box,
                                       const models::AspectTransform& t, std::int64_t orig_h,
                                       std::int64_t orig_w) {
  auto map_x = [&](double x) {
    return std::clamp((x - t.pad_x) / t.scale, 0.0, static_cast<double>(orig_w - 1));
  };
  auto map_y = [&](double y) {
    return std::clamp((y - t.pad_y) / t.scale, 0.0, static_cast<double>(orig_h - 1));
  };
  return {map_x(box.x_min), map_y(box.y_min), map_x(box.x_max), map_y(box.y_max)};
}

datamodel::BoundingBox box_to_heatmap(const datamodel::BoundingBox& box,
                                      const models::AspectTransform& t) {
  return {box.x_min * t.scale + t.pad_x, box.y_min * t.scale + t.pad_y,
          box.x_max * t.scale + t.pad_x, box.y_max * t.scale + t.pad_y};
}

}  // namespace

EvaluateOutcome cmd_evaluate(const RunConfig& config, models::ModelKind kind,
                             const std::optional<fs::path>& external_predictions) {
  const RunPaths paths = run_paths(config);
  const auto manifest = load_subset_manifest(paths);
  const SplitData val = load_split(manifest, paths.dataset_dir, datamodel::Split::val);
  const SplitData test = load_split(manifest, paths.dataset_dir, datamodel::Split::test);
  if (test.records.empty()) throw ValidationError("test split is empty");
  fs::create_directories(paths.eval_dir);
  const std::string subset_label = config.subset.definition.label();

  EvaluateOutcome outcome;

  if (external_predictions) {
    // Comparison path: everything comes from the ingested detector output.
    const auto predictions = datamodel::ingest_external_predictions(*external_predictions, manifest);
    auto score_of = [&](const datamodel::SampleRecord& rec) {
      double best = 0.0;
      for (const auto& p : predictions.at(rec.id)) best = std::max(best, p.confidence);
      return best;
    };
    std::vector<eval::ScoredSample> test_scores, val_scores;
    for (const auto* rec : test.records) test_scores.push_back({rec->id, rec->defective, score_of(*rec)});
    for (const auto* rec : val.records) val_scores.push_back({rec->id, rec->defective, score_of(*rec)});

    const ClassificationBlock block = classify(test_scores);
    std::vector<std::vector<eval::ScoredBox>> preds_per_image;
    std::vector<std::vector<datamodel::BoundingBox>> gts_per_image;
    for (const auto* rec : test.records) {
      if (!rec->defective) continue;
      std::vector<eval::ScoredBox> preds;
      for (const auto& p : predictions.at(rec->id)) preds.push_back({p.box, p.confidence});
      preds_per_image.push_back(std::move(preds));
      gts_per_image.push_back(rec->boxes);
    }
    const auto loc = eval::map_suite(preds_per_image, gts_per_image);

    json report;
    report["subset"] = subset_label;
    report["model"] = "external";
    report["strategy"] = "ingested";
    report["source_file"] = external_predictions->string();
    report["config_hash"] = config.hash();
    report["classification"] = classification_to_json(block, true);
    if (!val_scores.empty()) report["validation"] = classification_to_json(classify(val_scores), false);
    report["localization"] = json{{"mean_iou", loc.mean_iou}, {"map", loc.map},
                                  {"map50", loc.map50},       {"map75", loc.map75},
                                  {"mar1", loc.mar1},         {"mar10", loc.mar10}};
    report["reference"] = reference_to_json(subset_label);
    const fs::path out = paths.eval_dir / "report_external_ingested.json";
    std::ofstream(out, std::ios::trunc) << report.dump(2) << "\n";
    write_curves(paths, "external_ingested", block);
    outcome.reports.push_back(out);
    std::cout << "external evaluation: AUC " << block.roc.auc << ", AP " << block.pr.ap
              << ", mAP@50 " << loc.map50 << " -> " << out.string() << "\n";
    return outcome;
  }

  const fs::path checkpoint = paths.checkpoint(kind);
  if (!fs::exists(checkpoint))
    throw ValidationError("missing checkpoint for " + models::to_string(kind) +
                          "; run the train stage first");
  models::TrainedModel model = models::TrainedModel::load(checkpoint);

  if (kind != models::ModelKind::stfpm) {
    if (config.scoring.strategy != scoring::Strategy::recon &&
        config.model.kind == kind)  // explicit strategy requests are validated below
      throw ValidationError("autoencoders support only the recon strategy");
    auto scores_of = [&](const SplitData& split) {
      std::vector<eval::ScoredSample> out;
      for (std::size_t i = 0; i < split.records.size(); ++i)
        out.push_back({split.records[i]->id, split.records[i]->defective,
                       model.reconstruction_score(split.phases[i])});
      return out;
    };
    const ClassificationBlock block = classify(scores_of(test));
    const std::string tag = models::to_string(kind) + "_recon";

    json report;
    report["subset"] = subset_label;
    report["model"] = models::to_string(kind);
    report["strategy"] = "recon";
    report["config_hash"] = config.hash();
    report["classification"] = classification_to_json(block, true);
    if (!val.records.empty()) report["validation"] = classification_to_json(classify(scores_of(val)), false);
    report["reference"] = reference_to_json(subset_label);
    const fs::path out = paths.report(kind, scoring::Strategy::recon);
    std::ofstream(out, std::ios::trunc) << report.dump(2) << "\n";
    write_curves(paths, tag, block);
    outcome.reports.push_back(out);
    std::cout << models::to_string(kind) << " recon: AUC " << block.roc.auc << ", AP "
              << block.pr.ap << " -> " << out.string() << "\n";
    return outcome;
  }

  // Student-teacher path: one inference pass per sample feeds both scoring
  // strategies and the localization pipeline.
  const auto& scfg = model.stfpm().config();
  auto heatmaps_of = [&](const SplitData& split) {
    std::vector<Tensor> maps;
    maps.reserve(split.phases.size());
    for (const auto& phase : split.phases) maps.push_back(model.anomaly_heatmap(phase));
    return maps;
  };
  const std::vector<Tensor> test_maps = heatmaps_of(test);
  const std::vector<Tensor> val_maps = heatmaps_of(val);

  // Persist test heatmaps in the tensor format.
  for (std::size_t i = 0; i < test_maps.size(); ++i)
    write_tensor_file(paths.eval_dir / "heatmaps" / (test.records[i]->id + ".hmp"), test_maps[i],
                      kHeatmapMagic);

  // Localization: smoothing, thresholding, regions; boxes mapped back to
  // the original pixel grid. The threshold comes from config or from the
  // validation grid search.
  double threshold = config.scoring.threshold;
  if (config.scoring.tune_threshold) {
    std::vector<Tensor> tune_maps;
    std::vector<std::vector<datamodel::BoundingBox>> tune_gts;
    for (std::size_t i = 0; i < val.records.size(); ++i) {
      if (!val.records[i]->defective) continue;
      const auto t = models::stfpm_transform(val.phases[i].dim(0), val.phases[i].dim(1),
                                             scfg.input_height, scfg.input_width);
      std::vector<datamodel::BoundingBox> boxes;
      for (const auto& b : val.records[i]->boxes) boxes.push_back(box_to_heatmap(b, t));
      tune_maps.push_back(val_maps[i]);
      tune_gts.push_back(std::move(boxes));
    }
    if (!tune_maps.empty()) {
      const auto best = scoring::tune_threshold(tune_maps, tune_gts, config.scoring.sigma,
                                                config.scoring.min_area);
      threshold = best.threshold;
      std::cout << "tuned threshold on validation: " << threshold << " (AP@50 " << best.score
                << ")\n";
    }
  }

  datamodel::PredictionMap detections_by_id;
  std::vector<std::vector<eval::ScoredBox>> preds_per_image;
  std::vector<std::vector<datamodel::BoundingBox>> gts_per_image;
  std::int64_t overlays_written = 0;
  for (std::size_t i = 0; i < test.records.size(); ++i) {
    const auto* rec = test.records[i];
    const auto t = models::stfpm_transform(test.phases[i].dim(0), test.phases[i].dim(1),
                                           scfg.input_height, scfg.input_width);
    const scoring::LocalizeParams params{config.scoring.sigma, threshold, config.scoring.min_area};
    const auto raw_detections = scoring::localize(test_maps[i], params);
    std::vector<scoring::Detection> mapped;
    for (const auto& d : raw_detections)
      mapped.push_back(
          {box_to_original(d.box, t, test.phases[i].dim(0), test.phases[i].dim(1)), d.confidence});
    detections_by_id[rec->id] = mapped;
    if (rec->defective) {
      std::vector<eval::ScoredBox> preds;
      for (const auto& d : mapped) preds.push_back({d.box, d.confidence});
      preds_per_image.push_back(std::move(preds));
      gts_per_image.push_back(rec->boxes);

      if (overlays_written < config.eval.overlay_count) {
        const Tensor original_grid =
            heatmap_to_original(test_maps[i], t, test.phases[i].dim(0), test.phases[i].dim(1));
        std::vector<datamodel::BoundingBox> det_boxes;
        for (const auto& d : mapped) det_boxes.push_back(d.box);
        write_overlay_png(paths.eval_dir / "overlays" / (rec->id + ".png"), test.phases[i],
                          original_grid, rec->boxes, det_boxes);
        ++overlays_written;
      }
    }
  }
  datamodel::save_predictions(detections_by_id, paths.eval_dir / "detections_stfpm.json");
  const auto loc = eval::map_suite(preds_per_image, gts_per_image);

  // Normalize detection confidences for the prediction schema (expects
  // [0,1]); ranking is scale-invariant. Re-save normalized copy.
  double conf_peak = 0.0;
  for (const auto& [id, list] : detections_by_id)
    for (const auto& d : list) conf_peak = std::max(conf_peak, d.confidence);
  if (conf_peak > 1.0) {
    for (auto& [id, list] : detections_by_id)
      for (auto& d : list) d.confidence /= conf_peak;
    datamodel::save_predictions(detections_by_id, paths.eval_dir / "detections_stfpm.json");
  }

  for (const scoring::Strategy strategy : {scoring::Strategy::peaks, scoring::Strategy::means}) {
    auto scores_of = [&](const SplitData& split, const std::vector<Tensor>& maps) {
      std::vector<eval::ScoredSample> out;
      for (std::size_t i = 0; i < split.records.size(); ++i) {
        const double score = strategy == scoring::Strategy::peaks ? scoring::score_peaks(maps[i])
                                                                  : scoring::score_means(maps[i]);
        out.push_back({split.records[i]->id, split.records[i]->defective, score});
      }
      return out;
    };
    const ClassificationBlock block = classify(scores_of(test, test_maps));
    const std::string tag = "stfpm_" + scoring::to_string(strategy);

    json report;
    report["subset"] = subset_label;
    report["model"] = "stfpm";
    report["strategy"] = scoring::to_string(strategy);
    report["config_hash"] = config.hash();
    report["teacher_hash"] = model.meta().teacher_hash;
    report["classification"] = classification_to_json(block, true);
    if (!val.records.empty())
      report["validation"] = classification_to_json(classify(scores_of(val, val_maps)), false);
    report["localization"] = json{{"mean_iou", loc.mean_iou}, {"map", loc.map},
                                  {"map50", loc.map50},       {"map75", loc.map75},
                                  {"mar1", loc.mar1},         {"mar10", loc.mar10},
                                  {"threshold", threshold},   {"sigma", config.scoring.sigma},
                                  {"min_area", config.scoring.min_area}};
    report["reference"] = reference_to_json(subset_label);
    const fs::path out = paths.report(models::ModelKind::stfpm, strategy);
    std::ofstream(out, std::ios::trunc) << report.dump(2) << "\n";
    write_curves(paths, tag, block);
    outcome.reports.push_back(out);
    std::cout << "stfpm " << scoring::to_string(strategy) << ": AUC " << block.roc.auc << ", AP "
              << block.pr.ap << ", mAP@50 " << loc.map50 << " -> " << out.string() << "\n";
  }
  return outcome;
}

std::filesystem::path cmd_embed(const RunConfig& config) {
  const RunPaths paths = run_paths(config);
  const auto manifest = load_subset_manifest(paths);
  const fs::path checkpoint = paths.checkpoint(config.model.kind);
  if (!fs::exists(checkpoint))
    throw ValidationError("missing checkpoint for " + models::to_string(config.model.kind) +
                          "; run the train stage first");
  models::TrainedModel model = models::TrainedModel::load(checkpoint);

  SplitData val = load_split(manifest, paths.dataset_dir, datamodel::Split::val);
  SplitData test = load_split(manifest, paths.dataset_dir, datamodel::Split::test);
  std::vector<const datamodel::SampleRecord*> records = val.records;
  records.insert(records.end(), test.records.begin(), test.records.end());
  std::vector<Tensor> phases = std::move(val.phases);
  for (auto& p : test.phases) phases.push_back(std::move(p));

  eval::TsneOptions tsne_options = config.eval.tsne;
  if (static_cast<double>(phases.size()) <= 3.0 * tsne_options.perplexity)
    throw ValidationError("too few samples (" + std::to_string(phases.size()) +
                          ") for perplexity " + std::to_string(tsne_options.perplexity));
  tsne_options.seed = derive_subseed(config.seed, 0x75E);

  const Tensor features = eval::extract_features(model, phases, config.eval.feature_source);
  const eval::EmbeddingResult embedding = eval::tsne(features, tsne_options);

  fs::create_directories(paths.embed_dir);
  const fs::path csv = paths.embed_dir / "embedding.csv";
  {
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw IoError("cannot write embedding: " + csv.string());
    out << "id,x,y,label\n";
    out.precision(12);
    for (std::size_t i = 0; i < records.size(); ++i)
      out << records[i]->id << "," << embedding.coords.at2(static_cast<std::int64_t>(i), 0) << ","
          << embedding.coords.at2(static_cast<std::int64_t>(i), 1) << ","
          << (records[i]->defective ? 1 : 0) << "\n";
  }
  std::vector<ScatterPoint> points;
  for (std::size_t i = 0; i < records.size(); ++i)
    points.push_back({embedding.coords.at2(static_cast<std::int64_t>(i), 0),
                      embedding.coords.at2(static_cast<std::int64_t>(i), 1),
                      records[i]->defective});
  write_scatter_svg(paths.embed_dir / "embedding.svg",
                    "t-SNE embedding (" + eval::to_string(config.eval.feature_source) + ", KL " +
                        std::to_string(embedding.kl_final) + ")",
                    points);
  std::cout << "embedded " << records.size() << " samples (final KL " << embedding.kl_final
            << ") -> " << csv.string() << "\n";
  return csv;
}

std::filesystem::path cmd_ingest_predictions(const RunConfig& config,
                                             const fs::path& predictions_file) {
  const RunPaths paths = run_paths(config);
  const auto manifest = load_subset_manifest(paths);
  const auto predictions = datamodel::ingest_external_predictions(predictions_file, manifest);
  const fs::path out = paths.eval_dir / "external_predictions.json";
  datamodel::save_predictions(predictions, out);
  std::size_t boxes = 0;
  for (const auto& [id, list] : predictions) boxes += list.size();
  std::cout << "ingested " << boxes << " predictions over " << predictions.size()
            << " samples -> " << out.string() << "\n";
  return out;
}

RunLedger cmd_pipeline(const RunConfig& config) {
  const RunPaths paths = run_paths(config);
  RunLedger ledger;
  ledger.config_hash = config.hash();

  auto run_stage = [&](const std::string& stage, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
    ledger.stage_timestamps.emplace_back(stage, iso_timestamp());
  };

  run_stage("generate", [&] { (void)cmd_generate(config); });
  run_stage("subset", [&] { (void)cmd_subset(config); });
  for (const auto kind :
       {models::ModelKind::ae, models::ModelKind::conv_ae, models::ModelKind::stfpm})
    run_stage("train:" + models::to_string(kind), [&] { (void)cmd_train(config, kind); });
  for (const auto kind :
       {models::ModelKind::ae, models::ModelKind::conv_ae, models::ModelKind::stfpm})
    run_stage("evaluate:" + models::to_string(kind),
              [&] { (void)cmd_evaluate(config, kind, std::nullopt); });
  run_stage("embed", [&] { (void)cmd_embed(config); });

  // Collect every artifact under the run root except the ledger itself.
  std::vector<std::string> artifacts;
  for (const auto& entry : fs::recursive_directory_iterator(paths.root)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path() == paths.ledger) continue;
    artifacts.push_back(fs::relative(entry.path(), paths.root).string());
  }
  std::sort(artifacts.begin(), artifacts.end());
  ledger.artifacts = std::move(artifacts);
  for (const auto& rel : ledger.artifacts)
    if (!fs::exists(paths.root / rel)) throw IoError("ledger artifact vanished: " + rel);
  save_ledger(ledger, paths.ledger);
  std::cout << "pipeline complete: " << ledger.artifacts.size() << " artifacts under "
            << paths.root.string() << "\n";
  return ledger;
}

}  // namespace shearo::cli
