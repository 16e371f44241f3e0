#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "shearo/models/autoencoder.hpp"
#include "shearo/models/stfpm.hpp"
#include "shearo/models/train.hpp"

namespace shearo::models {

enum class ModelKind { ae, conv_ae, stfpm };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::vector<double> train_losses;
  std::vector<double> val_losses;
  std::string teacher_hash;  // stfpm only
};

/// A trained detector behind one interface: reconstruction scores for the
/// autoencoders, anomaly heatmaps for the student-teacher model.
class TrainedModel {
 public:
  ModelKind kind() const { return kind_; }
  const TrainingMeta& meta() const { return meta_; }
  TrainingMeta& meta() { return meta_; }

  DenseAutoencoder& dense_ae();
  ConvAutoencoder& conv_ae();
  Stfpm& stfpm();

  /// Mean squared reconstruction error of one wrapped phase image
  /// (autoencoders only).
  double reconstruction_score(const Tensor& phase_hw);

  /// Anomaly heatmap of one wrapped phase image on the model grid
  /// (stfpm only).
  Tensor anomaly_heatmap(const Tensor& phase_hw);

  static TrainedModel make_ae(const AeConfig& config, std::uint64_t seed);
  static TrainedModel make_conv_ae(const ConvAeConfig& config, std::uint64_t seed);
  static TrainedModel make_stfpm(const StfpmConfig& config, std::uint64_t seed);

  /// Checkpoint blob + JSON sidecar (kind, config snapshot, seed, losses,
  /// teacher hash for stfpm).
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

 private:
  TrainedModel() = default;
  ModelKind kind_ = ModelKind::ae;
  TrainingMeta meta_;
  std::shared_ptr<DenseAutoencoder> ae_;
  std::shared_ptr<ConvAutoencoder> conv_ae_;
  std::shared_ptr<Stfpm> stfpm_;
};

/// Teacher checkpoint: backbone parameters + running stats, sidecar with the
/// topology and preprocessing convention. Returns the file's SHA-256 so runs
/// can record teacher provenance.
std::string save_teacher(const std::filesystem::path& path, nn::Backbone& backbone,
                         double norm_mean, double norm_std,
                         const std::vector<double>& pretext_accuracy);

/// Loads a frozen teacher into the model. The checkpoint topology must match
/// the configured backbone; returns the checkpoint hash.
std::string load_teacher(const std::filesystem::path& path, Stfpm& model);

}  // namespace shearo::models
