#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shearo/models/autoencoder.hpp"
#include "shearo/models/stfpm.hpp"

namespace shearo::models {

struct TrainOptions {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double momentum = 0.9;        // sgd only
  double weight_decay = 0.0;    // sgd only
  std::string optimizer = "adam";  // "adam" or "sgd"
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_losses;  // one per epoch
  std::vector<double> val_losses;    // one per epoch
  int epochs() const { return static_cast<int>(train_losses.size()); }
  double final_train_loss() const { return train_losses.empty() ? 0.0 : train_losses.back(); }
  double final_val_loss() const { return val_losses.empty() ? 0.0 : val_losses.back(); }
};

/// Autoencoder training: minimizes the mean squared reconstruction error.
/// train_x/val_x are preprocessed batches ((N, D) dense / (N,1,H,W) conv).
TrainHistory train_dense_ae(DenseAutoencoder& model, const Tensor& train_x, const Tensor& val_x,
                            const TrainOptions& options);
TrainHistory train_conv_ae(ConvAutoencoder& model, const Tensor& train_x, const Tensor& val_x,
                           const TrainOptions& options);

/// Student training against the frozen teacher; teacher features are
/// precomputed once per sample. train_x/val_x are (N, 3, H, W).
TrainHistory train_stfpm(Stfpm& model, const Tensor& train_x, const Tensor& val_x,
                         const TrainOptions& options);

/// Teacher pretext pretraining: the backbone learns to classify generator
/// recipes (flat / deformed, defect-free / defective) on throwaway synthetic
/// images, then the classifier head is discarded.
struct PretextOptions {
  std::int64_t images_per_class = 48;
  int epochs = 12;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

/// Pretext images rendered by the caller (keeps models decoupled from the
/// generator): one preprocessed (3,H,W) tensor per image plus a class label.
struct PretextDataset {
  Tensor images;                     // (N, 3, H, W)
  std::vector<std::int64_t> labels;  // in [0, num_classes)
  std::int64_t num_classes = 4;
};

/// Trains backbone in place on the pretext task; returns per-epoch accuracy.
std::vector<double> pretrain_backbone(nn::Backbone& backbone, const PretextDataset& data,
                                      const PretextOptions& options);

}  // namespace shearo::models
