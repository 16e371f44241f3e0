#include "shearo/models/train.hpp"

#include <cmath>
#include <memory>

#include "shearo/core/error.hpp"
#include "shearo/models/preprocess.hpp"
#include "shearo/nn/optim.hpp"

namespace shearo::models {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw ValidationError(msg);
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
  std::vector<std::int64_t> shape = x.shape();
  shape[0] = static_cast<std::int64_t>(end - begin);
  Tensor out(shape);
  const std::int64_t row = x.numel() / x.dim(0);
  for (std::size_t k = begin; k < end; ++k) {
    const double* src = x.data() + static_cast<std::int64_t>(idx[k]) * row;
    double* dst = out.data() + static_cast<std::int64_t>(k - begin) * row;
    for (std::int64_t i = 0; i < row; ++i) dst[i] = src[i];
  }
  return out;
}

/// MSE loss and its gradient w.r.t. the reconstruction.
double mse_loss(const Tensor& rec, const Tensor& target, Tensor& grad) {
  grad = Tensor::zeros_like(rec);
  double acc = 0.0;
  const double inv = 1.0 / static_cast<double>(rec.numel());
  for (std::int64_t i = 0; i < rec.numel(); ++i) {
    const double d = rec[i] - target[i];
    acc += d * d;
    grad[i] = 2.0 * d * inv;
  }
  return acc * inv;
}

std::unique_ptr<nn::Optimizer> make_optimizer(std::vector<nn::Param*> params,
                                              const TrainOptions& options) {
  if (options.optimizer == "adam")
    return std::make_unique<nn::Adam>(std::move(params), options.learning_rate);
  if (options.optimizer == "sgd")
    return std::make_unique<nn::SgdMomentum>(std::move(params), options.learning_rate,
                                             options.momentum, options.weight_decay);
  throw ValidationError("unknown optimizer: " + options.optimizer);
}

template <class Forward, class ValLoss>
TrainHistory run_epochs(std::int64_t train_count, const TrainOptions& options,
                        nn::Optimizer& optimizer, Forward&& forward_backward_loss,
                        ValLoss&& val_loss) {
  Rng shuffle_rng(derive_subseed(options.seed, 0xBA7C4));
  std::vector<std::size_t> order(static_cast<std::size_t>(train_count));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainHistory history;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::int64_t batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(options.batch_size));
      optimizer.zero_grad();
      epoch_loss += forward_backward_loss(order, begin, end);
      optimizer.step();
      ++batches;
    }
    history.train_losses.push_back(epoch_loss / static_cast<double>(batches));
    history.val_losses.push_back(val_loss());
  }
  return history;
}

}  // namespace

void TrainOptions::validate() const {
  if (epochs < 1 || batch_size < 1) throw ValidationError("epochs and batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (optimizer != "adam" && optimizer != "sgd")
    throw ValidationError("optimizer must be adam or sgd");
}

TrainHistory train_dense_ae(DenseAutoencoder& model, const Tensor& train_x, const Tensor& val_x,
                            const TrainOptions& options) {
  options.validate();
  require(train_x.ndim() == 2 && train_x.dim(0) > 0, "train_dense_ae: empty training set");
  auto optimizer = make_optimizer(model.params(), options);
  Tensor grad;
  return run_epochs(
      train_x.dim(0), options, *optimizer,
      [&](const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
        const Tensor batch = gather_rows(train_x, order, begin, end);
        const Tensor rec = model.forward(batch, /*training=*/true);
        const double loss = mse_loss(rec, batch, grad);
        model.backward(grad);
        return loss;
      },
      [&] {
        if (val_x.numel() == 0) return 0.0;
        const Tensor rec = model.forward(val_x, /*training=*/false);
        return reconstruction_error(val_x, rec);
      });
}

TrainHistory train_conv_ae(ConvAutoencoder& model, const Tensor& train_x, const Tensor& val_x,
                           const TrainOptions& options) {
  options.validate();
  require(train_x.ndim() == 4 && train_x.dim(0) > 0, "train_conv_ae: empty training set");
  auto optimizer = make_optimizer(model.params(), options);
  Tensor grad;
  return run_epochs(
      train_x.dim(0), options, *optimizer,
      [&](const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
        const Tensor batch = gather_rows(train_x, order, begin, end);
        const Tensor rec = model.forward(batch, /*training=*/true);
        const double loss = mse_loss(rec, batch, grad);
        model.backward(grad);
        return loss;
      },
      [&] {
        if (val_x.numel() == 0) return 0.0;
        const Tensor rec = model.forward(val_x, /*training=*/false);
        return reconstruction_error(val_x, rec);
      });
}

namespace {

/// Teacher pyramids per sample, computed once (the teacher is frozen).
std::vector<std::vector<Tensor>> cache_teacher_taps(Stfpm& model, const Tensor& x,
                                                    int batch_size) {
  std::vector<std::vector<Tensor>> cache(static_cast<std::size_t>(x.dim(0)));
  const std::int64_t row = x.numel() / x.dim(0);
  std::vector<std::size_t> order(static_cast<std::size_t>(x.dim(0)));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
    const Tensor batch = gather_rows(x, order, begin, end);
    const std::vector<Tensor> taps = model.teacher_features(batch);
    for (std::size_t k = begin; k < end; ++k) {
      std::vector<Tensor> one;
      for (const Tensor& tap : taps) {
        Tensor slice({1, tap.dim(1), tap.dim(2), tap.dim(3)});
        const std::int64_t len = slice.numel();
        const double* src = tap.data() + static_cast<std::int64_t>(k - begin) * len;
        for (std::int64_t i = 0; i < len; ++i) slice[i] = src[i];
        one.push_back(std::move(slice));
      }
      cache[k] = std::move(one);
    }
  }
  (void)row;
  return cache;
}

std::vector<Tensor> stack_taps(const std::vector<std::vector<Tensor>>& cache,
                               const std::vector<std::size_t>& order, std::size_t begin,
                               std::size_t end) {
  const std::size_t layers = cache[0].size();
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& proto = cache[0][l];
    Tensor stacked({static_cast<std::int64_t>(end - begin), proto.dim(1), proto.dim(2), proto.dim(3)});
    const std::int64_t len = proto.numel();
    for (std::size_t k = begin; k < end; ++k) {
      const Tensor& src = cache[order[k]][l];
      double* dst = stacked.data() + static_cast<std::int64_t>(k - begin) * len;
      for (std::int64_t i = 0; i < len; ++i) dst[i] = src[i];
    }
    out.push_back(std::move(stacked));
  }
  return out;
}

}  // namespace

TrainHistory train_stfpm(Stfpm& model, const Tensor& train_x, const Tensor& val_x,
                         const TrainOptions& options) {
  options.validate();
  require(train_x.ndim() == 4 && train_x.dim(0) > 0, "train_stfpm: empty training set");

  const auto train_taps = cache_teacher_taps(model, train_x, options.batch_size);
  std::vector<std::vector<Tensor>> val_taps;
  if (val_x.numel() > 0) val_taps = cache_teacher_taps(model, val_x, options.batch_size);

  auto optimizer = make_optimizer(model.student().params(), options);
  std::vector<std::size_t> val_order;
  for (std::size_t i = 0; i < val_taps.size(); ++i) val_order.push_back(i);

  return run_epochs(
      train_x.dim(0), options, *optimizer,
      [&](const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
        const Tensor batch = gather_rows(train_x, order, begin, end);
        const std::vector<Tensor> taps = stack_taps(train_taps, order, begin, end);
        return model.loss_and_backward(batch, taps);
      },
      [&] {
        if (val_taps.empty()) return 0.0;
        const Tensor batch = gather_rows(val_x, val_order, 0, val_order.size());
        const std::vector<Tensor> taps = stack_taps(val_taps, val_order, 0, val_order.size());
        return model.loss_eval(batch, taps);
      });
}

// --- teacher pretext -----------------------------------------------------------

std::vector<double> pretrain_backbone(nn::Backbone& backbone, const PretextDataset& data,
                                      const PretextOptions& options) {
  require(data.images.ndim() == 4 &&
              data.images.dim(0) == static_cast<std::int64_t>(data.labels.size()) &&
              data.images.dim(0) > 0,
          "pretrain_backbone: dataset shape mismatch");
  for (const auto label : data.labels)
    require(label >= 0 && label < data.num_classes, "pretrain_backbone: label out of range");

  // Probe the deepest tap width for the classifier head.
  Tensor probe({1, data.images.dim(1), data.images.dim(2), data.images.dim(3)});
  for (std::int64_t i = 0; i < probe.numel(); ++i) probe[i] = data.images[i];
  const std::vector<Tensor> taps = backbone.forward(probe, false);
  const std::int64_t deep_c = taps.back().dim(1);

  Rng head_rng(derive_subseed(options.seed, 0x7EAC));
  nn::Linear head(deep_c, data.num_classes, head_rng);
  std::vector<nn::Param*> params = backbone.params();
  head.collect_params(params);
  nn::Adam optimizer(params, options.learning_rate);

  Rng shuffle_rng(derive_subseed(options.seed, 0x0D0));
  std::vector<std::size_t> order(static_cast<std::size_t>(data.images.dim(0)));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> accuracy;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::int64_t correct = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(options.batch_size));
      const Tensor batch = gather_rows(data.images, order, begin, end);
      const std::int64_t n = batch.dim(0);

      optimizer.zero_grad();
      const std::vector<Tensor> feats = backbone.forward(batch, /*training=*/true);
      const Tensor& deep = feats.back();
      const std::int64_t c = deep.dim(1), spatial = deep.dim(2) * deep.dim(3);

      Tensor pooled({n, c});
      for (std::int64_t i = 0; i < n * c; ++i) {
        const double* p = deep.data() + i * spatial;
        double acc = 0.0;
        for (std::int64_t q = 0; q < spatial; ++q) acc += p[q];
        pooled[i] = acc / static_cast<double>(spatial);
      }
      const Tensor logits = head.forward(pooled, true);

      // Softmax cross-entropy, gradient (softmax - onehot)/N.
      Tensor dlogits = Tensor::zeros_like(logits);
      for (std::int64_t s = 0; s < n; ++s) {
        const std::int64_t label = data.labels[order[begin + static_cast<std::size_t>(s)]];
        double max_logit = -1e300;
        for (std::int64_t k = 0; k < data.num_classes; ++k)
          max_logit = std::max(max_logit, logits.at2(s, k));
        double z = 0.0;
        std::int64_t arg = 0;
        for (std::int64_t k = 0; k < data.num_classes; ++k) {
          z += std::exp(logits.at2(s, k) - max_logit);
          if (logits.at2(s, k) > logits.at2(s, arg)) arg = k;
        }
        if (arg == label) ++correct;
        for (std::int64_t k = 0; k < data.num_classes; ++k) {
          const double p = std::exp(logits.at2(s, k) - max_logit) / z;
          dlogits.at2(s, k) = (p - (k == label ? 1.0 : 0.0)) / static_cast<double>(n);
        }
      }

      const Tensor dpooled = head.backward(dlogits);
      Tensor ddeep = Tensor::zeros_like(deep);
      for (std::int64_t i = 0; i < n * c; ++i) {
        const double g = dpooled[i] / static_cast<double>(spatial);
        double* p = ddeep.data() + i * spatial;
        for (std::int64_t q = 0; q < spatial; ++q) p[q] = g;
      }
      std::vector<Tensor> grads;
      for (std::size_t l = 0; l + 1 < feats.size(); ++l) grads.push_back(Tensor::zeros_like(feats[l]));
      grads.push_back(std::move(ddeep));
      backbone.backward(grads);
      optimizer.step();
    }
    accuracy.push_back(static_cast<double>(correct) / static_cast<double>(order.size()));
  }
  return accuracy;
}

}  // namespace shearo::models
