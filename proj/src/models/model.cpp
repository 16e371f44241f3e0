#include "shearo/models/model.hpp"

#include <fstream>

#include "shearo/core/error.hpp"
#include "shearo/core/sha256.hpp"
#include "shearo/models/preprocess.hpp"
#include "shearo/models/serialize.hpp"
#include "shearo/nn/checkpoint.hpp"

namespace shearo::models {

using nlohmann::json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ae: return "ae";
    case ModelKind::conv_ae: return "conv_ae";
    case ModelKind::stfpm: return "stfpm";
  }
  return "ae";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ae") return ModelKind::ae;
  if (s == "conv_ae") return ModelKind::conv_ae;
  if (s == "stfpm") return ModelKind::stfpm;
  throw ValidationError("unknown model kind: " + s);
}

DenseAutoencoder& TrainedModel::dense_ae() {
  if (!ae_) throw ValidationError("model is not a dense autoencoder");
  return *ae_;
}

ConvAutoencoder& TrainedModel::conv_ae() {
  if (!conv_ae_) throw ValidationError("model is not a convolutional autoencoder");
  return *conv_ae_;
}

Stfpm& TrainedModel::stfpm() {
  if (!stfpm_) throw ValidationError("model is not a student-teacher model");
  return *stfpm_;
}

double TrainedModel::reconstruction_score(const Tensor& phase_hw) {
  if (kind_ == ModelKind::ae) {
    const Tensor x = preprocess_ae(phase_hw).reshaped({1, kAeWidth * kAeHeight});
    const Tensor rec = ae_->forward(x, /*training=*/false);
    return reconstruction_error(x, rec);
  }
  if (kind_ == ModelKind::conv_ae) {
    const Tensor img = preprocess_convae(phase_hw);
    const Tensor x = img.reshaped({1, 1, img.dim(1), img.dim(2)});
    const Tensor rec = conv_ae_->forward(x, /*training=*/false);
    return reconstruction_error(x, rec);
  }
  throw ValidationError("reconstruction score is defined for autoencoders only");
}

Tensor TrainedModel::anomaly_heatmap(const Tensor& phase_hw) {
  if (kind_ != ModelKind::stfpm)
    throw ValidationError("anomaly heatmaps are defined for the student-teacher model only");
  const auto& cfg = stfpm_->config();
  const Tensor x =
      preprocess_stfpm(phase_hw, cfg.input_height, cfg.input_width, cfg.norm_mean, cfg.norm_std);
  return stfpm_->anomaly_map(x);
}

TrainedModel TrainedModel::make_ae(const AeConfig& config, std::uint64_t seed) {
  TrainedModel m;
  m.kind_ = ModelKind::ae;
  m.meta_.seed = seed;
  m.ae_ = std::make_shared<DenseAutoencoder>(config, seed);
  return m;
}

TrainedModel TrainedModel::make_conv_ae(const ConvAeConfig& config, std::uint64_t seed) {
  TrainedModel m;
  m.kind_ = ModelKind::conv_ae;
  m.meta_.seed = seed;
  m.conv_ae_ = std::make_shared<ConvAutoencoder>(config, seed);
  return m;
}

TrainedModel TrainedModel::make_stfpm(const StfpmConfig& config, std::uint64_t seed) {
  TrainedModel m;
  m.kind_ = ModelKind::stfpm;
  m.meta_.seed = seed;
  m.stfpm_ = std::make_shared<Stfpm>(config, seed);
  return m;
}

namespace {

nn::NamedTensors snapshot(std::vector<nn::Param*> params,
                          std::vector<std::pair<std::string, Tensor*>> buffers,
                          const std::string& prefix) {
  nn::NamedTensors out;
  for (const nn::Param* p : params) {
    if (!out.emplace(prefix + p->name, p->value).second)
      throw ValidationError("duplicate parameter name: " + prefix + p->name);
  }
  for (const auto& [name, tensor] : buffers) {
    if (!out.emplace(prefix + name, *tensor).second)
      throw ValidationError("duplicate buffer name: " + prefix + name);
  }
  return out;
}

void restore(const nn::NamedTensors& blob, std::vector<nn::Param*> params,
             std::vector<std::pair<std::string, Tensor*>> buffers, const std::string& prefix,
             const std::filesystem::path& path) {
  auto fetch = [&](const std::string& name) -> const Tensor& {
    const auto it = blob.find(prefix + name);
    if (it == blob.end())
      throw IoError("checkpoint " + path.string() + " is missing tensor " + prefix + name);
    return it->second;
  };
  for (nn::Param* p : params) {
    const Tensor& t = fetch(p->name);
    if (!t.same_shape(p->value))
      throw IoError("checkpoint " + path.string() + ": topology mismatch at " + prefix + p->name +
                    " (" + t.shape_str() + " vs " + p->value.shape_str() + ")");
    p->value = t;
  }
  for (auto& [name, tensor] : buffers) {
    const Tensor& t = fetch(name);
    if (!t.same_shape(*tensor))
      throw IoError("checkpoint " + path.string() + ": topology mismatch at " + prefix + name);
    *tensor = t;
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return path.string() + ".json";
}

void write_sidecar(const std::filesystem::path& path, const json& j) {
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint sidecar for " + path.string());
  out << j.dump(2) << "\n";
}

json read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw IoError("missing checkpoint sidecar for " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint sidecar for " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace

void TrainedModel::save(const std::filesystem::path& path) const {
  nn::NamedTensors tensors;
  json config;
  auto* self = const_cast<TrainedModel*>(this);
  switch (kind_) {
    case ModelKind::ae: {
      tensors = snapshot(self->ae_->params(), {}, "");
      config = self->ae_->config();
      break;
    }
    case ModelKind::conv_ae: {
      std::vector<std::pair<std::string, Tensor*>> buffers;
      self->conv_ae_->collect_buffers(buffers);
      tensors = snapshot(self->conv_ae_->params(), buffers, "");
      config = self->conv_ae_->config();
      break;
    }
    case ModelKind::stfpm: {
      std::vector<std::pair<std::string, Tensor*>> tb, sb;
      self->stfpm_->teacher().collect_buffers(tb);
      self->stfpm_->student().collect_buffers(sb);
      nn::NamedTensors teacher = snapshot(self->stfpm_->teacher().params(), tb, "teacher.");
      tensors = snapshot(self->stfpm_->student().params(), sb, "student.");
      tensors.insert(teacher.begin(), teacher.end());
      config = self->stfpm_->config();
      break;
    }
  }
  nn::save_blob(path, tensors);

  json meta;
  meta["kind"] = to_string(kind_);
  meta["config"] = config;
  meta["seed"] = meta_.seed;
  meta["epochs"] = meta_.train_losses.size();
  meta["train_losses"] = meta_.train_losses;
  meta["val_losses"] = meta_.val_losses;
  if (kind_ == ModelKind::stfpm) meta["teacher_hash"] = meta_.teacher_hash;
  meta["blob_hash"] = sha256_file(path);
  write_sidecar(path, meta);
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  const json meta = read_sidecar(path);
  const nn::NamedTensors blob = nn::load_blob(path);

  TrainedModel m;
  try {
    m.kind_ = model_kind_from_string(meta.at("kind").get<std::string>());
    m.meta_.seed = meta.value("seed", 0ull);
    m.meta_.train_losses = meta.value("train_losses", std::vector<double>{});
    m.meta_.val_losses = meta.value("val_losses", std::vector<double>{});
    m.meta_.teacher_hash = meta.value("teacher_hash", "");

    switch (m.kind_) {
      case ModelKind::ae: {
        const auto config = meta.at("config").get<AeConfig>();
        m.ae_ = std::make_shared<DenseAutoencoder>(config, m.meta_.seed);
        restore(blob, m.ae_->params(), {}, "", path);
        break;
      }
      case ModelKind::conv_ae: {
        const auto config = meta.at("config").get<ConvAeConfig>();
        m.conv_ae_ = std::make_shared<ConvAutoencoder>(config, m.meta_.seed);
        std::vector<std::pair<std::string, Tensor*>> buffers;
        m.conv_ae_->collect_buffers(buffers);
        restore(blob, m.conv_ae_->params(), buffers, "", path);
        break;
      }
      case ModelKind::stfpm: {
        const auto config = meta.at("config").get<StfpmConfig>();
        m.stfpm_ = std::make_shared<Stfpm>(config, m.meta_.seed);
        std::vector<std::pair<std::string, Tensor*>> tb, sb;
        m.stfpm_->teacher().collect_buffers(tb);
        m.stfpm_->student().collect_buffers(sb);
        restore(blob, m.stfpm_->teacher().params(), tb, "teacher.", path);
        restore(blob, m.stfpm_->student().params(), sb, "student.", path);
        break;
      }
    }
  } catch (const json::exception& e) {
    throw IoError("checkpoint sidecar schema error for " + path.string() + ": " + e.what());
  }
  return m;
}

std::string save_teacher(const std::filesystem::path& path, nn::Backbone& backbone,
                         double norm_mean, double norm_std,
                         const std::vector<double>& pretext_accuracy) {
  std::vector<std::pair<std::string, Tensor*>> buffers;
  backbone.collect_buffers(buffers);
  nn::save_blob(path, snapshot(backbone.params(), buffers, ""));
  const std::string hash = sha256_file(path);

  json meta;
  meta["kind"] = "teacher";
  meta["backbone"] = backbone.config();
  meta["norm_mean"] = norm_mean;
  meta["norm_std"] = norm_std;
  meta["pretext_accuracy"] = pretext_accuracy;
  meta["blob_hash"] = hash;
  write_sidecar(path, meta);
  return hash;
}

std::string load_teacher(const std::filesystem::path& path, Stfpm& model) {
  const json meta = read_sidecar(path);
  nn::BackboneConfig topo;
  try {
    topo = meta.at("backbone").get<nn::BackboneConfig>();
  } catch (const json::exception& e) {
    throw IoError("teacher sidecar schema error for " + path.string() + ": " + e.what());
  }
  if (!(topo == model.config().backbone))
    throw IoError("teacher checkpoint topology does not match the configured backbone: " +
                  path.string());

  const nn::NamedTensors blob = nn::load_blob(path);
  std::vector<std::pair<std::string, Tensor*>> buffers;
  model.teacher().collect_buffers(buffers);
  restore(blob, model.teacher().params(), buffers, "", path);
  return sha256_file(path);
}

}  // namespace shearo::models
