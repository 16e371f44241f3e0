#include "shearo/cli/config.hpp"

#include <fstream>

#include <json.hpp>

#include "shearo/core/sha256.hpp"
#include "shearo/models/serialize.hpp"

namespace shearo::cli {

using nlohmann::json;

const models::TrainOptions& ModelSection::train_for(models::ModelKind k) const {
  switch (k) {
    case models::ModelKind::ae: return train_ae;
    case models::ModelKind::conv_ae: return train_conv_ae;
    case models::ModelKind::stfpm: return train_stfpm;
  }
  return train_ae;
}

models::TrainOptions& ModelSection::train_for(models::ModelKind k) {
  return const_cast<models::TrainOptions&>(
      static_cast<const ModelSection*>(this)->train_for(k));
}

void RunConfig::validate() const {
  generator.validate();
  subset.ratios.validate();
  model.ae.validate();
  model.conv_ae.validate();
  model.stfpm.validate();
  model.train_ae.validate();
  model.train_conv_ae.validate();
  model.train_stfpm.validate();
  if (!(scoring.sigma > 0.0)) throw ValidationError("scoring sigma must be positive");
  if (scoring.min_area < 0) throw ValidationError("scoring min_area must be non-negative");
  eval.tsne.validate();
}

RunConfig default_config() {
  RunConfig c;
  c.generator.campaign.defective_count = 100;
  c.generator.campaign.fixed_count = 59;
  c.generator.campaign.deformed_count = 85;

  // Autoencoder regimes follow the published setup.
  c.model.train_ae.epochs = 50;
  c.model.train_ae.batch_size = 32;
  c.model.train_ae.learning_rate = 1e-3;
  c.model.train_ae.optimizer = "adam";
  c.model.train_conv_ae = c.model.train_ae;
  c.model.train_conv_ae.epochs = 12;  // the conv stack converges far faster per epoch cost

  // Student training follows the feature-matching method's published
  // regime, scaled down for CPU runs.
  c.model.train_stfpm.epochs = 40;
  c.model.train_stfpm.batch_size = 16;
  c.model.train_stfpm.learning_rate = 0.4;
  c.model.train_stfpm.momentum = 0.9;
  c.model.train_stfpm.weight_decay = 1e-4;
  c.model.train_stfpm.optimizer = "sgd";

  // Desk-scale backbone; the full-width 256x256 topology stays available
  // through the config file.
  c.model.stfpm.backbone.base_channels = 16;
  c.model.stfpm.backbone.blocks_per_stage = {2, 2, 2};
  c.model.stfpm.input_width = 96;
  c.model.stfpm.input_height = 64;

  c.teacher.pretext.images_per_class = 48;
  c.teacher.pretext.epochs = 10;
  c.teacher.pretext.batch_size = 16;
  c.teacher.pretext.learning_rate = 1e-3;

  c.eval.tsne.perplexity = 12.0;
  c.eval.tsne.iterations = 600;
  c.eval.tsne.exaggeration_iterations = 150;
  return c;
}

namespace {

json train_to_json(const models::TrainOptions& t) {
  return json{{"epochs", t.epochs},           {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate}, {"momentum", t.momentum},
              {"weight_decay", t.weight_decay},   {"optimizer", t.optimizer}};
}

models::TrainOptions train_from_json(const json& j, const models::TrainOptions& defaults) {
  models::TrainOptions t = defaults;
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.momentum = j.value("momentum", t.momentum);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.optimizer = j.value("optimizer", t.optimizer);
  return t;
}

json pretext_to_json(const models::PretextOptions& p) {
  return json{{"images_per_class", p.images_per_class},
              {"epochs", p.epochs},
              {"batch_size", p.batch_size},
              {"learning_rate", p.learning_rate}};
}

models::PretextOptions pretext_from_json(const json& j, const models::PretextOptions& defaults) {
  models::PretextOptions p = defaults;
  p.images_per_class = j.value("images_per_class", p.images_per_class);
  p.epochs = j.value("epochs", p.epochs);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  return p;
}

json config_to_json(const RunConfig& c, bool include_output_dir) {
  json j;
  j["seed"] = c.seed;
  if (include_output_dir) j["output_dir"] = c.output_dir.string();
  j["generator"] = c.generator;
  j["subset"] = json{{"name", c.subset.definition.label()},
                     {"ratios", json{{"train", c.subset.ratios.train},
                                     {"val", c.subset.ratios.val},
                                     {"test", c.subset.ratios.test}}}};
  j["model"] = json{{"kind", models::to_string(c.model.kind)},
                    {"ae", c.model.ae},
                    {"conv_ae", c.model.conv_ae},
                    {"stfpm", c.model.stfpm},
                    {"train_ae", train_to_json(c.model.train_ae)},
                    {"train_conv_ae", train_to_json(c.model.train_conv_ae)},
                    {"train_stfpm", train_to_json(c.model.train_stfpm)}};
  j["scoring"] = json{{"strategy", scoring::to_string(c.scoring.strategy)},
                      {"sigma", c.scoring.sigma},
                      {"threshold", c.scoring.threshold},
                      {"min_area", c.scoring.min_area},
                      {"tune_threshold", c.scoring.tune_threshold}};
  j["eval"] = json{{"perplexity", c.eval.tsne.perplexity},
                   {"iterations", c.eval.tsne.iterations},
                   {"exaggeration_iterations", c.eval.tsne.exaggeration_iterations},
                   {"exaggeration", c.eval.tsne.exaggeration},
                   {"learning_rate", c.eval.tsne.learning_rate},
                   {"feature_source", eval::to_string(c.eval.feature_source)},
                   {"overlay_count", c.eval.overlay_count}};
  j["teacher"] = json{{"checkpoint", c.teacher.checkpoint},
                      {"pretext", pretext_to_json(c.teacher.pretext)}};
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c = default_config();
  c.seed = j.value("seed", c.seed);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("generator")) c.generator = j.at("generator").get<synthgen::GeneratorConfig>();
  if (j.contains("subset")) {
    const auto& js = j.at("subset");
    const std::string name = js.value("name", "A");
    if (name != "A" && name != "B") throw ValidationError("subset name must be A or B");
    c.subset.definition = name == "A" ? datamodel::SubsetDefinition::subset_a()
                                      : datamodel::SubsetDefinition::subset_b();
    if (js.contains("ratios")) {
      const auto& jr = js.at("ratios");
      c.subset.ratios.train = jr.value("train", c.subset.ratios.train);
      c.subset.ratios.val = jr.value("val", c.subset.ratios.val);
      c.subset.ratios.test = jr.value("test", c.subset.ratios.test);
    }
  }
  if (j.contains("model")) {
    const auto& jm = j.at("model");
    c.model.kind = models::model_kind_from_string(jm.value("kind", "stfpm"));
    if (jm.contains("ae")) c.model.ae = jm.at("ae").get<models::AeConfig>();
    if (jm.contains("conv_ae")) c.model.conv_ae = jm.at("conv_ae").get<models::ConvAeConfig>();
    if (jm.contains("stfpm")) c.model.stfpm = jm.at("stfpm").get<models::StfpmConfig>();
    if (jm.contains("train_ae")) c.model.train_ae = train_from_json(jm.at("train_ae"), c.model.train_ae);
    if (jm.contains("train_conv_ae"))
      c.model.train_conv_ae = train_from_json(jm.at("train_conv_ae"), c.model.train_conv_ae);
    if (jm.contains("train_stfpm"))
      c.model.train_stfpm = train_from_json(jm.at("train_stfpm"), c.model.train_stfpm);
  }
  if (j.contains("scoring")) {
    const auto& js = j.at("scoring");
    c.scoring.strategy = scoring::strategy_from_string(js.value("strategy", "peaks"));
    c.scoring.sigma = js.value("sigma", c.scoring.sigma);
    c.scoring.threshold = js.value("threshold", c.scoring.threshold);
    c.scoring.min_area = js.value("min_area", c.scoring.min_area);
    c.scoring.tune_threshold = js.value("tune_threshold", c.scoring.tune_threshold);
  }
  if (j.contains("eval")) {
    const auto& je = j.at("eval");
    c.eval.tsne.perplexity = je.value("perplexity", c.eval.tsne.perplexity);
    c.eval.tsne.iterations = je.value("iterations", c.eval.tsne.iterations);
    c.eval.tsne.exaggeration_iterations =
        je.value("exaggeration_iterations", c.eval.tsne.exaggeration_iterations);
    c.eval.tsne.exaggeration = je.value("exaggeration", c.eval.tsne.exaggeration);
    c.eval.tsne.learning_rate = je.value("learning_rate", c.eval.tsne.learning_rate);
    c.eval.feature_source =
        eval::feature_source_from_string(je.value("feature_source", "pooled_backbone"));
    c.eval.overlay_count = je.value("overlay_count", c.eval.overlay_count);
  }
  if (j.contains("teacher")) {
    const auto& jt = j.at("teacher");
    c.teacher.checkpoint = jt.value("checkpoint", c.teacher.checkpoint);
    if (jt.contains("pretext")) c.teacher.pretext = pretext_from_json(jt.at("pretext"), c.teacher.pretext);
  }
  return c;
}

}  // namespace

std::string RunConfig::hash() const {
  // The tsne seed follows the run seed at evaluation time; output_dir never
  // affects artifact content.
  return sha256_hex(run_config_to_json(*this, /*include_output_dir=*/false));
}

std::string run_config_to_json(const RunConfig& config, bool include_output_dir) {
  return config_to_json(config, include_output_dir).dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed run config JSON: ") + e.what());
  }
  RunConfig c = config_from_json(j);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return run_config_from_json(text);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write config: " + path.string());
  out << run_config_to_json(config, /*include_output_dir=*/true) << "\n";
}

}  // namespace shearo::cli
