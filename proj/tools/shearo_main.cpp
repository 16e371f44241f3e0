#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "shearo/cli/commands.hpp"
#include "shearo/core/parallel.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
};

shearo::cli::RunConfig resolve_config(const GlobalArgs& args) {
  shearo::cli::RunConfig config = args.config_path.empty()
                                      ? shearo::cli::default_config()
                                      : shearo::cli::load_run_config(args.config_path);
  if (args.seed) config.seed = *args.seed;
  if (args.output) config.output_dir = *args.output;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  shearo::init_threads();

  CLI::App app{"shearo: synthetic shearogram generation, unsupervised defect detectors, "
               "and a self-contained evaluation suite"};
  app.require_subcommand(1);

  GlobalArgs globals;
  app.add_option("--config", globals.config_path, "Run configuration JSON (defaults when omitted)");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed");
  std::string output_value;
  auto* output_opt = app.add_option("--output", output_value, "Override the output directory");

  auto* generate = app.add_subcommand("generate", "Render the synthetic dataset and manifest");
  auto* subset = app.add_subcommand("subset", "Assign train/val/test splits for the configured subset");
  auto* train = app.add_subcommand("train", "Train a detector (teacher is pretrained when needed)");
  std::string train_kind;
  train->add_option("--kind", train_kind, "ae | conv_ae | stfpm (default: config model.kind)");
  auto* evaluate = app.add_subcommand("evaluate", "Score val+test, write reports, curves and plots");
  std::string eval_kind;
  std::string predictions_file;
  evaluate->add_option("--kind", eval_kind, "ae | conv_ae | stfpm (default: config model.kind)");
  evaluate->add_option("--predictions", predictions_file,
                       "External predictions JSON: evaluate ingested boxes instead of a checkpoint");
  auto* embed = app.add_subcommand("embed", "t-SNE embedding of val+test features");
  auto* pipeline = app.add_subcommand("pipeline", "generate -> subset -> train x3 -> evaluate -> embed");
  auto* ingest = app.add_subcommand("ingest-predictions", "Validate and store an external predictions file");
  std::string ingest_file;
  ingest->add_option("--file", ingest_file, "Predictions JSON")->required();
  auto* show_defaults = app.add_subcommand("show-defaults", "Print the default configuration");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) globals.seed = seed_value;
  if (output_opt->count()) globals.output = output_value;

  try {
    if (show_defaults->parsed()) {
      std::cout << shearo::cli::run_config_to_json(shearo::cli::default_config(), true) << "\n";
      return 0;
    }
    const shearo::cli::RunConfig config = resolve_config(globals);
    if (generate->parsed()) {
      (void)shearo::cli::cmd_generate(config);
    } else if (subset->parsed()) {
      (void)shearo::cli::cmd_subset(config);
    } else if (train->parsed()) {
      const auto kind = train_kind.empty() ? config.model.kind
                                           : shearo::models::model_kind_from_string(train_kind);
      (void)shearo::cli::cmd_train(config, kind);
    } else if (evaluate->parsed()) {
      const auto kind = eval_kind.empty() ? config.model.kind
                                          : shearo::models::model_kind_from_string(eval_kind);
      std::optional<std::filesystem::path> predictions;
      if (!predictions_file.empty()) predictions = predictions_file;
      (void)shearo::cli::cmd_evaluate(config, kind, predictions);
    } else if (embed->parsed()) {
      (void)shearo::cli::cmd_embed(config);
    } else if (pipeline->parsed()) {
      (void)shearo::cli::cmd_pipeline(config);
    } else if (ingest->parsed()) {
      (void)shearo::cli::cmd_ingest_predictions(config, ingest_file);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
