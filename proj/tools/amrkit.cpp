#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "amrkit/config.hpp"
#include "amrkit/harness.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  std::string checkpoint;
  std::string baseline;
  std::string recipe;
};

void common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "config file")->required();
  cmd->add_option("--seed", f.seed, "override [run] seed");
  cmd->add_option("--out", f.out, "override [run] out");
  cmd->add_flag("--force", f.force, "overwrite existing outputs");
}

void with_checkpoint(CLI::App* cmd, Flags& f) {
  cmd->add_option("--checkpoint", f.checkpoint, "checkpoint directory (default <out>/checkpoint)");
}

amrkit::RunConfig resolve(const Flags& f) {
  amrkit::RunConfig c = amrkit::load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out = f.out;
  c.validate();
  return c;
}

std::filesystem::path checkpoint_dir(const Flags& f, const amrkit::RunConfig& c) {
  if (!f.checkpoint.empty()) return f.checkpoint;
  return std::filesystem::path(c.out) / "checkpoint";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal adversarial training toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "train a model");
  common(train, f);
  auto* eval = app.add_subcommand("eval", "clean and robust accuracy reports");
  common(eval, f);
  with_checkpoint(eval, f);
  eval->add_option("--baseline-report", f.baseline, "reports.json of the undefended model, for RI");
  auto* curve = app.add_subcommand("curve", "accuracy over a range of budgets");
  common(curve, f);
  with_checkpoint(curve, f);
  auto* weights = app.add_subcommand("report-weights", "mean AMR weights");
  common(weights, f);
  with_checkpoint(weights, f);
  auto* experiment = app.add_subcommand("experiment", "train and evaluate a comparison table");
  common(experiment, f);
  experiment->add_option("recipe", f.recipe, "defense-comparison, amr-count-ablation or lambda-sweep")
      ->required();
  auto* gen = app.add_subcommand("generate-data", "write the synthetic dataset");
  common(gen, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const amrkit::RunConfig c = resolve(f);
    namespace h = amrkit::harness;
    if (train->parsed()) {
      h::cmd_train(c, f.force);
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> baseline;
      if (!f.baseline.empty()) baseline = f.baseline;
      h::cmd_eval(c, checkpoint_dir(f, c), baseline, f.force);
    } else if (curve->parsed()) {
      h::cmd_curve(c, checkpoint_dir(f, c), f.force);
    } else if (weights->parsed()) {
      h::cmd_report_weights(c, checkpoint_dir(f, c), f.force);
    } else if (experiment->parsed()) {
      h::cmd_experiment(c, f.recipe, f.force);
    } else if (gen->parsed()) {
      h::cmd_generate_data(c, f.force);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
