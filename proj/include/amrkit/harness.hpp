#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amrkit/config.hpp"
#include "amrkit/eval.hpp"

namespace amrkit::harness {

struct DataSplit {
  Dataset train;
  Dataset test;
};

// [data] path when set, otherwise the synthetic spec; then the stratified split.
DataSplit load_data(const RunConfig& config);

// Trains a fresh model (seeded by config.seed) with `num_amr` modules.
FusionModel train_model(const RunConfig& config, const Dataset& train, TrainMode mode,
                        ModalityMask mask, std::size_t num_amr, double lambda,
                        std::vector<EpochLog>* log = nullptr);

// Robust accuracies go through the reweighted path when the model has AMRs;
// clean accuracy too unless [eval] clean_plain is set.
EvalReport evaluate_model(const RunConfig& config, const FusionModel& model, const Dataset& test,
                          const AttackSpec& attack, const std::string& model_name);

struct ExperimentRow {
  std::string name;
  TrainMode mode = TrainMode::Standard;
  ModalityMask mask = ModalityMask::Both;
  std::size_t num_amr = 0;
  double lambda = 1.0;
};

// defense-comparison, amr-count-ablation or lambda-sweep. The first row is
// always the undefended baseline.
std::vector<ExperimentRow> recipe_rows(const RunConfig& config, const std::string& recipe);

// Trains and evaluates every row under config.seed with the first [eval]
// attack; RI is filled against the first row.
std::vector<EvalReport> run_experiment(const RunConfig& config, const std::string& recipe);

// Creates `dir`; refuses when any of `outputs` already exists inside it,
// unless `force`.
void prepare_output(const std::filesystem::path& dir, const std::vector<std::string>& outputs,
                    bool force);

// Each command writes into config.out next to an echo of the resolved config.
//   train           config.ini, train_log.csv, checkpoint/
//   eval            eval_config.ini, reports.json, reports.csv
//   curve           curve_config.ini, curve.csv
//   report-weights  weights_config.ini, amr_weights.csv, amr_channels.csv
//   experiment      experiment_config.ini, <recipe>.csv, <recipe>.json
//   generate-data   data_config.ini, dataset/
void cmd_train(const RunConfig& config, bool force);
void cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
              const std::optional<std::filesystem::path>& baseline_report, bool force);
void cmd_curve(const RunConfig& config, const std::filesystem::path& checkpoint, bool force);
void cmd_report_weights(const RunConfig& config, const std::filesystem::path& checkpoint,
                        bool force);
void cmd_experiment(const RunConfig& config, const std::string& recipe, bool force);
void cmd_generate_data(const RunConfig& config, bool force);

std::string weights_csv(const FusionModel& model);
std::string channels_csv(const FusionModel& model);

}  // namespace amrkit::harness
