#include "amrkit/harness.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "amrkit/io.hpp"
#include "amrkit/rng.hpp"

namespace amrkit::harness {

namespace fs = std::filesystem;
using nlohmann::json;

DataSplit load_data(const RunConfig& config) {
  Dataset all = config.data.path.empty() ? generate(config.data.synth)
                                         : load_dataset(config.data.path);
  auto [train, test] = split(all, config.data.train_fraction, config.data.split_seed);
  return {std::move(train), std::move(test)};
}

FusionModel train_model(const RunConfig& config, const Dataset& train_data, TrainMode mode,
                        ModalityMask mask, std::size_t num_amr, double lambda,
                        std::vector<EpochLog>* log) {
  if (mode == TrainMode::Amr && num_amr == 0) {
    throw std::invalid_argument("train: mode amr requires model.num_amr >= 1");
  }
  FusionModel model(config.model_spec(train_data, num_amr));
  TrainConfig tc = config.train_config();
  tc.lambda = lambda;
  auto entries = train(model, train_data, tc, mode, mask);
  if (log) *log = std::move(entries);
  return model;
}

EvalReport evaluate_model(const RunConfig& config, const FusionModel& model, const Dataset& test,
                          const AttackSpec& attack, const std::string& model_name) {
  const ForwardMode robust = model.num_amr() > 0 ? ForwardMode::Reweighted : ForwardMode::Plain;
  const ForwardMode clean = config.eval.clean_plain ? ForwardMode::Plain : robust;
  const FusionClassifier robust_view(model, robust);
  const FusionClassifier clean_view(model, clean);
  EvalOptions opts;
  opts.batch_size = config.eval.batch_size;
  opts.attack_seed = derive_seed(config.seed, "eval");
  return evaluate(robust_view, clean_view, test, attack.to_config(), model_name, opts);
}

std::vector<ExperimentRow> recipe_rows(const RunConfig& config, const std::string& recipe) {
  const double lambda = config.train.config.lambda;
  const ExperimentRow none{"None", TrainMode::Standard, ModalityMask::Both, 0, lambda};
  std::vector<ExperimentRow> rows{none};
  if (recipe == "defense-comparison") {
    rows.push_back({"AT-xR", TrainMode::Adversarial, ModalityMask::DenseOnly, 0, lambda});
    rows.push_back({"AT-xS", TrainMode::Adversarial, ModalityMask::SparseOnly, 0, lambda});
    rows.push_back({"AT-xRS", TrainMode::Adversarial, ModalityMask::Both, 0, lambda});
    rows.push_back({"AMR", TrainMode::Amr, ModalityMask::Both, config.experiment.amr, lambda});
  } else if (recipe == "amr-count-ablation") {
    rows.push_back({"AMR-0", TrainMode::Adversarial, ModalityMask::Both, 0, lambda});
    for (std::size_t s : config.experiment.amr_counts) {
      rows.push_back({"AMR-" + std::to_string(s), TrainMode::Amr, ModalityMask::Both, s, lambda});
    }
  } else if (recipe == "lambda-sweep") {
    for (double l : config.experiment.lambdas) {
      std::ostringstream name;
      name << "AMR-lambda-" << l;
      rows.push_back({name.str(), TrainMode::Amr, ModalityMask::Both, config.experiment.amr, l});
    }
  } else {
    throw std::invalid_argument("experiment: unknown recipe '" + recipe +
                                "' (expected defense-comparison, amr-count-ablation or lambda-sweep)");
  }
  for (const auto& r : rows) {
    if (r.mode == TrainMode::Amr && r.num_amr == 0) {
      throw std::invalid_argument("experiment: AMR rows need at least one AMR");
    }
  }
  return rows;
}

std::vector<EvalReport> run_experiment(const RunConfig& config, const std::string& recipe) {
  const auto rows = recipe_rows(config, recipe);
  const AttackSpec& attack = config.attack(config.eval.attacks.at(0));
  const DataSplit data = load_data(config);
  std::vector<EvalReport> out;
  for (const auto& row : rows) {
    const FusionModel model =
        train_model(config, data.train, row.mode, row.mask, row.num_amr, row.lambda);
    out.push_back(evaluate_model(config, model, data.test, attack, row.name));
  }
  const EvalReport baseline = out.front();
  for (auto& r : out) set_ri(r, baseline);
  return out;
}

void prepare_output(const fs::path& dir, const std::vector<std::string>& outputs, bool force) {
  if (dir.empty()) throw std::invalid_argument("no output directory (set [run] out or --out)");
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw std::invalid_argument("output path " + dir.string() + " is not a directory");
  }
  for (const auto& name : outputs) {
    if (fs::exists(dir / name) && !force) {
      throw std::invalid_argument("refusing to overwrite " + (dir / name).string() +
                                  " (pass --force)");
    }
  }
  fs::create_directories(dir);
}

namespace {

void write_config(const RunConfig& config, const std::string& name) {
  io::write_file(fs::path(config.out) / name, to_ini(config));
}

FusionModel load_model(const fs::path& checkpoint) {
  if (!fs::exists(checkpoint / "model.json")) {
    throw std::invalid_argument("no checkpoint at " + checkpoint.string());
  }
  return load_checkpoint(checkpoint);
}

std::vector<EvalReport> load_baseline(const fs::path& path) {
  if (!fs::exists(path)) {
    throw std::invalid_argument("baseline report not found: " + path.string());
  }
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument("baseline report " + path.string() + ": " + e.what());
  }
  std::vector<EvalReport> out;
  if (j.is_array()) {
    for (const auto& r : j) out.push_back(report_from_json(r));
  } else {
    out.push_back(report_from_json(j));
  }
  if (out.empty()) throw std::invalid_argument("baseline report " + path.string() + " is empty");
  return out;
}

}  // namespace

void cmd_train(const RunConfig& config, bool force) {
  const fs::path out(config.out);
  prepare_output(out, {"config.ini", "train_log.csv", "checkpoint"}, force);
  const DataSplit data = load_data(config);
  std::vector<EpochLog> log;
  const FusionModel model = train_model(config, data.train, config.train.mode, config.train.mask,
                                        config.model.num_amr, config.train.config.lambda, &log);
  write_config(config, "config.ini");
  io::write_file(out / "train_log.csv", epoch_log_csv(log, model.num_amr()));
  save_checkpoint(model, out / "checkpoint");
}

void cmd_eval(const RunConfig& config, const fs::path& checkpoint,
              const std::optional<fs::path>& baseline_report, bool force) {
  const fs::path out(config.out);
  std::vector<EvalReport> baseline;
  if (baseline_report) baseline = load_baseline(*baseline_report);
  const FusionModel model = load_model(checkpoint);
  prepare_output(out, {"eval_config.ini", "reports.json", "reports.csv"}, force);
  const DataSplit data = load_data(config);
  json reports = json::array();
  std::string csv = report_csv_header();
  for (const auto& name : config.eval.attacks) {
    EvalReport r = evaluate_model(config, model, data.test, config.attack(name), checkpoint.string());
    if (baseline_report) {
      const EvalReport* match = nullptr;
      for (const auto& b : baseline) {
        if (b.attack == r.attack) match = &b;
      }
      if (!match && baseline.size() == 1) match = &baseline[0];
      if (!match) {
        throw std::invalid_argument("baseline report has no entry for attack " +
                                    r.attack.describe());
      }
      set_ri(r, *match);
    }
    reports.push_back(report_to_json(r));
    csv += report_csv_row(r);
  }
  write_config(config, "eval_config.ini");
  io::write_file(out / "reports.json", reports.dump(2) + "\n");
  io::write_file(out / "reports.csv", csv);
}

void cmd_curve(const RunConfig& config, const fs::path& checkpoint, bool force) {
  const fs::path out(config.out);
  if (config.curve.eps.empty()) throw std::invalid_argument("curve: empty eps range");
  const FusionModel model = load_model(checkpoint);
  prepare_output(out, {"curve_config.ini", "curve.csv"}, force);
  const DataSplit data = load_data(config);
  const AttackConfig base = config.attack(config.curve.attack).to_config(config.curve.mask);
  std::vector<double> eps;
  for (double e : config.curve.eps) eps.push_back(e / 255.0);
  const FusionClassifier view(
      model, model.num_amr() > 0 ? ForwardMode::Reweighted : ForwardMode::Plain);
  EvalOptions opts;
  opts.batch_size = config.eval.batch_size;
  opts.attack_seed = derive_seed(config.seed, "eval");
  const auto curve = robustness_curve(view, data.test, base.method, config.curve.mask, eps, base, opts);
  write_config(config, "curve_config.ini");
  io::write_file(out / "curve.csv", curve_csv(curve));
}

std::string weights_csv(const FusionModel& model) {
  std::ostringstream os;
  os << "amr,block,mean_W_R,mean_W_s\n";
  for (std::size_t i = 0; i < model.num_amr(); ++i) {
    const MeanWeights m = mean_weights(model.amr(i));
    os << i + 1 << ',' << model.amr_block(i) + 1 << ',' << io::exact(m.dense) << ','
       << io::exact(m.sparse) << '\n';
  }
  return os.str();
}

std::string channels_csv(const FusionModel& model) {
  std::ostringstream os;
  os << "amr,modality,channel,mean_weight\n";
  for (std::size_t i = 0; i < model.num_amr(); ++i) {
    const auto dense = channel_means(model.amr(i).w_r);
    const auto sparse = channel_means(model.amr(i).w_s);
    for (std::size_t c = 0; c < dense.size(); ++c) {
      os << i + 1 << ",R," << c << ',' << io::exact(dense[c]) << '\n';
    }
    for (std::size_t c = 0; c < sparse.size(); ++c) {
      os << i + 1 << ",s," << c << ',' << io::exact(sparse[c]) << '\n';
    }
  }
  return os.str();
}

void cmd_report_weights(const RunConfig& config, const fs::path& checkpoint, bool force) {
  const fs::path out(config.out);
  const FusionModel model = load_model(checkpoint);
  if (model.num_amr() == 0) {
    throw std::invalid_argument("report-weights: checkpoint has no AMR (S = 0)");
  }
  prepare_output(out, {"weights_config.ini", "amr_weights.csv", "amr_channels.csv"}, force);
  write_config(config, "weights_config.ini");
  io::write_file(out / "amr_weights.csv", weights_csv(model));
  io::write_file(out / "amr_channels.csv", channels_csv(model));
}

void cmd_experiment(const RunConfig& config, const std::string& recipe, bool force) {
  const fs::path out(config.out);
  recipe_rows(config, recipe);
  prepare_output(out, {"experiment_config.ini", recipe + ".csv", recipe + ".json"}, force);
  const auto reports = run_experiment(config, recipe);
  json j = json::array();
  std::string csv = report_csv_header();
  for (const auto& r : reports) {
    j.push_back(report_to_json(r));
    csv += report_csv_row(r);
  }
  write_config(config, "experiment_config.ini");
  io::write_file(out / (recipe + ".csv"), csv);
  io::write_file(out / (recipe + ".json"), j.dump(2) + "\n");
}

void cmd_generate_data(const RunConfig& config, bool force) {
  const fs::path out(config.out);
  prepare_output(out, {"data_config.ini", "dataset"}, force);
  const Dataset data = generate(config.data.synth);
  write_config(config, "data_config.ini");
  save_dataset(data, &config.data.synth, out / "dataset");
}

}  // namespace amrkit::harness
