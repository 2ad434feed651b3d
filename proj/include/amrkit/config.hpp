#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amrkit/attacks.hpp"
#include "amrkit/datagen.hpp"
#include "amrkit/nets.hpp"
#include "amrkit/training.hpp"

namespace amrkit {

// Attack settings as written in config files: budgets and step size are
// numerators over 255.
struct AttackSpec {
  std::string name;
  AttackMethod method = AttackMethod::Pgd;
  double eps_r = 8.0;
  double eps_s = 8.0;
  double alpha = 2.0;
  int steps = 20;
  bool random_start = false;

  AttackConfig to_config(ModalityMask mask = ModalityMask::Both) const;
  bool operator==(const AttackSpec&) const = default;
};

// Desk-scale schedule: 60 epochs at lr 0.1 instead of the TrainConfig defaults.
TrainConfig default_train();

struct DataSection {
  std::string path;  // load a saved dataset instead of generating one
  SynthSpec synth;
  double train_fraction = 0.5;
  std::uint64_t split_seed = 0;
  bool operator==(const DataSection&) const = default;
};

struct ModelSection {
  std::vector<std::size_t> dense_channels{8, 8, 8};
  Shape dense_feature{4, 4};
  std::vector<std::size_t> sparse_channels{8, 8, 8};
  Shape sparse_feature{5};
  double dense_center = 0.5;
  double dense_scale = 4.0;
  std::size_t num_amr = 0;
  bool operator==(const ModelSection&) const = default;
};

struct TrainSection {
  TrainMode mode = TrainMode::Standard;
  ModalityMask mask = ModalityMask::Both;  // adversarial mode only
  TrainConfig config = default_train();
  AttackSpec attack{"train", AttackMethod::Pgd, 8.0, 8.0, 2.0, 10, true};
  bool operator==(const TrainSection&) const = default;
};

struct EvalSection {
  std::vector<std::string> attacks{"pgd20"};
  bool clean_plain = false;  // clean accuracy of AMR models through forward_plain
  std::size_t batch_size = 256;
  bool operator==(const EvalSection&) const = default;
};

struct CurveSection {
  std::string attack = "pgd20";
  ModalityMask mask = ModalityMask::Both;
  std::vector<double> eps{0, 2, 4, 6, 8, 10, 12, 14, 16};  // numerators over 255
  bool operator==(const CurveSection&) const = default;
};

struct ExperimentSection {
  std::size_t amr = 1;  // S of the AMR rows of defense-comparison and lambda-sweep
  std::vector<std::size_t> amr_counts{1, 2, 3};
  std::vector<double> lambdas{0.1, 0.5, 1.0, 2.0, 5.0};
  bool operator==(const ExperimentSection&) const = default;
};

// Everything a run depends on. [run] seed drives model initialization,
// shuffling and training-time attacks; the dataset has its own seeds.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out;
  DataSection data;
  ModelSection model;
  TrainSection train;
  EvalSection eval;
  std::vector<AttackSpec> attacks;  // named attacks referenced by [eval] and [curve]
  CurveSection curve;
  ExperimentSection experiment;

  bool operator==(const RunConfig&) const = default;

  const AttackSpec& attack(const std::string& name) const;
  ModelSpec model_spec(const Dataset& data, std::size_t num_amr) const;
  TrainConfig train_config() const;
  void validate() const;
};

// Flat key-value text with [sections]; '#' and ';' start comments. Unknown
// sections or keys and malformed values are errors naming the field.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Every key with its resolved value; parse_config(to_ini(c)) == c.
std::string to_ini(const RunConfig& config);

}  // namespace amrkit
