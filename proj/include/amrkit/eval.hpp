#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amrkit/attacks.hpp"
#include "amrkit/datagen.hpp"
#include "amrkit/nets.hpp"

namespace amrkit {

struct EvalOptions {
  std::size_t batch_size = 256;
  // Stream for random starts; batches draw from it in dataset order.
  std::uint64_t attack_seed = 0;
};

// Percent of samples whose argmax logit (lowest index on ties) equals the
// label. With an attack, each batch is perturbed first per the attack's mask.
double accuracy(const Classifier& model, const Dataset& data,
                const std::optional<AttackConfig>& attack = std::nullopt,
                const EvalOptions& options = {});

double avg_metric(double acc_r, double acc_s, double acc_rs);
double ri_metric(double clean_m, double avg_m, double clean_n, double avg_n);

struct EvalReport {
  double acc_clean = 0.0;  // percent
  double acc_r = 0.0;
  double acc_s = 0.0;
  double acc_rs = 0.0;
  double avg = 0.0;
  std::optional<double> ri;
  AttackConfig attack;
  std::string model;

  bool operator==(const EvalReport&) const = default;
};

// Clean accuracy through `clean_model`, robust accuracies through `model`
// under the attack with each of the three masks.
EvalReport evaluate(const Classifier& model, const Classifier& clean_model, const Dataset& data,
                    const AttackConfig& attack, const std::string& model_name,
                    const EvalOptions& options = {});
EvalReport evaluate(const Classifier& model, const Dataset& data, const AttackConfig& attack,
                    const std::string& model_name, const EvalOptions& options = {});

// Fills report.ri against a baseline report.
void set_ri(EvalReport& report, const EvalReport& baseline);

nlohmann::json attack_to_json(const AttackConfig& cfg);
AttackConfig attack_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// model,attack,clean,xR,xS,xRS,Avg,RI with two-decimal accuracies; RI is
// empty when not computed.
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

struct CurvePoint {
  double eps = 0.0;
  double accuracy = 0.0;
};

// One accuracy per budget (applied to both modalities), method and mask fixed;
// the remaining attack settings come from `base`. FGSM uses alpha = eps.
std::vector<CurvePoint> robustness_curve(const Classifier& model, const Dataset& data,
                                         AttackMethod method, ModalityMask mask,
                                         const std::vector<double>& eps_list,
                                         const AttackConfig& base, const EvalOptions& options = {});

// eps_numerator_over_255,accuracy_percent
std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace amrkit
