#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "amrkit/attacks.hpp"
#include "amrkit/datagen.hpp"
#include "amrkit/nets.hpp"
#include "amrkit/rng.hpp"
#include "amrkit/tensor.hpp"

namespace amrkit {

enum class TrainMode { Standard, Adversarial, Amr };

std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 16;
  double lr0 = 0.01;
  double lr_min = 0.0;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lambda = 1.0;
  // Inner maximization; the mask is overridden by the training mode.
  AttackConfig attack = AttackConfig::pgd(8.0 / 255.0, 8.0 / 255.0, 2.0 / 255.0, 10, true,
                                          ModalityMask::Both);
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// lr_min + (lr0 - lr_min) * (1 + cos(pi * t / T_max)) / 2 with T_max = epochs.
double cosine_lr(int t, const TrainConfig& cfg);

struct SgdState {
  std::vector<Tensor> velocity;  // lazily sized on the first step
};

// v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v.
// Entries with frozen[i] set are left untouched.
void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
              SgdState& state, double lr, double momentum, double weight_decay,
              const std::vector<bool>& frozen = {});

// Loss terms of one optimization step. Terms a mode does not use stay 0.
struct StepLosses {
  double total = 0.0;
  double natural = 0.0;      // l(y_hat, y)
  double adversarial = 0.0;  // l(y', y), or the AT loss on adversarial inputs
  std::vector<double> aux;   // l(y*_i, y) per AMR
  double amr = 0.0;          // l(y', y) + mean_i l(y*_i, y)
  std::size_t correct = 0;   // predictions of the main logits that match y
};

struct StepResult {
  StepLosses losses;
  std::vector<Tensor> grads;  // FusionModel::parameters() order
};

// Mean cross-entropy of forward_plain on natural inputs.
StepResult standard_step(const FusionModel& model, const Batch& batch);
// Mean cross-entropy of forward_plain on the given adversarial inputs.
StepResult adversarial_step(const FusionModel& model, const Batch& batch,
                            const AdversarialBatch& adv);
// L_total = l(y_hat, y) + lambda * (l(y', y) + (1/S) sum_i l(y*_i, y)), with y_hat
// from forward_plain on natural inputs and (y', y*) from forward_reweighted on
// adversarial inputs.
StepResult amr_step(const FusionModel& model, const Batch& batch, const AdversarialBatch& adv,
                    double lambda);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  StepLosses mean;  // per-batch mean of every term
  double train_accuracy = 0.0;  // percent, over the main logits of each step
};

struct StepRecord {
  int epoch = 0;
  std::size_t batch_index = 0;
  const Batch* batch = nullptr;
  const AdversarialBatch* adversarial = nullptr;  // null for standard training
  const StepResult* result = nullptr;
};

// Called after the gradients of a step are computed and before the update.
using StepObserver = std::function<void(const StepRecord&, const FusionModel&)>;

// Epochs shuffle with derive_seed(seed, "shuffle"), attacks draw from
// derive_seed(seed, "attack"), and the last incomplete batch is dropped. The
// plain-path loops leave AMR parameters untouched.
std::vector<EpochLog> train_standard(FusionModel& model, const Dataset& data,
                                     const TrainConfig& cfg, const StepObserver& observer = {});
std::vector<EpochLog> train_adversarial(FusionModel& model, const Dataset& data,
                                        const TrainConfig& cfg, ModalityMask mask,
                                        const StepObserver& observer = {});
// Requires S >= 1. The inner attack targets the reweighted path with mask RS.
std::vector<EpochLog> train_amr(FusionModel& model, const Dataset& data, const TrainConfig& cfg,
                                const StepObserver& observer = {});

std::vector<EpochLog> train(FusionModel& model, const Dataset& data, const TrainConfig& cfg,
                            TrainMode mode, ModalityMask mask = ModalityMask::Both,
                            const StepObserver& observer = {});

// epoch,lr,L_total,l_nat,l_adv,l_aux1..l_auxS,train_acc
std::string epoch_log_csv(const std::vector<EpochLog>& log, std::size_t num_amr);

}  // namespace amrkit
