#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "amrkit/nets.hpp"
#include "amrkit/rng.hpp"
#include "amrkit/tensor.hpp"

namespace amrkit {

enum class AttackMethod { Fgsm, Pgd, Cw };
enum class ModalityMask { DenseOnly, SparseOnly, Both };

std::string to_string(AttackMethod m);
std::string to_string(ModalityMask m);
AttackMethod parse_attack_method(const std::string& s);
ModalityMask parse_modality_mask(const std::string& s);

bool attacks_dense(ModalityMask m);
bool attacks_sparse(ModalityMask m);

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Bounds&) const = default;
};

// L-inf attack settings. Budgets and step size are in input units; configs
// express them as numerators over 255.
struct AttackConfig {
  AttackMethod method = AttackMethod::Pgd;
  double eps_r = 8.0 / 255.0;
  double eps_s = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int steps = 10;
  bool random_start = true;
  ModalityMask mask = ModalityMask::Both;
  std::optional<Bounds> clamp_r = Bounds{0.0, 1.0};
  std::optional<Bounds> clamp_s;

  // One-step attack with alpha = eps of the attacked modality.
  static AttackConfig fgsm(double eps_r, double eps_s, ModalityMask mask);
  static AttackConfig pgd(double eps_r, double eps_s, double alpha, int steps, bool random_start,
                          ModalityMask mask);
  // Margin objective maximized by PGD iterations.
  static AttackConfig cw(double eps_r, double eps_s, double alpha, int steps, bool random_start,
                         ModalityMask mask);

  AttackConfig with_mask(ModalityMask m) const {
    AttackConfig c = *this;
    c.mask = m;
    return c;
  }

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  std::string describe() const;

  bool operator==(const AttackConfig&) const = default;
};

struct AdversarialBatch {
  Tensor x_r;
  Tensor x_s;
  Tensor delta_r;  // x_r' - x_r
  Tensor delta_s;
  AttackConfig config;
};

// Scalar objective the attacker ascends: batch-mean cross-entropy for FGSM and
// PGD, batch-mean margin max_{i!=y} z_i - z_y for CW.
DiffTensor attack_loss(const DiffTensor& logits, std::span<const int> labels, AttackMethod method);
DiffTensor attack_loss(Tape& tape, const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                       std::span<const int> labels, AttackMethod method);

// Called after every iteration with the current adversarial inputs.
using AttackObserver = std::function<void(int step, const Tensor& x_r, const Tensor& x_s)>;

// x'_{t+1} = Proj_ball(x'_t + alpha * sign(grad)), then the valid-range clamp.
// Both modality gradients come from one forward/backward pass per step.
AdversarialBatch pgd_multimodal(const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                                std::span<const int> labels, const AttackConfig& cfg, Rng& rng,
                                const AttackObserver& observer = {});

// Same iteration as pgd_multimodal with one step, alpha = eps, no random start.
AdversarialBatch fgsm(const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                      std::span<const int> labels, const AttackConfig& cfg);

// Dispatches on cfg.method.
AdversarialBatch run_attack(const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                            std::span<const int> labels, const AttackConfig& cfg, Rng& rng);

}  // namespace amrkit
