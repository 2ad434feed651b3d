#include "amrkit/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace amrkit {

std::string to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::Fgsm: return "fgsm";
    case AttackMethod::Pgd: return "pgd";
    case AttackMethod::Cw: return "cw";
  }
  return "?";
}

std::string to_string(ModalityMask m) {
  switch (m) {
    case ModalityMask::DenseOnly: return "r";
    case ModalityMask::SparseOnly: return "s";
    case ModalityMask::Both: return "rs";
  }
  return "?";
}

AttackMethod parse_attack_method(const std::string& s) {
  if (s == "fgsm") return AttackMethod::Fgsm;
  if (s == "pgd") return AttackMethod::Pgd;
  if (s == "cw") return AttackMethod::Cw;
  throw std::invalid_argument("unknown attack method '" + s + "' (expected fgsm, pgd or cw)");
}

ModalityMask parse_modality_mask(const std::string& s) {
  if (s == "r") return ModalityMask::DenseOnly;
  if (s == "s") return ModalityMask::SparseOnly;
  if (s == "rs") return ModalityMask::Both;
  throw std::invalid_argument("unknown modality mask '" + s + "' (expected r, s or rs)");
}

bool attacks_dense(ModalityMask m) { return m != ModalityMask::SparseOnly; }
bool attacks_sparse(ModalityMask m) { return m != ModalityMask::DenseOnly; }

AttackConfig AttackConfig::fgsm(double eps_r, double eps_s, ModalityMask mask) {
  AttackConfig c;
  c.method = AttackMethod::Fgsm;
  c.eps_r = eps_r;
  c.eps_s = eps_s;
  c.steps = 1;
  c.random_start = false;
  c.mask = mask;
  c.alpha = std::max(attacks_dense(mask) ? eps_r : 0.0, attacks_sparse(mask) ? eps_s : 0.0);
  return c;
}

AttackConfig AttackConfig::pgd(double eps_r, double eps_s, double alpha, int steps,
                               bool random_start, ModalityMask mask) {
  AttackConfig c;
  c.method = AttackMethod::Pgd;
  c.eps_r = eps_r;
  c.eps_s = eps_s;
  c.alpha = alpha;
  c.steps = steps;
  c.random_start = random_start;
  c.mask = mask;
  return c;
}

AttackConfig AttackConfig::cw(double eps_r, double eps_s, double alpha, int steps,
                              bool random_start, ModalityMask mask) {
  AttackConfig c = pgd(eps_r, eps_s, alpha, steps, random_start, mask);
  c.method = AttackMethod::Cw;
  return c;
}

void AttackConfig::validate() const {
  if (!(eps_r >= 0.0) || !(eps_s >= 0.0)) {
    throw std::invalid_argument("attack: budgets must be non-negative");
  }
  if (steps < 1) throw std::invalid_argument("attack: step count must be >= 1");
  if (clamp_r && !(clamp_r->lo <= clamp_r->hi)) {
    throw std::invalid_argument("attack: dense clamp range is empty");
  }
  if (clamp_s && !(clamp_s->lo <= clamp_s->hi)) {
    throw std::invalid_argument("attack: sparse clamp range is empty");
  }
  if (method == AttackMethod::Fgsm) {
    const double want =
        std::max(attacks_dense(mask) ? eps_r : 0.0, attacks_sparse(mask) ? eps_s : 0.0);
    if (steps != 1 || random_start || alpha != want) {
      throw std::invalid_argument(
          "attack: fgsm requires one step, no random start and alpha equal to the budget");
    }
  } else if (!(alpha > 0.0)) {
    throw std::invalid_argument("attack: step size must be positive");
  }
}

std::string AttackConfig::describe() const {
  std::ostringstream os;
  os << to_string(method) << steps << " eps_r=" << eps_r * 255.0 << "/255 eps_s=" << eps_s * 255.0
     << "/255 alpha=" << alpha * 255.0 << "/255 mask=" << to_string(mask)
     << (random_start ? " random_start" : "");
  return os.str();
}

DiffTensor attack_loss(const DiffTensor& logits, std::span<const int> labels,
                       AttackMethod method) {
  return method == AttackMethod::Cw ? ops::class_margin(logits, labels)
                                    : ops::softmax_cross_entropy(logits, labels);
}

DiffTensor attack_loss(Tape& tape, const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                       std::span<const int> labels, AttackMethod method) {
  return attack_loss(model.logits(tape, tape.constant(x_r), tape.constant(x_s)), labels, method);
}

namespace {

double sign(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

struct Channel {
  bool active;
  double eps;
  double alpha;
  std::optional<Bounds> clamp;
};

void check_range(const char* what, const Tensor& x, const std::optional<Bounds>& clamp) {
  if (!clamp) return;
  for (double v : x.storage()) {
    if (v < clamp->lo || v > clamp->hi) {
      throw std::invalid_argument(std::string("attack: natural ") + what +
                                  " input lies outside its valid range");
    }
  }
}

void random_start(Tensor& x, const Channel& ch, Rng& rng) {
  for (auto& v : x.storage()) {
    v += rng.uniform(-ch.eps, ch.eps);
    if (ch.clamp) v = std::clamp(v, ch.clamp->lo, ch.clamp->hi);
  }
}

void step(Tensor& x, const Tensor& x0, const Tensor& grad, const Channel& ch) {
  auto& xv = x.storage();
  const auto& nat = x0.storage();
  const auto& g = grad.storage();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double v = xv[i] + ch.alpha * sign(g[i]);
    v = std::min(std::max(v, nat[i] - ch.eps), nat[i] + ch.eps);
    if (ch.clamp) v = std::min(std::max(v, ch.clamp->lo), ch.clamp->hi);
    xv[i] = v;
  }
}

Tensor difference(const Tensor& a, const Tensor& b) {
  Tensor d(a.shape());
  for (std::size_t i = 0; i < d.numel(); ++i) d[i] = a[i] - b[i];
  return d;
}

AdversarialBatch iterate(const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                         std::span<const int> labels, const AttackConfig& cfg, const Channel& cr,
                         const Channel& cs, int steps, bool rand_start, Rng* rng,
                         const AttackObserver& observer) {
  if (x_r.rank() == 0 || x_s.rank() == 0 || x_r.dim(0) != labels.size() ||
      x_s.dim(0) != labels.size()) {
    throw std::invalid_argument("attack: inputs " + shape_str(x_r.shape()) + ", " +
                                shape_str(x_s.shape()) + " do not match " +
                                std::to_string(labels.size()) + " labels");
  }
  if (cr.active) check_range("dense", x_r, cr.clamp);
  if (cs.active) check_range("sparse", x_s, cs.clamp);
  Tensor xr = x_r;
  Tensor xs = x_s;
  if (rand_start) {
    if (cr.active) random_start(xr, cr, *rng);
    if (cs.active) random_start(xs, cs, *rng);
  }
  for (int t = 0; t < steps; ++t) {
    Tape tape;
    DiffTensor lr = tape.leaf(xr, cr.active);
    DiffTensor ls = tape.leaf(xs, cs.active);
    DiffTensor loss = attack_loss(model.logits(tape, lr, ls), labels, cfg.method);
    tape.backward(loss);
    if (cr.active) step(xr, x_r, lr.grad(), cr);
    if (cs.active) step(xs, x_s, ls.grad(), cs);
    if (observer) observer(t + 1, xr, xs);
  }
  AdversarialBatch out{xr, xs, difference(xr, x_r), difference(xs, x_s), cfg};
  return out;
}

}  // namespace

AdversarialBatch pgd_multimodal(const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                                std::span<const int> labels, const AttackConfig& cfg, Rng& rng,
                                const AttackObserver& observer) {
  cfg.validate();
  const Channel cr{attacks_dense(cfg.mask), cfg.eps_r, cfg.alpha, cfg.clamp_r};
  const Channel cs{attacks_sparse(cfg.mask), cfg.eps_s, cfg.alpha, cfg.clamp_s};
  return iterate(model, x_r, x_s, labels, cfg, cr, cs, cfg.steps, cfg.random_start, &rng,
                 observer);
}

AdversarialBatch fgsm(const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                      std::span<const int> labels, const AttackConfig& cfg) {
  if (cfg.method != AttackMethod::Fgsm) {
    throw std::invalid_argument("fgsm: config method is " + to_string(cfg.method));
  }
  cfg.validate();
  const Channel cr{attacks_dense(cfg.mask), cfg.eps_r, cfg.eps_r, cfg.clamp_r};
  const Channel cs{attacks_sparse(cfg.mask), cfg.eps_s, cfg.eps_s, cfg.clamp_s};
  return iterate(model, x_r, x_s, labels, cfg, cr, cs, 1, false, nullptr, {});
}

AdversarialBatch run_attack(const Classifier& model, const Tensor& x_r, const Tensor& x_s,
                            std::span<const int> labels, const AttackConfig& cfg, Rng& rng) {
  if (cfg.method == AttackMethod::Fgsm) return fgsm(model, x_r, x_s, labels, cfg);
  return pgd_multimodal(model, x_r, x_s, labels, cfg, rng);
}

}  // namespace amrkit
