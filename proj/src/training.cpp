#include "amrkit/training.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "amrkit/io.hpp"

namespace amrkit {

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Standard: return "standard";
    case TrainMode::Adversarial: return "adversarial";
    case TrainMode::Amr: return "amr";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "standard") return TrainMode::Standard;
  if (s == "adversarial") return TrainMode::Adversarial;
  if (s == "amr") return TrainMode::Amr;
  throw std::invalid_argument("unknown training mode '" + s +
                              "' (expected standard, adversarial or amr)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (!(lr_min >= 0.0)) throw std::invalid_argument("train: lr_min must be >= 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("train: lambda must be >= 0");
  if (!(momentum >= 0.0) || !(weight_decay >= 0.0)) {
    throw std::invalid_argument("train: momentum and weight_decay must be >= 0");
  }
  attack.validate();
}

double cosine_lr(int t, const TrainConfig& cfg) {
  if (t < 0 || t > cfg.epochs) throw std::invalid_argument("cosine_lr: epoch out of range");
  if (cfg.epochs == 0) return cfg.lr0;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(cfg.epochs);
  return cfg.lr_min + 0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + std::cos(phase));
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
              SgdState& state, double lr, double momentum, double weight_decay,
              const std::vector<bool>& frozen) {
  if (params.size() != grads.size() || (!frozen.empty() && frozen.size() != params.size())) {
    throw std::invalid_argument("sgd_step: parameter, gradient and mask counts differ");
  }
  if (state.velocity.empty()) {
    for (const Tensor* p : params) state.velocity.emplace_back(p->shape());
  }
  if (state.velocity.size() != params.size()) {
    throw std::invalid_argument("sgd_step: optimizer state belongs to another model");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!frozen.empty() && frozen[k]) continue;
    Tensor& p = *params[k];
    Tensor& v = state.velocity[k];
    const Tensor& g = grads[k];
    if (g.shape() != p.shape() || v.shape() != p.shape()) {
      throw std::invalid_argument("sgd_step: shape mismatch at parameter " + std::to_string(k));
    }
    for (std::size_t i = 0; i < p.numel(); ++i) {
      v[i] = momentum * v[i] + (g[i] + weight_decay * p[i]);
      p[i] -= lr * v[i];
    }
  }
}

namespace {

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const auto pred = argmax_rows(logits);
  std::size_t n = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) n += pred[i] == labels[i];
  return n;
}

}  // namespace

StepResult standard_step(const FusionModel& model, const Batch& batch) {
  Tape tape;
  BoundModel bm = model.bind(tape, true);
  DiffTensor logits = forward_plain(bm, tape.constant(batch.x_r), tape.constant(batch.x_s));
  DiffTensor loss = ops::softmax_cross_entropy(logits, batch.labels);
  tape.backward(loss);
  StepResult r;
  r.losses.total = r.losses.natural = loss.item();
  r.losses.correct = count_correct(logits.value(), batch.labels);
  r.grads = bm.grads();
  return r;
}

StepResult adversarial_step(const FusionModel& model, const Batch& batch,
                            const AdversarialBatch& adv) {
  Tape tape;
  BoundModel bm = model.bind(tape, true);
  DiffTensor logits = forward_plain(bm, tape.constant(adv.x_r), tape.constant(adv.x_s));
  DiffTensor loss = ops::softmax_cross_entropy(logits, batch.labels);
  tape.backward(loss);
  StepResult r;
  r.losses.total = r.losses.adversarial = loss.item();
  r.losses.correct = count_correct(logits.value(), batch.labels);
  r.grads = bm.grads();
  return r;
}

StepResult amr_step(const FusionModel& model, const Batch& batch, const AdversarialBatch& adv,
                    double lambda) {
  const std::size_t s = model.num_amr();
  if (s == 0) throw std::invalid_argument("amr_step: model has no AMR");
  Tape tape;
  BoundModel bm = model.bind(tape, true);
  DiffTensor nat = forward_plain(bm, tape.constant(batch.x_r), tape.constant(batch.x_s));
  ReweightedOutput out = forward_reweighted(bm, tape.constant(adv.x_r), tape.constant(adv.x_s));

  DiffTensor l_nat = ops::softmax_cross_entropy(nat, batch.labels);
  DiffTensor l_adv = ops::softmax_cross_entropy(out.logits, batch.labels);
  std::vector<DiffTensor> l_aux;
  for (const auto& z : out.aux_logits) l_aux.push_back(ops::softmax_cross_entropy(z, batch.labels));
  DiffTensor aux_sum = l_aux[0];
  for (std::size_t i = 1; i < s; ++i) aux_sum = ops::add(aux_sum, l_aux[i]);
  DiffTensor l_amr = ops::add(l_adv, ops::scalar_mul(aux_sum, 1.0 / static_cast<double>(s)));
  DiffTensor total = ops::add(l_nat, ops::scalar_mul(l_amr, lambda));
  tape.backward(total);

  StepResult r;
  r.losses.total = total.item();
  r.losses.natural = l_nat.item();
  r.losses.adversarial = l_adv.item();
  r.losses.amr = l_amr.item();
  for (const auto& l : l_aux) r.losses.aux.push_back(l.item());
  r.losses.correct = count_correct(nat.value(), batch.labels);
  r.grads = bm.grads();
  return r;
}

namespace {

void accumulate(StepLosses& acc, const StepLosses& x) {
  acc.total += x.total;
  acc.natural += x.natural;
  acc.adversarial += x.adversarial;
  acc.amr += x.amr;
  if (acc.aux.size() < x.aux.size()) acc.aux.resize(x.aux.size(), 0.0);
  for (std::size_t i = 0; i < x.aux.size(); ++i) acc.aux[i] += x.aux[i];
  acc.correct += x.correct;
}

std::vector<EpochLog> run(FusionModel& model, const Dataset& data, const TrainConfig& cfg,
                          TrainMode mode, ModalityMask mask, const StepObserver& observer) {
  cfg.validate();
  if (mode == TrainMode::Amr && model.num_amr() == 0) {
    throw std::invalid_argument("train: mode amr requires at least one AMR (S >= 1)");
  }
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (data.num_classes != model.num_classes()) {
    throw std::invalid_argument("train: dataset has " + std::to_string(data.num_classes) +
                                " classes, model " + std::to_string(model.num_classes()));
  }
  const std::size_t batches = data.size() / cfg.batch_size;
  if (cfg.epochs > 0 && batches == 0) {
    throw std::invalid_argument("train: batch_size exceeds the dataset size");
  }

  std::vector<bool> frozen;
  if (mode != TrainMode::Amr) frozen = model.amr_parameter_mask();
  const AttackConfig attack = cfg.attack.with_mask(mode == TrainMode::Amr ? ModalityMask::Both : mask);
  const ForwardMode target = mode == TrainMode::Amr ? ForwardMode::Reweighted : ForwardMode::Plain;

  Rng shuffle(derive_seed(cfg.seed, "shuffle"));
  Rng attack_rng(derive_seed(cfg.seed, "attack"));
  SgdState state;
  std::vector<EpochLog> log;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg);
    const auto order = shuffle.permutation(data.size());
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.lr = lr;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size, cfg.batch_size);
      const Batch batch = make_batch(data, idx);
      StepResult step;
      AdversarialBatch adv;
      const bool adversarial = mode != TrainMode::Standard;
      if (adversarial) {
        const FusionClassifier clf(model, target);
        adv = pgd_multimodal(clf, batch.x_r, batch.x_s, batch.labels, attack, attack_rng);
      }
      switch (mode) {
        case TrainMode::Standard: step = standard_step(model, batch); break;
        case TrainMode::Adversarial: step = adversarial_step(model, batch, adv); break;
        case TrainMode::Amr: step = amr_step(model, batch, adv, cfg.lambda); break;
      }
      if (observer) {
        observer(StepRecord{epoch, b, &batch, adversarial ? &adv : nullptr, &step}, model);
      }
      sgd_step(model.parameters(), step.grads, state, lr, cfg.momentum, cfg.weight_decay, frozen);
      accumulate(entry.mean, step.losses);
    }
    const double n = static_cast<double>(batches);
    entry.train_accuracy =
        100.0 * static_cast<double>(entry.mean.correct) / (n * static_cast<double>(cfg.batch_size));
    entry.mean.total /= n;
    entry.mean.natural /= n;
    entry.mean.adversarial /= n;
    entry.mean.amr /= n;
    for (auto& a : entry.mean.aux) a /= n;
    log.push_back(std::move(entry));
  }
  return log;
}

}  // namespace

std::vector<EpochLog> train_standard(FusionModel& model, const Dataset& data,
                                     const TrainConfig& cfg, const StepObserver& observer) {
  return run(model, data, cfg, TrainMode::Standard, ModalityMask::Both, observer);
}

std::vector<EpochLog> train_adversarial(FusionModel& model, const Dataset& data,
                                        const TrainConfig& cfg, ModalityMask mask,
                                        const StepObserver& observer) {
  return run(model, data, cfg, TrainMode::Adversarial, mask, observer);
}

std::vector<EpochLog> train_amr(FusionModel& model, const Dataset& data, const TrainConfig& cfg,
                                const StepObserver& observer) {
  return run(model, data, cfg, TrainMode::Amr, ModalityMask::Both, observer);
}

std::vector<EpochLog> train(FusionModel& model, const Dataset& data, const TrainConfig& cfg,
                            TrainMode mode, ModalityMask mask, const StepObserver& observer) {
  return run(model, data, cfg, mode, mask, observer);
}

std::string epoch_log_csv(const std::vector<EpochLog>& log, std::size_t num_amr) {
  std::ostringstream os;
  os << "epoch,lr,L_total,l_nat,l_adv";
  for (std::size_t i = 0; i < num_amr; ++i) os << ",l_aux" << i + 1;
  os << ",train_acc\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << io::exact(e.lr) << ',' << io::exact(e.mean.total) << ','
       << io::exact(e.mean.natural) << ',' << io::exact(e.mean.adversarial);
    for (std::size_t i = 0; i < num_amr; ++i) {
      os << ',' << io::exact(i < e.mean.aux.size() ? e.mean.aux[i] : 0.0);
    }
    os << ',' << io::fixed2(e.train_accuracy) << '\n';
  }
  return os.str();
}

}  // namespace amrkit
