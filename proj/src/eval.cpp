#include "amrkit/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "amrkit/io.hpp"
#include "amrkit/rng.hpp"

namespace amrkit {

using nlohmann::json;

double accuracy(const Classifier& model, const Dataset& data,
                const std::optional<AttackConfig>& attack, const EvalOptions& options) {
  if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
  if (options.batch_size == 0) throw std::invalid_argument("accuracy: batch_size must be >= 1");
  Rng rng(options.attack_seed);
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += options.batch_size) {
    const std::size_t n = std::min(options.batch_size, data.size() - start);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
    Batch batch = make_batch(data, idx);
    if (attack) {
      AdversarialBatch adv = run_attack(model, batch.x_r, batch.x_s, batch.labels, *attack, rng);
      batch.x_r = std::move(adv.x_r);
      batch.x_s = std::move(adv.x_s);
    }
    Tape tape(false);
    const DiffTensor logits =
        model.logits(tape, tape.constant(std::move(batch.x_r)), tape.constant(std::move(batch.x_s)));
    const auto pred = argmax_rows(logits.value());
    for (std::size_t i = 0; i < n; ++i) correct += pred[i] == batch.labels[i];
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

double avg_metric(double acc_r, double acc_s, double acc_rs) {
  return (acc_r + acc_s + acc_rs) / 3.0;
}

double ri_metric(double clean_m, double avg_m, double clean_n, double avg_n) {
  return (clean_m + avg_m) - (clean_n + avg_n);
}

EvalReport evaluate(const Classifier& model, const Classifier& clean_model, const Dataset& data,
                    const AttackConfig& attack, const std::string& model_name,
                    const EvalOptions& options) {
  attack.validate();
  EvalReport r;
  r.attack = attack;
  r.model = model_name;
  r.acc_clean = accuracy(clean_model, data, std::nullopt, options);
  r.acc_r = accuracy(model, data, attack.with_mask(ModalityMask::DenseOnly), options);
  r.acc_s = accuracy(model, data, attack.with_mask(ModalityMask::SparseOnly), options);
  r.acc_rs = accuracy(model, data, attack.with_mask(ModalityMask::Both), options);
  r.avg = avg_metric(r.acc_r, r.acc_s, r.acc_rs);
  return r;
}

EvalReport evaluate(const Classifier& model, const Dataset& data, const AttackConfig& attack,
                    const std::string& model_name, const EvalOptions& options) {
  return evaluate(model, model, data, attack, model_name, options);
}

void set_ri(EvalReport& report, const EvalReport& baseline) {
  report.ri = ri_metric(report.acc_clean, report.avg, baseline.acc_clean, baseline.avg);
}

namespace {

json bounds_to_json(const std::optional<Bounds>& b) {
  if (!b) return nullptr;
  return {{"lo", b->lo}, {"hi", b->hi}};
}

std::optional<Bounds> bounds_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return Bounds{j.at("lo").get<double>(), j.at("hi").get<double>()};
}

}  // namespace

json attack_to_json(const AttackConfig& cfg) {
  return {{"method", to_string(cfg.method)},
          {"eps_r", cfg.eps_r},
          {"eps_s", cfg.eps_s},
          {"alpha", cfg.alpha},
          {"steps", cfg.steps},
          {"random_start", cfg.random_start},
          {"mask", to_string(cfg.mask)},
          {"clamp_r", bounds_to_json(cfg.clamp_r)},
          {"clamp_s", bounds_to_json(cfg.clamp_s)}};
}

AttackConfig attack_from_json(const json& j) {
  AttackConfig c;
  c.method = parse_attack_method(j.at("method").get<std::string>());
  c.eps_r = j.at("eps_r").get<double>();
  c.eps_s = j.at("eps_s").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.steps = j.at("steps").get<int>();
  c.random_start = j.at("random_start").get<bool>();
  c.mask = parse_modality_mask(j.at("mask").get<std::string>());
  c.clamp_r = bounds_from_json(j.at("clamp_r"));
  c.clamp_s = bounds_from_json(j.at("clamp_s"));
  return c;
}

json report_to_json(const EvalReport& r) {
  json j = {{"model", r.model},
            {"attack", attack_to_json(r.attack)},
            {"attack_name", r.attack.describe()},
            {"acc_clean", r.acc_clean},
            {"acc_xR", r.acc_r},
            {"acc_xS", r.acc_s},
            {"acc_xRS", r.acc_rs},
            {"avg", r.avg}};
  j["ri"] = r.ri ? json(*r.ri) : json(nullptr);
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.model = j.at("model").get<std::string>();
  r.attack = attack_from_json(j.at("attack"));
  r.acc_clean = j.at("acc_clean").get<double>();
  r.acc_r = j.at("acc_xR").get<double>();
  r.acc_s = j.at("acc_xS").get<double>();
  r.acc_rs = j.at("acc_xRS").get<double>();
  r.avg = j.at("avg").get<double>();
  if (!j.at("ri").is_null()) r.ri = j.at("ri").get<double>();
  return r;
}

std::string report_csv_header() { return "model,attack,clean,xR,xS,xRS,Avg,RI\n"; }

std::string report_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os << r.model << ',' << to_string(r.attack.method) << r.attack.steps << ','
     << io::fixed2(r.acc_clean) << ',' << io::fixed2(r.acc_r) << ',' << io::fixed2(r.acc_s) << ','
     << io::fixed2(r.acc_rs) << ',' << io::fixed2(r.avg) << ',' << (r.ri ? io::fixed2(*r.ri) : "")
     << '\n';
  return os.str();
}

std::vector<CurvePoint> robustness_curve(const Classifier& model, const Dataset& data,
                                         AttackMethod method, ModalityMask mask,
                                         const std::vector<double>& eps_list,
                                         const AttackConfig& base, const EvalOptions& options) {
  if (eps_list.empty()) throw std::invalid_argument("robustness_curve: empty budget list");
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > eps_list[i - 1])) {
      throw std::invalid_argument("robustness_curve: budgets must be strictly ascending");
    }
  }
  std::vector<CurvePoint> out;
  for (double eps : eps_list) {
    AttackConfig cfg = base;
    if (method == AttackMethod::Fgsm) {
      cfg = AttackConfig::fgsm(eps, eps, mask);
      cfg.clamp_r = base.clamp_r;
      cfg.clamp_s = base.clamp_s;
    } else {
      cfg.method = method;
      cfg.eps_r = cfg.eps_s = eps;
      cfg.mask = mask;
    }
    out.push_back({eps, accuracy(model, data, cfg, options)});
  }
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "eps_numerator_over_255,accuracy_percent\n";
  for (const auto& p : curve) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", p.eps * 255.0);
    os << buf << ',' << io::fixed2(p.accuracy) << '\n';
  }
  return os.str();
}

}  // namespace amrkit
