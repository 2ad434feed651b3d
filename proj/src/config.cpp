#include "amrkit/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "amrkit/io.hpp"

namespace amrkit {

namespace pt = boost::property_tree;

TrainConfig default_train() {
  TrainConfig c;
  c.epochs = 60;
  c.lr0 = 0.1;
  return c;
}

AttackConfig AttackSpec::to_config(ModalityMask mask) const {
  const double er = eps_r / 255.0, es = eps_s / 255.0;
  AttackConfig c;
  switch (method) {
    case AttackMethod::Fgsm: c = AttackConfig::fgsm(er, es, mask); break;
    case AttackMethod::Pgd: c = AttackConfig::pgd(er, es, alpha / 255.0, steps, random_start, mask); break;
    case AttackMethod::Cw: c = AttackConfig::cw(er, es, alpha / 255.0, steps, random_start, mask); break;
  }
  return c;
}

const AttackSpec& RunConfig::attack(const std::string& name) const {
  for (const auto& a : attacks) {
    if (a.name == name) return a;
  }
  throw std::invalid_argument("config: no [attack " + name + "] section");
}

ModelSpec RunConfig::model_spec(const Dataset& d, std::size_t num_amr) const {
  if (d.dense_shape.size() != 4 || d.sparse_shape.size() != 3) {
    throw std::invalid_argument("config: dataset shapes must be [C,T,H,W] and [C,T,V]");
  }
  ModelSpec s;
  s.dense = BranchSpec{d.dense_shape[0], d.dense_shape[1], {d.dense_shape[2], d.dense_shape[3]},
                       model.dense_channels, model.dense_feature, model.dense_center,
                       model.dense_scale};
  s.sparse = BranchSpec{d.sparse_shape[0], d.sparse_shape[1], {d.sparse_shape[2]},
                        model.sparse_channels, model.sparse_feature};
  s.num_classes = d.num_classes;
  s.num_amr = num_amr;
  s.seed = seed;
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c = train.config;
  c.attack = train.attack.to_config(ModalityMask::Both);
  c.seed = seed;
  return c;
}

void RunConfig::validate() const {
  amrkit::validate(data.synth);
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
    throw std::invalid_argument("config: data.train_fraction must lie in (0, 1)");
  }
  train_config().validate();
  for (const auto& a : attacks) a.to_config().validate();
  for (const auto& name : eval.attacks) attack(name);
  attack(curve.attack);
  if (eval.attacks.empty()) throw std::invalid_argument("config: eval.attacks is empty");
  if (eval.batch_size == 0) throw std::invalid_argument("config: eval.batch_size must be >= 1");
  if (model.num_amr > model.dense_channels.size()) {
    throw std::invalid_argument("config: model.num_amr exceeds the number of blocks");
  }
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& value, const char* want) {
  throw std::invalid_argument("config: " + field + " = '" + value + "' is not " + want);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& field, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, x);
  if (v.empty() || r.ec != std::errc() || r.ptr != end) bad(field, v, "a non-negative integer");
  return x;
}

int to_int(const std::string& field, const std::string& v) {
  int x = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, x);
  if (v.empty() || r.ec != std::errc() || r.ptr != end) bad(field, v, "an integer");
  return x;
}

double to_double(const std::string& field, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, x);
  if (v.empty() || r.ec != std::errc() || r.ptr != end) bad(field, v, "a number");
  return x;
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad(field, v, "true or false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& field, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(v)) out.push_back(to_u64(field, s));
  return out;
}

std::vector<double> to_doubles(const std::string& field, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(field, s));
  return out;
}

template <typename F>
auto guarded(const std::string& field, const std::string& v, F&& parse) {
  try {
    return parse(v);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config: " + field + " = '" + v + "': " + e.what());
  }
}

using Setter = std::function<void(const std::string& field, const std::string& value)>;
using Section = std::map<std::string, Setter>;

Section run_keys(RunConfig& c) {
  return {{"seed", [&](auto& f, auto& v) { c.seed = to_u64(f, v); }},
          {"out", [&](auto&, auto& v) { c.out = v; }}};
}

Section data_keys(DataSection& d) {
  SynthSpec& s = d.synth;
  return {{"path", [&](auto&, auto& v) { d.path = v; }},
          {"train_fraction", [&](auto& f, auto& v) { d.train_fraction = to_double(f, v); }},
          {"split_seed", [&](auto& f, auto& v) { d.split_seed = to_u64(f, v); }},
          {"num_classes", [&](auto& f, auto& v) { s.num_classes = to_u64(f, v); }},
          {"samples_per_class", [&](auto& f, auto& v) { s.samples_per_class = to_u64(f, v); }},
          {"dense_shape", [&](auto& f, auto& v) { s.dense_shape = to_sizes(f, v); }},
          {"sparse_shape", [&](auto& f, auto& v) { s.sparse_shape = to_sizes(f, v); }},
          {"dense_signal", [&](auto& f, auto& v) { s.dense_signal = to_double(f, v); }},
          {"dense_noise", [&](auto& f, auto& v) { s.dense_noise = to_double(f, v); }},
          {"dense_nuisance", [&](auto& f, auto& v) { s.dense_nuisance = to_double(f, v); }},
          {"sparse_signal", [&](auto& f, auto& v) { s.sparse_signal = to_double(f, v); }},
          {"sparse_noise", [&](auto& f, auto& v) { s.sparse_noise = to_double(f, v); }},
          {"signal_jitter", [&](auto& f, auto& v) { s.signal_jitter = to_double(f, v); }},
          {"modality_dropout", [&](auto& f, auto& v) { s.modality_dropout = to_double(f, v); }},
          {"seed", [&](auto& f, auto& v) { s.seed = to_u64(f, v); }}};
}

Section model_keys(ModelSection& m) {
  return {{"dense_channels", [&](auto& f, auto& v) { m.dense_channels = to_sizes(f, v); }},
          {"dense_feature", [&](auto& f, auto& v) { m.dense_feature = to_sizes(f, v); }},
          {"sparse_channels", [&](auto& f, auto& v) { m.sparse_channels = to_sizes(f, v); }},
          {"sparse_feature", [&](auto& f, auto& v) { m.sparse_feature = to_sizes(f, v); }},
          {"dense_center", [&](auto& f, auto& v) { m.dense_center = to_double(f, v); }},
          {"dense_scale", [&](auto& f, auto& v) { m.dense_scale = to_double(f, v); }},
          {"num_amr", [&](auto& f, auto& v) { m.num_amr = to_u64(f, v); }}};
}

Section train_keys(TrainSection& t) {
  TrainConfig& c = t.config;
  AttackSpec& a = t.attack;
  return {
      {"mode", [&](auto& f, auto& v) { t.mode = guarded(f, v, parse_train_mode); }},
      {"mask", [&](auto& f, auto& v) { t.mask = guarded(f, v, parse_modality_mask); }},
      {"epochs", [&](auto& f, auto& v) { c.epochs = to_int(f, v); }},
      {"batch_size", [&](auto& f, auto& v) { c.batch_size = to_u64(f, v); }},
      {"lr", [&](auto& f, auto& v) { c.lr0 = to_double(f, v); }},
      {"lr_min", [&](auto& f, auto& v) { c.lr_min = to_double(f, v); }},
      {"momentum", [&](auto& f, auto& v) { c.momentum = to_double(f, v); }},
      {"weight_decay", [&](auto& f, auto& v) { c.weight_decay = to_double(f, v); }},
      {"lambda", [&](auto& f, auto& v) { c.lambda = to_double(f, v); }},
      {"attack_eps_r", [&](auto& f, auto& v) { a.eps_r = to_double(f, v); }},
      {"attack_eps_s", [&](auto& f, auto& v) { a.eps_s = to_double(f, v); }},
      {"attack_alpha", [&](auto& f, auto& v) { a.alpha = to_double(f, v); }},
      {"attack_steps", [&](auto& f, auto& v) { a.steps = to_int(f, v); }},
      {"attack_random_start", [&](auto& f, auto& v) { a.random_start = to_bool(f, v); }}};
}

Section eval_keys(EvalSection& e) {
  return {{"attacks", [&](auto&, auto& v) { e.attacks = split_list(v); }},
          {"clean_plain", [&](auto& f, auto& v) { e.clean_plain = to_bool(f, v); }},
          {"batch_size", [&](auto& f, auto& v) { e.batch_size = to_u64(f, v); }}};
}

Section attack_keys(AttackSpec& a) {
  return {
      {"method", [&](auto& f, auto& v) { a.method = guarded(f, v, parse_attack_method); }},
      {"eps_r", [&](auto& f, auto& v) { a.eps_r = to_double(f, v); }},
      {"eps_s", [&](auto& f, auto& v) { a.eps_s = to_double(f, v); }},
      {"alpha", [&](auto& f, auto& v) { a.alpha = to_double(f, v); }},
      {"steps", [&](auto& f, auto& v) { a.steps = to_int(f, v); }},
      {"random_start", [&](auto& f, auto& v) { a.random_start = to_bool(f, v); }}};
}

Section curve_keys(CurveSection& c) {
  return {{"attack", [&](auto&, auto& v) { c.attack = v; }},
          {"mask", [&](auto& f, auto& v) { c.mask = guarded(f, v, parse_modality_mask); }},
          {"eps", [&](auto& f, auto& v) { c.eps = to_doubles(f, v); }}};
}

Section experiment_keys(ExperimentSection& x) {
  return {{"amr", [&](auto& f, auto& v) { x.amr = to_u64(f, v); }},
          {"amr_counts", [&](auto& f, auto& v) { x.amr_counts = to_sizes(f, v); }},
          {"lambdas", [&](auto& f, auto& v) { x.lambdas = to_doubles(f, v); }}};
}

AttackSpec default_attack() { return AttackSpec{"pgd20", AttackMethod::Pgd, 8, 8, 2, 20, false}; }

void apply(const std::string& section, const pt::ptree& keys, Section setters) {
  for (const auto& [key, node] : keys) {
    const std::string field = section + "." + key;
    const auto it = setters.find(key);
    if (it == setters.end()) throw std::invalid_argument("config: unknown key " + field);
    it->second(field, trim(node.data()));
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument("config: line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  c.attacks = {default_attack()};
  for (const auto& [name, keys] : tree) {
    if (keys.data().size() && keys.empty()) {
      throw std::invalid_argument("config: key '" + name + "' outside any section");
    }
    if (name == "run") {
      apply(name, keys, run_keys(c));
    } else if (name == "data") {
      apply(name, keys, data_keys(c.data));
    } else if (name == "model") {
      apply(name, keys, model_keys(c.model));
    } else if (name == "train") {
      apply(name, keys, train_keys(c.train));
    } else if (name == "eval") {
      apply(name, keys, eval_keys(c.eval));
    } else if (name == "curve") {
      apply(name, keys, curve_keys(c.curve));
    } else if (name == "experiment") {
      apply(name, keys, experiment_keys(c.experiment));
    } else if (name.rfind("attack ", 0) == 0) {
      const std::string attack_name = trim(name.substr(7));
      if (attack_name.empty()) throw std::invalid_argument("config: [attack] needs a name");
      auto it = std::find_if(c.attacks.begin(), c.attacks.end(),
                             [&](const AttackSpec& a) { return a.name == attack_name; });
      if (it == c.attacks.end()) {
        AttackSpec a = default_attack();
        a.name = attack_name;
        c.attacks.push_back(a);
        it = c.attacks.end() - 1;
      }
      apply("attack " + attack_name, keys, attack_keys(*it));
    } else {
      throw std::invalid_argument("config: unknown section [" + name + "]");
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw std::invalid_argument("config: file not found: " + path.string());
  }
  return parse_config(io::read_file(path));
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += io::exact(v[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      s += v[i];
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

const char* boolstr(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string to_ini(const RunConfig& c) {
  using io::exact;
  std::ostringstream os;
  const SynthSpec& s = c.data.synth;
  const TrainConfig& t = c.train.config;
  const AttackSpec& ta = c.train.attack;
  os << "[run]\n"
     << "seed = " << c.seed << "\n"
     << "out = " << c.out << "\n\n"
     << "[data]\n"
     << "path = " << c.data.path << "\n"
     << "train_fraction = " << exact(c.data.train_fraction) << "\n"
     << "split_seed = " << c.data.split_seed << "\n"
     << "num_classes = " << s.num_classes << "\n"
     << "samples_per_class = " << s.samples_per_class << "\n"
     << "dense_shape = " << join(s.dense_shape) << "\n"
     << "sparse_shape = " << join(s.sparse_shape) << "\n"
     << "dense_signal = " << exact(s.dense_signal) << "\n"
     << "dense_noise = " << exact(s.dense_noise) << "\n"
     << "dense_nuisance = " << exact(s.dense_nuisance) << "\n"
     << "sparse_signal = " << exact(s.sparse_signal) << "\n"
     << "sparse_noise = " << exact(s.sparse_noise) << "\n"
     << "signal_jitter = " << exact(s.signal_jitter) << "\n"
     << "modality_dropout = " << exact(s.modality_dropout) << "\n"
     << "seed = " << s.seed << "\n\n"
     << "[model]\n"
     << "dense_channels = " << join(c.model.dense_channels) << "\n"
     << "dense_feature = " << join(c.model.dense_feature) << "\n"
     << "sparse_channels = " << join(c.model.sparse_channels) << "\n"
     << "sparse_feature = " << join(c.model.sparse_feature) << "\n"
     << "dense_center = " << exact(c.model.dense_center) << "\n"
     << "dense_scale = " << exact(c.model.dense_scale) << "\n"
     << "num_amr = " << c.model.num_amr << "\n\n"
     << "[train]\n"
     << "mode = " << to_string(c.train.mode) << "\n"
     << "mask = " << to_string(c.train.mask) << "\n"
     << "epochs = " << t.epochs << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "lr = " << exact(t.lr0) << "\n"
     << "lr_min = " << exact(t.lr_min) << "\n"
     << "momentum = " << exact(t.momentum) << "\n"
     << "weight_decay = " << exact(t.weight_decay) << "\n"
     << "lambda = " << exact(t.lambda) << "\n"
     << "attack_eps_r = " << exact(ta.eps_r) << "\n"
     << "attack_eps_s = " << exact(ta.eps_s) << "\n"
     << "attack_alpha = " << exact(ta.alpha) << "\n"
     << "attack_steps = " << ta.steps << "\n"
     << "attack_random_start = " << boolstr(ta.random_start) << "\n\n"
     << "[eval]\n"
     << "attacks = " << join(c.eval.attacks) << "\n"
     << "clean_plain = " << boolstr(c.eval.clean_plain) << "\n"
     << "batch_size = " << c.eval.batch_size << "\n\n";
  for (const auto& a : c.attacks) {
    os << "[attack " << a.name << "]\n"
       << "method = " << to_string(a.method) << "\n"
       << "eps_r = " << exact(a.eps_r) << "\n"
       << "eps_s = " << exact(a.eps_s) << "\n"
       << "alpha = " << exact(a.alpha) << "\n"
       << "steps = " << a.steps << "\n"
       << "random_start = " << boolstr(a.random_start) << "\n\n";
  }
  os << "[curve]\n"
     << "attack = " << c.curve.attack << "\n"
     << "mask = " << to_string(c.curve.mask) << "\n"
     << "eps = " << join(c.curve.eps) << "\n\n"
     << "[experiment]\n"
     << "amr = " << c.experiment.amr << "\n"
     << "amr_counts = " << join(c.experiment.amr_counts) << "\n"
     << "lambdas = " << join(c.experiment.lambdas) << "\n";
  return os.str();
}

}  // namespace amrkit
