#include "amrkit/nets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "amrkit/io.hpp"
#include "amrkit/rng.hpp"

namespace amrkit {

using nlohmann::json;

BranchSpec default_dense_branch() { return {3, 4, {8, 8}, {8, 8, 8}, {4, 4}}; }
BranchSpec default_sparse_branch() { return {3, 4, {5}, {8, 8, 8}, {5}}; }

// ---------------------------------------------------------------------------
// BranchNet

BranchNet::BranchNet(BranchSpec spec, Modality modality)
    : spec_(std::move(spec)), modality_(modality) {
  const std::size_t want = modality_ == Modality::Dense ? 2 : 1;
  if (spec_.in_spatial.size() != want || spec_.feature_spatial.size() != want) {
    throw std::invalid_argument(std::string("BranchNet: ") +
                                (modality_ == Modality::Dense ? "dense" : "sparse") +
                                " branch needs " + std::to_string(want) + " spatial axes");
  }
  if (spec_.channels.empty()) throw std::invalid_argument("BranchNet: need at least one block");
  if (spec_.in_channels == 0 || spec_.frames == 0 || shape_numel(spec_.in_spatial) == 0 ||
      shape_numel(spec_.feature_spatial) == 0) {
    throw std::invalid_argument("BranchNet: zero extent in branch shape");
  }
  for (std::size_t c : spec_.channels) {
    if (c == 0) throw std::invalid_argument("BranchNet: zero-channel block");
  }
  if (!(spec_.input_scale > 0.0) || !std::isfinite(spec_.input_scale) ||
      !std::isfinite(spec_.input_center)) {
    throw std::invalid_argument("BranchNet: input_scale must be positive and finite");
  }
}

Shape BranchNet::input_shape() const {
  Shape s{spec_.in_channels, spec_.frames};
  s.insert(s.end(), spec_.in_spatial.begin(), spec_.in_spatial.end());
  return s;
}

Shape BranchNet::block_input_feature_shape(std::size_t block) const {
  return block == 0 ? input_shape() : block_feature_shape(block - 1);
}

Shape BranchNet::block_feature_shape(std::size_t block) const {
  if (block >= num_blocks()) {
    throw std::out_of_range("BranchNet: block " + std::to_string(block) + " of " +
                            std::to_string(num_blocks()));
  }
  Shape s{spec_.channels[block], spec_.frames};
  s.insert(s.end(), spec_.feature_spatial.begin(), spec_.feature_spatial.end());
  return s;
}

Shape BranchNet::block_output_shape(std::size_t block, std::size_t batch) const {
  Shape s{batch};
  const Shape f = block_feature_shape(block);
  s.insert(s.end(), f.begin(), f.end());
  return s;
}

Shape BranchNet::weight_shape(std::size_t block) const {
  const Shape in = block_input_feature_shape(block);
  const Shape out = block_feature_shape(block);
  // Per frame: channels times spatial extent.
  return {shape_numel(in) / spec_.frames, shape_numel(out) / spec_.frames};
}

Shape BranchNet::bias_shape(std::size_t block) const { return {1, weight_shape(block)[1]}; }

DiffTensor BranchNet::normalize_input(const DiffTensor& x) const {
  if (spec_.input_center == 0.0 && spec_.input_scale == 1.0) return x;
  return ops::scalar_affine(x, spec_.input_scale, -spec_.input_center * spec_.input_scale);
}

DiffTensor BranchNet::apply_block(std::size_t block, const DiffTensor& weight,
                                  const DiffTensor& bias, const DiffTensor& input) const {
  const Shape& s = input.shape();
  const Shape want = block_input_feature_shape(block);
  if (s.size() != want.size() + 1 || !std::equal(want.begin(), want.end(), s.begin() + 1)) {
    throw std::invalid_argument(std::string(modality_ == Modality::Dense ? "dense" : "sparse") +
                                " branch block " + std::to_string(block) + ": expected [B]+" +
                                shape_str(want) + ", got " + shape_str(s));
  }
  const std::size_t batch = s[0];
  const std::size_t frames = spec_.frames;
  std::vector<std::size_t> swap_ct(s.size());
  for (std::size_t i = 0; i < swap_ct.size(); ++i) swap_ct[i] = i;
  std::swap(swap_ct[1], swap_ct[2]);

  const Shape wshape = weight_shape(block);
  DiffTensor frames_first = ops::permute(input, swap_ct);
  DiffTensor flat = ops::reshape(frames_first, {batch * frames, wshape[0]});
  DiffTensor h = ops::relu(ops::add_row(ops::matmul(flat, weight), bias));
  Shape unflat{batch, frames, spec_.channels[block]};
  unflat.insert(unflat.end(), spec_.feature_spatial.begin(), spec_.feature_spatial.end());
  return ops::permute(ops::reshape(h, unflat), swap_ct);
}

// ---------------------------------------------------------------------------
// FusionModel

FusionModel::FusionModel(ModelSpec spec)
    : spec_(std::move(spec)),
      dense_(spec_.dense, Modality::Dense),
      sparse_(spec_.sparse, Modality::Sparse) {
  if (spec_.num_classes < 2) throw std::invalid_argument("FusionModel: need at least two classes");
  if (dense_.num_blocks() != sparse_.num_blocks()) {
    throw std::invalid_argument("FusionModel: branches must have the same number of blocks");
  }
  if (spec_.num_amr > dense_.num_blocks()) {
    throw std::invalid_argument("FusionModel: " + std::to_string(spec_.num_amr) +
                                " AMRs requested but branches have only " +
                                std::to_string(dense_.num_blocks()) + " blocks");
  }
  Rng rng(derive_seed(spec_.seed, "init"));
  auto uniform_init = [&rng](const Shape& shape) {
    Tensor t(shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape[0]));
    for (auto& v : t.storage()) v = rng.uniform(-bound, bound);
    return t;
  };
  const std::size_t blocks = dense_.num_blocks();
  for (std::size_t k = 0; k < blocks; ++k) {
    dense_w_.push_back(uniform_init(dense_.weight_shape(k)));
    dense_b_.push_back(Tensor::zeros(dense_.bias_shape(k)));
  }
  for (std::size_t k = 0; k < blocks; ++k) {
    sparse_w_.push_back(uniform_init(sparse_.weight_shape(k)));
    sparse_b_.push_back(Tensor::zeros(sparse_.bias_shape(k)));
  }
  const std::size_t fused = spec_.dense.channels.back() + spec_.sparse.channels.back();
  head_w_ = uniform_init({fused, spec_.num_classes});
  head_b_ = Tensor::zeros({1, spec_.num_classes});
  for (std::size_t i = 0; i < spec_.num_amr; ++i) {
    const std::size_t k = blocks - 1 - i;
    amrs_.push_back(AmrModule::create(dense_.block_feature_shape(k),
                                      sparse_.block_feature_shape(k), spec_.num_classes));
  }
}

std::size_t FusionModel::amr_block(std::size_t amr_index) const {
  if (amr_index >= amrs_.size()) {
    throw std::out_of_range("FusionModel: AMR index " + std::to_string(amr_index));
  }
  return dense_.num_blocks() - 1 - amr_index;
}

std::vector<Tensor*> FusionModel::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t k = 0; k < dense_w_.size(); ++k) {
    out.push_back(&dense_w_[k]);
    out.push_back(&dense_b_[k]);
  }
  for (std::size_t k = 0; k < sparse_w_.size(); ++k) {
    out.push_back(&sparse_w_[k]);
    out.push_back(&sparse_b_[k]);
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  for (auto& a : amrs_) {
    out.push_back(&a.w_r);
    out.push_back(&a.w_s);
    out.push_back(&a.aux_weight);
    out.push_back(&a.aux_bias);
  }
  return out;
}

std::vector<const Tensor*> FusionModel::parameters() const {
  auto mut = const_cast<FusionModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> FusionModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < dense_w_.size(); ++k) {
    names.push_back("dense.block" + std::to_string(k) + ".weight");
    names.push_back("dense.block" + std::to_string(k) + ".bias");
  }
  for (std::size_t k = 0; k < sparse_w_.size(); ++k) {
    names.push_back("sparse.block" + std::to_string(k) + ".weight");
    names.push_back("sparse.block" + std::to_string(k) + ".bias");
  }
  names.emplace_back("head.weight");
  names.emplace_back("head.bias");
  for (std::size_t i = 0; i < amrs_.size(); ++i) {
    const std::string p = "amr" + std::to_string(i) + ".";
    names.push_back(p + "w_r");
    names.push_back(p + "w_s");
    names.push_back(p + "aux.weight");
    names.push_back(p + "aux.bias");
  }
  return names;
}

std::vector<bool> FusionModel::amr_parameter_mask() const {
  const std::size_t backbone = 4 * dense_w_.size() + 2;
  std::vector<bool> mask(backbone + 4 * amrs_.size(), false);
  for (std::size_t i = backbone; i < mask.size(); ++i) mask[i] = true;
  return mask;
}

std::size_t FusionModel::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameters()) n += t->numel();
  return n;
}

BoundModel FusionModel::bind(Tape& tape, bool requires_grad) const {
  BoundModel b;
  b.model_ = this;
  for (const Tensor* t : parameters()) b.params_.push_back(tape.leaf(*t, requires_grad));
  return b;
}

bool FusionModel::operator==(const FusionModel& other) const {
  if (!(spec_ == other.spec_)) return false;
  const auto a = parameters();
  const auto b = other.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// BoundModel

const DiffTensor& BoundModel::sparse_weight(std::size_t k) const {
  return params_[2 * model_->dense_branch().num_blocks() + 2 * k];
}
const DiffTensor& BoundModel::sparse_bias(std::size_t k) const {
  return params_[2 * model_->dense_branch().num_blocks() + 2 * k + 1];
}
const DiffTensor& BoundModel::head_weight() const {
  return params_[4 * model_->dense_branch().num_blocks()];
}
const DiffTensor& BoundModel::head_bias() const {
  return params_[4 * model_->dense_branch().num_blocks() + 1];
}

BoundAmr BoundModel::amr(std::size_t i) const {
  const std::size_t base = 4 * model_->dense_branch().num_blocks() + 2 + 4 * i;
  return {params_.at(base), params_.at(base + 1), params_.at(base + 2), params_.at(base + 3)};
}

std::vector<Tensor> BoundModel::grads() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.grad());
  return out;
}

// ---------------------------------------------------------------------------
// forward passes

namespace {

void check_input(const char* what, const BranchNet& branch, const DiffTensor& x) {
  const Shape& s = x.shape();
  const Shape want = branch.input_shape();
  if (s.size() != want.size() + 1 || !std::equal(want.begin(), want.end(), s.begin() + 1)) {
    throw std::invalid_argument(std::string("forward: ") + what + " input must be [B]+" +
                                shape_str(want) + ", got " + shape_str(s));
  }
}

ReweightedOutput run(const BoundModel& bm, const DiffTensor& x_r, const DiffTensor& x_s,
                     bool apply_amr, ForwardTrace* trace) {
  const FusionModel& m = bm.model();
  check_input("dense", m.dense_branch(), x_r);
  check_input("sparse", m.sparse_branch(), x_s);
  if (x_r.shape()[0] != x_s.shape()[0]) {
    throw std::invalid_argument("forward: batch mismatch " + shape_str(x_r.shape()) + " vs " +
                                shape_str(x_s.shape()));
  }
  const std::size_t blocks = m.dense_branch().num_blocks();
  ReweightedOutput out;
  if (apply_amr) out.aux_logits.resize(m.num_amr());
  DiffTensor fr = m.dense_branch().normalize_input(x_r);
  DiffTensor fs = m.sparse_branch().normalize_input(x_s);
  for (std::size_t k = 0; k < blocks; ++k) {
    fr = m.dense_branch().apply_block(k, bm.dense_weight(k), bm.dense_bias(k), fr);
    fs = m.sparse_branch().apply_block(k, bm.sparse_weight(k), bm.sparse_bias(k), fs);
    if (apply_amr && blocks - 1 - k < m.num_amr()) {
      const std::size_t i = blocks - 1 - k;
      const BoundAmr amr = bm.amr(i);
      ReweightedFeatures rw = reweight(amr, fr, fs);
      fr = rw.dense;
      fs = rw.sparse;
      out.aux_logits[i] = pool_and_classify(amr, fr, fs).aux_logits;
    }
    if (trace) {
      trace->dense_features.push_back(fr);
      trace->sparse_features.push_back(fs);
    }
  }
  const DiffTensor pooled[] = {global_average_pool(fr), global_average_pool(fs)};
  out.logits = ops::add_row(ops::matmul(ops::concat(pooled, 1), bm.head_weight()), bm.head_bias());
  return out;
}

}  // namespace

DiffTensor forward_plain(const BoundModel& model, const DiffTensor& x_r, const DiffTensor& x_s,
                         ForwardTrace* trace) {
  return run(model, x_r, x_s, false, trace).logits;
}

ReweightedOutput forward_reweighted(const BoundModel& model, const DiffTensor& x_r,
                                    const DiffTensor& x_s, ForwardTrace* trace) {
  return run(model, x_r, x_s, true, trace);
}

DiffTensor FusionClassifier::logits(Tape& tape, const DiffTensor& x_r,
                                    const DiffTensor& x_s) const {
  const BoundModel bm = model_.bind(tape, false);
  return mode_ == ForwardMode::Plain ? forward_plain(bm, x_r, x_s)
                                     : forward_reweighted(bm, x_r, x_s).logits;
}

// ---------------------------------------------------------------------------
// LinearSoftmaxModel

LinearSoftmaxModel::LinearSoftmaxModel(Tensor w_r, Tensor w_s, Tensor bias)
    : w_r_(std::move(w_r)), w_s_(std::move(w_s)), bias_(std::move(bias)) {
  if (w_r_.rank() != 2 || w_s_.rank() != 2 || bias_.rank() != 2 || bias_.dim(0) != 1 ||
      w_r_.dim(1) != bias_.dim(1) || w_s_.dim(1) != bias_.dim(1)) {
    throw std::invalid_argument("LinearSoftmaxModel: inconsistent shapes " +
                                shape_str(w_r_.shape()) + ", " + shape_str(w_s_.shape()) + ", " +
                                shape_str(bias_.shape()));
  }
}

LinearSoftmaxModel LinearSoftmaxModel::random(std::size_t dense_size, std::size_t sparse_size,
                                              std::size_t num_classes, std::uint64_t seed) {
  Rng rng(seed);
  auto draw = [&rng](Shape s) {
    Tensor t(std::move(s));
    for (auto& v : t.storage()) v = rng.normal();
    return t;
  };
  return LinearSoftmaxModel(draw({dense_size, num_classes}), draw({sparse_size, num_classes}),
                            draw({1, num_classes}));
}

DiffTensor LinearSoftmaxModel::logits(Tape& tape, const DiffTensor& x_r,
                                      const DiffTensor& x_s) const {
  const std::size_t batch = x_r.shape().at(0);
  DiffTensor fr = ops::reshape(x_r, {batch, w_r_.dim(0)});
  DiffTensor fs = ops::reshape(x_s, {batch, w_s_.dim(0)});
  DiffTensor z = ops::add(ops::matmul(fr, tape.constant(w_r_)), ops::matmul(fs, tape.constant(w_s_)));
  return ops::add_row(z, tape.constant(bias_));
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

json branch_json(const BranchSpec& b) {
  return {{"in_channels", b.in_channels},       {"frames", b.frames},
          {"in_spatial", b.in_spatial},         {"channels", b.channels},
          {"feature_spatial", b.feature_spatial}, {"input_center", b.input_center},
          {"input_scale", b.input_scale}};
}

BranchSpec branch_from_json(const json& j) {
  BranchSpec b;
  b.in_channels = j.at("in_channels").get<std::size_t>();
  b.frames = j.at("frames").get<std::size_t>();
  b.in_spatial = j.at("in_spatial").get<Shape>();
  b.channels = j.at("channels").get<std::vector<std::size_t>>();
  b.feature_spatial = j.at("feature_spatial").get<Shape>();
  b.input_center = j.at("input_center").get<double>();
  b.input_scale = j.at("input_scale").get<double>();
  return b;
}

}  // namespace

void save_checkpoint(const FusionModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const ModelSpec& s = model.spec();
  json manifest;
  manifest["format"] = "amrkit-checkpoint-1";
  manifest["num_classes"] = s.num_classes;
  manifest["num_amr"] = s.num_amr;
  manifest["seed"] = s.seed;
  manifest["dense_branch"] = branch_json(s.dense);
  manifest["sparse_branch"] = branch_json(s.sparse);
  json blocks = json::array();
  for (std::size_t i = 0; i < model.num_amr(); ++i) blocks.push_back(model.amr_block(i));
  manifest["amr_blocks"] = blocks;
  json params = json::array();
  std::string blob;
  std::size_t offset = 0;
  const auto names = model.parameter_names();
  const auto tensors = model.parameters();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    params.push_back({{"name", names[i]}, {"shape", tensors[i]->shape()}, {"offset", offset}});
    io::append_f64_le(blob, tensors[i]->data());
    offset += tensors[i]->numel();
  }
  manifest["parameters"] = params;
  manifest["total_values"] = offset;
  io::write_file(dir / "model.json", manifest.dump(2) + "\n");
  io::write_file(dir / "model.bin", blob);
}

FusionModel load_checkpoint(const std::filesystem::path& dir) {
  const json manifest = json::parse(io::read_file(dir / "model.json"));
  if (manifest.value("format", "") != "amrkit-checkpoint-1") {
    throw std::runtime_error("checkpoint " + dir.string() + ": unknown format");
  }
  ModelSpec spec;
  spec.num_classes = manifest.at("num_classes").get<std::size_t>();
  spec.num_amr = manifest.at("num_amr").get<std::size_t>();
  spec.seed = manifest.at("seed").get<std::uint64_t>();
  spec.dense = branch_from_json(manifest.at("dense_branch"));
  spec.sparse = branch_from_json(manifest.at("sparse_branch"));
  FusionModel model(spec);
  const std::string blob = io::read_file(dir / "model.bin");
  const auto names = model.parameter_names();
  auto tensors = model.parameters();
  const json& params = manifest.at("parameters");
  if (params.size() != tensors.size()) {
    throw std::runtime_error("checkpoint " + dir.string() + ": parameter count mismatch");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const json& p = params[i];
    if (p.at("name").get<std::string>() != names[i] ||
        p.at("shape").get<Shape>() != tensors[i]->shape()) {
      throw std::runtime_error("checkpoint " + dir.string() + ": parameter " + names[i] +
                               " does not match the manifest");
    }
    const auto values = io::read_f64_le(blob, p.at("offset").get<std::size_t>() * 8,
                                        tensors[i]->numel());
    std::copy(values.begin(), values.end(), tensors[i]->storage().begin());
  }
  return model;
}

}  // namespace amrkit
