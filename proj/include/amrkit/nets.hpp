#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amrkit/amr.hpp"
#include "amrkit/autodiff.hpp"
#include "amrkit/tensor.hpp"

namespace amrkit {

enum class Modality { Dense, Sparse };

// Shape contract of one branch network. Every block is a per-frame affine map
// with channel mixing followed by relu:
//   [B, C, T, S...] -> [B*T, C*|S|] -> affine -> relu -> [B, C', T, S'...]
// The first block maps the input spatial extent to `feature_spatial`; later
// blocks keep it.
struct BranchSpec {
  std::size_t in_channels = 3;
  std::size_t frames = 4;
  Shape in_spatial;                    // {H, W} dense, {V} sparse
  std::vector<std::size_t> channels;   // output channels per block
  Shape feature_spatial;
  // Inputs enter the first block as (x - input_center) * input_scale.
  double input_center = 0.0;
  double input_scale = 1.0;

  bool operator==(const BranchSpec&) const = default;
};

BranchSpec default_dense_branch();   // [3,4,8,8] -> 3 x [8,4,4,4]
BranchSpec default_sparse_branch();  // [3,4,5]   -> 3 x [8,4,5]

class BranchNet {
 public:
  BranchNet(BranchSpec spec, Modality modality);

  const BranchSpec& spec() const { return spec_; }
  Modality modality() const { return modality_; }
  std::size_t num_blocks() const { return spec_.channels.size(); }

  // Per-sample shapes (no batch axis).
  Shape input_shape() const;
  Shape block_feature_shape(std::size_t block) const;
  // Batched shape [B, ...].
  Shape block_output_shape(std::size_t block, std::size_t batch) const;

  // Affine parameter shapes of a block: weight [in, out], bias [1, out].
  Shape weight_shape(std::size_t block) const;
  Shape bias_shape(std::size_t block) const;

  DiffTensor normalize_input(const DiffTensor& x) const;
  DiffTensor apply_block(std::size_t block, const DiffTensor& weight, const DiffTensor& bias,
                         const DiffTensor& input) const;

 private:
  Shape block_input_feature_shape(std::size_t block) const;

  BranchSpec spec_;
  Modality modality_;
};

struct ModelSpec {
  BranchSpec dense = default_dense_branch();
  BranchSpec sparse = default_sparse_branch();
  std::size_t num_classes = 4;
  std::size_t num_amr = 0;
  std::uint64_t seed = 0;

  bool operator==(const ModelSpec&) const = default;
};

enum class ForwardMode { Plain, Reweighted };

class BoundModel;

// Two branch networks, late fusion by global pooling + concatenation + one
// affine layer, and `num_amr` reweighting modules. AMR i (0-based) sits on
// block (last - i) of both branches.
class FusionModel {
 public:
  explicit FusionModel(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const BranchNet& dense_branch() const { return dense_; }
  const BranchNet& sparse_branch() const { return sparse_; }
  std::size_t num_amr() const { return amrs_.size(); }
  std::size_t num_classes() const { return spec_.num_classes; }
  std::size_t amr_block(std::size_t amr_index) const;

  AmrModule& amr(std::size_t i) { return amrs_.at(i); }
  const AmrModule& amr(std::size_t i) const { return amrs_.at(i); }

  // All trainable tensors in a fixed order: dense blocks (weight, bias),
  // sparse blocks, fusion head, then per AMR (w_r, w_s, aux weight, aux bias).
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;
  // True for entries of parameters() that belong to an AMR.
  std::vector<bool> amr_parameter_mask() const;
  std::size_t parameter_count() const;

  Tensor& head_weight() { return head_w_; }
  Tensor& head_bias() { return head_b_; }

  BoundModel bind(Tape& tape, bool requires_grad) const;

  bool operator==(const FusionModel& other) const;

 private:
  ModelSpec spec_;
  BranchNet dense_;
  BranchNet sparse_;
  std::vector<Tensor> dense_w_, dense_b_, sparse_w_, sparse_b_;
  Tensor head_w_, head_b_;
  std::vector<AmrModule> amrs_;
};

// A FusionModel's parameters placed on one tape. Entries of params() follow
// FusionModel::parameters().
class BoundModel {
 public:
  const FusionModel& model() const { return *model_; }
  const std::vector<DiffTensor>& params() const { return params_; }

  const DiffTensor& dense_weight(std::size_t k) const { return params_[2 * k]; }
  const DiffTensor& dense_bias(std::size_t k) const { return params_[2 * k + 1]; }
  const DiffTensor& sparse_weight(std::size_t k) const;
  const DiffTensor& sparse_bias(std::size_t k) const;
  const DiffTensor& head_weight() const;
  const DiffTensor& head_bias() const;
  BoundAmr amr(std::size_t i) const;

  // Gradients of every parameter after backward(), in parameters() order.
  std::vector<Tensor> grads() const;

 private:
  friend class FusionModel;
  const FusionModel* model_ = nullptr;
  std::vector<DiffTensor> params_;
};

struct ReweightedOutput {
  DiffTensor logits;
  std::vector<DiffTensor> aux_logits;  // one [B, N] per AMR, by AMR index
};

// Optional view of the intermediate feature maps of one forward pass.
struct ForwardTrace {
  std::vector<DiffTensor> dense_features;   // per block, after any reweighting
  std::vector<DiffTensor> sparse_features;
};

// Regular forward propagation; AMR modules are bypassed.
DiffTensor forward_plain(const BoundModel& model, const DiffTensor& x_r, const DiffTensor& x_s,
                         ForwardTrace* trace = nullptr);
// Features at each AMR-bound block are reweighted before flowing onward.
ReweightedOutput forward_reweighted(const BoundModel& model, const DiffTensor& x_r,
                                    const DiffTensor& x_s, ForwardTrace* trace = nullptr);

// Anything that maps a (dense, sparse) batch to logits on a tape. Attacks and
// evaluation work against this interface.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual DiffTensor logits(Tape& tape, const DiffTensor& x_r, const DiffTensor& x_s) const = 0;
  virtual std::size_t num_classes() const = 0;
};

class FusionClassifier final : public Classifier {
 public:
  FusionClassifier(const FusionModel& model, ForwardMode mode) : model_(model), mode_(mode) {}
  DiffTensor logits(Tape& tape, const DiffTensor& x_r, const DiffTensor& x_s) const override;
  std::size_t num_classes() const override { return model_.num_classes(); }
  ForwardMode mode() const { return mode_; }

 private:
  const FusionModel& model_;
  ForwardMode mode_;
};

// logits = flat(x_r) W_r + flat(x_s) W_s + b
class LinearSoftmaxModel final : public Classifier {
 public:
  LinearSoftmaxModel(Tensor w_r, Tensor w_s, Tensor bias);
  static LinearSoftmaxModel random(std::size_t dense_size, std::size_t sparse_size,
                                   std::size_t num_classes, std::uint64_t seed);

  DiffTensor logits(Tape& tape, const DiffTensor& x_r, const DiffTensor& x_s) const override;
  std::size_t num_classes() const override { return bias_.dim(1); }

  const Tensor& w_r() const { return w_r_; }
  const Tensor& w_s() const { return w_s_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor w_r_, w_s_, bias_;
};

// Checkpoint directory layout: model.json (spec and parameter manifest) and
// model.bin (little-endian float64 parameters in manifest order).
void save_checkpoint(const FusionModel& model, const std::filesystem::path& dir);
FusionModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace amrkit
