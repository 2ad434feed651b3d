#pragma once

// Attention-based modality reweighting: trainable per-element weight matrices
// for the dense and sparse feature maps, plus a pooled auxiliary classifier.

#include <cstddef>
#include <vector>

#include "amrkit/autodiff.hpp"
#include "amrkit/tensor.hpp"

namespace amrkit {

struct AmrModule {
  Tensor w_r;         // [1, C_R, T_R, H, W]
  Tensor w_s;         // [1, C_s, T_s, V]
  Tensor aux_weight;  // [C_R + C_s, N]
  Tensor aux_bias;    // [1, N]

  // Feature shapes are per sample ([C, T, ...], no batch axis). Weight
  // matrices start at 1 (identity reweighting), the auxiliary head at 0.
  static AmrModule create(const Shape& dense_feature, const Shape& sparse_feature,
                          std::size_t num_classes);

  std::size_t dense_channels() const { return w_r.dim(1); }
  std::size_t sparse_channels() const { return w_s.dim(1); }
  std::size_t num_classes() const { return aux_bias.dim(1); }
};

// An AmrModule's parameters placed on a tape.
struct BoundAmr {
  DiffTensor w_r;
  DiffTensor w_s;
  DiffTensor aux_weight;
  DiffTensor aux_bias;
};

BoundAmr bind(Tape& tape, const AmrModule& amr, bool requires_grad);

struct ReweightedFeatures {
  DiffTensor dense;
  DiffTensor sparse;
};

// X~ = X (x) broadcast_B(W) for each modality.
ReweightedFeatures reweight(const BoundAmr& amr, const DiffTensor& dense, const DiffTensor& sparse);

struct PooledPrediction {
  DiffTensor z_r;    // [B, C_R]
  DiffTensor z_s;    // [B, C_s]
  DiffTensor z_mul;  // [B, C_R + C_s]
  DiffTensor aux_logits;  // [B, N]
};

PooledPrediction pool_and_classify(const BoundAmr& amr, const DiffTensor& dense,
                                   const DiffTensor& sparse);

// Mean over every non-batch, non-channel axis: [B, C, ...] -> [B, C].
DiffTensor global_average_pool(const DiffTensor& features);

struct MeanWeights {
  double dense = 0.0;
  double sparse = 0.0;
};

MeanWeights mean_weights(const AmrModule& amr);

// Mean weight of each channel of a [1, C, ...] weight matrix.
std::vector<double> channel_means(const Tensor& weight);

}  // namespace amrkit
