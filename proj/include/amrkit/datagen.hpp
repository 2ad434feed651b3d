#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "amrkit/tensor.hpp"

namespace amrkit {

struct ModalPair {
  Tensor dense;   // [C_in, T_R, H, W]
  Tensor sparse;  // [C_in, T_s, V]
  int label = 0;
};

struct Dataset {
  Shape dense_shape;
  Shape sparse_shape;
  std::size_t num_classes = 0;
  std::vector<ModalPair> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

struct Batch {
  Tensor x_r;  // [B, ...dense_shape]
  Tensor x_s;  // [B, ...sparse_shape]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);
Batch full_batch(const Dataset& data);

// Two-modality classification task with a built-in robustness gap.
//
// Dense sample: 0.5 + dense_signal * walsh_c + per-channel brightness offset
// (stddev dense_nuisance) + gaussian noise (dense_noise), clipped to [0, 1].
// walsh_c is a +-1 Walsh pattern over the spatial positions of each frame, so
// the class evidence is spread thinly over every entry.
//
// Sparse sample: sparse_signal on the T entries of one (channel, vertex) slot
// owned by the class + gaussian noise (sparse_noise). Unclipped.
//
// Both signal amplitudes are scaled by the per-sample gains described at
// signal_jitter and modality_dropout.
//
// Templates of different classes are orthogonal. Dense evidence whose scaled
// amplitude falls below an L-inf budget can be erased entirely; at the defaults
// (0.04 against 8/255) only low-gain samples lose it. Sparse evidence well
// above the budget survives.
struct SynthSpec {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 200;
  Shape dense_shape{3, 4, 8, 8};
  Shape sparse_shape{3, 4, 5};
  double dense_signal = 0.04;
  double dense_noise = 0.05;
  double dense_nuisance = 0.1;
  double sparse_signal = 0.4;
  double sparse_noise = 0.04;
  // Per-sample signal strength: each modality's amplitude is scaled by an
  // independent U(1 - signal_jitter, 1 + signal_jitter) draw.
  double signal_jitter = 0.5;
  // Probability that a sample carries no dense class signal, and separately
  // (exclusive) no sparse class signal. Forces a fused model to use both.
  double modality_dropout = 0.15;
  std::uint64_t seed = 0;

  bool operator==(const SynthSpec&) const = default;
};

void validate(const SynthSpec& spec);

// Noise-free class templates, [N, ...dense_shape] and [N, ...sparse_shape].
Tensor dense_templates(const SynthSpec& spec);
Tensor sparse_templates(const SynthSpec& spec);

// Samples are class-major (all of class 0, then class 1, ...). Sample i draws
// from its own stream derive_seed(seed, i).
Dataset generate(const SynthSpec& spec);

// Stratified, disjoint, exhaustive; both halves keep the original order.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

// Directory layout: dataset.json manifest + dataset.bin (little-endian float64:
// all dense tensors, then all sparse tensors, then the labels, in sample order).
void save_dataset(const Dataset& data, const SynthSpec* spec, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace amrkit
