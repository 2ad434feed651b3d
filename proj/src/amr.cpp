#include "amrkit/amr.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <stdexcept>

namespace amrkit {

namespace {

Shape with_unit_batch(const Shape& per_sample) {
  Shape s{1};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

void check_bound(const char* what, const DiffTensor& features, const DiffTensor& weight) {
  const Shape& f = features.shape();
  const Shape& w = weight.shape();
  if (f.size() != w.size() || f.empty() || !std::equal(f.begin() + 1, f.end(), w.begin() + 1)) {
    throw std::invalid_argument(std::string("reweight: ") + what + " features " + shape_str(f) +
                                " do not match weight matrix " + shape_str(w));
  }
}

}  // namespace

AmrModule AmrModule::create(const Shape& dense_feature, const Shape& sparse_feature,
                            std::size_t num_classes) {
  if (dense_feature.size() != 4 || sparse_feature.size() != 3) {
    throw std::invalid_argument("AmrModule: expected dense [C,T,H,W] and sparse [C,T,V] shapes, got " +
                                shape_str(dense_feature) + " and " + shape_str(sparse_feature));
  }
  if (num_classes < 2) throw std::invalid_argument("AmrModule: need at least two classes");
  AmrModule m;
  m.w_r = Tensor::ones(with_unit_batch(dense_feature));
  m.w_s = Tensor::ones(with_unit_batch(sparse_feature));
  m.aux_weight = Tensor::zeros({dense_feature[0] + sparse_feature[0], num_classes});
  m.aux_bias = Tensor::zeros({1, num_classes});
  return m;
}

BoundAmr bind(Tape& tape, const AmrModule& amr, bool requires_grad) {
  return {tape.leaf(amr.w_r, requires_grad), tape.leaf(amr.w_s, requires_grad),
          tape.leaf(amr.aux_weight, requires_grad), tape.leaf(amr.aux_bias, requires_grad)};
}

ReweightedFeatures reweight(const BoundAmr& amr, const DiffTensor& dense,
                            const DiffTensor& sparse) {
  check_bound("dense", dense, amr.w_r);
  check_bound("sparse", sparse, amr.w_s);
  return {ops::mul(dense, ops::broadcast(amr.w_r, dense.shape())),
          ops::mul(sparse, ops::broadcast(amr.w_s, sparse.shape()))};
}

DiffTensor global_average_pool(const DiffTensor& features) {
  const std::size_t rank = features.shape().size();
  if (rank < 3) {
    throw std::invalid_argument("global_average_pool: need [B, C, ...], got " +
                                shape_str(features.shape()));
  }
  std::vector<std::size_t> axes(rank - 2);
  std::iota(axes.begin(), axes.end(), std::size_t{2});
  return ops::mean_over_axes(features, axes);
}

PooledPrediction pool_and_classify(const BoundAmr& amr, const DiffTensor& dense,
                                   const DiffTensor& sparse) {
  check_bound("dense", dense, amr.w_r);
  check_bound("sparse", sparse, amr.w_s);
  PooledPrediction out;
  out.z_r = global_average_pool(dense);
  out.z_s = global_average_pool(sparse);
  const DiffTensor parts[] = {out.z_r, out.z_s};
  out.z_mul = ops::concat(parts, 1);
  out.aux_logits = ops::add_row(ops::matmul(out.z_mul, amr.aux_weight), amr.aux_bias);
  return out;
}

MeanWeights mean_weights(const AmrModule& amr) {
  auto mean = [](const Tensor& t) {
    double s = 0.0;
    for (double v : t.storage()) s += v;
    return s / static_cast<double>(t.numel());
  };
  return {mean(amr.w_r), mean(amr.w_s)};
}

std::vector<double> channel_means(const Tensor& weight) {
  if (weight.rank() < 2 || weight.dim(0) != 1) {
    throw std::invalid_argument("channel_means: expected [1, C, ...], got " +
                                shape_str(weight.shape()));
  }
  const std::size_t channels = weight.dim(1);
  const std::size_t per = weight.numel() / channels;
  std::vector<double> out(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += weight[c * per + i];
    out[c] = s / static_cast<double>(per);
  }
  return out;
}

}  // namespace amrkit
