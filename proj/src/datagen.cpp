#include "amrkit/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "amrkit/io.hpp"
#include "amrkit/rng.hpp"

namespace amrkit {

using nlohmann::json;

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  Shape sr{indices.size()};
  sr.insert(sr.end(), data.dense_shape.begin(), data.dense_shape.end());
  Shape ss{indices.size()};
  ss.insert(ss.end(), data.sparse_shape.begin(), data.sparse_shape.end());
  Batch b{Tensor(sr), Tensor(ss), {}};
  const std::size_t dr = shape_numel(data.dense_shape);
  const std::size_t ds = shape_numel(data.sparse_shape);
  b.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const ModalPair& p = data.samples.at(indices[i]);
    std::copy(p.dense.storage().begin(), p.dense.storage().end(),
              b.x_r.storage().begin() + static_cast<std::ptrdiff_t>(i * dr));
    std::copy(p.sparse.storage().begin(), p.sparse.storage().end(),
              b.x_s.storage().begin() + static_cast<std::ptrdiff_t>(i * ds));
    b.labels.push_back(p.label);
  }
  return b;
}

Batch full_batch(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(data, idx);
}

namespace {

// Largest power of two dividing n.
std::size_t pow2_factor(std::size_t n) { return n & (~n + 1); }

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("datagen: num_classes must be >= 2");
  if (spec.samples_per_class == 0) {
    throw std::invalid_argument("datagen: samples_per_class must be >= 1");
  }
  if (spec.dense_shape.size() != 4 || shape_numel(spec.dense_shape) == 0) {
    throw std::invalid_argument("datagen: dense_shape must be a non-empty [C,T,H,W]");
  }
  if (spec.sparse_shape.size() != 3 || shape_numel(spec.sparse_shape) == 0) {
    throw std::invalid_argument("datagen: sparse_shape must be a non-empty [C,T,V]");
  }
  const std::size_t positions = spec.dense_shape[2] * spec.dense_shape[3];
  if (pow2_factor(positions) <= spec.num_classes) {
    throw std::invalid_argument(
        "datagen: H*W needs a power-of-two factor above num_classes for orthogonal patterns");
  }
  if (spec.num_classes > spec.sparse_shape[0] * spec.sparse_shape[2]) {
    throw std::invalid_argument("datagen: more classes than sparse (channel, vertex) slots");
  }
  if (spec.dense_noise < 0 || spec.dense_nuisance < 0 || spec.sparse_noise < 0) {
    throw std::invalid_argument("datagen: noise levels must be non-negative");
  }
  if (!(spec.signal_jitter >= 0.0 && spec.signal_jitter <= 1.0)) {
    throw std::invalid_argument("datagen: signal_jitter must lie in [0, 1]");
  }
  if (!(spec.modality_dropout >= 0.0 && spec.modality_dropout <= 0.5)) {
    throw std::invalid_argument("datagen: modality_dropout must lie in [0, 0.5]");
  }
}

Tensor dense_templates(const SynthSpec& spec) {
  validate(spec);
  const std::size_t c_in = spec.dense_shape[0], frames = spec.dense_shape[1];
  const std::size_t positions = spec.dense_shape[2] * spec.dense_shape[3];
  Shape s{spec.num_classes};
  s.insert(s.end(), spec.dense_shape.begin(), spec.dense_shape.end());
  Tensor t(s);
  std::size_t i = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const std::size_t mask = c + 1;  // Walsh index
    for (std::size_t ch = 0; ch < c_in; ++ch) {
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t p = 0; p < positions; ++p) {
          t[i++] = (std::popcount(p & mask) % 2 == 0) ? 1.0 : -1.0;
        }
      }
    }
  }
  return t;
}

Tensor sparse_templates(const SynthSpec& spec) {
  validate(spec);
  const std::size_t c_in = spec.sparse_shape[0], frames = spec.sparse_shape[1];
  const std::size_t verts = spec.sparse_shape[2];
  Shape s{spec.num_classes};
  s.insert(s.end(), spec.sparse_shape.begin(), spec.sparse_shape.end());
  Tensor t(s);
  const std::size_t per = shape_numel(spec.sparse_shape);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const std::size_t v = c % verts;
    const std::size_t ch = (c / verts) % c_in;
    for (std::size_t f = 0; f < frames; ++f) t[c * per + (ch * frames + f) * verts + v] = 1.0;
  }
  return t;
}

Dataset generate(const SynthSpec& spec) {
  validate(spec);
  const Tensor dt = dense_templates(spec);
  const Tensor st = sparse_templates(spec);
  const std::size_t dr = shape_numel(spec.dense_shape);
  const std::size_t ds = shape_numel(spec.sparse_shape);
  const std::size_t c_in = spec.dense_shape[0];
  const std::size_t per_channel = dr / c_in;
  Dataset data{spec.dense_shape, spec.sparse_shape, spec.num_classes, {}};
  data.samples.reserve(spec.num_classes * spec.samples_per_class);
  std::size_t index = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t k = 0; k < spec.samples_per_class; ++k, ++index) {
      Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));
      ModalPair p{Tensor(spec.dense_shape), Tensor(spec.sparse_shape), static_cast<int>(c)};
      std::vector<double> offset(c_in);
      for (auto& o : offset) o = rng.normal(0.0, spec.dense_nuisance);
      double gain_r = rng.uniform(1.0 - spec.signal_jitter, 1.0 + spec.signal_jitter);
      double gain_s = rng.uniform(1.0 - spec.signal_jitter, 1.0 + spec.signal_jitter);
      const double drop = rng.uniform();
      if (drop < spec.modality_dropout) {
        gain_r = 0.0;
      } else if (drop < 2.0 * spec.modality_dropout) {
        gain_s = 0.0;
      }
      for (std::size_t i = 0; i < dr; ++i) {
        const double v = 0.5 + gain_r * spec.dense_signal * dt[c * dr + i] + offset[i / per_channel] +
                         rng.normal(0.0, spec.dense_noise);
        p.dense[i] = std::clamp(v, 0.0, 1.0);
      }
      for (std::size_t i = 0; i < ds; ++i) {
        p.sparse[i] = gain_s * spec.sparse_signal * st[c * ds + i] + rng.normal(0.0, spec.sparse_noise);
      }
      data.samples.push_back(std::move(p));
    }
  }
  return data;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
  }
  std::vector<bool> in_train(data.size(), false);
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.samples[i].label == static_cast<int>(c)) members.push_back(i);
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const auto perm = rng.permutation(members.size());
    const auto take =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < take; ++k) in_train[members[perm[k]]] = true;
  }
  Dataset train{data.dense_shape, data.sparse_shape, data.num_classes, {}};
  Dataset test = train;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (in_train[i] ? train : test).samples.push_back(data.samples[i]);
  }
  return {std::move(train), std::move(test)};
}

void save_dataset(const Dataset& data, const SynthSpec* spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json m;
  m["format"] = "amrkit-dataset-1";
  m["count"] = data.size();
  m["num_classes"] = data.num_classes;
  m["dense_shape"] = data.dense_shape;
  m["sparse_shape"] = data.sparse_shape;
  m["layout"] = "dense[count], sparse[count], labels[count]; little-endian float64";
  if (spec) {
    m["spec"] = {{"num_classes", spec->num_classes},
                 {"samples_per_class", spec->samples_per_class},
                 {"dense_shape", spec->dense_shape},
                 {"sparse_shape", spec->sparse_shape},
                 {"dense_signal", spec->dense_signal},
                 {"dense_noise", spec->dense_noise},
                 {"dense_nuisance", spec->dense_nuisance},
                 {"sparse_signal", spec->sparse_signal},
                 {"sparse_noise", spec->sparse_noise},
                 {"signal_jitter", spec->signal_jitter},
                 {"modality_dropout", spec->modality_dropout},
                 {"seed", spec->seed}};
  }
  std::string blob;
  for (const auto& p : data.samples) io::append_f64_le(blob, p.dense.data());
  for (const auto& p : data.samples) io::append_f64_le(blob, p.sparse.data());
  std::vector<double> labels;
  for (const auto& p : data.samples) labels.push_back(static_cast<double>(p.label));
  io::append_f64_le(blob, labels);
  io::write_file(dir / "dataset.json", m.dump(2) + "\n");
  io::write_file(dir / "dataset.bin", blob);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const json m = json::parse(io::read_file(dir / "dataset.json"));
  if (m.value("format", "") != "amrkit-dataset-1") {
    throw std::runtime_error("dataset " + dir.string() + ": unknown format");
  }
  Dataset data;
  data.dense_shape = m.at("dense_shape").get<Shape>();
  data.sparse_shape = m.at("sparse_shape").get<Shape>();
  data.num_classes = m.at("num_classes").get<std::size_t>();
  const auto count = m.at("count").get<std::size_t>();
  const std::string blob = io::read_file(dir / "dataset.bin");
  const std::size_t dr = shape_numel(data.dense_shape);
  const std::size_t ds = shape_numel(data.sparse_shape);
  const auto dense = io::read_f64_le(blob, 0, count * dr);
  const auto sparse = io::read_f64_le(blob, count * dr * 8, count * ds);
  const auto labels = io::read_f64_le(blob, count * (dr + ds) * 8, count);
  for (std::size_t i = 0; i < count; ++i) {
    ModalPair p{Tensor(data.dense_shape,
                       std::vector<double>(dense.begin() + static_cast<std::ptrdiff_t>(i * dr),
                                           dense.begin() + static_cast<std::ptrdiff_t>((i + 1) * dr))),
                Tensor(data.sparse_shape,
                       std::vector<double>(sparse.begin() + static_cast<std::ptrdiff_t>(i * ds),
                                           sparse.begin() + static_cast<std::ptrdiff_t>((i + 1) * ds))),
                static_cast<int>(labels[i])};
    if (p.label < 0 || p.label >= static_cast<int>(data.num_classes)) {
      throw std::runtime_error("dataset " + dir.string() + ": label out of range");
    }
    data.samples.push_back(std::move(p));
  }
  return data;
}

}  // namespace amrkit
