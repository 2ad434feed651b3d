#include "amrkit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace amrkit {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::ElementwiseMul: return "elementwise_mul";
    case OpKind::Matmul: return "matmul";
    case OpKind::Relu: return "relu";
    case OpKind::Broadcast: return "broadcast";
    case OpKind::Reshape: return "reshape";
    case OpKind::Permute: return "permute";
    case OpKind::ConcatAlongAxis: return "concat_along_axis";
    case OpKind::MeanOverAxes: return "mean_over_axes";
    case OpKind::Sum: return "sum";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::ClassMargin: return "class_margin";
    case OpKind::ScalarMul: return "scalar_mul";
    case OpKind::ScalarAffine: return "scalar_affine";
    case OpKind::Clamp: return "clamp";
  }
  return "unknown";
}

namespace detail {

using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(const Tensor& out_grad, std::span<const NodePtr> parents)>;

struct Record {
  NodePtr out;
  std::vector<NodePtr> parents;
  BackwardFn backward;
};

struct TapeCore {
  bool recording = true;
  bool active = true;
  bool backward_done = false;
  std::uint64_t next_id = 0;
  std::vector<Record> records;
  std::vector<NodePtr> grad_leaves;
};

namespace {
Tensor& grad_of(Node& n) {
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}
}  // namespace

}  // namespace detail

using detail::NodePtr;

// Single construction point for op outputs; owns the tape bookkeeping.
struct OpAccess {
  static const NodePtr& node(const DiffTensor& t, OpKind kind) {
    if (!t.node_) {
      throw std::invalid_argument(std::string(op_name(kind)) + ": undefined input tensor");
    }
    if (!t.node_->core || !t.node_->core->active) {
      throw std::logic_error(std::string(op_name(kind)) +
                             ": input tensor does not belong to an active tape");
    }
    return t.node_;
  }

  static DiffTensor make(OpKind kind, Tensor value, std::vector<NodePtr> parents,
                         detail::BackwardFn fn) {
    const auto& core = parents.front()->core;
    for (const auto& p : parents) {
      if (p->core != core) {
        throw std::logic_error(std::string(op_name(kind)) + ": inputs belong to different tapes");
      }
    }
    auto out = std::make_shared<detail::Node>();
    out->value = std::move(value);
    out->kind = kind;
    out->id = core->next_id++;
    out->core = core;
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    out->requires_grad = needs && core->recording;
    if (out->requires_grad) {
      core->records.push_back({out, std::move(parents), std::move(fn)});
    }
    return DiffTensor(out);
  }

  static DiffTensor make_leaf(const std::shared_ptr<detail::TapeCore>& core, Tensor value,
                              bool requires_grad) {
    auto out = std::make_shared<detail::Node>();
    out->value = std::move(value);
    out->kind = OpKind::Leaf;
    out->id = core->next_id++;
    out->core = core;
    out->requires_grad = requires_grad && core->recording;
    if (out->requires_grad) core->grad_leaves.push_back(out);
    return DiffTensor(out);
  }

  static const std::shared_ptr<detail::TapeCore>& core(const Tape& t) { return t.core_; }
  static const NodePtr& raw(const DiffTensor& t) { return t.node_; }
};

// ---------------------------------------------------------------------------
// DiffTensor

const Tensor& DiffTensor::value() const {
  if (!node_) throw std::logic_error("DiffTensor: undefined tensor");
  return node_->value;
}

double DiffTensor::item() const {
  const Tensor& v = value();
  if (v.numel() != 1) {
    throw std::invalid_argument("item: tensor of shape " + shape_str(v.shape()) +
                                " is not a scalar");
  }
  return v[0];
}

bool DiffTensor::requires_grad() const { return node_ && node_->requires_grad; }
bool DiffTensor::has_grad() const { return node_ && node_->has_grad; }

const Tensor& DiffTensor::grad() const {
  if (!node_ || !node_->has_grad) {
    throw std::logic_error("DiffTensor: no gradient has been computed for this tensor");
  }
  return node_->grad;
}

std::uint64_t DiffTensor::id() const {
  if (!node_) throw std::logic_error("DiffTensor: undefined tensor");
  return node_->id;
}

OpKind DiffTensor::kind() const {
  if (!node_) throw std::logic_error("DiffTensor: undefined tensor");
  return node_->kind;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(bool recording) : core_(std::make_shared<detail::TapeCore>()) {
  core_->recording = recording;
}

Tape::~Tape() {
  core_->active = false;
  // Records hold the nodes, and nodes hold the core.
  core_->records.clear();
  core_->grad_leaves.clear();
}

bool Tape::recording() const { return core_->recording; }
std::size_t Tape::size() const { return core_->records.size(); }

DiffTensor Tape::leaf(Tensor value, bool requires_grad) {
  return OpAccess::make_leaf(core_, std::move(value), requires_grad);
}

void Tape::backward(const DiffTensor& loss) {
  const NodePtr& root = OpAccess::raw(loss);
  if (!root) throw std::invalid_argument("backward: undefined loss tensor");
  if (root->core != core_) throw std::logic_error("backward: loss belongs to a different tape");
  if (!core_->recording) throw std::logic_error("backward: tape was created without recording");
  if (core_->backward_done) {
    throw std::logic_error("backward: tape already consumed; record the computation again");
  }
  if (root->value.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_str(root->value.shape()));
  }
  core_->backward_done = true;
  if (root->requires_grad) {
    detail::grad_of(*root).fill(1.0);
    for (auto it = core_->records.rbegin(); it != core_->records.rend(); ++it) {
      if (!it->out->has_grad) continue;
      it->backward(it->out->grad, it->parents);
    }
  }
  for (const auto& leaf : core_->grad_leaves) detail::grad_of(*leaf);
}

// ---------------------------------------------------------------------------
// ops

namespace ops {
namespace {

using detail::grad_of;

[[noreturn]] void shape_error(OpKind kind, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op_name(kind)) + ": shape mismatch " + shape_str(a) +
                              " vs " + shape_str(b));
}

void check_labels(OpKind kind, const Shape& logits, std::span<const int> labels) {
  if (logits.size() != 2) {
    throw std::invalid_argument(std::string(op_name(kind)) + ": logits must be [B,N], got " +
                                shape_str(logits));
  }
  if (labels.size() != logits[0]) {
    throw std::invalid_argument(std::string(op_name(kind)) + ": " +
                                std::to_string(labels.size()) + " labels for batch of " +
                                std::to_string(logits[0]));
  }
  const int n = static_cast<int>(logits[1]);
  for (int y : labels) {
    if (y < 0 || y >= n) {
      throw std::invalid_argument(std::string(op_name(kind)) + ": label " + std::to_string(y) +
                                  " out of range [0, " + std::to_string(n) + ")");
    }
  }
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// Runner-up index for the margin: argmax over i != y, lowest index on ties.
std::size_t runner_up(std::span<const double> row, std::size_t y) {
  std::size_t best = (y == 0) ? 1 : 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i == y) continue;
    if (row[i] > row[best]) best = i;
  }
  return best;
}

DiffTensor elementwise(OpKind kind, const DiffTensor& a, const DiffTensor& b) {
  const NodePtr& na = OpAccess::node(a, kind);
  const NodePtr& nb = OpAccess::node(b, kind);
  if (na->value.shape() != nb->value.shape()) shape_error(kind, na->value.shape(), nb->value.shape());
  Tensor out(na->value.shape());
  const std::size_t n = out.numel();
  const auto& x = na->value.storage();
  const auto& y = nb->value.storage();
  auto& o = out.storage();
  switch (kind) {
    case OpKind::Add: for (std::size_t i = 0; i < n; ++i) o[i] = x[i] + y[i]; break;
    case OpKind::Sub: for (std::size_t i = 0; i < n; ++i) o[i] = x[i] - y[i]; break;
    default: for (std::size_t i = 0; i < n; ++i) o[i] = x[i] * y[i]; break;
  }
  return OpAccess::make(kind, std::move(out), {na, nb},
                        [kind](const Tensor& g, std::span<const NodePtr> p) {
                          const std::size_t n = g.numel();
                          for (std::size_t side = 0; side < 2; ++side) {
                            if (!p[side]->requires_grad) continue;
                            auto& dst = grad_of(*p[side]).storage();
                            if (kind == OpKind::ElementwiseMul) {
                              const auto& other = p[1 - side]->value.storage();
                              for (std::size_t i = 0; i < n; ++i) dst[i] += g[i] * other[i];
                            } else {
                              const double sign = (kind == OpKind::Sub && side == 1) ? -1.0 : 1.0;
                              for (std::size_t i = 0; i < n; ++i) dst[i] += sign * g[i];
                            }
                          }
                        });
}

}  // namespace

DiffTensor add(const DiffTensor& a, const DiffTensor& b) { return elementwise(OpKind::Add, a, b); }
DiffTensor sub(const DiffTensor& a, const DiffTensor& b) { return elementwise(OpKind::Sub, a, b); }
DiffTensor mul(const DiffTensor& a, const DiffTensor& b) {
  return elementwise(OpKind::ElementwiseMul, a, b);
}

DiffTensor matmul(const DiffTensor& a, const DiffTensor& b) {
  constexpr OpKind kind = OpKind::Matmul;
  const NodePtr& na = OpAccess::node(a, kind);
  const NodePtr& nb = OpAccess::node(b, kind);
  const Shape& sa = na->value.shape();
  const Shape& sb = nb->value.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) shape_error(kind, sa, sb);
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out(Shape{m, n});
  const double* A = na->value.storage().data();
  const double* B = nb->value.storage().data();
  double* C = out.storage().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return OpAccess::make(kind, std::move(out), {na, nb},
                        [m, k, n](const Tensor& g, std::span<const NodePtr> p) {
                          const double* G = g.storage().data();
                          if (p[0]->requires_grad) {
                            const double* B = p[1]->value.storage().data();
                            double* dA = grad_of(*p[0]).storage().data();
                            for (std::size_t i = 0; i < m; ++i) {
                              const double* grow = G + i * n;
                              for (std::size_t q = 0; q < k; ++q) {
                                const double* brow = B + q * n;
                                double acc = 0.0;
                                for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                dA[i * k + q] += acc;
                              }
                            }
                          }
                          if (p[1]->requires_grad) {
                            const double* A = p[0]->value.storage().data();
                            double* dB = grad_of(*p[1]).storage().data();
                            for (std::size_t i = 0; i < m; ++i) {
                              const double* grow = G + i * n;
                              for (std::size_t q = 0; q < k; ++q) {
                                const double av = A[i * k + q];
                                if (av == 0.0) continue;
                                double* drow = dB + q * n;
                                for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
                              }
                            }
                          }
                        });
}

DiffTensor relu(const DiffTensor& x) {
  constexpr OpKind kind = OpKind::Relu;
  const NodePtr& nx = OpAccess::node(x, kind);
  Tensor out(nx->value.shape());
  const auto& in = nx->value.storage();
  auto& o = out.storage();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
  return OpAccess::make(kind, std::move(out), {nx}, [](const Tensor& g, std::span<const NodePtr> p) {
    const auto& in = p[0]->value.storage();
    auto& d = grad_of(*p[0]).storage();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (in[i] > 0.0) d[i] += g[i];
    }
  });
}

DiffTensor broadcast(const DiffTensor& x, const Shape& shape) {
  constexpr OpKind kind = OpKind::Broadcast;
  const NodePtr& nx = OpAccess::node(x, kind);
  const Shape& s = nx->value.shape();
  if (nx->value.numel() == 1) {
    Tensor out(shape, nx->value[0]);
    return OpAccess::make(kind, std::move(out), {nx},
                          [](const Tensor& g, std::span<const NodePtr> p) {
                            double acc = 0.0;
                            for (double v : g.storage()) acc += v;
                            grad_of(*p[0])[0] += acc;
                          });
  }
  const bool leading = s.size() == shape.size() && !s.empty() && s[0] == 1 &&
                       std::equal(s.begin() + 1, s.end(), shape.begin() + 1);
  if (!leading) shape_error(kind, s, shape);
  const std::size_t row = nx->value.numel();
  const std::size_t reps = shape[0];
  Tensor out(shape);
  for (std::size_t r = 0; r < reps; ++r) {
    std::copy(nx->value.storage().begin(), nx->value.storage().end(),
              out.storage().begin() + static_cast<std::ptrdiff_t>(r * row));
  }
  return OpAccess::make(kind, std::move(out), {nx},
                        [row, reps](const Tensor& g, std::span<const NodePtr> p) {
                          auto& d = grad_of(*p[0]).storage();
                          for (std::size_t r = 0; r < reps; ++r) {
                            for (std::size_t i = 0; i < row; ++i) d[i] += g[r * row + i];
                          }
                        });
}

DiffTensor reshape(const DiffTensor& x, const Shape& shape) {
  constexpr OpKind kind = OpKind::Reshape;
  const NodePtr& nx = OpAccess::node(x, kind);
  if (shape_numel(shape) != nx->value.numel()) shape_error(kind, nx->value.shape(), shape);
  return OpAccess::make(kind, nx->value.reshaped(shape), {nx},
                        [](const Tensor& g, std::span<const NodePtr> p) {
                          auto& d = grad_of(*p[0]).storage();
                          for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
                        });
}

DiffTensor permute(const DiffTensor& x, std::span<const std::size_t> perm) {
  constexpr OpKind kind = OpKind::Permute;
  const NodePtr& nx = OpAccess::node(x, kind);
  const Shape& s = nx->value.shape();
  const std::size_t r = s.size();
  std::vector<bool> seen(r, false);
  bool valid = perm.size() == r;
  for (std::size_t i = 0; valid && i < r; ++i) {
    valid = perm[i] < r && !seen[perm[i]];
    if (valid) seen[perm[i]] = true;
  }
  if (!valid) {
    throw std::invalid_argument("permute: invalid axis permutation for shape " + shape_str(s));
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = s[perm[i]];
  const auto in_strides = strides_of(s);
  // src_index[j] for output flat index j
  std::vector<std::size_t> src(nx->value.numel());
  {
    std::vector<std::size_t> idx(r, 0);
    std::vector<std::size_t> step(r);
    for (std::size_t i = 0; i < r; ++i) step[i] = in_strides[perm[i]];
    std::size_t offset = 0;
    for (std::size_t j = 0; j < src.size(); ++j) {
      src[j] = offset;
      for (std::size_t ax = r; ax-- > 0;) {
        ++idx[ax];
        offset += step[ax];
        if (idx[ax] < out_shape[ax]) break;
        offset -= step[ax] * idx[ax];
        idx[ax] = 0;
      }
    }
  }
  Tensor out(out_shape);
  for (std::size_t j = 0; j < src.size(); ++j) out[j] = nx->value[src[j]];
  return OpAccess::make(kind, std::move(out), {nx},
                        [src = std::move(src)](const Tensor& g, std::span<const NodePtr> p) {
                          auto& d = grad_of(*p[0]).storage();
                          for (std::size_t j = 0; j < src.size(); ++j) d[src[j]] += g[j];
                        });
}

DiffTensor concat(std::span<const DiffTensor> parts, std::size_t axis) {
  constexpr OpKind kind = OpKind::ConcatAlongAxis;
  if (parts.empty()) throw std::invalid_argument("concat_along_axis: no inputs");
  std::vector<NodePtr> nodes;
  nodes.reserve(parts.size());
  for (const auto& t : parts) nodes.push_back(OpAccess::node(t, kind));
  const Shape& s0 = nodes[0]->value.shape();
  if (axis >= s0.size()) {
    throw std::invalid_argument("concat_along_axis: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(s0));
  }
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& n : nodes) {
    const Shape& s = n->value.shape();
    if (s.size() != s0.size()) shape_error(kind, s0, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != s0[i]) shape_error(kind, s0, s);
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  std::vector<std::size_t> widths;
  for (const auto& n : nodes) widths.push_back(n->value.shape()[axis] * inner);
  const std::size_t out_width = out_shape[axis] * inner;
  Tensor out(out_shape);
  std::size_t col = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto& src = nodes[k]->value.storage();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * widths[k]), widths[k],
                  out.storage().begin() + static_cast<std::ptrdiff_t>(o * out_width + col));
    }
    col += widths[k];
  }
  return OpAccess::make(kind, std::move(out), std::move(nodes),
                        [widths, outer, out_width](const Tensor& g, std::span<const NodePtr> p) {
                          std::size_t col = 0;
                          for (std::size_t k = 0; k < p.size(); ++k) {
                            if (p[k]->requires_grad) {
                              auto& d = grad_of(*p[k]).storage();
                              for (std::size_t o = 0; o < outer; ++o) {
                                for (std::size_t i = 0; i < widths[k]; ++i) {
                                  d[o * widths[k] + i] += g[o * out_width + col + i];
                                }
                              }
                            }
                            col += widths[k];
                          }
                        });
}

DiffTensor mean_over_axes(const DiffTensor& x, std::span<const std::size_t> axes, bool keep_dims) {
  constexpr OpKind kind = OpKind::MeanOverAxes;
  const NodePtr& nx = OpAccess::node(x, kind);
  const Shape& s = nx->value.shape();
  std::vector<bool> reduce(s.size(), false);
  for (std::size_t a : axes) {
    if (a >= s.size() || reduce[a]) {
      throw std::invalid_argument("mean_over_axes: invalid axis list for shape " + shape_str(s));
    }
    reduce[a] = true;
  }
  Shape kept_shape(s.size());
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    kept_shape[i] = reduce[i] ? 1 : s[i];
    if (reduce[i]) {
      count *= s[i];
      if (keep_dims) out_shape.push_back(1);
    } else {
      out_shape.push_back(s[i]);
    }
  }
  if (count == 0) throw std::invalid_argument("mean_over_axes: reducing over an empty axis");
  const auto kept_strides = strides_of(kept_shape);
  std::vector<std::size_t> dst(nx->value.numel());
  {
    std::vector<std::size_t> idx(s.size(), 0);
    for (std::size_t j = 0; j < dst.size(); ++j) {
      std::size_t o = 0;
      for (std::size_t ax = 0; ax < s.size(); ++ax) {
        if (!reduce[ax]) o += idx[ax] * kept_strides[ax];
      }
      dst[j] = o;
      for (std::size_t ax = s.size(); ax-- > 0;) {
        if (++idx[ax] < s[ax]) break;
        idx[ax] = 0;
      }
    }
  }
  Tensor out(out_shape);
  for (std::size_t j = 0; j < dst.size(); ++j) out[dst[j]] += nx->value[j];
  const double inv = 1.0 / static_cast<double>(count);
  for (auto& v : out.storage()) v *= inv;
  return OpAccess::make(kind, std::move(out), {nx},
                        [dst = std::move(dst), inv](const Tensor& g, std::span<const NodePtr> p) {
                          auto& d = grad_of(*p[0]).storage();
                          for (std::size_t j = 0; j < dst.size(); ++j) d[j] += g[dst[j]] * inv;
                        });
}

DiffTensor sum(const DiffTensor& x) {
  constexpr OpKind kind = OpKind::Sum;
  const NodePtr& nx = OpAccess::node(x, kind);
  double acc = 0.0;
  for (double v : nx->value.storage()) acc += v;
  return OpAccess::make(kind, Tensor::scalar(acc), {nx},
                        [](const Tensor& g, std::span<const NodePtr> p) {
                          for (auto& d : grad_of(*p[0]).storage()) d += g[0];
                        });
}

DiffTensor softmax_cross_entropy(const DiffTensor& logits, std::span<const int> labels) {
  constexpr OpKind kind = OpKind::SoftmaxCrossEntropy;
  const NodePtr& nl = OpAccess::node(logits, kind);
  check_labels(kind, nl->value.shape(), labels);
  const std::size_t b = nl->value.shape()[0], n = nl->value.shape()[1];
  if (b == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  Tensor probs(Shape{b, n});
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const double* z = nl->value.storage().data() + r * n;
    double* pr = probs.storage().data() + r * n;
    const double m = *std::max_element(z, z + n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (pr[i] = std::exp(z[i] - m));
    for (std::size_t i = 0; i < n; ++i) pr[i] /= s;
    total += m + std::log(s) - z[labels[r]];
  }
  std::vector<int> y(labels.begin(), labels.end());
  return OpAccess::make(
      kind, Tensor::scalar(total / static_cast<double>(b)), {nl},
      [probs = std::move(probs), y = std::move(y), b, n](const Tensor& g,
                                                          std::span<const NodePtr> p) {
        auto& d = grad_of(*p[0]).storage();
        const double scale = g[0] / static_cast<double>(b);
        for (std::size_t r = 0; r < b; ++r) {
          for (std::size_t i = 0; i < n; ++i) {
            const double onehot = (static_cast<int>(i) == y[r]) ? 1.0 : 0.0;
            d[r * n + i] += scale * (probs[r * n + i] - onehot);
          }
        }
      });
}

DiffTensor class_margin(const DiffTensor& logits, std::span<const int> labels) {
  constexpr OpKind kind = OpKind::ClassMargin;
  const NodePtr& nl = OpAccess::node(logits, kind);
  check_labels(kind, nl->value.shape(), labels);
  const std::size_t b = nl->value.shape()[0], n = nl->value.shape()[1];
  if (b == 0) throw std::invalid_argument("class_margin: empty batch");
  if (n < 2) throw std::invalid_argument("class_margin: need at least two classes");
  std::vector<std::size_t> rival(b);
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    std::span<const double> row(nl->value.storage().data() + r * n, n);
    const auto y = static_cast<std::size_t>(labels[r]);
    rival[r] = runner_up(row, y);
    total += row[rival[r]] - row[y];
  }
  std::vector<int> y(labels.begin(), labels.end());
  return OpAccess::make(kind, Tensor::scalar(total / static_cast<double>(b)), {nl},
                        [rival = std::move(rival), y = std::move(y), b, n](
                            const Tensor& g, std::span<const NodePtr> p) {
                          auto& d = grad_of(*p[0]).storage();
                          const double scale = g[0] / static_cast<double>(b);
                          for (std::size_t r = 0; r < b; ++r) {
                            d[r * n + rival[r]] += scale;
                            d[r * n + static_cast<std::size_t>(y[r])] -= scale;
                          }
                        });
}

DiffTensor scalar_mul(const DiffTensor& x, double s) {
  constexpr OpKind kind = OpKind::ScalarMul;
  const NodePtr& nx = OpAccess::node(x, kind);
  Tensor out = nx->value;
  for (auto& v : out.storage()) v *= s;
  return OpAccess::make(kind, std::move(out), {nx}, [s](const Tensor& g, std::span<const NodePtr> p) {
    auto& d = grad_of(*p[0]).storage();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * g[i];
  });
}

DiffTensor scalar_affine(const DiffTensor& x, double s, double c) {
  constexpr OpKind kind = OpKind::ScalarAffine;
  const NodePtr& nx = OpAccess::node(x, kind);
  Tensor out = nx->value;
  for (auto& v : out.storage()) v = s * v + c;
  return OpAccess::make(kind, std::move(out), {nx}, [s](const Tensor& g, std::span<const NodePtr> p) {
    auto& d = grad_of(*p[0]).storage();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * g[i];
  });
}

DiffTensor clamp(const DiffTensor& x, double lo, double hi) {
  constexpr OpKind kind = OpKind::Clamp;
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lower bound exceeds upper bound");
  const NodePtr& nx = OpAccess::node(x, kind);
  Tensor out = nx->value;
  for (auto& v : out.storage()) v = std::min(std::max(v, lo), hi);
  return OpAccess::make(kind, std::move(out), {nx},
                        [lo, hi](const Tensor& g, std::span<const NodePtr> p) {
                          const auto& in = p[0]->value.storage();
                          auto& d = grad_of(*p[0]).storage();
                          for (std::size_t i = 0; i < d.size(); ++i) {
                            if (in[i] >= lo && in[i] <= hi) d[i] += g[i];
                          }
                        });
}

DiffTensor add_row(const DiffTensor& a, const DiffTensor& bias) {
  return add(a, broadcast(bias, a.shape()));
}

}  // namespace ops

std::vector<double> cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw std::invalid_argument("cross_entropy_per_sample: logits " + shape_str(logits.shape()) +
                                " do not match " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = logits.dim(0), n = logits.dim(1);
  std::vector<double> out(b);
  for (std::size_t r = 0; r < b; ++r) {
    const double* z = logits.storage().data() + r * n;
    const double m = *std::max_element(z, z + n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(z[i] - m);
    out[r] = m + std::log(s) - z[labels[r]];
  }
  return out;
}

std::vector<double> class_margin_per_sample(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || logits.dim(1) < 2) {
    throw std::invalid_argument("class_margin_per_sample: bad logits shape " +
                                shape_str(logits.shape()));
  }
  const std::size_t b = logits.dim(0), n = logits.dim(1);
  std::vector<double> out(b);
  for (std::size_t r = 0; r < b; ++r) {
    std::span<const double> row(logits.storage().data() + r * n, n);
    const auto y = static_cast<std::size_t>(labels[r]);
    out[r] = row[ops::runner_up(row, y)] - row[y];
  }
  return out;
}

}  // namespace amrkit
