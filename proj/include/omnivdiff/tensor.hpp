#pragma once

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "omnivdiff/rng.hpp"

namespace ovd {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

inline void check_shape_valid(const Shape& shape) {
  for (int64_t e : shape) {
    if (e < 1) throw std::invalid_argument("tensor extent must be >= 1, got shape " + shape_str(shape));
  }
}

// Thread-local switch for tape recording. Off means pure forward evaluation.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev_; }
  bool prev_;
};

template <typename T>
struct Node {
  int64_t size = 0;
  bool is_leaf = false;
  std::vector<T> grad;  // persistent for leaves, transient otherwise
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(const std::vector<T>&)> backprop;
};

// Dense row-major tensor (last axis fastest) with a reverse-mode tape.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)) {
    check_shape_valid(shape_);
    if (numel(shape_) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("data length does not match shape " + shape_str(shape_));
    data_ = std::make_shared<std::vector<T>>(std::move(data));
  }

  static Tensor zeros(Shape shape) {
    check_shape_valid(shape);
    int64_t n = numel(shape);
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<T>>(n, T(0));
    return t;
  }

  static Tensor full(Shape shape, T value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
  }

  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  // A differentiable leaf: owns a persistent gradient buffer.
  static Tensor leaf(Shape shape, std::vector<T> data) {
    Tensor t(std::move(shape), std::move(data));
    t.node_ = std::make_shared<Node<T>>();
    t.node_->size = t.size();
    t.node_->is_leaf = true;
    t.node_->grad.assign(t.size(), T(0));
    return t;
  }

  const Shape& shape() const { return shape_; }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
  int64_t dim(size_t i) const { return shape_[i]; }
  size_t rank() const { return shape_.size(); }

  std::vector<T>& data() { return *data_; }
  const std::vector<T>& data() const { return *data_; }
  T item() const {
    if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape_));
    return (*data_)[0];
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  bool tracked() const { return node_ != nullptr; }

  std::vector<T>& grad() {
    if (!node_ || !node_->is_leaf) throw std::logic_error("grad() requires a leaf tensor");
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    if (!node_ || !node_->is_leaf) throw std::logic_error("grad() requires a leaf tensor");
    return node_->grad;
  }
  void zero_grad() {
    if (node_) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  // Detached view sharing the same buffer.
  Tensor detach() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
  }

  void attach_node(std::shared_ptr<Node<T>> node) { node_ = std::move(node); }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> make_node(int64_t size, std::vector<std::shared_ptr<Node<T>>> parents,
                                   std::function<void(const std::vector<T>&)> backprop) {
  auto node = std::make_shared<Node<T>>();
  node->size = size;
  node->parents = std::move(parents);
  node->backprop = std::move(backprop);
  return node;
}

// Records a node on `out` when grad mode is on and any input is tracked.
// `backprop` receives out-grad and must accumulate into captured parent grads.
template <typename T, typename F>
void record(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs, F&& backprop) {
  if (!grad_mode()) return;
  std::vector<std::shared_ptr<Node<T>>> parents;
  for (const Tensor<T>* in : inputs)
    if (in->tracked()) parents.push_back(in->node());
  if (parents.empty()) return;
  out.attach_node(make_node<T>(out.size(), std::move(parents), std::move(backprop)));
}

template <typename T>
std::vector<T>* grad_of(const Tensor<T>& t) {
  return t.tracked() ? &t.node()->grad : nullptr;
}

// Trailing-axes broadcast: the lower-rank operand must equal the trailing
// axes of the higher-rank one and is stretched over the leading axes.
inline void check_broadcast(const Shape& hi, const Shape& lo) {
  if (lo.size() > hi.size()) throw std::invalid_argument("broadcast rank order violated");
  size_t off = hi.size() - lo.size();
  for (size_t i = 0; i < lo.size(); ++i)
    if (hi[off + i] != lo[i])
      throw std::invalid_argument("shapes not broadcastable: " + shape_str(hi) + " vs " + shape_str(lo));
}

}  // namespace detail

// ---- elementwise binary ops with trailing broadcast ----

template <typename T, typename FwdOp, typename BwdA, typename BwdB>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, FwdOp fwd, BwdA bwd_a, BwdB bwd_b,
                    const char* name) {
  const bool a_hi = a.rank() >= b.rank();
  const Tensor<T>& hi = a_hi ? a : b;
  const Tensor<T>& lo = a_hi ? b : a;
  detail::check_broadcast(hi.shape(), lo.shape());
  int64_t n = hi.size();
  int64_t m = lo.size();
  if (m == 0 || n % m != 0)
    throw std::invalid_argument(std::string(name) + ": incompatible sizes");
  Tensor<T> out = Tensor<T>::zeros(hi.shape());
  const T* ha = hi.data().data();
  const T* la = lo.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < n; ++i) {
    T x = ha[i], y = la[i % m];
    o[i] = a_hi ? fwd(x, y) : fwd(y, x);
  }
  auto an = a.node();
  auto bn = b.node();
  auto ad = a.data();  // copies keep forward values alive for the backward pass
  auto bd = b.data();
  detail::record(out, {&a, &b}, [=](const std::vector<T>& og) {
    int64_t nn = static_cast<int64_t>(og.size());
    int64_t mm = a_hi ? static_cast<int64_t>(bd.size()) : static_cast<int64_t>(ad.size());
    for (int64_t i = 0; i < nn; ++i) {
      T av = a_hi ? ad[i] : ad[i % mm];
      T bv = a_hi ? bd[i % mm] : bd[i];
      if (an) an->grad[a_hi ? i : i % mm] += og[i] * bwd_a(av, bv);
      if (bn) bn->grad[a_hi ? i % mm : i] += og[i] * bwd_b(av, bv);
    }
  });
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); },
      "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); },
      "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; },
      "mul");
}

// ---- scalar ops ----

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
  auto an = a.node();
  detail::record(out, {&a}, [an, c](const std::vector<T>& og) {
    for (size_t i = 0; i < og.size(); ++i) an->grad[i] += og[i] * c;
  });
  return out;
}

template <typename T>
Tensor<T> scalar_add(const Tensor<T>& a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + c;
  auto an = a.node();
  detail::record(out, {&a}, [an](const std::vector<T>& og) {
    for (size_t i = 0; i < og.size(); ++i) an->grad[i] += og[i];
  });
  return out;
}

// ---- matmul (batched over leading axes; rhs may be rank-2 shared) ----

namespace detail {
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a, const float* b,
                 float* c, float beta) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0f, a, trans_a ? m : k, b,
              trans_b ? k : n, beta, c, n);
}
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b,
                 double* c, double beta) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a, trans_a ? m : k, b,
              trans_b ? k : n, beta, c, n);
}
}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) throw std::invalid_argument("matmul needs rank >= 2 operands");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  int64_t n = as[as.size() - 2], k = as[as.size() - 1];
  int64_t kb = bs[bs.size() - 2], m = bs[bs.size() - 1];
  if (k != kb)
    throw std::invalid_argument("matmul inner dims differ: " + shape_str(as) + " vs " + shape_str(bs));
  bool shared_b = (b.rank() == 2 && a.rank() > 2);
  if (!shared_b && a.rank() != b.rank())
    throw std::invalid_argument("matmul batch ranks differ: " + shape_str(as) + " vs " + shape_str(bs));
  int64_t batch = 1;
  Shape out_shape;
  for (size_t i = 0; i + 2 < as.size(); ++i) {
    if (!shared_b && bs[i] != as[i])
      throw std::invalid_argument("matmul batch dims differ: " + shape_str(as) + " vs " + shape_str(bs));
    batch *= as[i];
    out_shape.push_back(as[i]);
  }
  out_shape.push_back(n);
  out_shape.push_back(m);
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  const T* ap = a.data().data();
  const T* bp = b.data().data();
  T* op = out.data().data();
  for (int64_t s = 0; s < batch; ++s)
    detail::gemm(false, false, static_cast<int>(n), static_cast<int>(m), static_cast<int>(k),
                 ap + s * n * k, bp + (shared_b ? 0 : s * k * m), op + s * n * m, T(0));
  auto an = a.node();
  auto bn = b.node();
  auto ad = a.data();
  auto bd = b.data();
  detail::record(out, {&a, &b}, [=](const std::vector<T>& og) {
    for (int64_t s = 0; s < batch; ++s) {
      const T* go = og.data() + s * n * m;
      const T* bb = bd.data() + (shared_b ? 0 : s * k * m);
      const T* aa = ad.data() + s * n * k;
      if (an)  // dA = dOut * B^T
        detail::gemm(false, true, static_cast<int>(n), static_cast<int>(k), static_cast<int>(m), go,
                     bb, an->grad.data() + s * n * k, T(1));
      if (bn)  // dB = A^T * dOut (accumulates over batch when B is shared)
        detail::gemm(true, false, static_cast<int>(k), static_cast<int>(m), static_cast<int>(n), aa,
                     go, bn->grad.data() + (shared_b ? 0 : s * k * m), T(1));
    }
  });
  return out;
}

// ---- shape ops ----

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
  check_shape_valid(new_shape);
  if (numel(new_shape) != a.size())
    throw std::invalid_argument("reshape " + shape_str(a.shape()) + " -> " + shape_str(new_shape) +
                                " changes element count");
  Tensor<T> out(std::move(new_shape), a.data());
  auto an = a.node();
  detail::record(out, {&a}, [an](const std::vector<T>& og) {
    for (size_t i = 0; i < og.size(); ++i) an->grad[i] += og[i];
  });
  return out;
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
  if (a.rank() < 2) throw std::invalid_argument("transpose_last2 needs rank >= 2");
  Shape s = a.shape();
  int64_t n = s[s.size() - 2], m = s[s.size() - 1];
  std::swap(s[s.size() - 2], s[s.size() - 1]);
  int64_t batch = a.size() / (n * m);
  Tensor<T> out = Tensor<T>::zeros(s);
  const T* ap = a.data().data();
  T* op = out.data().data();
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < m; ++j) op[b * n * m + j * n + i] = ap[b * n * m + i * m + j];
  auto an = a.node();
  detail::record(out, {&a}, [an, batch, n, m](const std::vector<T>& og) {
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j)
          an->grad[b * n * m + i * m + j] += og[b * n * m + j * n + i];
  });
  return out;
}

namespace detail {
// outer = product of extents before axis, inner = product after.
inline void axis_split(const Shape& s, size_t axis, int64_t& outer, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}
}  // namespace detail

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw std::invalid_argument("concat axis out of range");
  int64_t total_axis = 0;
  for (const auto& p : parts) {
    if (p.rank() != s0.size()) throw std::invalid_argument("concat rank mismatch");
    for (size_t i = 0; i < s0.size(); ++i)
      if (i != axis && p.shape()[i] != s0[i])
        throw std::invalid_argument("concat shape mismatch: " + shape_str(p.shape()) + " vs " +
                                    shape_str(s0));
    total_axis += p.shape()[axis];
  }
  Shape out_shape = s0;
  out_shape[axis] = total_axis;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  int64_t outer, inner;
  detail::axis_split(out_shape, axis, outer, inner);
  int64_t offset = 0;
  for (const auto& p : parts) {
    int64_t pa = p.shape()[axis];
    const T* pp = p.data().data();
    T* op = out.data().data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pp + o * pa * inner, pp + (o + 1) * pa * inner,
                op + (o * total_axis + offset) * inner);
    offset += pa;
  }
  if (grad_mode()) {
    std::vector<std::shared_ptr<Node<T>>> nodes;
    std::vector<int64_t> extents;
    bool any = false;
    for (const auto& p : parts) {
      nodes.push_back(p.node());
      extents.push_back(p.shape()[axis]);
      any = any || p.tracked();
    }
    if (any) {
      std::vector<std::shared_ptr<Node<T>>> parents;
      for (auto& n : nodes)
        if (n) parents.push_back(n);
      auto node = detail::make_node<T>(
          out.size(), std::move(parents),
          [nodes, extents, outer, inner, total_axis](const std::vector<T>& og) {
            int64_t offset = 0;
            for (size_t pi = 0; pi < nodes.size(); ++pi) {
              int64_t pa = extents[pi];
              if (nodes[pi]) {
                T* g = nodes[pi]->grad.data();
                for (int64_t o = 0; o < outer; ++o)
                  for (int64_t i = 0; i < pa * inner; ++i)
                    g[o * pa * inner + i] += og[(o * total_axis + offset) * inner + i];
              }
              offset += pa;
            }
          });
      out.attach_node(std::move(node));
    }
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, size_t axis, int64_t start, int64_t len) {
  const Shape& s = a.shape();
  if (axis >= s.size()) throw std::invalid_argument("slice axis out of range");
  if (start < 0 || len < 1 || start + len > s[axis])
    throw std::invalid_argument("slice range out of bounds on axis extent " + std::to_string(s[axis]));
  Shape out_shape = s;
  out_shape[axis] = len;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  int64_t outer, inner;
  detail::axis_split(s, axis, outer, inner);
  int64_t full = s[axis];
  const T* ap = a.data().data();
  T* op = out.data().data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(ap + (o * full + start) * inner, ap + (o * full + start + len) * inner,
              op + o * len * inner);
  auto an = a.node();
  detail::record(out, {&a}, [an, outer, inner, full, start, len](const std::vector<T>& og) {
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < len * inner; ++i)
        an->grad[(o * full + start) * inner + i] += og[o * len * inner + i];
  });
  return out;
}

template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& a, size_t axis, const std::vector<int64_t>& sizes) {
  int64_t sum = 0;
  for (int64_t s : sizes) sum += s;
  if (sum != a.shape()[axis]) throw std::invalid_argument("split sizes do not cover axis");
  std::vector<Tensor<T>> out;
  int64_t start = 0;
  for (int64_t s : sizes) {
    out.push_back(slice(a, axis, start, s));
    start += s;
  }
  return out;
}

// ---- row-wise nonlinearities ----

template <typename T>
Tensor<T> softmax_last(const Tensor<T>& a) {
  int64_t m = a.shape().back();
  int64_t rows = a.size() / m;
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const T* ap = a.data().data();
  T* op = out.data().data();
  for (int64_t r = 0; r < rows; ++r) {
    const T* x = ap + r * m;
    T* y = op + r * m;
    T mx = x[0];
    for (int64_t i = 1; i < m; ++i) mx = std::max(mx, x[i]);
    T sum = 0;
    for (int64_t i = 0; i < m; ++i) {
      y[i] = std::exp(x[i] - mx);
      sum += y[i];
    }
    for (int64_t i = 0; i < m; ++i) y[i] /= sum;
  }
  auto an = a.node();
  auto od = out.data();
  detail::record(out, {&a}, [an, od, rows, m](const std::vector<T>& og) {
    for (int64_t r = 0; r < rows; ++r) {
      const T* y = od.data() + r * m;
      const T* g = og.data() + r * m;
      T dot = 0;
      for (int64_t i = 0; i < m; ++i) dot += g[i] * y[i];
      for (int64_t i = 0; i < m; ++i) an->grad[r * m + i] += y[i] * (g[i] - dot);
    }
  });
  return out;
}

// Normalizes over the last axis; learned scale/shift compose via mul/add.
template <typename T>
Tensor<T> layer_norm_last(const Tensor<T>& a, T eps = T(1e-5)) {
  int64_t m = a.shape().back();
  int64_t rows = a.size() / m;
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  std::vector<T> inv_std(rows);
  const T* ap = a.data().data();
  T* op = out.data().data();
  for (int64_t r = 0; r < rows; ++r) {
    const T* x = ap + r * m;
    T mean = 0;
    for (int64_t i = 0; i < m; ++i) mean += x[i];
    mean /= static_cast<T>(m);
    T var = 0;
    for (int64_t i = 0; i < m; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<T>(m);
    T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int64_t i = 0; i < m; ++i) op[r * m + i] = (x[i] - mean) * is;
  }
  auto an = a.node();
  auto od = out.data();
  detail::record(out, {&a}, [an, od, inv_std, rows, m](const std::vector<T>& og) {
    for (int64_t r = 0; r < rows; ++r) {
      const T* y = od.data() + r * m;
      const T* g = og.data() + r * m;
      T mg = 0, mgy = 0;
      for (int64_t i = 0; i < m; ++i) {
        mg += g[i];
        mgy += g[i] * y[i];
      }
      mg /= static_cast<T>(m);
      mgy /= static_cast<T>(m);
      for (int64_t i = 0; i < m; ++i)
        an->grad[r * m + i] += inv_std[r] * (g[i] - mg - y[i] * mgy);
    }
  });
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  const T inv_sqrt2 = T(0.70710678118654752440);
  const T inv_sqrt2pi = T(0.39894228040143267794);
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) {
    T x = a.data()[i];
    out.data()[i] = x * T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
  }
  auto an = a.node();
  auto ad = a.data();
  detail::record(out, {&a}, [an, ad, inv_sqrt2, inv_sqrt2pi](const std::vector<T>& og) {
    for (size_t i = 0; i < og.size(); ++i) {
      T x = ad[i];
      T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
      T pdf = inv_sqrt2pi * std::exp(-T(0.5) * x * x);
      an->grad[i] += og[i] * (cdf + x * pdf);
    }
  });
  return out;
}

// ---- gather (token embedding lookup) ----

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<int64_t>& ids) {
  if (table.rank() != 2) throw std::invalid_argument("gather_rows expects a 2-d table");
  int64_t rows = table.dim(0), width = table.dim(1);
  for (int64_t id : ids)
    if (id < 0 || id >= rows)
      throw std::invalid_argument("gather id " + std::to_string(id) + " outside table of " +
                                  std::to_string(rows) + " rows");
  Tensor<T> out = Tensor<T>::zeros({static_cast<int64_t>(ids.size()), width});
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy(table.data().begin() + ids[i] * width, table.data().begin() + (ids[i] + 1) * width,
              out.data().begin() + i * width);
  auto tn = table.node();
  detail::record(out, {&table}, [tn, ids, width](const std::vector<T>& og) {
    for (size_t i = 0; i < ids.size(); ++i)
      for (int64_t j = 0; j < width; ++j) tn->grad[ids[i] * width + j] += og[i * width + j];
  });
  return out;
}

// ---- reductions ----

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  Tensor<T> out = Tensor<T>::scalar(s);
  auto an = a.node();
  detail::record(out, {&a}, [an](const std::vector<T>& og) {
    for (auto& g : an->grad) g += og[0];
  });
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return scalar_mul(sum_all(a), T(1) / static_cast<T>(a.size()));
}

// ---- fixed sinusoidal embeddings (constants, no gradient) ----

// Row i: [sin(p_i w_0), cos(p_i w_0), sin(p_i w_1), ...] with geometric
// frequencies from 1 down to 1/max_period across dim/2 bands.
template <typename T>
Tensor<T> sinusoidal_embed(const std::vector<double>& positions, int64_t dim,
                           double max_period = 10000.0) {
  if (dim % 2 != 0) throw std::invalid_argument("sinusoidal dim must be even");
  int64_t half = dim / 2;
  Tensor<T> out = Tensor<T>::zeros({static_cast<int64_t>(positions.size()), dim});
  for (size_t i = 0; i < positions.size(); ++i)
    for (int64_t j = 0; j < half; ++j) {
      double freq = std::exp(-std::log(max_period) * static_cast<double>(j) /
                             static_cast<double>(half));
      double angle = positions[i] * freq;
      out.data()[i * dim + 2 * j] = static_cast<T>(std::sin(angle));
      out.data()[i * dim + 2 * j + 1] = static_cast<T>(std::cos(angle));
    }
  return out;
}

// ---- backward ----

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) throw std::invalid_argument("backward requires a scalar loss");
  if (!loss.tracked()) throw std::invalid_argument("backward on an untracked tensor");
  // Reverse topological order via iterative post-order DFS over parents.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Interior grads are transient; leaves keep their persistent buffers.
  for (Node<T>* n : order)
    if (!n->is_leaf) n->grad.assign(n->size, T(0));
  loss.node()->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop((*it)->grad);
}

// ---- parameters ----

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
};

// Central-difference gradient check in the caller's precision (use f64).
// Returns max over coordinates of |analytic - cd| / (|cd| + 1e-3); the
// absolute floor keeps O(h^2) truncation noise from dominating coordinates
// whose true gradient is itself near zero.
template <typename T>
double grad_check(const std::function<Tensor<T>(const std::vector<Tensor<T>>&)>& f,
                  std::vector<Tensor<T>> point, double h = 1e-3) {
  for (auto& p : point)
    if (!p.tracked()) throw std::invalid_argument("grad_check needs leaf inputs");
  for (auto& p : point) p.zero_grad();
  Tensor<T> loss = f(point);
  backward(loss);
  double max_err = 0.0;
  for (auto& p : point) {
    std::vector<T> analytic = p.grad();
    for (int64_t i = 0; i < p.size(); ++i) {
      T orig = p.data()[i];
      p.data()[i] = orig + static_cast<T>(h);
      double fp;
      double fm;
      {
        NoGradGuard ng;
        fp = static_cast<double>(f(point).item());
        p.data()[i] = orig - static_cast<T>(h);
        fm = static_cast<double>(f(point).item());
      }
      p.data()[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::runtime_error("grad_check: non-finite objective at perturbed point");
      double cd = (fp - fm) / (2.0 * h);
      double err = std::abs(static_cast<double>(analytic[i]) - cd) / (std::abs(cd) + 1e-3);
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace ovd
