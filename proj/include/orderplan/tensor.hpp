#pragma once

// Dense 64-bit tensors and a reverse-mode tape.
//
// Tensors are rank 1 ([n]) or rank 2 ([rows x cols], row-major). A scalar is
// the rank-1 tensor [1]. Every differentiable operation records a node on a
// Tape; Tape::backward visits the nodes in exact reverse order and accumulates
// into Parameter::gradient, so running backward twice without a reset sums.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "orderplan/errors.hpp"

namespace orderplan {

class Tensor {
 public:
  Tensor() = default;

  static Tensor vector(std::size_t n, double fill = 0.0) {
    if (n == 0) throw DimensionError("tensor dimension must be positive");
    return Tensor(1, n, 1, fill);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    if (rows == 0 || cols == 0) throw DimensionError("tensor dimension must be positive");
    return Tensor(2, rows, cols, fill);
  }
  static Tensor scalar(double v) { return vector(1, v); }
  static Tensor from(std::vector<double> values) {
    Tensor t = vector(values.size());
    t.data_ = std::move(values);
    return t;
  }
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols) throw DimensionError("value count does not match shape");
    Tensor t = matrix(rows, cols);
    t.data_ = std::move(values);
    return t;
  }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.rank_, other.rows_, other.cols_, 0.0); }

  int rank() const { return rank_; }
  bool empty() const { return rank_ == 0; }
  std::vector<std::size_t> shape() const {
    if (rank_ == 1) return {rows_};
    if (rank_ == 2) return {rows_, cols_};
    return {};
  }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double item() const { return data_.at(0); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const { return rank_ == o.rank_ && rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Tensor& o) const { return same_shape(o) && data_ == o.data_; }

  std::string shape_string() const {
    std::ostringstream os;
    os << '[';
    if (rank_ >= 1) os << rows_;
    if (rank_ == 2) os << 'x' << cols_;
    os << ']';
    return os.str();
  }

 private:
  Tensor(int rank, std::size_t rows, std::size_t cols, double fill)
      : rank_(rank), rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  int rank_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor gradient;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), gradient(Tensor::zeros_like(value)) {}

  void zero_grad() { gradient.fill(0.0); }
};

class Tape;

// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  // A tape built with gradients disabled records values only (inference).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }

  // Leaf bound to a parameter; the value is borrowed and gradients flow
  // straight into param.gradient.
  Var param(Parameter& p) {
    Node n;
    n.borrowed = &p.value;
    n.sink = grad_enabled_ ? &p.gradient : nullptr;
    n.needs_grad = grad_enabled_;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  // Record a node whose backward writes directly into a parameter's gradient.
  Var record_into(Tensor value, Backward backward) {
    if (!grad_enabled_) return push(std::move(value), false, nullptr);
    return push(std::move(value), true, std::move(backward));
  }

  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed ? *n.borrowed : n.value;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Gradient buffer of a node, allocated on first use.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.sink) return *n.sink;
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root) = seed (root must be a scalar) and runs every recorded
  // backward rule in reverse order. No-op on an empty tape.
  void backward(Var root, double seed = 1.0) {
    if (nodes_.empty()) return;
    if (value(root.id).size() != 1) throw DimensionError("backward root must be a scalar, got " + value(root.id).shape_string());
    for (Node& n : nodes_)
      if (!n.sink) n.grad = Tensor{};
    grad(root.id)[0] += seed;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward) continue;
      if (!n.sink && n.grad.empty()) continue;  // received no gradient
      n.backward(*this, i);
    }
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    Tensor* sink = nullptr;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Tensor value, bool needs, Backward backward) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

inline const Tensor& Var::value() const { return tape->value(id); }

// ---------------------------------------------------------------------------
// Operations

namespace detail {

inline void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw InvalidInput("operands recorded on different tapes");
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

}  // namespace detail

inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// C = A B for A [m x k], B [k x n].
inline Var matmul(Var a, Var b) {
  detail::check_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
    throw DimensionError("matmul: shape mismatch " + A.shape_string() + " x " + B.shape_string());
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A.at(i, p);
      const double* brow = &B.data()[p * n];
      double* crow = &C.data()[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  return a.tape->record(std::move(C), {a, b}, [ai = a.id, bi = b.id, m, k, n](Tape& t, std::size_t self) {
    const Tensor& dC = t.grad(self);
    const Tensor& A = t.value(ai);
    const Tensor& B = t.value(bi);
    if (t.needs_grad(ai)) {
      Tensor& dA = t.grad(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += dC.at(i, j) * B.at(p, j);
          dA.at(i, p) += s;
        }
    }
    if (t.needs_grad(bi)) {
      Tensor& dB = t.grad(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A.at(i, p);
          for (std::size_t j = 0; j < n; ++j) dB.at(p, j) += aip * dC.at(i, j);
        }
    }
  });
}

// y = A x for A [m x k], x [k].
inline Var matvec(Var a, Var x) {
  detail::check_same_tape(a, x);
  const Tensor& A = a.value();
  const Tensor& X = x.value();
  if (A.rank() != 2 || X.rank() != 1 || A.cols() != X.size())
    throw DimensionError("matvec: shape mismatch " + A.shape_string() + " x " + X.shape_string());
  const std::size_t m = A.rows(), k = A.cols();
  Tensor Y = Tensor::vector(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = &A.data()[i * k];
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += arow[p] * X[p];
    Y[i] = s;
  }
  return a.tape->record(std::move(Y), {a, x}, [ai = a.id, xi = x.id, m, k](Tape& t, std::size_t self) {
    const Tensor& dY = t.grad(self);
    if (t.needs_grad(ai)) {
      Tensor& dA = t.grad(ai);
      const Tensor& X = t.value(xi);
      for (std::size_t i = 0; i < m; ++i) {
        const double g = dY[i];
        if (g == 0.0) continue;
        double* drow = &dA.data()[i * k];
        for (std::size_t p = 0; p < k; ++p) drow[p] += g * X[p];
      }
    }
    if (t.needs_grad(xi)) {
      Tensor& dX = t.grad(xi);
      const Tensor& A = t.value(ai);
      for (std::size_t i = 0; i < m; ++i) {
        const double g = dY[i];
        if (g == 0.0) continue;
        const double* arow = &A.data()[i * k];
        for (std::size_t p = 0; p < k; ++p) dX[p] += g * arow[p];
      }
    }
  });
}

// y = x^T B for x [k], B [k x n]; y [n].
inline Var vecmat(Var x, Var b) {
  detail::check_same_tape(x, b);
  const Tensor& X = x.value();
  const Tensor& B = b.value();
  if (X.rank() != 1 || B.rank() != 2 || X.size() != B.rows())
    throw DimensionError("vecmat: shape mismatch " + X.shape_string() + " x " + B.shape_string());
  const std::size_t k = B.rows(), n = B.cols();
  Tensor Y = Tensor::vector(n);
  for (std::size_t p = 0; p < k; ++p) {
    const double xp = X[p];
    const double* brow = &B.data()[p * n];
    for (std::size_t j = 0; j < n; ++j) Y[j] += xp * brow[j];
  }
  return x.tape->record(std::move(Y), {x, b}, [xi = x.id, bi = b.id, k, n](Tape& t, std::size_t self) {
    const Tensor& dY = t.grad(self);
    if (t.needs_grad(xi)) {
      Tensor& dX = t.grad(xi);
      const Tensor& B = t.value(bi);
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = &B.data()[p * n];
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += brow[j] * dY[j];
        dX[p] += s;
      }
    }
    if (t.needs_grad(bi)) {
      Tensor& dB = t.grad(bi);
      const Tensor& X = t.value(xi);
      for (std::size_t p = 0; p < k; ++p) {
        const double xp = X[p];
        if (xp == 0.0) continue;
        double* drow = &dB.data()[p * n];
        for (std::size_t j = 0; j < n; ++j) drow[j] += xp * dY[j];
      }
    }
  });
}

inline Var add(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return a.tape->record(std::move(out), {a, b}, [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t in : {ai, bi}) {
      if (!t.needs_grad(in)) continue;
      Tensor& d = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

inline Var add(Var a, Var b, Var c) { return add(add(a, b), c); }

// Elementwise (Hadamard) product.
inline Var mul(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return a.tape->record(std::move(out), {a, b}, [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) {
      Tensor& d = t.grad(ai);
      const Tensor& B = t.value(bi);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * B[i];
    }
    if (t.needs_grad(bi)) {
      Tensor& d = t.grad(bi);
      const Tensor& A = t.value(ai);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * A[i];
    }
  });
}

// y = scale * x + shift, elementwise with constants.
inline Var affine(Var x, double scale, double shift) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * out[i] + shift;
  return x.tape->record(std::move(out), {x}, [xi = x.id, scale](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += scale * g[i];
  });
}

inline Var scale(Var x, double s) { return affine(x, s, 0.0); }

// y = s * x for a scalar node s ([1]) and any x.
inline Var scale_by(Var x, Var s) {
  detail::check_same_tape(x, s);
  if (s.value().size() != 1) throw DimensionError("scale_by: scale must be [1], got " + s.value().shape_string());
  const double sv = s.value()[0];
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= sv;
  return x.tape->record(std::move(out), {x, s}, [xi = x.id, si = s.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const double sv = t.value(si)[0];
    if (t.needs_grad(xi)) {
      Tensor& d = t.grad(xi);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += sv * g[i];
    }
    if (t.needs_grad(si)) {
      const Tensor& X = t.value(xi);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += X[i] * g[i];
      t.grad(si)[0] += acc;
    }
  });
}

enum class Activation { sigmoid, tanh };

inline Var activation(Var x, Activation kind) {
  Tensor out = x.value();
  if (kind == Activation::sigmoid)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
  else
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return x.tape->record(std::move(out), {x}, [xi = x.id, kind](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& d = t.grad(xi);
    if (kind == Activation::sigmoid)
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
    else
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var sigmoid(Var x) { return activation(x, Activation::sigmoid); }
inline Var tanh(Var x) { return activation(x, Activation::tanh); }

// Softmax over a vector, shifted by the max unmasked entry. mask[i] == true
// marks an excluded entry, which receives probability exactly 0.
inline Var stable_softmax(Var x, std::span<const bool> mask = {}) {
  const Tensor& X = x.value();
  if (X.rank() != 1) throw DimensionError("stable_softmax: expects a vector, got " + X.shape_string());
  if (!mask.empty() && mask.size() != X.size())
    throw DimensionError("stable_softmax: mask length does not match input");
  auto masked = [&](std::size_t i) { return !mask.empty() && mask[i]; };
  for (std::size_t i = 0; i < X.size(); ++i)
    if (!masked(i) && (std::isnan(X[i]) || X[i] == std::numeric_limits<double>::infinity()))
      throw NumericalError("stable_softmax: non-finite score at index " + std::to_string(i));
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < X.size(); ++i)
    if (!masked(i)) mx = std::max(mx, X[i]);
  if (mx == -std::numeric_limits<double>::infinity()) throw InvalidInput("stable_softmax: every entry is masked");
  Tensor out = Tensor::vector(X.size());
  double z = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (masked(i)) continue;
    out[i] = std::exp(X[i] - mx);
    z += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= z;
  return x.tape->record(std::move(out), {x}, [xi = x.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& p = t.value(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * p[i];
    Tensor& d = t.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += p[i] * (g[i] - dot);
  });
}

// -log softmax(x)[index], computed through log-sum-exp.
inline Var neg_log_softmax(Var x, std::size_t index) {
  const Tensor& X = x.value();
  if (X.rank() != 1) throw DimensionError("neg_log_softmax: expects a vector, got " + X.shape_string());
  if (index >= X.size()) throw IndexError("neg_log_softmax: index out of range");
  const double mx = *std::max_element(X.data().begin(), X.data().end());
  double z = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) z += std::exp(X[i] - mx);
  const double lse = mx + std::log(z);
  return x.tape->record(Tensor::scalar(lse - X[index]), {x}, [xi = x.id, index, lse](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& X = t.value(xi);
    Tensor& d = t.grad(xi);
    for (std::size_t i = 0; i < X.size(); ++i) d[i] += g * std::exp(X[i] - lse);
    d[index] -= g;
  });
}

// Row `id` of a parameter matrix; backward scatters into that row only.
inline Var embedding_lookup(Tape& tape, Parameter& table, std::size_t id) {
  const Tensor& T = table.value;
  if (T.rank() != 2) throw DimensionError("embedding_lookup: table must be a matrix");
  if (id >= T.rows())
    throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range for table '" + table.name +
                     "' with " + std::to_string(T.rows()) + " rows");
  auto r = T.row(id);
  Tensor out = Tensor::from(std::vector<double>(r.begin(), r.end()));
  return tape.record_into(std::move(out), [p = &table, id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    auto drow = p->gradient.row(id);
    for (std::size_t i = 0; i < g.size(); ++i) drow[i] += g[i];
  });
}

// out[a][b] = M[ids[a]][ids[b]] for a square matrix M.
inline Var gather_block(Var m, std::span<const std::size_t> ids) {
  const Tensor& M = m.value();
  if (M.rank() != 2 || M.rows() != M.cols()) throw DimensionError("gather_block: expects a square matrix");
  for (std::size_t id : ids)
    if (id >= M.rows()) throw IndexError("gather_block: id " + std::to_string(id) + " out of range " + M.shape_string());
  const std::size_t c = ids.size();
  Tensor out = Tensor::matrix(c, c);
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t b = 0; b < c; ++b) out.at(a, b) = M.at(ids[a], ids[b]);
  std::vector<std::size_t> saved(ids.begin(), ids.end());
  return m.tape->record(std::move(out), {m}, [mi = m.id, saved = std::move(saved)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(mi);
    const std::size_t c = saved.size();
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b < c; ++b) d.at(saved[a], saved[b]) += g.at(a, b);
  });
}

// Row r of a matrix node.
inline Var row(Var m, std::size_t r) {
  const Tensor& M = m.value();
  if (M.rank() != 2) throw DimensionError("row: expects a matrix");
  if (r >= M.rows()) throw IndexError("row: index out of range");
  auto src = M.row(r);
  Tensor out = Tensor::from(std::vector<double>(src.begin(), src.end()));
  return m.tape->record(std::move(out), {m}, [mi = m.id, r](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    auto drow = t.grad(mi).row(r);
    for (std::size_t i = 0; i < g.size(); ++i) drow[i] += g[i];
  });
}

inline Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidInput("concat: no inputs");
  std::size_t n = 0;
  for (const Var& v : parts) {
    if (v.value().rank() != 1) throw DimensionError("concat: expects vectors, got " + v.value().shape_string());
    detail::check_same_tape(parts[0], v);
    n += v.value().size();
  }
  Tensor out = Tensor::vector(n);
  std::size_t off = 0;
  bool needs = false;
  std::vector<std::size_t> ids;
  for (const Var& v : parts) {
    const Tensor& x = v.value();
    std::copy(x.data().begin(), x.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += x.size();
    ids.push_back(v.id);
    needs = needs || parts[0].tape->needs_grad(v.id);
  }
  Tape& tape = *parts[0].tape;
  if (!needs) return tape.constant(std::move(out));
  return tape.record_into(std::move(out), [ids = std::move(ids)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t id : ids) {
      const std::size_t len = t.value(id).size();
      if (t.needs_grad(id)) {
        Tensor& d = t.grad(id);
        for (std::size_t i = 0; i < len; ++i) d[i] += g[off + i];
      }
      off += len;
    }
  });
}

inline Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

inline Var slice(Var x, std::size_t offset, std::size_t length) {
  const Tensor& X = x.value();
  if (X.rank() != 1 || length == 0) throw DimensionError("slice: expects a vector and a positive length");
  if (offset + length > X.size())
    throw IndexError("slice: [" + std::to_string(offset) + ", +" + std::to_string(length) + ") out of " +
                         X.shape_string());
  Tensor out = Tensor::from(std::vector<double>(X.data().begin() + static_cast<std::ptrdiff_t>(offset),
                                                X.data().begin() + static_cast<std::ptrdiff_t>(offset + length)));
  return x.tape->record(std::move(out), {x}, [xi = x.id, offset](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) d[offset + i] += g[i];
  });
}

// Stacks equal-length vectors as the rows of a matrix.
inline Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw InvalidInput("stack_rows: no inputs");
  const std::size_t d = rows[0].value().size();
  Tensor out = Tensor::matrix(rows.size(), d);
  bool needs = false;
  std::vector<std::size_t> ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& x = rows[r].value();
    if (x.rank() != 1 || x.size() != d) throw DimensionError("stack_rows: ragged rows");
    std::copy(x.data().begin(), x.data().end(), out.row(r).begin());
    ids.push_back(rows[r].id);
    needs = needs || rows[0].tape->needs_grad(rows[r].id);
  }
  Tape& tape = *rows[0].tape;
  if (!needs) return tape.constant(std::move(out));
  return tape.record_into(std::move(out), [ids = std::move(ids)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (!t.needs_grad(ids[r])) continue;
      Tensor& d = t.grad(ids[r]);
      auto grow = g.row(r);
      for (std::size_t i = 0; i < grow.size(); ++i) d[i] += grow[i];
    }
  });
}

inline Var dot(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape("dot", a.value(), b.value());
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A[i] * B[i];
  return a.tape->record(Tensor::scalar(s), {a, b}, [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    if (t.needs_grad(ai)) {
      Tensor& d = t.grad(ai);
      const Tensor& B = t.value(bi);
      for (std::size_t i = 0; i < B.size(); ++i) d[i] += g * B[i];
    }
    if (t.needs_grad(bi)) {
      Tensor& d = t.grad(bi);
      const Tensor& A = t.value(ai);
      for (std::size_t i = 0; i < A.size(); ++i) d[i] += g * A[i];
    }
  });
}

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape->record(Tensor::scalar(s), {x}, [xi = x.id](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& d = t.grad(xi);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g;
  });
}

inline Var sum_squares(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v * v;
  return x.tape->record(Tensor::scalar(s), {x}, [xi = x.id](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& X = t.value(xi);
    Tensor& d = t.grad(xi);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * g * X[i];
  });
}

// out[u] = base[u] (u < |base|, zero beyond) + sum over j with index[j] == u of src[j].
inline Var scatter_add(Var base, Var src, std::span<const std::size_t> index, std::size_t out_size) {
  detail::check_same_tape(base, src);
  const Tensor& B = base.value();
  const Tensor& S = src.value();
  if (B.rank() != 1 || S.rank() != 1 || S.size() != index.size() || out_size < B.size())
    throw DimensionError("scatter_add: shape mismatch");
  Tensor out = Tensor::vector(out_size);
  std::copy(B.data().begin(), B.data().end(), out.data().begin());
  for (std::size_t j = 0; j < index.size(); ++j) {
    if (index[j] >= out_size) throw IndexError("scatter_add: index out of range");
    out[index[j]] += S[j];
  }
  std::vector<std::size_t> saved(index.begin(), index.end());
  return base.tape->record(std::move(out), {base, src},
                           [bi = base.id, si = src.id, saved = std::move(saved)](Tape& t, std::size_t self) {
                             const Tensor& g = t.grad(self);
                             if (t.needs_grad(bi)) {
                               Tensor& d = t.grad(bi);
                               for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
                             }
                             if (t.needs_grad(si)) {
                               Tensor& d = t.grad(si);
                               for (std::size_t j = 0; j < saved.size(); ++j) d[j] += g[saved[j]];
                             }
                           });
}

}  // namespace orderplan
