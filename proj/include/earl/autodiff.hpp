#pragma once

// Reverse-mode differentiation over dense tensors.
//
// A Tape records every primitive application in execution order. backward()
// walks the records in exact reverse order, summing cotangents into each
// operand. Parameter leaves accumulate straight into Parameter::grad, so a
// parameter used several times receives the sum over all uses.

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "earl/common.hpp"
#include "earl/tensor.hpp"

namespace earl::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

using IndexList = std::shared_ptr<const std::vector<Index>>;

inline IndexList make_index(std::vector<Index> v) { return std::make_shared<const std::vector<Index>>(std::move(v)); }

class Tape {
 public:
  // Receives the tape and this node's cotangent.
  using Backward = std::function<void(Tape&, const Tensor&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor v, std::string_view what = "constant") {
    check_finite(v, what);
    nodes_.push_back(Node{std::move(v), {}, nullptr, false, {}});
    return {this, nodes_.size() - 1};
  }

  // Leaf bound to an external parameter; no copy is made.
  Var param(Parameter& p) {
    check_finite(p.value, p.name);
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor::zeros_like(p.value);
    nodes_.push_back(Node{{}, {}, &p, p.trainable, {}});
    return {this, nodes_.size() - 1};
  }

  // Appends the result of a primitive. The backward rule is dropped when no
  // operand needs a gradient.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, Backward fn) {
    check_finite(value, op);
    bool needs = false;
    for (const auto& v : inputs) {
      if (v.tape != this) throw ConfigError(std::string(op) + ": operand from another tape");
      needs = needs || nodes_[v.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, nullptr, needs, needs ? std::move(fn) : Backward{}});
    return {this, nodes_.size() - 1};
  }

  const Tensor& value(Var v) const {
    const auto& n = nodes_[v.id];
    return n.param ? n.param->value : n.value;
  }

  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

  // Cotangent buffer for v, allocated on first use. For parameter leaves this
  // is the parameter's own accumulator.
  Tensor& grad(Var v) {
    auto& n = nodes_[v.id];
    if (n.param) return n.param->grad;
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
  }

  bool wants(Var v) const { return nodes_[v.id].requires_grad; }

  void backward(Var root) {
    if (root.tape != this) throw ConfigError("backward: root from another tape");
    if (value(root).size() != 1) {
      throw ConfigError("backward needs a scalar root, got " + to_string(value(root).shape()));
    }
    if (!nodes_[root.id].requires_grad) return;
    grad(root)[0] += 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, n.grad);
    }
  }

 private:
  static void check_finite(const Tensor& t, std::string_view what) {
    if (!t.all_finite()) throw NumericalError("non-finite value produced by " + std::string(what));
  }

  struct Node {
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;  // stable references: value() stays valid as the tape grows
};

inline const Tensor& Var::value() const { return tape->value(*this); }

// ---------------------------------------------------------------------------
// Dense kernels. All accumulate into `out`.

namespace kernel {

// out(m x n) += a(m x k) * b(k x n)
inline void mm(const Tensor& a, const Tensor& b, Tensor& out) {
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  parallel_for(m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double* o = &out.at(i, 0);
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a.at(i, p);
        if (av == 0.0) continue;
        const double* br = &b.at(p, 0);
        for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
      }
    }
  }, 16);
}

// out(m x n) += a(m x k) * b(n x k)^T
inline void mm_nt(const Tensor& a, const Tensor& b, Tensor& out) {
  const auto m = a.rows(), k = a.cols(), n = b.rows();
  parallel_for(m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* ar = &a.at(i, 0);
      for (std::size_t j = 0; j < n; ++j) {
        const double* br = &b.at(j, 0);
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
        out.at(i, j) += s;
      }
    }
  }, 16);
}

// out(m x n) += a(k x m)^T * b(k x n)
inline void mm_tn(const Tensor& a, const Tensor& b, Tensor& out) {
  const auto k = a.rows(), m = a.cols(), n = b.cols();
  parallel_for(m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* br = &b.at(p, 0);
      for (std::size_t i = lo; i < hi; ++i) {
        const double av = a.at(p, i);
        if (av == 0.0) continue;
        double* o = &out.at(i, 0);
        for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
      }
    }
  }, 16);
}

}  // namespace kernel

namespace detail {

[[noreturn]] inline void shape_error(std::string_view op, const Tensor& a, const Tensor& b) {
  throw ConfigError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                    to_string(b.shape()));
}

[[noreturn]] inline void shape_error(std::string_view op, const Tensor& a) {
  throw ConfigError(std::string(op) + ": unsupported shape " + to_string(a.shape()));
}

inline void require_matrix(std::string_view op, const Tensor& a) {
  if (a.rank() < 1 || a.rank() > 2) shape_error(op, a);
}

// How the right operand of an elementwise op maps onto the left one.
enum class Bcast { kSame, kRow, kCol, kScalar };

inline Bcast broadcast_kind(std::string_view op, const Tensor& a, const Tensor& b) {
  require_matrix(op, a);
  require_matrix(op, b);
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::kSame;
  if (b.size() == 1) return Bcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::kCol;
  shape_error(op, a, b);
}

inline std::size_t bindex(Bcast k, std::size_t i, std::size_t cols) {
  switch (k) {
    case Bcast::kSame: return i;
    case Bcast::kRow: return i % cols;
    case Bcast::kCol: return i / cols;
    case Bcast::kScalar: return 0;
  }
  return 0;
}

// f(x, y) forward; da(x, y) and db(x, y) are the local partials.
template <typename F, typename DA, typename DB>
Var binary(std::string_view op, Var a, Var b, F f, DA da, DB db) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Bcast kind = broadcast_kind(op, av, bv);
  const std::size_t cols = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[bindex(kind, i, cols)]);
  return a.tape->record(op, std::move(out), {a, b}, [a, b, kind, cols, da, db](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(b);
    if (t.wants(a)) {
      Tensor& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(x[i], y[bindex(kind, i, cols)]);
    }
    if (t.wants(b)) {
      Tensor& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto j = bindex(kind, i, cols);
        gb[j] += g[i] * db(x[i], y[j]);
      }
    }
  });
}

// f(x) forward; df(x, y) is the derivative given input x and output y.
template <typename F, typename DF>
Var unary(std::string_view op, Var a, F f, DF df) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const Var self{a.tape, a.tape->size()};
  return a.tape->record(op, std::move(out), {a}, [a, self, df](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives

inline Var add(Var a, Var b) {
  return detail::binary("add", a, b, [](double x, double y) { return x + y; },
                        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::binary("sub", a, b, [](double x, double y) { return x - y; },
                        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::binary("mul", a, b, [](double x, double y) { return x * y; },
                        [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

inline Var scale(Var a, double s) {
  return detail::unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Var add_scalar(Var a, double s) {
  return detail::unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Var relu(Var a) {
  return detail::unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                       [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var sigmoid(Var a) {
  return detail::unary(
      "sigmoid", a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

// log(sigmoid(x)) without the underflow of the composed form.
inline Var log_sigmoid(Var a) {
  return detail::unary(
      "log_sigmoid", a, [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x)); });
}

inline Var log(Var a) {
  return detail::unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var sin(Var a) {
  return detail::unary("sin", a, [](double x) { return std::sin(x); },
                       [](double x, double) { return std::cos(x); });
}

inline Var cos(Var a) {
  return detail::unary("cos", a, [](double x) { return std::cos(x); },
                       [](double x, double) { return -std::sin(x); });
}

inline Var square(Var a) {
  return detail::unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// (m x k) * (k x n)
inline Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_matrix("matmul", av);
  detail::require_matrix("matmul", bv);
  if (av.cols() != bv.rows()) detail::shape_error("matmul", av, bv);
  Tensor out = Tensor::matrix(av.rows(), bv.cols());
  kernel::mm(av, bv, out);
  return a.tape->record("matmul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.wants(a)) kernel::mm_nt(g, t.value(b), t.grad(a));
    if (t.wants(b)) kernel::mm_tn(t.value(a), g, t.grad(b));
  });
}

// (m x k) * (n x k)^T; the linear-layer form x W^T with W stored out x in.
inline Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_matrix("matmul_nt", av);
  detail::require_matrix("matmul_nt", bv);
  if (av.cols() != bv.cols()) detail::shape_error("matmul_nt", av, bv);
  Tensor out = Tensor::matrix(av.rows(), bv.rows());
  kernel::mm_nt(av, bv, out);
  return a.tape->record("matmul_nt", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.wants(a)) kernel::mm(g, t.value(b), t.grad(a));
    if (t.wants(b)) kernel::mm_tn(g, t.value(a), t.grad(b));
  });
}

inline Var transpose(Var a) {
  const Tensor& av = a.value();
  detail::require_matrix("transpose", av);
  Tensor out = Tensor::matrix(av.cols(), av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out.at(j, i) = av.at(i, j);
  return a.tape->record("transpose", std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(j, i);
  });
}

// out[i] = a[idx[i]]; backward scatter-adds.
inline Var gather_rows(Var a, IndexList idx) {
  const Tensor& av = a.value();
  detail::require_matrix("gather_rows", av);
  const auto cols = av.cols();
  Tensor out = Tensor::matrix(idx->size(), cols);
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const auto r = (*idx)[i];
    if (r >= av.rows()) throw ConfigError("gather_rows: index " + std::to_string(r) + " out of range");
    std::copy_n(&av.at(r, 0), cols, &out.at(i, 0));
  }
  return a.tape->record("gather_rows", std::move(out), {a}, [a, idx, cols](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      double* dst = &ga.at((*idx)[i], 0);
      const double* src = &g.at(i, 0);
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

// out has `rows` rows; out[idx[i]] += a[i]. Backward gathers.
inline Var scatter_add_rows(Var a, IndexList idx, std::size_t rows) {
  const Tensor& av = a.value();
  detail::require_matrix("scatter_add_rows", av);
  if (idx->size() != av.rows()) {
    throw ConfigError("scatter_add_rows: " + std::to_string(idx->size()) + " indices for " +
                      std::to_string(av.rows()) + " rows");
  }
  const auto cols = av.cols();
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const auto r = (*idx)[i];
    if (r >= rows) throw ConfigError("scatter_add_rows: index " + std::to_string(r) + " out of range");
    double* dst = &out.at(r, 0);
    const double* src = &av.at(i, 0);
    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
  return a.tape->record("scatter_add_rows", std::move(out), {a}, [a, idx, cols](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      double* dst = &ga.at(i, 0);
      const double* src = &g.at((*idx)[i], 0);
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

inline Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_matrix("concat_cols", av);
  detail::require_matrix("concat_cols", bv);
  if (av.rows() != bv.rows()) detail::shape_error("concat_cols", av, bv);
  const auto ca = av.cols(), cb = bv.cols();
  Tensor out = Tensor::matrix(av.rows(), ca + cb);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(&av.at(r, 0), ca, &out.at(r, 0));
    std::copy_n(&bv.at(r, 0), cb, &out.at(r, ca));
  }
  return a.tape->record("concat_cols", std::move(out), {a, b}, [a, b, ca, cb](Tape& t, const Tensor& g) {
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (t.wants(a)) {
        double* d = &t.grad(a).at(r, 0);
        for (std::size_t c = 0; c < ca; ++c) d[c] += g.at(r, c);
      }
      if (t.wants(b)) {
        double* d = &t.grad(b).at(r, 0);
        for (std::size_t c = 0; c < cb; ++c) d[c] += g.at(r, ca + c);
      }
    }
  });
}

// Columns [begin, begin + count).
inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  detail::require_matrix("slice_cols", av);
  if (begin + count > av.cols()) detail::shape_error("slice_cols", av);
  Tensor out = Tensor::matrix(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r) std::copy_n(&av.at(r, begin), count, &out.at(r, 0));
  return a.tape->record("slice_cols", std::move(out), {a}, [a, begin, count](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) ga.at(r, begin + c) += g.at(r, c);
  });
}

inline Var reshape(Var a, Shape shape) {
  Tensor out = a.value();
  out.reshape(std::move(shape));
  return a.tape->record("reshape", std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

inline Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.data()) s += x;
  return a.tape->record("sum", Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

inline Var mean(Var a) {
  const auto n = a.value().size();
  if (n == 0) throw ConfigError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

// Sum along the last axis: (m x n) -> (m x 1).
inline Var sum_rows(Var a) {
  const Tensor& av = a.value();
  detail::require_matrix("sum_rows", av);
  Tensor out = Tensor::matrix(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (double x : av.row(r)) s += x;
    out[r] = s;
  }
  return a.tape->record("sum_rows", std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (auto& x : ga.row(r)) x += g[r];
  });
}

// Euclidean norm along the last axis: (m x n) -> (m x 1). The subgradient at
// a zero row is taken as zero.
inline Var l2norm_rows(Var a) {
  const Tensor& av = a.value();
  detail::require_matrix("l2norm_rows", av);
  Tensor out = Tensor::matrix(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (double x : av.row(r)) s += x * x;
    out[r] = std::sqrt(s);
  }
  const Var self{a.tape, a.tape->size()};
  return a.tape->record("l2norm_rows", std::move(out), {a}, [a, self](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      if (y[r] == 0.0) continue;
      const double f = g[r] / y[r];
      for (std::size_t c = 0; c < x.cols(); ++c) ga.at(r, c) += f * x.at(r, c);
    }
  });
}

// Row-wise softmax.
inline Var softmax_rows(Var a) {
  const Tensor& av = a.value();
  detail::require_matrix("softmax_rows", av);
  Tensor out(av.shape());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const auto in = av.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) z += (o[c] = std::exp(in[c] - mx));
    for (auto& x : o) x /= z;
  }
  const Var self{a.tape, a.tape->size()};
  return a.tape->record("softmax_rows", std::move(out), {a}, [a, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[<coord>]"
  std::size_t coordinates = 0;
};

// Compares the tape gradient of f (a scalar-valued recorded computation) with
// central differences on up to `samples` coordinates per parameter (all of
// them for smaller tensors). The relative error denominator is floored at
// `floor` so coordinates with near-zero gradient are judged on absolute error
// below that scale.
inline GradCheckReport grad_check(const std::function<Var(Tape&)>& f, std::span<Parameter* const> params,
                                  double eps = 1e-5, std::size_t samples = 64, std::uint64_t seed = 0,
                                  double floor = 1e-6) {
  auto eval = [&] {
    Tape tape;
    const double v = f(tape).value().item();
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite function value");
    return v;
  };
  for (auto* p : params) p->grad = Tensor::zeros_like(p->value);
  {
    Tape tape;
    Var out = f(tape);
    tape.backward(out);
  }
  GradCheckReport report;
  Rng rng(seed);
  for (auto* p : params) {
    if (!p->trainable) continue;
    const auto n = p->value.size();
    std::vector<std::size_t> coords;
    if (n <= samples) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < samples; ++i) coords.push_back(rng.below(n));
    }
    for (auto i : coords) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double up = eval();
      p->value[i] = orig - eps;
      const double down = eval();
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[i];
      if (!std::isfinite(analytic)) throw NumericalError("grad_check: non-finite gradient in " + p->name);
      const double err =
          std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++report.coordinates;
      if (err > report.max_rel_error || report.worst.empty()) {
        if (err >= report.max_rel_error) {
          report.max_rel_error = err;
          report.worst = p->name + "[" + std::to_string(i) + "]";
        }
      }
    }
  }
  return report;
}

}  // namespace earl::ad
