#pragma once

// Reverse-mode automatic differentiation over dense row-major double matrices.
//
// Every value is a 2-D array (rows x cols); scalars are 1x1 and vectors are
// 1xn rows. Operations build a DAG of shared nodes; backward() walks it in
// reverse topological order. Gradients of leaves accumulate and must be zeroed
// by the caller (ParamSet::zero_grad) before each backward pass.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vcgan/errors.hpp"

namespace vcgan::ad {

struct Shape {
  std::size_t rows{1};
  std::size_t cols{1};

  [[nodiscard]] constexpr std::size_t size() const noexcept { return rows * cols; }
  [[nodiscard]] constexpr bool is_scalar() const noexcept { return rows == 1 && cols == 1; }
  [[nodiscard]] constexpr bool is_vector() const noexcept { return rows == 1 || cols == 1; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  [[nodiscard]] std::string str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad{false};
  std::string op;

  [[nodiscard]] bool is_leaf() const noexcept { return parents.empty(); }
  MapMat mat() { return {data.data(), static_cast<Eigen::Index>(shape.rows),
                         static_cast<Eigen::Index>(shape.cols)}; }
  MapMat gmat() { return {grad.data(), static_cast<Eigen::Index>(shape.rows),
                          static_cast<Eigen::Index>(shape.cols)}; }
};

}  // namespace detail

/// Handle to a node of the computation graph. Copies share the node.
class DiffValue {
 public:
  DiffValue() = default;

  /// Non-trainable input.
  static DiffValue constant(Shape shape, std::vector<double> data) {
    return make_leaf(shape, std::move(data), false, "constant");
  }
  static DiffValue constant(Shape shape, double fill = 0.0) {
    return constant(shape, std::vector<double>(shape.size(), fill));
  }
  static DiffValue scalar(double v) { return constant({1, 1}, {v}); }

  /// Trainable leaf; its gradient buffer is allocated (zeroed) immediately.
  static DiffValue parameter(Shape shape, std::vector<double> data) {
    return make_leaf(shape, std::move(data), true, "parameter");
  }

  [[nodiscard]] bool valid() const noexcept { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] std::size_t rows() const { return node_->shape.rows; }
  [[nodiscard]] std::size_t cols() const { return node_->shape.cols; }
  [[nodiscard]] std::size_t size() const { return node_->shape.size(); }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] bool is_leaf() const { return node_->is_leaf(); }
  [[nodiscard]] const std::string& op() const { return node_->op; }

  [[nodiscard]] std::span<const double> data() const { return node_->data; }
  /// Mutable storage; meant for leaves (optimizers, clipping, finite differences).
  [[nodiscard]] std::span<double> mutable_data() { return node_->data; }
  [[nodiscard]] std::span<const double> grad() const { return node_->grad; }
  [[nodiscard]] std::span<double> mutable_grad() { return node_->grad; }

  [[nodiscard]] double at(std::size_t r, std::size_t c) const {
    return node_->data[r * node_->shape.cols + c];
  }
  [[nodiscard]] double item() const {
    if (!node_->shape.is_scalar()) throw ShapeError("item() on non-scalar " + shape().str());
    return node_->data[0];
  }

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  [[nodiscard]] const std::shared_ptr<detail::Node>& node() const { return node_; }

  static DiffValue from_node(std::shared_ptr<detail::Node> n) {
    DiffValue v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  static DiffValue make_leaf(Shape shape, std::vector<double> data, bool trainable,
                             std::string op) {
    if (data.size() != shape.size()) {
      throw ShapeError("data length " + std::to_string(data.size()) +
                       " does not match shape " + shape.str());
    }
    auto n = std::make_shared<detail::Node>();
    n->shape = shape;
    n->data = std::move(data);
    n->requires_grad = trainable;
    if (trainable) n->grad.assign(shape.size(), 0.0);
    n->op = std::move(op);
    return from_node(std::move(n));
  }

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline DiffValue make_result(Shape shape, std::vector<double> data,
                             std::vector<DiffValue> inputs, std::string op,
                             std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->data = std::move(data);
  n->op = std::move(op);
  for (const auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(inputs.size());
    for (const auto& in : inputs) n->parents.push_back(in.node());
    n->backward_fn = std::move(backward_fn);
  }
  return DiffValue::from_node(std::move(n));
}

inline Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

// parent.grad (1 x cols) += column sums of self.grad, rows added in order.
// Eigen's colwise().sum() into an unaligned map picks its summation order from
// the buffer address, which broke run-to-run reproducibility.
inline void add_column_sums(const Node& self, Node& parent) {
  const std::size_t rows = self.shape.rows;
  const std::size_t cols = self.shape.cols;
  std::vector<double> s(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = self.grad.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s[c] += g[c];
  }
  for (std::size_t c = 0; c < cols; ++c) parent.grad[c] += s[c];
}

// The message is only built on failure.
template <class Msg>
void require(bool cond, Msg&& message) {
  if (!cond) throw ShapeError(std::string(message()));
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

inline Broadcast broadcast_kind(const DiffValue& a, const DiffValue& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.shape().is_scalar()) return Broadcast::kRightScalar;
  if (a.shape().is_scalar()) return Broadcast::kLeftScalar;
  throw ShapeError(std::string(op) + ": shapes " + a.shape().str() + " and " +
                   b.shape().str() + " do not conform");
}

// Shared by add/sub/mul: out = f(a_i, b_j), grads via da = g * dfa, db = g * dfb.
template <class F, class Da, class Db>
DiffValue binary(const DiffValue& a, const DiffValue& b, const char* name, F f, Da dfa, Db dfb) {
  const Broadcast kind = broadcast_kind(a, b, name);
  const Shape out_shape = kind == Broadcast::kLeftScalar ? b.shape() : a.shape();
  const std::size_t n = out_shape.size();
  auto ia = [kind](std::size_t i) { return kind == Broadcast::kLeftScalar ? 0 : i; };
  auto ib = [kind](std::size_t i) { return kind == Broadcast::kRightScalar ? 0 : i; };
  std::vector<double> out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[ia(i)], bd[ib(i)]);
  return make_result(out_shape, std::move(out), {a, b}, name,
                     [n, ia, ib, dfa, dfb](Node& self) {
                       Node& pa = parent(self, 0);
                       Node& pb = parent(self, 1);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double g = self.grad[i];
                         const double x = pa.data[ia(i)];
                         const double y = pb.data[ib(i)];
                         if (pa.requires_grad) pa.grad[ia(i)] += g * dfa(x, y);
                         if (pb.requires_grad) pb.grad[ib(i)] += g * dfb(x, y);
                       }
                     });
}

// out_i = f(x_i), grad_i = g_i * df(x_i, out_i).
template <class F, class Df>
DiffValue unary(const DiffValue& x, std::string name, F f, Df df) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
  return make_result(x.shape(), std::move(out), {x}, std::move(name), [df](Node& self) {
    Node& px = parent(self, 0);
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      px.grad[i] += self.grad[i] * df(px.data[i], self.data[i]);
    }
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward primitives
// ---------------------------------------------------------------------------

inline DiffValue matmul(const DiffValue& a, const DiffValue& b) {
  detail::require(a.cols() == b.rows(), [&] { return "matmul: inner dimensions " + a.shape().str() +
                                            " x " + b.shape().str() + " do not match"; });
  const Shape out_shape{a.rows(), b.cols()};
  std::vector<double> out(out_shape.size());
  detail::MapMat(out.data(), static_cast<Eigen::Index>(out_shape.rows),
                 static_cast<Eigen::Index>(out_shape.cols))
      .noalias() = a.node()->mat() * b.node()->mat();
  return detail::make_result(out_shape, std::move(out), {a, b}, "matmul", [](detail::Node& self) {
    detail::Node& pa = detail::parent(self, 0);
    detail::Node& pb = detail::parent(self, 1);
    if (pa.requires_grad) pa.gmat().noalias() += self.gmat() * pb.mat().transpose();
    if (pb.requires_grad) pb.gmat().noalias() += pa.mat().transpose() * self.gmat();
  });
}

inline DiffValue add(const DiffValue& a, const DiffValue& b) {
  return detail::binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline DiffValue sub(const DiffValue& a, const DiffValue& b) {
  return detail::binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline DiffValue mul(const DiffValue& a, const DiffValue& b) {
  return detail::binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline DiffValue scale(const DiffValue& x, double s) {
  return detail::unary(
      x, "scale", [s](double v) { return s * v; }, [s](double, double) { return s; });
}

inline DiffValue operator+(const DiffValue& a, const DiffValue& b) { return add(a, b); }
inline DiffValue operator-(const DiffValue& a, const DiffValue& b) { return sub(a, b); }
inline DiffValue operator*(const DiffValue& a, const DiffValue& b) { return mul(a, b); }
inline DiffValue operator*(double s, const DiffValue& x) { return scale(x, s); }
inline DiffValue operator-(const DiffValue& x) { return scale(x, -1.0); }

/// x (rows x n) + bias (1 x n), bias broadcast over rows.
inline DiffValue add_bias(const DiffValue& x, const DiffValue& bias) {
  detail::require(bias.rows() == 1 && bias.cols() == x.cols(), [&] {
    return "add_bias: bias " + bias.shape().str() + " does not match " + x.shape().str();
  });
  std::vector<double> out(x.size());
  detail::MapMat(out.data(), static_cast<Eigen::Index>(x.rows()),
                 static_cast<Eigen::Index>(x.cols()))
      .noalias() = x.node()->mat().rowwise() + bias.node()->mat().row(0);
  return detail::make_result(x.shape(), std::move(out), {x, bias}, "add_bias",
                             [](detail::Node& self) {
                               detail::Node& px = detail::parent(self, 0);
                               detail::Node& pb = detail::parent(self, 1);
                               if (px.requires_grad) px.gmat() += self.gmat();
                               if (pb.requires_grad) add_column_sums(self, pb);
                             });
}

/// x W + b in one node: x is rows x in, W in x out, b 1 x out.
inline DiffValue linear(const DiffValue& x, const DiffValue& w, const DiffValue& b) {
  detail::require(x.cols() == w.rows(), [&] {
    return "linear: input " + x.shape().str() + " does not match weight " + w.shape().str();
  });
  detail::require(b.rows() == 1 && b.cols() == w.cols(), [&] {
    return "linear: bias " + b.shape().str() + " does not match weight " + w.shape().str();
  });
  const Shape out_shape{x.rows(), w.cols()};
  std::vector<double> out(out_shape.size());
  detail::MapMat y(out.data(), static_cast<Eigen::Index>(out_shape.rows),
                   static_cast<Eigen::Index>(out_shape.cols));
  // Eigen's blocked product is slow for a handful of inputs. Its lazy product
  // fuses in the packet body but not in the unaligned peel, so loop by hand.
  if (x.cols() <= 8) {
    const std::size_t K = x.cols();
    const std::size_t H = w.cols();
    const auto xd = x.data();
    const auto wd = w.data();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double* yr = out.data() + r * H;
      for (std::size_t k = 0; k < K; ++k) {
        const double a = xd[r * K + k];
        const double* wk = wd.data() + k * H;
        for (std::size_t h = 0; h < H; ++h) yr[h] += a * wk[h];
      }
    }
  } else {
    y.noalias() = x.node()->mat() * w.node()->mat();
  }
  y.rowwise() += b.node()->mat().row(0);
  return detail::make_result(out_shape, std::move(out), {x, w, b}, "linear",
                             [](detail::Node& self) {
                               detail::Node& px = detail::parent(self, 0);
                               detail::Node& pw = detail::parent(self, 1);
                               detail::Node& pb = detail::parent(self, 2);
                               if (px.requires_grad) px.gmat().noalias() += self.gmat() * pw.mat().transpose();
                               if (pw.requires_grad) pw.gmat().noalias() += px.mat().transpose() * self.gmat();
                               if (pb.requires_grad) add_column_sums(self, pb);
                             });
}

inline constexpr double kDefaultLeakySlope = 0.2;

/// max(x, 0) + slope * min(x, 0).
inline DiffValue leaky_relu(const DiffValue& x, double slope = kDefaultLeakySlope) {
  const auto n = static_cast<Eigen::Index>(x.size());
  std::vector<double> out(x.size());
  const Eigen::Map<const Eigen::ArrayXd> xa(x.data().data(), n);
  Eigen::Map<Eigen::ArrayXd>(out.data(), n) = xa.max(0.0) + slope * xa.min(0.0);
  return detail::make_result(x.shape(), std::move(out), {x}, "leaky_relu",
                             [slope, n](detail::Node& self) {
                               detail::Node& px = detail::parent(self, 0);
                               const Eigen::Map<const Eigen::ArrayXd> xv(px.data.data(), n);
                               const Eigen::Map<const Eigen::ArrayXd> g(self.grad.data(), n);
                               Eigen::Map<Eigen::ArrayXd>(px.grad.data(), n) +=
                                   (xv > 0.0).select(g, slope * g);
                             });
}

inline DiffValue tanh(const DiffValue& x) {
  return detail::unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

inline DiffValue log(const DiffValue& x) {
  return detail::unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline DiffValue exp(const DiffValue& x) {
  return detail::unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

/// log(1 + e^x), evaluated without overflow.
inline DiffValue softplus(const DiffValue& x) {
  return detail::unary(
      x, "softplus",
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

inline DiffValue sum(const DiffValue& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return detail::make_result({1, 1}, {s}, {x}, "sum", [](detail::Node& self) {
    detail::Node& px = detail::parent(self, 0);
    for (double& g : px.grad) g += self.grad[0];
  });
}

inline DiffValue mean(const DiffValue& x) {
  detail::require(x.size() > 0, [&] { return "mean of empty value"; });
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

/// Mean over an axis: axis 0 reduces rows (-> 1 x cols), axis 1 reduces columns (-> rows x 1).
inline DiffValue mean(const DiffValue& x, int axis) {
  detail::require(axis == 0 || axis == 1, [&] { return "mean: axis must be 0 or 1"; });
  detail::require(x.size() > 0, [&] { return "mean of empty value"; });
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  const Shape out_shape = axis == 0 ? Shape{1, cols} : Shape{rows, 1};
  const double inv = 1.0 / static_cast<double>(axis == 0 ? rows : cols);
  std::vector<double> out(out_shape.size(), 0.0);
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[axis == 0 ? c : r] += xd[r * cols + c];
  }
  for (double& v : out) v *= inv;
  return detail::make_result(out_shape, std::move(out), {x}, "mean_axis",
                             [rows, cols, axis, inv](detail::Node& self) {
                               detail::Node& px = detail::parent(self, 0);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t c = 0; c < cols; ++c) {
                                   px.grad[r * cols + c] += inv * self.grad[axis == 0 ? c : r];
                                 }
                               }
                             });
}

/// Concatenate along the feature (column) axis; all parts share the row count.
inline DiffValue concat_cols(const std::vector<DiffValue>& parts) {
  detail::require(!parts.empty(), [&] { return "concat_cols: no inputs"; });
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == rows, [&] { return "concat_cols: row counts differ (" +
                                          std::to_string(p.rows()) + " vs " +
                                          std::to_string(rows) + ")"; });
    cols += p.cols();
  }
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto pd = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(r * p.cols()), p.cols(),
                  out.begin() + static_cast<std::ptrdiff_t>(r * cols + off));
    }
    off += p.cols();
  }
  return detail::make_result({rows, cols}, std::move(out), parts, "concat_cols",
                             [rows, cols, offsets](detail::Node& self) {
                               for (std::size_t i = 0; i < self.parents.size(); ++i) {
                                 detail::Node& p = *self.parents[i];
                                 if (!p.requires_grad) continue;
                                 const std::size_t pc = p.shape.cols;
                                 for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t c = 0; c < pc; ++c) {
                                     p.grad[r * pc + c] += self.grad[r * cols + offsets[i] + c];
                                   }
                                 }
                               }
                             });
}

inline DiffValue concat_cols(const DiffValue& a, const DiffValue& b) { return concat_cols({a, b}); }

/// Softmax over all entries of a vector, max-shifted for stability.
inline DiffValue softmax(const DiffValue& x) {
  detail::require(x.shape().is_vector(), [&] { return "softmax expects a vector, got " + x.shape().str(); });
  const auto xd = x.data();
  const double mx = *std::max_element(xd.begin(), xd.end());
  std::vector<double> out(xd.size());
  double z = 0.0;
  for (std::size_t i = 0; i < xd.size(); ++i) {
    out[i] = std::exp(xd[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return detail::make_result(x.shape(), std::move(out), {x}, "softmax", [](detail::Node& self) {
    detail::Node& px = detail::parent(self, 0);
    double dot = 0.0;
    for (std::size_t i = 0; i < self.data.size(); ++i) dot += self.grad[i] * self.data[i];
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      px.grad[i] += self.data[i] * (self.grad[i] - dot);
    }
  });
}

/// Gather rows by index into a (indices.size() x cols) value.
inline DiffValue select_rows(const DiffValue& x, std::vector<std::size_t> indices) {
  const std::size_t cols = x.cols();
  for (std::size_t i : indices) {
    detail::require(i < x.rows(), [&] { return "select_rows: index " + std::to_string(i) + " out of range"; });
  }
  std::vector<double> out(indices.size() * cols);
  const auto xd = x.data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(indices[r] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  const Shape out_shape{indices.size(), cols};
  return detail::make_result(out_shape, std::move(out), {x}, "select_rows",
                             [cols, idx = std::move(indices)](detail::Node& self) {
                               detail::Node& px = detail::parent(self, 0);
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                 for (std::size_t c = 0; c < cols; ++c) {
                                   px.grad[idx[r] * cols + c] += self.grad[r * cols + c];
                                 }
                               }
                             });
}

/// Gather flat elements into a 1 x indices.size() row.
inline DiffValue select_elements(const DiffValue& x, std::vector<std::size_t> indices) {
  for (std::size_t i : indices) {
    detail::require(i < x.size(), [&] { return "select_elements: index " + std::to_string(i) + " out of range"; });
  }
  std::vector<double> out(indices.size());
  const auto xd = x.data();
  for (std::size_t k = 0; k < indices.size(); ++k) out[k] = xd[indices[k]];
  const Shape out_shape{1, indices.size()};
  return detail::make_result(out_shape, std::move(out), {x}, "select_elements",
                             [idx = std::move(indices)](detail::Node& self) {
                               detail::Node& px = detail::parent(self, 0);
                               for (std::size_t k = 0; k < idx.size(); ++k) {
                                 px.grad[idx[k]] += self.grad[k];
                               }
                             });
}

/// Same values, cut from the graph (no gradient flows through).
inline DiffValue detach(const DiffValue& x) {
  return DiffValue::constant(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

template <class Visit>
void for_each_node(const DiffValue& root, Visit visit) {
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    visit(*n);
    for (const auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
}

}  // namespace detail

/// Accumulates d(loss)/d(leaf) into the grad buffer of every trainable leaf
/// reachable from `loss`. Intermediate gradients are rebuilt on every call.
inline void backward(const DiffValue& loss) {
  if (!loss.valid() || !loss.shape().is_scalar()) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.valid() ? loss.shape().str() : std::string("<null>")));
  }
  if (!loss.requires_grad()) return;
  const auto order = detail::topo_order(loss.node().get());
  for (detail::Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->is_leaf() && n->backward_fn) n->backward_fn(*n);
  }
}

/// Smallest |pre-activation| over every leaky_relu node reachable from `root`
/// (infinity when there is none).
inline double min_rectifier_margin(const DiffValue& root) {
  double margin = std::numeric_limits<double>::infinity();
  detail::for_each_node(root, [&](detail::Node& n) {
    if (n.op != "leaky_relu" || n.parents.empty()) return;
    for (double v : n.parents[0]->data) margin = std::min(margin, std::abs(v));
  });
  return margin;
}

// ---------------------------------------------------------------------------
// Parameter collections
// ---------------------------------------------------------------------------

/// Named trainable leaves in insertion order.
class ParamSet {
 public:
  DiffValue& add(const std::string& name, Shape shape, std::vector<double> data) {
    if (find(name) != nullptr) throw ConfigError("duplicate parameter name '" + name + "'");
    entries_.emplace_back(name, DiffValue::parameter(shape, std::move(data)));
    return entries_.back().second;
  }

  [[nodiscard]] const DiffValue& get(const std::string& name) const {
    const DiffValue* v = find(name);
    if (v == nullptr) throw ConfigError("unknown parameter '" + name + "'");
    return *v;
  }
  [[nodiscard]] DiffValue& get(const std::string& name) {
    return const_cast<DiffValue&>(std::as_const(*this).get(name));
  }
  [[nodiscard]] bool contains(const std::string& name) const { return find(name) != nullptr; }

  void zero_grad() {
    for (auto& [name, v] : entries_) v.zero_grad();
  }

  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] std::size_t scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [name, v] : entries_) n += v.size();
    return n;
  }

  /// Registers an existing leaf without copying it.
  void share(const std::string& name, const DiffValue& leaf) {
    if (find(name) != nullptr) throw ConfigError("duplicate parameter name '" + name + "'");
    entries_.emplace_back(name, leaf);
  }

  /// Appends the entries of `other` (sharing their leaves).
  void extend(const ParamSet& other) {
    for (const auto& [name, v] : other.entries_) share(name, v);
  }

  /// Deep copy with fresh leaves.
  [[nodiscard]] ParamSet clone() const {
    ParamSet out;
    for (const auto& [name, v] : entries_) {
      out.add(name, v.shape(), std::vector<double>(v.data().begin(), v.data().end()));
    }
    return out;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  [[nodiscard]] auto begin() const { return entries_.begin(); }
  [[nodiscard]] auto end() const { return entries_.end(); }

 private:
  [[nodiscard]] const DiffValue* find(const std::string& name) const {
    for (const auto& [n, v] : entries_) {
      if (n == name) return &v;
    }
    return nullptr;
  }

  // deque: references returned by add() stay valid as entries are appended.
  std::deque<std::pair<std::string, DiffValue>> entries_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_relative_error{0.0};
  /// Some rectifier input lies within 1e-4 of its kink; the caller should draw
  /// another point rather than trust the comparison.
  bool near_kink{false};
  std::size_t checked{0};
};

inline constexpr double kKinkMargin = 1e-4;

/// Compares analytic gradients of `f` with central differences of step
/// `perturbation` for every scalar of every parameter in `params`.
/// Leaves the parameter values unchanged and the grads holding the analytic result.
inline GradCheckResult grad_check(const std::function<DiffValue(ParamSet&)>& f, ParamSet& params,
                                  double perturbation) {
  if (!(perturbation > 0.0)) throw ConfigError("grad_check: perturbation must be > 0");
  GradCheckResult result;
  params.zero_grad();
  const DiffValue loss = f(params);
  result.near_kink = min_rectifier_margin(loss) < kKinkMargin;
  backward(loss);
  for (auto& [name, leaf] : params) {
    auto values = leaf.mutable_data();
    const auto grads = leaf.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + perturbation;
      const double up = f(params).item();
      values[i] = saved - perturbation;
      const double down = f(params).item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * perturbation);
      const double analytic = grads[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      result.max_relative_error =
          std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Adaptive-moment optimizer
// ---------------------------------------------------------------------------

struct AdamHyper {
  double learning_rate{1e-4};
  double beta1{0.5};
  double beta2{0.9};
  double epsilon{1e-8};
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamHyper hyper) : hyper_(hyper) {}

  /// One update of every parameter from its current grad. Throws NumericalError
  /// (leaving parameters and moments untouched) if any gradient is not finite.
  void step(ParamSet& params) {
    for (const auto& [name, leaf] : params) {
      const auto g = leaf.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) {
          std::ostringstream msg;
          msg << "non-finite gradient in parameter '" << name << "' at element " << i
              << " (step " << steps_ + 1 << ")";
          throw NumericalError(msg.str());
        }
      }
    }
    if (moments_.empty()) {
      for (const auto& [name, leaf] : params) {
        moments_.push_back({std::vector<double>(leaf.size(), 0.0),
                            std::vector<double>(leaf.size(), 0.0)});
      }
    }
    if (moments_.size() != params.size()) {
      throw ConfigError("Adam: parameter set changed between steps");
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double corr1 = 1.0 - std::pow(hyper_.beta1, t);
    const double corr2 = 1.0 - std::pow(hyper_.beta2, t);
    std::size_t k = 0;
    for (auto& [name, leaf] : params) {
      auto& [m, v] = moments_[k++];
      auto x = leaf.mutable_data();
      const auto g = leaf.grad();
      for (std::size_t i = 0; i < x.size(); ++i) {
        m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * g[i];
        v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * g[i] * g[i];
        const double mhat = m[i] / corr1;
        const double vhat = v[i] / corr2;
        x[i] -= hyper_.learning_rate * mhat / (std::sqrt(vhat) + hyper_.epsilon);
      }
    }
  }

  [[nodiscard]] std::size_t step_count() const noexcept { return steps_; }
  [[nodiscard]] const AdamHyper& hyper() const noexcept { return hyper_; }
  void set_learning_rate(double lr) noexcept { hyper_.learning_rate = lr; }

 private:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
  };
  AdamHyper hyper_{};
  std::vector<Moments> moments_;
  std::size_t steps_{0};
};

}  // namespace vcgan::ad
