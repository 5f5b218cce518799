#pragma once

// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// Every op returns a new Tensor. When grad mode is on and any input requires a
// gradient, the result records its inputs and a backward closure. Backward
// closures are written in terms of the same ops, so running them with grad
// mode enabled (create_graph) yields differentiable gradients. That is the
// single double-backward path the gradient penalty relies on.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stgan::nd {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

/// Receives the upstream gradient and the op's own output; returns one
/// gradient per input (an undefined Tensor where the input needs none).
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out, const Tensor& out)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::vector<double> grad;  // leaf gradient storage, empty when absent
  bool has_grad = false;
  const char* op = "leaf";
  std::uint64_t id = 0;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Direct write access; meant for parameter initialization and optimizers.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad();

  const char* op() const;
  std::uint64_t id() const;
  const std::vector<Tensor>& inputs() const;

  /// Same values, no history, requires_grad off.
  Tensor detach() const;
  /// Deep copy of the values into a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  Node* node() const { return node_.get(); }
  bool same(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, const char*, std::vector<Tensor>,
                            BackwardFn);
};

/// Builds an op result and records history when grad mode is on and some
/// input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::vector<Tensor> inputs, BackwardFn backward);

bool grad_enabled();

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

struct NoGradGuard : GradModeGuard {
  NoGradGuard() : GradModeGuard(false) {}
};

// ---- op catalog -----------------------------------------------------------

// Elementwise binary ops broadcast with numpy rules (right-aligned).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
/// offset - x
Tensor rsub_scalar(double offset, const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor broadcast_to(const Tensor& x, const Shape& shape);
/// Sums x down to `shape`, the reverse of broadcast_to.
Tensor sum_to(const Tensor& x, const Shape& shape);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
/// log(max(x, kLogFloor)).
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor relu(const Tensor& x);

Tensor softmax(const Tensor& x);      // last axis
Tensor log_softmax(const Tensor& x);  // last axis

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis, bool keepdim = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, int axis, bool keepdim = false);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length);
/// Zero-pads x along `axis` so it starts at `before` inside a dimension of `total`.
Tensor pad(const Tensor& x, int axis, std::size_t before, std::size_t total);

/// Row lookup: table [rows, d], ids -> [ids.size(), d].
Tensor embedding(const Tensor& table, const std::vector<std::size_t>& ids);
/// Adds the rows of x into a zero [rows, d] table at `ids`.
Tensor scatter_rows(const Tensor& x, const std::vector<std::size_t>& ids, std::size_t rows);

Tensor l1_norm(const Tensor& x);
Tensor l2_norm(const Tensor& x);
/// Euclidean norm along the last axis; zero rows get a zero subgradient.
Tensor row_l2_norm(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }
inline Tensor operator*(const Tensor& x, double c) { return scale(x, c); }
inline Tensor operator*(double c, const Tensor& x) { return scale(x, c); }
inline Tensor operator+(const Tensor& x, double c) { return add_scalar(x, c); }
inline Tensor operator-(double c, const Tensor& x) { return rsub_scalar(c, x); }

inline constexpr double kLogFloor = 1e-12;

}  // namespace stgan::nd
