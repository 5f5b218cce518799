#include "stgan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stgan::nd {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool t_grad_enabled = true;

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> value) {
  if (numel(shape) != value.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(value.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
  const int r = static_cast<int>(rank);
  if (axis < -r || axis >= r) {
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) shape_error(op, a, b);
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `in` expressed over the dimensions of `out`; broadcast dims get 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t d_in = in.size() - 1 - k;
    const std::size_t d_out = out.size() - 1 - k;
    strides[d_out] = in[d_in] == 1 ? 0 : stride;
    stride *= in[d_in];
  }
  return strides;
}

template <class F>
void broadcast_loop(const Shape& out, const std::vector<std::size_t>& sa,
                    const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t n = numel(out);
  const std::size_t rank = out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t k = 0; k < n; ++k) {
    f(k, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

template <class F>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, BackwardFn backward) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto pa = a.data();
  auto pb = b.data();
  if (sa == sb) {
    std::vector<double> out(pa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i], pb[i]);
    return make_result(sa, std::move(out), op, {a, b}, std::move(backward));
  }
  Shape shape = broadcast_shape(sa, sb, op);
  std::vector<double> out(numel(shape));
  if (pb.size() == 1 && shape == sa) {
    const double v = pb[0];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i], v);
  } else if (pa.size() == 1 && shape == sb) {
    const double v = pa[0];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(v, pb[i]);
  } else {
    broadcast_loop(shape, broadcast_strides(sa, shape), broadcast_strides(sb, shape),
                   [&](std::size_t k, std::size_t ia, std::size_t ib) { out[k] = f(pa[ia], pb[ib]); });
  }
  return make_result(std::move(shape), std::move(out), op, {a, b}, std::move(backward));
}

template <class F>
Tensor unary(const Tensor& x, const char* op, F f, BackwardFn backward) {
  auto px = x.data();
  std::vector<double> out(px.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(px[i]);
  return make_result(x.shape(), std::move(out), op, {x}, std::move(backward));
}

// Constant tensor with no history.
Tensor constant_like(const Tensor& x, std::vector<double> values) {
  return Tensor(x.shape(), std::move(values));
}

struct AxisSplit {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---- shapes ---------------------------------------------------------------

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(new_node(std::move(shape), std::move(data))) {
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = nd::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = nd::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw std::out_of_range("tensor axis out of range");
  return s[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() on non-scalar tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& s = shape();
  if (s.size() != 2 || row >= s[0] || col >= s[1]) throw std::out_of_range("Tensor::at");
  return node_->value[row * s[1] + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) throw std::logic_error("requires_grad can only be set on leaf tensors");
  node_->requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return node_ && !node_->backward; }

bool Tensor::has_grad() const { return node_ && node_->has_grad; }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no grad");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!has_grad()) throw std::logic_error("tensor has no grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->value.size(), 0.0);
  node_->has_grad = true;
}

void Tensor::clear_grad() {
  node_->grad.clear();
  node_->has_grad = false;
}

const char* Tensor::op() const { return node_->op; }
std::uint64_t Tensor::id() const { return node_->id; }
const std::vector<Tensor>& Tensor::inputs() const { return node_->inputs; }

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

Tensor Tensor::clone(bool requires_grad) const { return Tensor(shape(), node_->value, requires_grad); }

Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = new_node(std::move(shape), std::move(value));
  node->op = op;
  if (t_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->inputs = std::move(inputs);
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

bool grad_enabled() { return t_grad_enabled; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(t_grad_enabled) { t_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { t_grad_enabled = previous_; }

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; },
                [a, b](const Tensor& g, const Tensor&) {
                  return std::vector<Tensor>{a.requires_grad() ? sum_to(g, a.shape()) : Tensor{},
                                             b.requires_grad() ? sum_to(g, b.shape()) : Tensor{}};
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; },
                [a, b](const Tensor& g, const Tensor&) {
                  return std::vector<Tensor>{a.requires_grad() ? sum_to(g, a.shape()) : Tensor{},
                                             b.requires_grad() ? sum_to(neg(g), b.shape()) : Tensor{}};
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; },
                [a, b](const Tensor& g, const Tensor&) {
                  return std::vector<Tensor>{
                      a.requires_grad() ? sum_to(mul(g, b), a.shape()) : Tensor{},
                      b.requires_grad() ? sum_to(mul(g, a), b.shape()) : Tensor{}};
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(a, b, "div", [](double x, double y) { return x / y; },
                [a, b](const Tensor& g, const Tensor& out) {
                  return std::vector<Tensor>{
                      a.requires_grad() ? sum_to(div(g, b), a.shape()) : Tensor{},
                      b.requires_grad() ? sum_to(neg(div(mul(g, out), b)), b.shape()) : Tensor{}};
                });
}

Tensor neg(const Tensor& x) {
  return unary(x, "neg", [](double v) { return -v; },
               [](const Tensor& g, const Tensor&) { return std::vector<Tensor>{neg(g)}; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, "scale", [factor](double v) { return v * factor; },
               [factor](const Tensor& g, const Tensor&) {
                 return std::vector<Tensor>{scale(g, factor)};
               });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(x, "add_scalar", [offset](double v) { return v + offset; },
               [](const Tensor& g, const Tensor&) { return std::vector<Tensor>{g}; });
}

Tensor rsub_scalar(double offset, const Tensor& x) {
  return unary(x, "rsub_scalar", [offset](double v) { return offset - v; },
               [](const Tensor& g, const Tensor&) { return std::vector<Tensor>{neg(g)}; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid",
               [](double v) {
                 if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](const Tensor& g, const Tensor& y) {
                 return std::vector<Tensor>{mul(g, mul(y, rsub_scalar(1.0, y)))};
               });
}

Tensor tanh(const Tensor& x) {
  return unary(x, "tanh", [](double v) { return std::tanh(v); },
               [](const Tensor& g, const Tensor& y) {
                 return std::vector<Tensor>{mul(g, rsub_scalar(1.0, square(y)))};
               });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](double v) { return std::exp(v); },
               [](const Tensor& g, const Tensor& y) { return std::vector<Tensor>{mul(g, y)}; });
}

Tensor log(const Tensor& x) {
  return unary(x, "log", [](double v) { return std::log(std::max(v, kLogFloor)); },
               [x](const Tensor& g, const Tensor&) {
                 // Floored entries get zero gradient; the shift keeps the
                 // divisor at max(x, floor) while staying differentiable in x.
                 auto px = x.data();
                 std::vector<double> shift(px.size());
                 std::vector<double> mask(px.size());
                 for (std::size_t i = 0; i < px.size(); ++i) {
                   const bool floored = px[i] < kLogFloor;
                   shift[i] = floored ? kLogFloor - px[i] : 0.0;
                   mask[i] = floored ? 0.0 : 1.0;
                 }
                 Tensor safe = add(x, constant_like(x, std::move(shift)));
                 return std::vector<Tensor>{mul(div(g, safe), constant_like(x, std::move(mask)))};
               });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](double v) { return v * v; },
               [x](const Tensor& g, const Tensor&) {
                 return std::vector<Tensor>{mul(g, scale(x, 2.0))};
               });
}

Tensor abs(const Tensor& x) {
  return unary(x, "abs", [](double v) { return std::fabs(v); },
               [x](const Tensor& g, const Tensor&) {
                 auto px = x.data();
                 std::vector<double> sign(px.size());
                 for (std::size_t i = 0; i < px.size(); ++i) {
                   sign[i] = px[i] > 0 ? 1.0 : (px[i] < 0 ? -1.0 : 0.0);
                 }
                 return std::vector<Tensor>{mul(g, constant_like(x, std::move(sign)))};
               });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(x, "leaky_relu", [slope](double v) { return v > 0 ? v : slope * v; },
               [x, slope](const Tensor& g, const Tensor&) {
                 auto px = x.data();
                 std::vector<double> d(px.size());
                 for (std::size_t i = 0; i < px.size(); ++i) d[i] = px[i] > 0 ? 1.0 : slope;
                 return std::vector<Tensor>{mul(g, constant_like(x, std::move(d)))};
               });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

// ---- linear algebra / shape ----------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) shape_error("matmul", sa, sb);
  const std::size_t m = sa[0];
  const std::size_t k = sa[1];
  const std::size_t n = sb[1];
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), "matmul", {a, b},
                     [a, b](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{
                           a.requires_grad() ? matmul(g, transpose(b)) : Tensor{},
                           b.requires_grad() ? matmul(transpose(a), g) : Tensor{}};
                     });
}

Tensor transpose(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.size() != 2) {
    throw std::invalid_argument("transpose expects a matrix, got shape " + shape_str(s));
  }
  const std::size_t r = s[0];
  const std::size_t c = s[1];
  auto px = x.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = px[i * c + j];
  return make_result({c, r}, std::move(out), "transpose", {x},
                     [](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{transpose(g)};
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  Shape in_shape = x.shape();
  return make_result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()),
                     "reshape", {x}, [in_shape](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{reshape(g, in_shape)};
                     });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (broadcast_shape(x.shape(), shape, "broadcast_to") != shape) {
    shape_error("broadcast_to", x.shape(), shape);
  }
  auto px = x.data();
  std::vector<double> out(numel(shape));
  const auto sx = broadcast_strides(x.shape(), shape);
  const std::vector<std::size_t> zero(shape.size(), 0);
  broadcast_loop(shape, sx, zero, [&](std::size_t k, std::size_t ix, std::size_t) { out[k] = px[ix]; });
  Shape in_shape = x.shape();
  return make_result(shape, std::move(out), "broadcast_to", {x},
                     [in_shape](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{sum_to(g, in_shape)};
                     });
}

Tensor sum_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (broadcast_shape(shape, x.shape(), "sum_to") != x.shape()) {
    shape_error("sum_to", x.shape(), shape);
  }
  auto px = x.data();
  std::vector<double> out(numel(shape), 0.0);
  const auto st = broadcast_strides(shape, x.shape());
  const std::vector<std::size_t> zero(x.shape().size(), 0);
  broadcast_loop(x.shape(), st, zero, [&](std::size_t k, std::size_t it, std::size_t) { out[it] += px[k]; });
  Shape in_shape = x.shape();
  return make_result(shape, std::move(out), "sum_to", {x},
                     [in_shape](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{broadcast_to(g, in_shape)};
                     });
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Shape in_shape = x.shape();
  return make_result({}, {total}, "sum", {x}, [in_shape](const Tensor& g, const Tensor&) {
    return std::vector<Tensor>{broadcast_to(g, in_shape)};
  });
}

Tensor sum(const Tensor& x, int axis, bool keepdim) {
  const std::size_t ax = normalize_axis(axis, x.dim(), "sum");
  const AxisSplit s = split_at(x.shape(), ax);
  auto px = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l) {
      const double* src = px.data() + (o * s.len + l) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  Shape kept = x.shape();
  kept[ax] = 1;
  Shape shape = kept;
  if (!keepdim) shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(ax));
  Shape in_shape = x.shape();
  return make_result(std::move(shape), std::move(out), "sum_axis", {x},
                     [in_shape, kept](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{broadcast_to(reshape(g, kept), in_shape)};
                     });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mean(const Tensor& x, int axis, bool keepdim) {
  const std::size_t ax = normalize_axis(axis, x.dim(), "mean");
  return scale(sum(x, axis, keepdim), 1.0 / static_cast<double>(x.shape()[ax]));
}

Tensor softmax(const Tensor& x) {
  if (x.dim() == 0) throw std::invalid_argument("softmax of a 0-d tensor");
  const std::size_t last = x.shape().back();
  const std::size_t rows = x.numel() / last;
  auto px = x.data();
  std::vector<double> out(px.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = px.data() + r * last;
    double* dst = out.data() + r * last;
    const double mx = *std::max_element(src, src + last);
    double z = 0.0;
    for (std::size_t i = 0; i < last; ++i) z += (dst[i] = std::exp(src[i] - mx));
    for (std::size_t i = 0; i < last; ++i) dst[i] /= z;
  }
  return make_result(x.shape(), std::move(out), "softmax", {x},
                     [](const Tensor& g, const Tensor& y) {
                       Tensor dot = sum(mul(g, y), -1, true);
                       return std::vector<Tensor>{mul(y, sub(g, dot))};
                     });
}

Tensor log_softmax(const Tensor& x) {
  if (x.dim() == 0) throw std::invalid_argument("log_softmax of a 0-d tensor");
  const std::size_t last = x.shape().back();
  const std::size_t rows = x.numel() / last;
  auto px = x.data();
  std::vector<double> out(px.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = px.data() + r * last;
    double* dst = out.data() + r * last;
    const double mx = *std::max_element(src, src + last);
    double z = 0.0;
    for (std::size_t i = 0; i < last; ++i) z += std::exp(src[i] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t i = 0; i < last; ++i) dst[i] = src[i] - lz;
  }
  return make_result(x.shape(), std::move(out), "log_softmax", {x},
                     [](const Tensor& g, const Tensor& y) {
                       return std::vector<Tensor>{sub(g, mul(exp(y), sum(g, -1, true)))};
                     });
}

// ---- structural -----------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  const Shape& first = parts.front().shape();
  const std::size_t ax = normalize_axis(axis, first.size(), "concat");
  Shape shape = first;
  shape[ax] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_error("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != ax && s[i] != first[i]) shape_error("concat", first, s);
    shape[ax] += s[ax];
  }
  const AxisSplit out_split = split_at(shape, ax);
  std::vector<double> out(numel(shape));
  std::size_t offset = 0;
  std::vector<std::size_t> starts;
  for (const auto& p : parts) {
    starts.push_back(offset);
    const std::size_t len = p.shape()[ax];
    auto src = p.data();
    for (std::size_t o = 0; o < out_split.outer; ++o) {
      std::copy_n(src.data() + o * len * out_split.inner, len * out_split.inner,
                  out.data() + (o * out_split.len + offset) * out_split.inner);
    }
    offset += len;
  }
  std::vector<std::size_t> lens;
  for (const auto& p : parts) lens.push_back(p.shape()[ax]);
  return make_result(std::move(shape), std::move(out), "concat", parts,
                     [parts, starts, lens, axis](const Tensor& g, const Tensor&) {
                       std::vector<Tensor> grads;
                       for (std::size_t i = 0; i < parts.size(); ++i) {
                         grads.push_back(parts[i].requires_grad() ? slice(g, axis, starts[i], lens[i])
                                                                  : Tensor{});
                       }
                       return grads;
                     });
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = normalize_axis(axis, x.dim(), "slice");
  const AxisSplit s = split_at(x.shape(), ax);
  if (start + length > s.len || length == 0) {
    throw std::invalid_argument("slice [" + std::to_string(start) + ", " +
                                std::to_string(start + length) + ") out of range for shape " +
                                shape_str(x.shape()));
  }
  Shape shape = x.shape();
  shape[ax] = length;
  auto px = x.data();
  std::vector<double> out(numel(shape));
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(px.data() + (o * s.len + start) * s.inner, length * s.inner,
                out.data() + o * length * s.inner);
  }
  const std::size_t total = s.len;
  return make_result(std::move(shape), std::move(out), "slice", {x},
                     [axis, start, total](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{pad(g, axis, start, total)};
                     });
}

Tensor pad(const Tensor& x, int axis, std::size_t before, std::size_t total) {
  const std::size_t ax = normalize_axis(axis, x.dim(), "pad");
  const AxisSplit s = split_at(x.shape(), ax);
  if (before + s.len > total) throw std::invalid_argument("pad: target dimension too small");
  Shape shape = x.shape();
  shape[ax] = total;
  auto px = x.data();
  std::vector<double> out(numel(shape), 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(px.data() + o * s.len * s.inner, s.len * s.inner,
                out.data() + (o * total + before) * s.inner);
  }
  const std::size_t len = s.len;
  return make_result(std::move(shape), std::move(out), "pad", {x},
                     [axis, before, len](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{slice(g, axis, before, len)};
                     });
}

Tensor embedding(const Tensor& table, const std::vector<std::size_t>& ids) {
  if (table.dim() != 2) {
    throw std::invalid_argument("embedding table must be a matrix, got " + shape_str(table.shape()));
  }
  const std::size_t rows = table.shape()[0];
  const std::size_t d = table.shape()[1];
  auto pt = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw std::out_of_range("embedding id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(rows) + " rows");
    }
    std::copy_n(pt.data() + ids[i] * d, d, out.data() + i * d);
  }
  return make_result({ids.size(), d}, std::move(out), "embedding", {table},
                     [ids, rows](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{scatter_rows(g, ids, rows)};
                     });
}

Tensor scatter_rows(const Tensor& x, const std::vector<std::size_t>& ids, std::size_t rows) {
  if (x.dim() != 2 || x.shape()[0] != ids.size()) {
    throw std::invalid_argument("scatter_rows: shape " + shape_str(x.shape()) + " does not match " +
                                std::to_string(ids.size()) + " ids");
  }
  const std::size_t d = x.shape()[1];
  auto px = x.data();
  std::vector<double> out(rows * d, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) throw std::out_of_range("scatter_rows id out of range");
    double* dst = out.data() + ids[i] * d;
    const double* src = px.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
  return make_result({rows, d}, std::move(out), "scatter_rows", {x},
                     [ids](const Tensor& g, const Tensor&) {
                       return std::vector<Tensor>{embedding(g, ids)};
                     });
}

// ---- norms ----------------------------------------------------------------

Tensor l1_norm(const Tensor& x) { return sum(abs(x)); }

Tensor l2_norm(const Tensor& x) {
  double ss = 0.0;
  for (double v : x.data()) ss += v * v;
  return make_result({}, {std::sqrt(ss)}, "l2_norm", {x}, [x](const Tensor& g, const Tensor& y) {
    Tensor safe = y.item() == 0.0 ? add_scalar(y, 1.0) : y;
    Tensor factor = y.item() == 0.0 ? scale(div(g, safe), 0.0) : div(g, safe);
    return std::vector<Tensor>{mul(x, factor)};
  });
}

Tensor row_l2_norm(const Tensor& x) {
  if (x.dim() == 0) throw std::invalid_argument("row_l2_norm of a 0-d tensor");
  const std::size_t last = x.shape().back();
  const std::size_t rows = x.numel() / last;
  auto px = x.data();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t i = 0; i < last; ++i) ss += px[r * last + i] * px[r * last + i];
    out[r] = std::sqrt(ss);
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  Shape kept = x.shape();
  kept.back() = 1;
  return make_result(std::move(shape), std::move(out), "row_l2_norm", {x},
                     [x, kept](const Tensor& g, const Tensor& y) {
                       auto py = y.data();
                       std::vector<double> shift(py.size());
                       std::vector<double> mask(py.size());
                       for (std::size_t i = 0; i < py.size(); ++i) {
                         shift[i] = py[i] == 0.0 ? 1.0 : 0.0;
                         mask[i] = py[i] == 0.0 ? 0.0 : 1.0;
                       }
                       Tensor safe = add(y, constant_like(y, std::move(shift)));
                       Tensor factor = mul(div(g, safe), constant_like(y, std::move(mask)));
                       return std::vector<Tensor>{mul(x, reshape(factor, kept))};
                     });
}

}  // namespace stgan::nd
