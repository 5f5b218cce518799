#include "stgan/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "stgan/autograd.hpp"

namespace stgan::nd {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    if (!p.defined() || !p.is_leaf()) throw std::invalid_argument("Adam: parameters must be leaf tensors");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      throw std::runtime_error("Adam: parameter " + std::to_string(i) + " of shape " +
                               shape_str(params_[i].shape()) + " has no grad");
    }
  }
  ++step_count_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double t = static_cast<double>(step_count_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto value = params_[i].mutable_data();
    auto g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      value[k] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

double clip_global_norm(std::span<const Tensor> params, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
  double ss = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (std::isnan(g)) throw std::runtime_error("clip_global_norm: NaN in gradients");
      ss += g * g;
    }
  }
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void zero_grads(std::span<const Tensor> params) {
  for (auto p : params) p.zero_grad();
}

void clear_grads(std::span<const Tensor> params) {
  for (auto p : params) p.clear_grad();
}

void clamp_values(std::span<const Tensor> params, double bound) {
  for (auto p : params)
    for (double& v : p.mutable_data()) v = std::clamp(v, -bound, bound);
}

Tensor uniform_param(Shape shape, double range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<double> values(numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), true);
}

Tensor scaled_normal_param(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  std::vector<double> values(numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), true);
}

Tensor normal_tensor(Shape shape, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values));
}

GradCheckReport finite_difference_check(std::span<const Tensor> params,
                                        const std::function<Tensor()>& loss_fn, double h,
                                        double abs_floor) {
  std::vector<Tensor> ps(params.begin(), params.end());
  clear_grads(ps);
  backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (const auto& p : ps) {
    analytic.emplace_back(p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                                       : std::vector<double>(p.numel(), 0.0));
  }
  // Losses are evaluated with grad mode on: some (the gradient penalty) take
  // inner gradients and need recorded history even for a plain value.
  GradCheckReport report;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    auto values = ps[pi].mutable_data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + h;
      const double up = loss_fn().item();
      values[k] = saved - h;
      const double down = loss_fn().item();
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi][k];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), abs_floor});
      const double err = std::fabs(a - numeric) / denom;
      ++report.checked;
      if (err > report.max_rel_error || std::isnan(err)) {
        report.max_rel_error = std::isnan(err) ? INFINITY : err;
        report.worst_param = pi;
        report.worst_index = k;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace stgan::nd
