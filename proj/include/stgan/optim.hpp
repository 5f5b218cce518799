#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "stgan/tensor.hpp"

namespace stgan::nd {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments start at zero and the step count grows
/// by one per call to step().
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  /// Applies one update from the current grads. Grads are left untouched.
  /// Throws if a registered parameter has no grad.
  void step();

  std::int64_t steps() const { return step_count_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }
  std::span<const Tensor> params() const { return params_; }
  std::span<const std::vector<double>> first_moments() const { return m_; }
  std::span<const std::vector<double>> second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t step_count_ = 0;
};

inline constexpr double kDefaultClipNorm = 5.0;

/// Rescales all grads when their joint L2 norm exceeds `max_norm`.
/// Returns the norm before clipping. NaN grads are rejected.
double clip_global_norm(std::span<const Tensor> params, double max_norm);

void zero_grads(std::span<const Tensor> params);
void clear_grads(std::span<const Tensor> params);

/// Clamps every parameter value to [-bound, bound].
void clamp_values(std::span<const Tensor> params, double bound);

// Initializers. Recurrent weights use a small uniform range, dense layers a
// normal with std 1/sqrt(fan_in).
inline constexpr double kRecurrentInitRange = 0.08;

Tensor uniform_param(Shape shape, double range, std::mt19937_64& rng);
Tensor scaled_normal_param(Shape shape, std::size_t fan_in, std::mt19937_64& rng);
Tensor normal_tensor(Shape shape, std::mt19937_64& rng, double stddev = 1.0);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic grads of `loss_fn` against central differences.
/// Relative error is |a - n| / max(|a|, |n|, abs_floor).
GradCheckReport finite_difference_check(std::span<const Tensor> params,
                                        const std::function<Tensor()>& loss_fn, double h = 1e-5,
                                        double abs_floor = 1e-5);

}  // namespace stgan::nd
