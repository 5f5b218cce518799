#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stgan/tensor.hpp"

namespace stgan::nd {

/// The recorded computation reachable from one root, in append order.
/// Node ids are assigned at creation, so inputs always precede their users.
class Graph {
 public:
  struct Entry {
    std::uint64_t id;
    std::string op;
    Shape shape;
    std::vector<std::uint64_t> inputs;
    bool requires_grad;
  };

  static Graph trace(const Tensor& root);

  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
};

/// Populates the grad of every requires_grad leaf reachable from `loss`.
/// Leaf grads are zeroed first unless `accumulate` is set.
void backward(const Tensor& loss, bool accumulate = false);

/// Gradients of `output` (scalar unless `grad_output` is given) with respect to
/// `wrt`. With `create_graph` the results carry history and can themselves be
/// differentiated.
std::vector<Tensor> grad(const Tensor& output, std::span<const Tensor> wrt,
                         bool create_graph = false, const Tensor& grad_output = {});

}  // namespace stgan::nd
