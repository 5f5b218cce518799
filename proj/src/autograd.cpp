#include "stgan/autograd.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace stgan::nd {

namespace {

// Every node reachable from root through requires_grad edges, newest first.
std::vector<Tensor> reverse_topological(const Tensor& root) {
  std::vector<Tensor> order;
  std::unordered_set<const Node*> seen;
  std::vector<Tensor> stack{root};
  seen.insert(root.node());
  while (!stack.empty()) {
    Tensor t = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : t.inputs()) {
      if (in.requires_grad() && seen.insert(in.node()).second) stack.push_back(in);
    }
    order.push_back(std::move(t));
  }
  std::sort(order.begin(), order.end(),
            [](const Tensor& a, const Tensor& b) { return a.id() > b.id(); });
  return order;
}

using GradMap = std::unordered_map<const Node*, Tensor>;

void accumulate(GradMap& grads, const Tensor& target, const Tensor& g) {
  auto [it, inserted] = grads.try_emplace(target.node(), g);
  if (!inserted) it->second = add(it->second, g);
}

GradMap propagate(const std::vector<Tensor>& order, const Tensor& root, const Tensor& seed) {
  GradMap grads;
  grads.emplace(root.node(), seed);
  for (const auto& t : order) {
    auto it = grads.find(t.node());
    if (it == grads.end() || t.is_leaf()) continue;
    const Tensor g = it->second;
    const auto in_grads = t.node()->backward(g, t);
    const auto& inputs = t.inputs();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!inputs[i].requires_grad() || !in_grads[i].defined()) continue;
      if (in_grads[i].shape() != inputs[i].shape()) {
        throw std::logic_error(std::string("backward of ") + t.op() + " produced grad of shape " +
                               shape_str(in_grads[i].shape()) + " for input of shape " +
                               shape_str(inputs[i].shape()));
      }
      accumulate(grads, inputs[i], in_grads[i]);
    }
  }
  return grads;
}

}  // namespace

Graph Graph::trace(const Tensor& root) {
  Graph graph;
  std::unordered_set<const Node*> seen{root.node()};
  std::vector<Tensor> stack{root};
  std::vector<Tensor> all;
  while (!stack.empty()) {
    Tensor t = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : t.inputs()) {
      if (seen.insert(in.node()).second) stack.push_back(in);
    }
    all.push_back(std::move(t));
  }
  std::sort(all.begin(), all.end(), [](const Tensor& a, const Tensor& b) { return a.id() < b.id(); });
  for (const auto& t : all) {
    Entry e{t.id(), t.op(), t.shape(), {}, t.requires_grad()};
    for (const auto& in : t.inputs()) e.inputs.push_back(in.id());
    graph.entries_.push_back(std::move(e));
  }
  return graph;
}

void backward(const Tensor& loss, bool accumulate_grads) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " +
                                (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument("backward: loss does not depend on any parameter");
  }
  GradModeGuard no_grad(false);
  const auto order = reverse_topological(loss);
  const auto grads = propagate(order, loss, Tensor::full(loss.shape(), 1.0));
  for (const auto& t : order) {
    if (!t.is_leaf()) continue;
    Tensor leaf = t;
    if (!accumulate_grads || !leaf.has_grad()) leaf.zero_grad();
    auto it = grads.find(t.node());
    if (it == grads.end()) continue;
    auto dst = leaf.mutable_grad();
    auto src = it->second.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

std::vector<Tensor> grad(const Tensor& output, std::span<const Tensor> wrt, bool create_graph,
                         const Tensor& grad_output) {
  Tensor seed = grad_output;
  if (!seed.defined()) {
    if (output.numel() != 1) {
      throw std::invalid_argument("grad of non-scalar output " + shape_str(output.shape()) +
                                  " needs an explicit grad_output");
    }
    seed = Tensor::full(output.shape(), 1.0);
  } else if (seed.shape() != output.shape()) {
    throw std::invalid_argument("grad_output shape " + shape_str(seed.shape()) +
                                " does not match output " + shape_str(output.shape()));
  }
  std::vector<Tensor> result;
  result.reserve(wrt.size());
  if (!output.requires_grad()) {
    for (const auto& w : wrt) result.push_back(Tensor::zeros(w.shape()));
    return result;
  }
  GradModeGuard mode(create_graph);
  const auto order = reverse_topological(output);
  const auto grads = propagate(order, output, seed);
  for (const auto& w : wrt) {
    auto it = grads.find(w.node());
    result.push_back(it == grads.end() ? Tensor::zeros(w.shape()) : it->second);
  }
  return result;
}

}  // namespace stgan::nd
