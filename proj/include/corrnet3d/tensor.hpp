#pragma once

// Dense row-major float64 tensors with define-by-run reverse-mode
// differentiation. Every op in ops.hpp records its inputs and a backward rule
// on the output node; Graph linearizes the recorded DAG for a backward pass.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "corrnet3d/errors.hpp"

namespace corrnet3d {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

inline std::uint64_t next_node_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized like data iff requires_grad
    bool requires_grad = false;
    std::uint64_t id = next_node_id();
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads self.grad, accumulates into the grads of `inputs`.
    std::function<void(Node& self)> backward;

    bool is_leaf() const { return inputs.empty(); }

    void accumulate(std::size_t i, double g) {
        if (requires_grad) grad[i] += g;
    }
};

}  // namespace detail

class Tensor {
  public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
        : node_(std::make_shared<detail::Node>()) {
        for (auto d : shape)
            if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
        if (shape.empty()) shape = {1};
        if (shape_size(shape) != data.size())
            throw ShapeError("tensor of shape " + shape_string(shape) + " cannot hold " +
                             std::to_string(data.size()) + " values");
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        set_requires_grad(requires_grad);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor full(Shape shape, double value) {
        auto n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<double>(n, value));
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return Tensor({1}, {value}, requires_grad);
    }

    static Tensor identity(std::size_t n) {
        auto t = zeros({n, n});
        for (std::size_t i = 0; i < n; ++i) t.node_->data[i * n + i] = 1.0;
        return t;
    }

    bool defined() const { return static_cast<bool>(node_); }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }
    std::size_t rows() const { return node_->shape.front(); }
    std::size_t cols() const { return rank() >= 2 ? node_->shape[1] : 1; }

    std::span<const double> data() const { return node_->data; }
    // Leaves only: optimizers and initializers write here between graphs.
    std::span<double> mutable_data() { return node_->data; }

    double item() const {
        if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
        return node_->data[0];
    }
    double operator()(std::size_t i, std::size_t j) const { return node_->data[i * cols() + j]; }
    double operator[](std::size_t i) const { return node_->data[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) {
        node_->requires_grad = on;
        if (on)
            node_->grad.assign(node_->data.size(), 0.0);
        else
            node_->grad.clear();
    }

    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad; }
    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    std::uint64_t id() const { return node_->id; }

    /// Copy of the values as a new graph leaf without gradient state.
    Tensor detach() const { return Tensor(shape(), node_->data); }

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<detail::Node> node_;
};

namespace detail {

// Wraps an op result; the graph edge is recorded only when some input needs
// gradients, so inference-only passes never retain intermediates.
inline Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                          std::function<void(Node&)> backward) {
    Tensor out(std::move(shape), std::move(data));
    bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (needs) {
        out.set_requires_grad(true);
        auto& node = *out.node();
        for (const auto& t : inputs) node.inputs.push_back(t.node());
        node.backward = std::move(backward);
    }
    return out;
}

}  // namespace detail

/// Reverse-topological schedule of every node reachable from a root that
/// participates in differentiation.
class Graph {
  public:
    explicit Graph(const Tensor& root) {
        if (!root.defined() || !root.requires_grad()) return;
        std::unordered_set<std::uint64_t> seen;
        // Iterative post-order DFS; deep chains (Sinkhorn, training) would
        // overflow a recursive walk.
        std::vector<std::pair<detail::Node*, std::size_t>> stack;
        stack.emplace_back(root.node().get(), 0);
        seen.insert(root.id());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->inputs.size()) {
                detail::Node* child = node->inputs[next++].get();
                if (child->requires_grad && seen.insert(child->id).second) stack.emplace_back(child, 0);
            } else {
                order_.push_back(node);
                stack.pop_back();
            }
        }
    }

    /// Nodes in topological order (inputs before outputs).
    std::span<detail::Node* const> order() const { return order_; }
    std::size_t size() const { return order_.size(); }

    void run_backward() {
        if (order_.empty()) return;
        for (auto* n : order_)
            if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
        detail::Node* root = order_.back();
        if (root->is_leaf())
            root->grad[0] += 1.0;
        else
            root->grad[0] = 1.0;
        for (auto it = order_.rbegin(); it != order_.rend(); ++it)
            if ((*it)->backward) (*it)->backward(**it);
    }

  private:
    std::vector<detail::Node*> order_;
};

/// Populates grad on every leaf reachable from `loss`. Leaf gradients
/// accumulate across calls until zeroed.
inline void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward() needs a scalar loss, got shape " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
    Graph(loss).run_backward();
}

}  // namespace corrnet3d
