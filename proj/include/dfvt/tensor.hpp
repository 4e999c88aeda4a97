// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors that record a reverse-mode differentiation graph.

#ifndef DFVT_TENSOR_HPP
#define DFVT_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dfvt {

using Shape = std::vector<std::size_t>;

/// Raised whenever operand extents are incompatible.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Run-level numeric precision: 32-bit for training, 64-bit for gradient checks.
enum class Precision { train, check };

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
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

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until a backward pass reaches this node
    bool requires_grad = false;
    std::string op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward;

    bool is_leaf() const { return !backward; }

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
  public:
    NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Shared handle to a graph node. Copies alias the same storage; use clone()
/// for an independent value.
template <typename T>
class Tensor {
  public:
    using value_type = T;
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> data) : node_(std::make_shared<detail::Node<T>>()) {
        if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
        for (auto e : shape) {
            if (e == 0) throw DimensionError("tensor extents must be positive, got " + dfvt::to_string(shape));
        }
        if (numel(shape) != data.size()) {
            throw DimensionError("shape " + dfvt::to_string(shape) + " does not match " +
                                 std::to_string(data.size()) + " values");
        }
        node_->shape = std::move(shape);
        node_->data = std::move(data);
    }

    static Tensor zeros(Shape shape) {
        const auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)));
    }

    static Tensor full(Shape shape, T value) {
        const auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, value));
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    /// A learnable leaf.
    static Tensor parameter(Shape shape, std::vector<T> data) {
        Tensor t(std::move(shape), std::move(data));
        t.node_->requires_grad = true;
        return t;
    }

    explicit operator bool() const { return static_cast<bool>(node_); }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t size() const { return node_->data.size(); }

    std::span<T> data() { return node_->data; }
    std::span<const T> data() const { return node_->data; }
    const std::vector<T>& values() const { return node_->data; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<T> grad() { return node_->grad; }
    std::span<const T> grad() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool is_leaf() const { return node_->is_leaf(); }
    const std::string& op() const { return node_->op; }

    T item() const {
        if (size() != 1) throw DimensionError("item() on tensor of shape " + dfvt::to_string(shape()));
        return node_->data[0];
    }

    T& operator[](std::size_t i) { return node_->data[i]; }
    const T& operator[](std::size_t i) const { return node_->data[i]; }

    /// Row-major access for rank-2 tensors.
    T at(std::size_t r, std::size_t c) const { return node_->data[r * node_->shape[1] + c]; }

    /// Independent leaf with the same values and no graph history.
    Tensor clone() const {
        Tensor t(shape(), node_->data);
        t.node_->requires_grad = node_->requires_grad;
        return t;
    }

    /// Constant leaf sharing nothing with this tensor.
    Tensor detach() const { return Tensor(shape(), node_->data); }

    /// Element type conversion (e.g. float parameters into a 64-bit check run).
    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(node_->data.begin(), node_->data.end());
        Tensor<U> t(shape(), std::move(out));
        t.set_requires_grad(requires_grad());
        return t;
    }

    const NodePtr& node() const { return node_; }

  private:
    template <typename>
    friend class Tensor;
    template <typename U>
    friend Tensor<U> make_result(Shape, std::vector<U>, std::string, std::vector<Tensor<U>>,
                                 std::function<void(detail::Node<U>&)>);
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    NodePtr node_;
};

/// Builds an op output. The backward closure is attached only when grad mode is
/// on and at least one input requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string op, std::vector<Tensor<T>> inputs,
                      std::function<void(detail::Node<T>&)> backward) {
    Tensor<T> out(std::move(shape), std::move(data));
    out.node_->op = std::move(op);
    if (!grad_enabled()) return out;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    for (auto& in : inputs) out.node_->parents.push_back(in.node());
    out.node_->backward = std::move(backward);
    return out;
}

/// Reverse-mode pass from a scalar. Leaf gradients accumulate across calls;
/// intermediate gradients are recomputed on every call.
template <typename T>
void backward(Tensor<T>& loss) {
    if (loss.size() != 1) {
        throw DimensionError("backward() requires a scalar loss, got shape " + to_string(loss.shape()));
    }
    if (!loss.requires_grad()) return;

    using NodeT = detail::Node<T>;
    std::vector<NodeT*> order;
    std::unordered_set<NodeT*> visited;
    std::vector<std::pair<NodeT*, std::size_t>> stack{{loss.node().get(), 0}};
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodeT* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* node : order) {
        if (!node->is_leaf()) node->grad.assign(node->data.size(), T(0));
    }
    loss.node()->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (!(*it)->is_leaf()) (*it)->backward(**it);
    }
    // Drop intermediate buffers; only leaves keep their gradients.
    for (auto* node : order) {
        if (!node->is_leaf()) std::vector<T>().swap(node->grad);
    }
}

}  // namespace dfvt

#endif  // DFVT_TENSOR_HPP
