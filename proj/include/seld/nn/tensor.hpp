#pragma once

// Minimal tape-free reverse-mode autodiff. Every Tensor is a handle to a
// graph node that owns its value, an optional gradient buffer and a closure
// that pushes its gradient to the nodes it was computed from. The graph is
// released when the last handle to the output goes away.

#include "seld/core.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace seld::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Thread-local switch; with gradients disabled ops record no parents, so
/// intermediate activations are freed immediately.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

template <typename Real>
struct Node {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::vector<Real>& ensure_grad() {
        if (grad.size() != value.size()) {
            grad.assign(value.size(), Real(0));
        }
        return grad;
    }
};

template <typename Real>
class Tensor {
public:
    using NodePtr = std::shared_ptr<Node<Real>>;
    using BackwardFn = std::function<void(Node<Real>&)>;

    Tensor() = default;
    Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(Real value);

    /// Result of an op: records inputs and the backward closure when
    /// gradients are enabled and some input requires them.
    static Tensor from_op(Shape shape, std::vector<Real> values, std::initializer_list<Tensor> inputs,
                          BackwardFn backward);
    static Tensor from_op(Shape shape, std::vector<Real> values, const std::vector<Tensor>& inputs,
                          BackwardFn backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }

    std::span<const Real> data() const { return node_->value; }
    std::span<Real> mutable_data() { return node_->value; }
    Real item() const;

    bool requires_grad() const { return node_->requires_grad; }
    /// Empty until a backward pass reached this node.
    std::span<const Real> grad() const { return node_->grad; }
    std::span<Real> mutable_grad() { return node_->ensure_grad(); }
    void zero_grad();

    /// Backward from a scalar output.
    void backward();
    /// Backward with an explicit output gradient of the same size.
    void backward(std::span<const Real> seed);

    Node<Real>& node() const { return *node_; }
    const NodePtr& node_ptr() const { return node_; }

private:
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    NodePtr node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace seld::nn
