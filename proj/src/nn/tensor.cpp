#include "seld/nn/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace seld::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? ", " : "") + std::to_string(shape[i]);
    }
    return s + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> values, bool requires_grad) {
    if (nn::numel(shape) != values.size()) {
        throw Error("tensor shape " + to_string(shape) + " does not match " + std::to_string(values.size()) +
                    " values");
    }
    node_ = std::make_shared<Node<Real>>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(Shape shape, bool requires_grad) {
    const auto n = nn::numel(shape);
    return Tensor(std::move(shape), std::vector<Real>(n, Real(0)), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real value) {
    return Tensor(Shape{}, std::vector<Real>{value});
}

template <typename Real>
Tensor<Real> Tensor<Real>::from_op(Shape shape, std::vector<Real> values, std::initializer_list<Tensor> inputs,
                                   BackwardFn backward) {
    return from_op(std::move(shape), std::move(values), std::vector<Tensor>(inputs), std::move(backward));
}

template <typename Real>
Tensor<Real> Tensor<Real>::from_op(Shape shape, std::vector<Real> values, const std::vector<Tensor>& inputs,
                                   BackwardFn backward) {
    Tensor out(std::move(shape), std::move(values));
    if (!g_grad_enabled) {
        return out;
    }
    const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (!any) {
        return out;
    }
    out.node_->requires_grad = true;
    for (const auto& t : inputs) {
        if (t.requires_grad()) {
            out.node_->parents.push_back(t.node_);
        }
    }
    out.node_->backward = std::move(backward);
    return out;
}

template <typename Real>
Real Tensor<Real>::item() const {
    if (numel() != 1) {
        throw Error("item() on tensor of shape " + to_string(shape()));
    }
    return node_->value[0];
}

template <typename Real>
void Tensor<Real>::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

template <typename Real>
void Tensor<Real>::backward() {
    if (numel() != 1) {
        throw Error("backward() without a seed needs a scalar output, got " + to_string(shape()));
    }
    const Real one = 1;
    backward(std::span<const Real>(&one, 1));
}

template <typename Real>
void Tensor<Real>::backward(std::span<const Real> seed) {
    if (seed.size() != numel()) {
        throw Error("backward seed has " + std::to_string(seed.size()) + " values for output " + to_string(shape()));
    }
    if (!node_->requires_grad) {
        return;
    }
    // Iterative post-order DFS gives a topological order.
    std::vector<Node<Real>*> order;
    std::unordered_set<Node<Real>*> visited;
    std::vector<std::pair<Node<Real>*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            auto* p = n->parents[next++].get();
            if (visited.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    auto& g = node_->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += seed[i];
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<Real>* n = *it;
        if (n->backward && !n->grad.empty()) {
            n->backward(*n);
        }
    }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace seld::nn
