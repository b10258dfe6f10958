#pragma once

// Trainable building blocks of the SELD network. Every layer owns leaf
// tensors with requires_grad set and registers them by name through
// collect(), which is what the optimizer and the checkpoint code walk.

#include "seld/nn/ops.hpp"

#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace seld::nn {

template <typename Real>
struct StateDict {
    std::vector<std::pair<std::string, Tensor<Real>*>> params;
    std::vector<std::pair<std::string, std::vector<Real>*>> buffers;
};

using Rng = std::mt19937_64;

template <typename Real>
struct Linear {
    Tensor<Real> weight;  // [in, out]
    Tensor<Real> bias;    // [out]

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng);
    Tensor<Real> operator()(const Tensor<Real>& x) const { return linear(x, weight, bias); }
    void collect(const std::string& prefix, StateDict<Real>& out);
};

template <typename Real>
struct LayerNorm {
    Tensor<Real> gamma;
    Tensor<Real> beta;

    LayerNorm() = default;
    explicit LayerNorm(std::size_t d);
    Tensor<Real> operator()(const Tensor<Real>& x) const { return layer_norm(x, gamma, beta); }
    void collect(const std::string& prefix, StateDict<Real>& out);
};

template <typename Real>
struct BatchNorm {
    Tensor<Real> gamma;
    Tensor<Real> beta;
    BatchNormState<Real> state;

    BatchNorm() = default;
    explicit BatchNorm(std::size_t channels);
    Tensor<Real> operator()(const Tensor<Real>& x, bool training, std::size_t channel_axis) {
        return batch_norm(x, gamma, beta, state, training, channel_axis);
    }
    void collect(const std::string& prefix, StateDict<Real>& out);
};

template <typename Real>
struct Conv2d {
    Tensor<Real> weight;  // [out, in, k, k]
    Tensor<Real> bias;

    Conv2d() = default;
    Conv2d(std::size_t in, std::size_t out, std::size_t k, Rng& rng);
    Tensor<Real> operator()(const Tensor<Real>& x) const { return conv2d(x, weight, bias); }
    void collect(const std::string& prefix, StateDict<Real>& out);
};

/// LN -> Linear(d, 4d) -> swish -> Linear(4d, d). Callers add the half-step residual.
template <typename Real>
struct FeedForward {
    LayerNorm<Real> norm;
    Linear<Real> up;
    Linear<Real> down;

    FeedForward() = default;
    FeedForward(std::size_t d, Rng& rng);
    Tensor<Real> operator()(const Tensor<Real>& x) const;
    void collect(const std::string& prefix, StateDict<Real>& out);
};

template <typename Real>
struct MultiHeadAttention {
    std::size_t heads = 1;
    Linear<Real> q, k, v, o;

    MultiHeadAttention() = default;
    MultiHeadAttention(std::size_t d, std::size_t heads, Rng& rng);
    /// Queries from `query` [Tq, d], keys and values from `memory` [Tk, d].
    Tensor<Real> operator()(const Tensor<Real>& query, const Tensor<Real>& memory) const;
    void collect(const std::string& prefix, StateDict<Real>& out);
};

/// LN -> pointwise (d -> 2d) -> GLU -> depthwise conv -> BN -> swish -> pointwise.
template <typename Real>
struct ConvModule {
    LayerNorm<Real> norm;
    Linear<Real> pointwise_in;
    Tensor<Real> depthwise_weight;  // [d, K]
    Tensor<Real> depthwise_bias;
    BatchNorm<Real> bn;
    Linear<Real> pointwise_out;

    ConvModule() = default;
    ConvModule(std::size_t d, std::size_t kernel, Rng& rng);
    Tensor<Real> operator()(const Tensor<Real>& x, bool training);
    void collect(const std::string& prefix, StateDict<Real>& out);
};

template <typename Real>
struct ConformerBlock {
    FeedForward<Real> ff1;
    LayerNorm<Real> attn_norm;
    MultiHeadAttention<Real> attn;
    ConvModule<Real> conv;
    FeedForward<Real> ff2;
    LayerNorm<Real> out_norm;

    ConformerBlock() = default;
    ConformerBlock(std::size_t d, std::size_t heads, std::size_t kernel, Rng& rng);
    Tensor<Real> operator()(const Tensor<Real>& x, bool training);
    void collect(const std::string& prefix, StateDict<Real>& out);
};

/// Conformer layer whose self-attention is replaced by cross-attention from
/// the alpha stream onto the beta stream. Returns the updated (alpha, beta).
template <typename Real>
struct CrossModalBlock {
    FeedForward<Real> ff_alpha;
    FeedForward<Real> ff_beta;
    LayerNorm<Real> query_norm;
    LayerNorm<Real> memory_norm;
    MultiHeadAttention<Real> attn;
    ConvModule<Real> conv;
    FeedForward<Real> ff2;
    LayerNorm<Real> out_norm;

    CrossModalBlock() = default;
    CrossModalBlock(std::size_t d, std::size_t heads, std::size_t kernel, Rng& rng);
    std::pair<Tensor<Real>, Tensor<Real>> operator()(const Tensor<Real>& alpha, const Tensor<Real>& beta,
                                                     bool training);
    void collect(const std::string& prefix, StateDict<Real>& out);
};

/// Two 3x3 conv + BN stages with a residual shortcut, ReLU, then 2x2 average pooling.
template <typename Real>
struct ResidualConvBlock {
    Conv2d<Real> conv1;
    BatchNorm<Real> bn1;
    Conv2d<Real> conv2;
    BatchNorm<Real> bn2;
    std::optional<Conv2d<Real>> shortcut;  // 1x1 projection when widths differ
    std::optional<BatchNorm<Real>> shortcut_bn;

    ResidualConvBlock() = default;
    ResidualConvBlock(std::size_t in, std::size_t out, Rng& rng);
    Tensor<Real> operator()(const Tensor<Real>& x, bool training);
    void collect(const std::string& prefix, StateDict<Real>& out);
};

/// Sinusoidal absolute position table [T, d].
template <typename Real>
Tensor<Real> sinusoidal_positions(std::size_t frames, std::size_t d);

}  // namespace seld::nn
