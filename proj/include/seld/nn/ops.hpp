#pragma once

// Differentiable tensor ops. Sequences are laid out time-major [T, d];
// images channel-first [C, H, W]. All ops check shapes and throw
// seld::Error naming both operands on mismatch.

#include "seld/nn/tensor.hpp"

#include <vector>

namespace seld::nn {

template <typename Real>
struct BatchNormState {
    std::vector<Real> running_mean;
    std::vector<Real> running_var;
    Real momentum = Real(0.1);
    Real eps = Real(1e-5);

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, Real(0)), running_var(channels, Real(1)) {}
};

template <typename Real> Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> scale(const Tensor<Real>& x, Real factor);

/// x [m, in] * w [in, out] + b [out]
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b);

/// Same-padded stride-1 convolution, x [Cin, H, W], w [Cout, Cin, k, k], b [Cout]; k odd.
template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b);

/// Same-padded depthwise convolution along time, x [T, d], w [d, K], b [d]; K odd.
template <typename Real>
Tensor<Real> depthwise_conv1d(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b);

/// 2x2 average pooling with stride 2 over the last two axes of [C, H, W].
template <typename Real> Tensor<Real> avg_pool2d(const Tensor<Real>& x);

/// Batch normalization over every axis except `channel_axis`. Training mode
/// normalizes with the batch statistics and updates `state`; evaluation mode
/// uses the running statistics.
template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        BatchNormState<Real>& state, bool training, std::size_t channel_axis);

/// Normalizes over the last axis.
template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        Real eps = Real(1e-5));

template <typename Real> Tensor<Real> relu(const Tensor<Real>& x);
template <typename Real> Tensor<Real> sigmoid(const Tensor<Real>& x);
template <typename Real> Tensor<Real> tanh(const Tensor<Real>& x);
template <typename Real> Tensor<Real> swish(const Tensor<Real>& x);
template <typename Real> Tensor<Real> softplus(const Tensor<Real>& x);

/// Splits the last axis in halves (a, b) and returns a * sigmoid(b).
template <typename Real> Tensor<Real> glu(const Tensor<Real>& x);

/// Softmax over the last axis.
template <typename Real> Tensor<Real> softmax(const Tensor<Real>& x);

/// softmax(q k^T / sqrt(d)) v for q [Tq, d], k [Tk, d], v [Tk, dv].
template <typename Real>
Tensor<Real> scaled_dot_attention(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v);

template <typename Real> Tensor<Real> transpose(const Tensor<Real>& x);
template <typename Real> Tensor<Real> reshape(const Tensor<Real>& x, Shape shape);
/// Mean over the last axis; drops it.
template <typename Real> Tensor<Real> mean_last(const Tensor<Real>& x);
/// Columns [begin, begin + count) of a 2-D tensor.
template <typename Real> Tensor<Real> slice_cols(const Tensor<Real>& x, std::size_t begin, std::size_t count);
template <typename Real> Tensor<Real> concat_cols(const std::vector<Tensor<Real>>& parts);

template <typename Real> Tensor<Real> sum(const Tensor<Real>& x);
/// sum_i x_i * weights_i with constant weights.
template <typename Real> Tensor<Real> weighted_sum(const Tensor<Real>& x, const std::vector<Real>& weights);

/// Output activation of the multi-ACCDDOA head on [T, N*C*4]: tanh for the
/// direction components, softplus for distance, sigmoid for on-screen.
template <typename Real> Tensor<Real> accddoa_activation(const Tensor<Real>& x);

}  // namespace seld::nn
