#include "seld/nn/layers.hpp"

#include <cmath>

namespace seld::nn {

namespace {

template <typename Real>
Tensor<Real> uniform(Shape shape, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<Real> values(numel(shape));
    for (auto& v : values) {
        v = static_cast<Real>(dist(rng));
    }
    return Tensor<Real>(std::move(shape), std::move(values), true);
}

template <typename Real>
Tensor<Real> filled(std::size_t n, Real value) {
    return Tensor<Real>(Shape{n}, std::vector<Real>(n, value), true);
}

}  // namespace

template <typename Real>
Linear<Real>::Linear(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = uniform<Real>({in, out}, bound, rng);
    bias = uniform<Real>({out}, bound, rng);
}

template <typename Real>
void Linear<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    out.params.emplace_back(prefix + ".weight", &weight);
    out.params.emplace_back(prefix + ".bias", &bias);
}

template <typename Real>
LayerNorm<Real>::LayerNorm(std::size_t d) : gamma(filled<Real>(d, 1)), beta(filled<Real>(d, 0)) {}

template <typename Real>
void LayerNorm<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    out.params.emplace_back(prefix + ".gamma", &gamma);
    out.params.emplace_back(prefix + ".beta", &beta);
}

template <typename Real>
BatchNorm<Real>::BatchNorm(std::size_t channels)
    : gamma(filled<Real>(channels, 1)), beta(filled<Real>(channels, 0)), state(channels) {}

template <typename Real>
void BatchNorm<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    out.params.emplace_back(prefix + ".gamma", &gamma);
    out.params.emplace_back(prefix + ".beta", &beta);
    out.buffers.emplace_back(prefix + ".running_mean", &state.running_mean);
    out.buffers.emplace_back(prefix + ".running_var", &state.running_var);
}

template <typename Real>
Conv2d<Real>::Conv2d(std::size_t in, std::size_t out, std::size_t k, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
    weight = uniform<Real>({out, in, k, k}, bound, rng);
    // Every convolution feeds a batch norm, which supplies the shift.
    bias = Tensor<Real>::zeros({out}, true);
}

template <typename Real>
void Conv2d<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    out.params.emplace_back(prefix + ".weight", &weight);
    out.params.emplace_back(prefix + ".bias", &bias);
}

template <typename Real>
FeedForward<Real>::FeedForward(std::size_t d, Rng& rng) : norm(d), up(d, 4 * d, rng), down(4 * d, d, rng) {}

template <typename Real>
Tensor<Real> FeedForward<Real>::operator()(const Tensor<Real>& x) const {
    return down(swish(up(norm(x))));
}

template <typename Real>
void FeedForward<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    norm.collect(prefix + ".norm", out);
    up.collect(prefix + ".up", out);
    down.collect(prefix + ".down", out);
}

template <typename Real>
MultiHeadAttention<Real>::MultiHeadAttention(std::size_t d, std::size_t n_heads, Rng& rng)
    : heads(n_heads), q(d, d, rng), k(d, d, rng), v(d, d, rng), o(d, d, rng) {
    if (n_heads == 0 || d % n_heads != 0) {
        throw Error("attention width " + std::to_string(d) + " is not divisible by " + std::to_string(n_heads) +
                    " heads");
    }
}

template <typename Real>
Tensor<Real> MultiHeadAttention<Real>::operator()(const Tensor<Real>& query, const Tensor<Real>& memory) const {
    if (query.rank() != 2 || memory.rank() != 2 || query.dim(1) != memory.dim(1)) {
        throw Error("attention: width mismatch, " + to_string(query.shape()) + " vs " + to_string(memory.shape()));
    }
    const auto qs = q(query), ks = k(memory), vs = v(memory);
    const auto d = query.dim(1), dh = d / heads;
    if (heads == 1) {
        return o(scaled_dot_attention(qs, ks, vs));
    }
    std::vector<Tensor<Real>> parts;
    parts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        parts.push_back(scaled_dot_attention(slice_cols(qs, h * dh, dh), slice_cols(ks, h * dh, dh),
                                             slice_cols(vs, h * dh, dh)));
    }
    return o(concat_cols(parts));
}

template <typename Real>
void MultiHeadAttention<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    q.collect(prefix + ".q", out);
    k.collect(prefix + ".k", out);
    v.collect(prefix + ".v", out);
    o.collect(prefix + ".o", out);
}

template <typename Real>
ConvModule<Real>::ConvModule(std::size_t d, std::size_t kernel, Rng& rng)
    : norm(d), pointwise_in(d, 2 * d, rng), bn(d), pointwise_out(d, d, rng) {
    if (kernel % 2 == 0) {
        throw Error("depthwise kernel must be odd, got " + std::to_string(kernel));
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(kernel));
    depthwise_weight = uniform<Real>({d, kernel}, bound, rng);
    depthwise_bias = uniform<Real>({d}, bound, rng);
}

template <typename Real>
Tensor<Real> ConvModule<Real>::operator()(const Tensor<Real>& x, bool training) {
    auto h = glu(pointwise_in(norm(x)));
    h = depthwise_conv1d(h, depthwise_weight, depthwise_bias);
    h = swish(bn(h, training, 1));
    return pointwise_out(h);
}

template <typename Real>
void ConvModule<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    norm.collect(prefix + ".norm", out);
    pointwise_in.collect(prefix + ".pointwise_in", out);
    out.params.emplace_back(prefix + ".depthwise.weight", &depthwise_weight);
    out.params.emplace_back(prefix + ".depthwise.bias", &depthwise_bias);
    bn.collect(prefix + ".bn", out);
    pointwise_out.collect(prefix + ".pointwise_out", out);
}

template <typename Real>
ConformerBlock<Real>::ConformerBlock(std::size_t d, std::size_t heads, std::size_t kernel, Rng& rng)
    : ff1(d, rng), attn_norm(d), attn(d, heads, rng), conv(d, kernel, rng), ff2(d, rng), out_norm(d) {}

template <typename Real>
Tensor<Real> ConformerBlock<Real>::operator()(const Tensor<Real>& x, bool training) {
    auto h = add(x, scale(ff1(x), Real(0.5)));
    const auto n = attn_norm(h);
    h = add(h, attn(n, n));
    h = add(h, conv(h, training));
    h = add(h, scale(ff2(h), Real(0.5)));
    return out_norm(h);
}

template <typename Real>
void ConformerBlock<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    ff1.collect(prefix + ".ff1", out);
    attn_norm.collect(prefix + ".attn_norm", out);
    attn.collect(prefix + ".attn", out);
    conv.collect(prefix + ".conv", out);
    ff2.collect(prefix + ".ff2", out);
    out_norm.collect(prefix + ".out_norm", out);
}

template <typename Real>
CrossModalBlock<Real>::CrossModalBlock(std::size_t d, std::size_t heads, std::size_t kernel, Rng& rng)
    : ff_alpha(d, rng),
      ff_beta(d, rng),
      query_norm(d),
      memory_norm(d),
      attn(d, heads, rng),
      conv(d, kernel, rng),
      ff2(d, rng),
      out_norm(d) {}

template <typename Real>
std::pair<Tensor<Real>, Tensor<Real>> CrossModalBlock<Real>::operator()(const Tensor<Real>& alpha,
                                                                        const Tensor<Real>& beta, bool training) {
    if (alpha.rank() != 2 || beta.rank() != 2 || alpha.dim(1) != beta.dim(1)) {
        throw Error("cross-modal block: width mismatch, " + to_string(alpha.shape()) + " vs " +
                    to_string(beta.shape()));
    }
    auto a = add(alpha, scale(ff_alpha(alpha), Real(0.5)));
    auto b = add(beta, scale(ff_beta(beta), Real(0.5)));
    a = add(a, attn(query_norm(a), memory_norm(b)));
    a = add(a, conv(a, training));
    a = add(a, scale(ff2(a), Real(0.5)));
    return {out_norm(a), b};
}

template <typename Real>
void CrossModalBlock<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    ff_alpha.collect(prefix + ".ff_alpha", out);
    ff_beta.collect(prefix + ".ff_beta", out);
    query_norm.collect(prefix + ".query_norm", out);
    memory_norm.collect(prefix + ".memory_norm", out);
    attn.collect(prefix + ".attn", out);
    conv.collect(prefix + ".conv", out);
    ff2.collect(prefix + ".ff2", out);
    out_norm.collect(prefix + ".out_norm", out);
}

template <typename Real>
ResidualConvBlock<Real>::ResidualConvBlock(std::size_t in, std::size_t out, Rng& rng)
    : conv1(in, out, 3, rng), bn1(out), conv2(out, out, 3, rng), bn2(out) {
    if (in != out) {
        shortcut.emplace(in, out, 1, rng);
        shortcut_bn.emplace(out);
    }
}

template <typename Real>
Tensor<Real> ResidualConvBlock<Real>::operator()(const Tensor<Real>& x, bool training) {
    auto h = relu(bn1(conv1(x), training, 0));
    h = bn2(conv2(h), training, 0);
    const auto skip = shortcut ? (*shortcut_bn)((*shortcut)(x), training, 0) : x;
    return avg_pool2d(relu(add(h, skip)));
}

template <typename Real>
void ResidualConvBlock<Real>::collect(const std::string& prefix, StateDict<Real>& out) {
    conv1.collect(prefix + ".conv1", out);
    bn1.collect(prefix + ".bn1", out);
    conv2.collect(prefix + ".conv2", out);
    bn2.collect(prefix + ".bn2", out);
    if (shortcut) {
        shortcut->collect(prefix + ".shortcut", out);
        shortcut_bn->collect(prefix + ".shortcut_bn", out);
    }
}

template <typename Real>
Tensor<Real> sinusoidal_positions(std::size_t frames, std::size_t d) {
    std::vector<Real> values(frames * d);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            values[t * d + i] = static_cast<Real>(std::sin(angle));
            if (i + 1 < d) {
                values[t * d + i + 1] = static_cast<Real>(std::cos(angle));
            }
        }
    }
    return Tensor<Real>({frames, d}, std::move(values));
}

#define SELD_INSTANTIATE_LAYERS(R)                                         \
    template struct Linear<R>;                                             \
    template struct LayerNorm<R>;                                          \
    template struct BatchNorm<R>;                                          \
    template struct Conv2d<R>;                                             \
    template struct FeedForward<R>;                                        \
    template struct MultiHeadAttention<R>;                                 \
    template struct ConvModule<R>;                                         \
    template struct ConformerBlock<R>;                                     \
    template struct CrossModalBlock<R>;                                    \
    template struct ResidualConvBlock<R>;                                  \
    template Tensor<R> sinusoidal_positions<R>(std::size_t, std::size_t);

SELD_INSTANTIATE_LAYERS(float)
SELD_INSTANTIATE_LAYERS(double)

}  // namespace seld::nn
