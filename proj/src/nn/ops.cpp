#include "seld/nn/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace seld::nn {

namespace {

// Only products go through Eigen. Its reductions peel to the buffer's
// alignment, so their rounding would vary with heap layout; those are loops.
template <typename R>
using RowMat = Eigen::Matrix<R, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename R>
using MatMap = Eigen::Map<RowMat<R>>;
template <typename R>
using ConstMatMap = Eigen::Map<const RowMat<R>>;

template <typename R>
ConstMatMap<R> as_matrix(std::span<const R> v, std::size_t rows, std::size_t cols) {
    return ConstMatMap<R>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename R>
MatMap<R> as_matrix(std::vector<R>& v, std::size_t rows, std::size_t cols) {
    return MatMap<R>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require(bool ok, const std::string& op, const std::string& detail) {
    if (!ok) {
        throw Error(op + ": shape mismatch, " + detail);
    }
}

template <typename R>
std::string shapes(const Tensor<R>& a, const Tensor<R>& b) {
    return to_string(a.shape()) + " vs " + to_string(b.shape());
}

/// Gradient buffer of t, or nullptr when t does not need one.
template <typename R>
std::vector<R>* grad_of(const Tensor<R>& t) {
    return t.requires_grad() ? &t.node().ensure_grad() : nullptr;
}

template <typename R, typename F, typename D>
Tensor<R> unary(const Tensor<R>& x, F f, D df) {
    auto xv = x.data();
    std::vector<R> y(xv.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = f(xv[i]);
    }
    return Tensor<R>::from_op(x.shape(), std::move(y), {x}, [x, df](Node<R>& out) {
        auto* gx = grad_of(x);
        auto xv = x.data();
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            (*gx)[i] += out.grad[i] * df(xv[i], out.value[i]);
        }
    });
}

template <typename R>
R sigmoid_value(R v) {
    return v >= R(0) ? R(1) / (R(1) + std::exp(-v)) : std::exp(v) / (R(1) + std::exp(v));
}

template <typename R>
R softplus_value(R v) {
    return v > R(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

// Patch matrix for a same-padded k x k convolution: row (ci, ky, kx), column (y, x).
template <typename R>
void im2col(std::span<const R> x, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, std::vector<R>& cols) {
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    cols.assign(cin * k * k * h * w, R(0));
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx, ++row) {
                R* dst = cols.data() + row * h * w;
                for (std::size_t y = 0; y < h; ++y) {
                    const auto sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
                        continue;
                    }
                    const R* src = x.data() + (ci * h + static_cast<std::size_t>(sy)) * w;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const auto sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
                        if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) {
                            dst[y * w + xx] = src[sx];
                        }
                    }
                }
            }
        }
    }
}

template <typename R>
void col2im_add(const RowMat<R>& cols, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, std::vector<R>& dx) {
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx, ++row) {
                const R* src = cols.data() + row * h * w;
                for (std::size_t y = 0; y < h; ++y) {
                    const auto sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
                        continue;
                    }
                    R* dst = dx.data() + (ci * h + static_cast<std::size_t>(sy)) * w;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const auto sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
                        if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) {
                            dst[sx] += src[y * w + xx];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename R>
Tensor<R> matmul(const Tensor<R>& a, const Tensor<R>& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul", shapes(a, b));
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<R> out(m * n);
    as_matrix(out, m, n).noalias() = as_matrix(a.data(), m, k) * as_matrix(b.data(), k, n);
    return Tensor<R>::from_op({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Node<R>& node) {
        const auto g = as_matrix(std::span<const R>(node.grad), m, n);
        if (auto* ga = grad_of(a)) {
            as_matrix(*ga, m, k).noalias() += g * as_matrix(b.data(), k, n).transpose();
        }
        if (auto* gb = grad_of(b)) {
            as_matrix(*gb, k, n).noalias() += as_matrix(a.data(), m, k).transpose() * g;
        }
    });
}

template <typename R>
Tensor<R> add(const Tensor<R>& a, const Tensor<R>& b) {
    require(a.shape() == b.shape(), "add", shapes(a, b));
    std::vector<R> out(a.numel());
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] + bv[i];
    }
    return Tensor<R>::from_op(a.shape(), std::move(out), {a, b}, [a, b](Node<R>& node) {
        for (const auto* t : {&a, &b}) {
            if (auto* g = grad_of(*t)) {
                for (std::size_t i = 0; i < node.grad.size(); ++i) {
                    (*g)[i] += node.grad[i];
                }
            }
        }
    });
}

template <typename R>
Tensor<R> sub(const Tensor<R>& a, const Tensor<R>& b) {
    require(a.shape() == b.shape(), "sub", shapes(a, b));
    std::vector<R> out(a.numel());
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] - bv[i];
    }
    return Tensor<R>::from_op(a.shape(), std::move(out), {a, b}, [a, b](Node<R>& node) {
        if (auto* g = grad_of(a)) {
            for (std::size_t i = 0; i < node.grad.size(); ++i) {
                (*g)[i] += node.grad[i];
            }
        }
        if (auto* g = grad_of(b)) {
            for (std::size_t i = 0; i < node.grad.size(); ++i) {
                (*g)[i] -= node.grad[i];
            }
        }
    });
}

template <typename R>
Tensor<R> mul(const Tensor<R>& a, const Tensor<R>& b) {
    require(a.shape() == b.shape(), "mul", shapes(a, b));
    std::vector<R> out(a.numel());
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] * bv[i];
    }
    return Tensor<R>::from_op(a.shape(), std::move(out), {a, b}, [a, b](Node<R>& node) {
        auto av = a.data(), bv = b.data();
        if (auto* g = grad_of(a)) {
            for (std::size_t i = 0; i < node.grad.size(); ++i) {
                (*g)[i] += node.grad[i] * bv[i];
            }
        }
        if (auto* g = grad_of(b)) {
            for (std::size_t i = 0; i < node.grad.size(); ++i) {
                (*g)[i] += node.grad[i] * av[i];
            }
        }
    });
}

template <typename R>
Tensor<R> scale(const Tensor<R>& x, R factor) {
    return unary(x, [factor](R v) { return v * factor; }, [factor](R, R) { return factor; });
}

template <typename R>
Tensor<R> linear(const Tensor<R>& x, const Tensor<R>& w, const Tensor<R>& b) {
    require(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(0), "linear", shapes(x, w));
    require(b.rank() == 1 && b.dim(0) == w.dim(1), "linear bias", shapes(w, b));
    const auto m = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
    std::vector<R> out(m * out_dim);
    auto y = as_matrix(out, m, out_dim);
    y.noalias() = as_matrix(x.data(), m, in) * as_matrix(w.data(), in, out_dim);
    y.rowwise() += as_matrix(b.data(), 1, out_dim).row(0);
    return Tensor<R>::from_op({m, out_dim}, std::move(out), {x, w, b}, [x, w, b, m, in, out_dim](Node<R>& node) {
        const auto g = as_matrix(std::span<const R>(node.grad), m, out_dim);
        if (auto* gx = grad_of(x)) {
            as_matrix(*gx, m, in).noalias() += g * as_matrix(w.data(), in, out_dim).transpose();
        }
        if (auto* gw = grad_of(w)) {
            as_matrix(*gw, in, out_dim).noalias() += as_matrix(x.data(), m, in).transpose() * g;
        }
        if (auto* gb = grad_of(b)) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < out_dim; ++j) {
                    (*gb)[j] += node.grad[i * out_dim + j];
                }
            }
        }
    });
}

template <typename R>
Tensor<R> conv2d(const Tensor<R>& x, const Tensor<R>& w, const Tensor<R>& b) {
    require(x.rank() == 3 && w.rank() == 4 && w.dim(1) == x.dim(0) && w.dim(2) == w.dim(3) && w.dim(2) % 2 == 1,
            "conv2d", shapes(x, w));
    require(b.rank() == 1 && b.dim(0) == w.dim(0), "conv2d bias", shapes(w, b));
    const auto cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0), k = w.dim(2);
    const auto hw = h * wd, patch = cin * k * k;
    std::vector<R> out(cout * hw);
    auto y = as_matrix(out, cout, hw);
    const auto wm = as_matrix(w.data(), cout, patch);
    if (k == 1) {
        y.noalias() = wm * as_matrix(x.data(), cin, hw);
    } else {
        std::vector<R> cols;
        im2col(x.data(), cin, h, wd, k, cols);
        y.noalias() = wm * as_matrix(std::span<const R>(cols), patch, hw);
    }
    y.colwise() += as_matrix(b.data(), cout, 1).col(0);
    return Tensor<R>::from_op({cout, h, wd}, std::move(out), {x, w, b},
                              [x, w, b, cin, h, wd, cout, k, hw, patch](Node<R>& node) {
        const auto g = as_matrix(std::span<const R>(node.grad), cout, hw);
        const auto wm = as_matrix(w.data(), cout, patch);
        if (auto* gb = grad_of(b)) {
            for (std::size_t c = 0; c < cout; ++c) {
                R sum = 0;
                for (std::size_t i = 0; i < hw; ++i) {
                    sum += node.grad[c * hw + i];
                }
                (*gb)[c] += sum;
            }
        }
        auto* gw = grad_of(w);
        auto* gx = grad_of(x);
        if (k == 1) {
            if (gw) {
                as_matrix(*gw, cout, patch).noalias() += g * as_matrix(x.data(), cin, hw).transpose();
            }
            if (gx) {
                as_matrix(*gx, cin, hw).noalias() += wm.transpose() * g;
            }
            return;
        }
        if (gw) {
            std::vector<R> cols;
            im2col(x.data(), cin, h, wd, k, cols);
            as_matrix(*gw, cout, patch).noalias() += g * as_matrix(std::span<const R>(cols), patch, hw).transpose();
        }
        if (gx) {
            RowMat<R> dcols = wm.transpose() * g;
            col2im_add(dcols, cin, h, wd, k, *gx);
        }
    });
}

template <typename R>
Tensor<R> depthwise_conv1d(const Tensor<R>& x, const Tensor<R>& w, const Tensor<R>& b) {
    require(x.rank() == 2 && w.rank() == 2 && w.dim(0) == x.dim(1) && w.dim(1) % 2 == 1, "depthwise_conv1d",
            shapes(x, w));
    require(b.rank() == 1 && b.dim(0) == x.dim(1), "depthwise_conv1d bias", shapes(x, b));
    const auto T = x.dim(0), d = x.dim(1), K = w.dim(1);
    const auto pad = static_cast<std::ptrdiff_t>(K / 2);
    auto xv = x.data(), wv = w.data(), bv = b.data();
    std::vector<R> out(T * d);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
            out[t * d + c] = bv[c];
        }
        for (std::size_t j = 0; j < K; ++j) {
            const auto s = static_cast<std::ptrdiff_t>(t + j) - pad;
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(T)) {
                continue;
            }
            const R* src = xv.data() + static_cast<std::size_t>(s) * d;
            for (std::size_t c = 0; c < d; ++c) {
                out[t * d + c] += wv[c * K + j] * src[c];
            }
        }
    }
    return Tensor<R>::from_op({T, d}, std::move(out), {x, w, b}, [x, w, b, T, d, K, pad](Node<R>& node) {
        auto xv = x.data(), wv = w.data();
        auto* gx = grad_of(x);
        auto* gw = grad_of(w);
        auto* gb = grad_of(b);
        for (std::size_t t = 0; t < T; ++t) {
            const R* g = node.grad.data() + t * d;
            if (gb) {
                for (std::size_t c = 0; c < d; ++c) {
                    (*gb)[c] += g[c];
                }
            }
            for (std::size_t j = 0; j < K; ++j) {
                const auto s = static_cast<std::ptrdiff_t>(t + j) - pad;
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(T)) {
                    continue;
                }
                const auto row = static_cast<std::size_t>(s) * d;
                for (std::size_t c = 0; c < d; ++c) {
                    if (gx) {
                        (*gx)[row + c] += wv[c * K + j] * g[c];
                    }
                    if (gw) {
                        (*gw)[c * K + j] += xv[row + c] * g[c];
                    }
                }
            }
        }
    });
}

template <typename R>
Tensor<R> avg_pool2d(const Tensor<R>& x) {
    require(x.rank() == 3 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0, "avg_pool2d",
            "needs [C, H, W] with even H and W, got " + to_string(x.shape()));
    const auto C = x.dim(0), H = x.dim(1), W = x.dim(2), ho = H / 2, wo = W / 2;
    auto xv = x.data();
    std::vector<R> out(C * ho * wo);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < ho; ++y) {
            const R* r0 = xv.data() + (c * H + 2 * y) * W;
            const R* r1 = r0 + W;
            R* dst = out.data() + (c * ho + y) * wo;
            for (std::size_t xx = 0; xx < wo; ++xx) {
                dst[xx] = (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]) * R(0.25);
            }
        }
    }
    return Tensor<R>::from_op({C, ho, wo}, std::move(out), {x}, [x, C, H, W, ho, wo](Node<R>& node) {
        auto& g = *grad_of(x);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < ho; ++y) {
                const R* src = node.grad.data() + (c * ho + y) * wo;
                R* r0 = g.data() + (c * H + 2 * y) * W;
                R* r1 = r0 + W;
                for (std::size_t xx = 0; xx < wo; ++xx) {
                    const R v = src[xx] * R(0.25);
                    r0[2 * xx] += v;
                    r0[2 * xx + 1] += v;
                    r1[2 * xx] += v;
                    r1[2 * xx + 1] += v;
                }
            }
        }
    });
}

template <typename R>
Tensor<R> batch_norm(const Tensor<R>& x, const Tensor<R>& gamma, const Tensor<R>& beta, BatchNormState<R>& state,
                     bool training, std::size_t channel_axis) {
    require(channel_axis < x.rank(), "batch_norm", "channel axis outside " + to_string(x.shape()));
    const auto C = x.dim(channel_axis);
    require(gamma.rank() == 1 && gamma.dim(0) == C && beta.shape() == gamma.shape(), "batch_norm",
            shapes(x, gamma));
    require(state.running_mean.size() == C && state.running_var.size() == C, "batch_norm",
            "running statistics sized for " + std::to_string(state.running_mean.size()) + " channels");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < channel_axis; ++i) {
        outer *= x.dim(i);
    }
    for (std::size_t i = channel_axis + 1; i < x.rank(); ++i) {
        inner *= x.dim(i);
    }
    const std::size_t count = outer * inner;
    auto xv = x.data(), gv = gamma.data(), bv = beta.data();
    auto at = [C, inner](std::size_t o, std::size_t c, std::size_t i) { return (o * C + c) * inner + i; };

    std::vector<R> mean(C), inv_std(C);
    if (training) {
        require(count > 1, "batch_norm", "training mode needs more than one value per channel");
        for (std::size_t c = 0; c < C; ++c) {
            R s = 0;
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < inner; ++i) {
                    s += xv[at(o, c, i)];
                }
            }
            const R m = s / static_cast<R>(count);
            R v = 0;
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < inner; ++i) {
                    const R dlt = xv[at(o, c, i)] - m;
                    v += dlt * dlt;
                }
            }
            v /= static_cast<R>(count);
            mean[c] = m;
            inv_std[c] = R(1) / std::sqrt(v + state.eps);
            state.running_mean[c] = (R(1) - state.momentum) * state.running_mean[c] + state.momentum * m;
            state.running_var[c] = (R(1) - state.momentum) * state.running_var[c] +
                                   state.momentum * v * static_cast<R>(count) / static_cast<R>(count - 1);
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = R(1) / std::sqrt(state.running_var[c] + state.eps);
        }
    }
    std::vector<R> xhat(x.numel()), out(x.numel());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t i = 0; i < inner; ++i) {
                const auto idx = at(o, c, i);
                xhat[idx] = (xv[idx] - mean[c]) * inv_std[c];
                out[idx] = gv[c] * xhat[idx] + bv[c];
            }
        }
    }
    return Tensor<R>::from_op(
        x.shape(), std::move(out), {x, gamma, beta},
        [x, gamma, beta, training, outer, inner, C, count, at, xhat = std::move(xhat),
         inv_std = std::move(inv_std)](Node<R>& node) {
            auto gv = gamma.data();
            const auto& dy = node.grad;
            std::vector<R> sum_dy(C, R(0)), sum_dy_xhat(C, R(0));
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t i = 0; i < inner; ++i) {
                        const auto idx = at(o, c, i);
                        sum_dy[c] += dy[idx];
                        sum_dy_xhat[c] += dy[idx] * xhat[idx];
                    }
                }
            }
            if (auto* gg = grad_of(gamma)) {
                for (std::size_t c = 0; c < C; ++c) {
                    (*gg)[c] += sum_dy_xhat[c];
                }
            }
            if (auto* gb = grad_of(beta)) {
                for (std::size_t c = 0; c < C; ++c) {
                    (*gb)[c] += sum_dy[c];
                }
            }
            if (auto* gx = grad_of(x)) {
                const R n = static_cast<R>(count);
                for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t c = 0; c < C; ++c) {
                        for (std::size_t i = 0; i < inner; ++i) {
                            const auto idx = at(o, c, i);
                            if (training) {
                                (*gx)[idx] += gv[c] * inv_std[c] *
                                              (dy[idx] - sum_dy[c] / n - xhat[idx] * sum_dy_xhat[c] / n);
                            } else {
                                (*gx)[idx] += gv[c] * inv_std[c] * dy[idx];
                            }
                        }
                    }
                }
            }
        });
}

template <typename R>
Tensor<R> layer_norm(const Tensor<R>& x, const Tensor<R>& gamma, const Tensor<R>& beta, R eps) {
    require(x.rank() >= 1 && gamma.rank() == 1 && gamma.dim(0) == x.shape().back() && beta.shape() == gamma.shape(),
            "layer_norm", shapes(x, gamma));
    const auto d = x.shape().back();
    const auto rows = x.numel() / d;
    auto xv = x.data(), gv = gamma.data(), bv = beta.data();
    std::vector<R> xhat(x.numel()), out(x.numel()), inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const R* src = xv.data() + r * d;
        R m = 0;
        for (std::size_t i = 0; i < d; ++i) {
            m += src[i];
        }
        m /= static_cast<R>(d);
        R v = 0;
        for (std::size_t i = 0; i < d; ++i) {
            v += (src[i] - m) * (src[i] - m);
        }
        v /= static_cast<R>(d);
        inv_std[r] = R(1) / std::sqrt(v + eps);
        for (std::size_t i = 0; i < d; ++i) {
            xhat[r * d + i] = (src[i] - m) * inv_std[r];
            out[r * d + i] = gv[i] * xhat[r * d + i] + bv[i];
        }
    }
    return Tensor<R>::from_op(x.shape(), std::move(out), {x, gamma, beta},
                              [x, gamma, beta, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<R>& node) {
        auto gv = gamma.data();
        auto* gx = grad_of(x);
        auto* gg = grad_of(gamma);
        auto* gb = grad_of(beta);
        std::vector<R> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
            const R* dy = node.grad.data() + r * d;
            const R* xh = xhat.data() + r * d;
            R s1 = 0, s2 = 0;
            for (std::size_t i = 0; i < d; ++i) {
                if (gg) {
                    (*gg)[i] += dy[i] * xh[i];
                }
                if (gb) {
                    (*gb)[i] += dy[i];
                }
                dxhat[i] = dy[i] * gv[i];
                s1 += dxhat[i];
                s2 += dxhat[i] * xh[i];
            }
            if (gx) {
                const R n = static_cast<R>(d);
                for (std::size_t i = 0; i < d; ++i) {
                    (*gx)[r * d + i] += inv_std[r] * (dxhat[i] - s1 / n - xh[i] * s2 / n);
                }
            }
        }
    });
}

template <typename R>
Tensor<R> relu(const Tensor<R>& x) {
    return unary(x, [](R v) { return v > R(0) ? v : R(0); }, [](R v, R) { return v > R(0) ? R(1) : R(0); });
}

template <typename R>
Tensor<R> sigmoid(const Tensor<R>& x) {
    return unary(x, [](R v) { return sigmoid_value(v); }, [](R, R y) { return y * (R(1) - y); });
}

template <typename R>
Tensor<R> tanh(const Tensor<R>& x) {
    return unary(x, [](R v) { return std::tanh(v); }, [](R, R y) { return R(1) - y * y; });
}

template <typename R>
Tensor<R> swish(const Tensor<R>& x) {
    return unary(
        x, [](R v) { return v * sigmoid_value(v); },
        [](R v, R) {
            const R s = sigmoid_value(v);
            return s * (R(1) + v * (R(1) - s));
        });
}

template <typename R>
Tensor<R> softplus(const Tensor<R>& x) {
    return unary(x, [](R v) { return softplus_value(v); }, [](R v, R) { return sigmoid_value(v); });
}

template <typename R>
Tensor<R> glu(const Tensor<R>& x) {
    require(x.rank() >= 1 && x.shape().back() % 2 == 0, "glu", "last axis must be even, got " + to_string(x.shape()));
    const auto d2 = x.shape().back(), d = d2 / 2, rows = x.numel() / d2;
    auto xv = x.data();
    Shape shape = x.shape();
    shape.back() = d;
    std::vector<R> out(rows * d);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            out[r * d + i] = xv[r * d2 + i] * sigmoid_value(xv[r * d2 + d + i]);
        }
    }
    return Tensor<R>::from_op(shape, std::move(out), {x}, [x, d, d2, rows](Node<R>& node) {
        auto xv = x.data();
        auto& g = *grad_of(x);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < d; ++i) {
                const R a = xv[r * d2 + i];
                const R s = sigmoid_value(xv[r * d2 + d + i]);
                const R dy = node.grad[r * d + i];
                g[r * d2 + i] += dy * s;
                g[r * d2 + d + i] += dy * a * s * (R(1) - s);
            }
        }
    });
}

namespace {

template <typename R>
void softmax_rows(std::span<const R> in, std::vector<R>& out, std::size_t rows, std::size_t cols) {
    out.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const R* src = in.data() + r * cols;
        R* dst = out.data() + r * cols;
        const R mx = *std::max_element(src, src + cols);
        R s = 0;
        for (std::size_t i = 0; i < cols; ++i) {
            dst[i] = std::exp(src[i] - mx);
            s += dst[i];
        }
        for (std::size_t i = 0; i < cols; ++i) {
            dst[i] /= s;
        }
    }
}

// dx = y * (dy - sum(dy * y)) row-wise, accumulated into dx.
template <typename R>
void softmax_backward_rows(const R* y, const R* dy, R* dx, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        R dot = 0;
        for (std::size_t i = 0; i < cols; ++i) {
            dot += dy[r * cols + i] * y[r * cols + i];
        }
        for (std::size_t i = 0; i < cols; ++i) {
            dx[r * cols + i] += y[r * cols + i] * (dy[r * cols + i] - dot);
        }
    }
}

}  // namespace

template <typename R>
Tensor<R> softmax(const Tensor<R>& x) {
    require(x.rank() >= 1, "softmax", "needs rank >= 1");
    const auto cols = x.shape().back(), rows = x.numel() / cols;
    std::vector<R> out;
    softmax_rows(x.data(), out, rows, cols);
    return Tensor<R>::from_op(x.shape(), std::move(out), {x}, [x, rows, cols](Node<R>& node) {
        softmax_backward_rows(node.value.data(), node.grad.data(), grad_of(x)->data(), rows, cols);
    });
}

template <typename R>
Tensor<R> scaled_dot_attention(const Tensor<R>& q, const Tensor<R>& k, const Tensor<R>& v) {
    require(q.rank() == 2 && k.rank() == 2 && q.dim(1) == k.dim(1), "scaled_dot_attention", shapes(q, k));
    require(v.rank() == 2 && v.dim(0) == k.dim(0), "scaled_dot_attention values", shapes(k, v));
    const auto tq = q.dim(0), tk = k.dim(0), dh = q.dim(1), dv = v.dim(1);
    const R inv_sqrt = R(1) / std::sqrt(static_cast<R>(dh));
    std::vector<R> scores(tq * tk);
    as_matrix(scores, tq, tk).noalias() = (as_matrix(q.data(), tq, dh) * as_matrix(k.data(), tk, dh).transpose()) * inv_sqrt;
    std::vector<R> probs;
    softmax_rows(std::span<const R>(scores), probs, tq, tk);
    std::vector<R> out(tq * dv);
    as_matrix(out, tq, dv).noalias() = as_matrix(std::span<const R>(probs), tq, tk) * as_matrix(v.data(), tk, dv);
    return Tensor<R>::from_op({tq, dv}, std::move(out), {q, k, v},
                              [q, k, v, tq, tk, dh, dv, inv_sqrt, probs = std::move(probs)](Node<R>& node) {
        const auto g = as_matrix(std::span<const R>(node.grad), tq, dv);
        const auto p = as_matrix(std::span<const R>(probs), tq, tk);
        if (auto* gv = grad_of(v)) {
            as_matrix(*gv, tk, dv).noalias() += p.transpose() * g;
        }
        if (!q.requires_grad() && !k.requires_grad()) {
            return;
        }
        RowMat<R> dp = g * as_matrix(v.data(), tk, dv).transpose();
        RowMat<R> ds = RowMat<R>::Zero(static_cast<Eigen::Index>(tq), static_cast<Eigen::Index>(tk));
        softmax_backward_rows(probs.data(), dp.data(), ds.data(), tq, tk);
        ds *= inv_sqrt;
        if (auto* gq = grad_of(q)) {
            as_matrix(*gq, tq, dh).noalias() += ds * as_matrix(k.data(), tk, dh);
        }
        if (auto* gk = grad_of(k)) {
            as_matrix(*gk, tk, dh).noalias() += ds.transpose() * as_matrix(q.data(), tq, dh);
        }
    });
}

template <typename R>
Tensor<R> transpose(const Tensor<R>& x) {
    require(x.rank() == 2, "transpose", "needs a 2-D tensor, got " + to_string(x.shape()));
    const auto m = x.dim(0), n = x.dim(1);
    std::vector<R> out(m * n);
    as_matrix(out, n, m) = as_matrix(x.data(), m, n).transpose();
    return Tensor<R>::from_op({n, m}, std::move(out), {x}, [x, m, n](Node<R>& node) {
        as_matrix(*grad_of(x), m, n) += as_matrix(std::span<const R>(node.grad), n, m).transpose();
    });
}

template <typename R>
Tensor<R> reshape(const Tensor<R>& x, Shape shape) {
    require(numel(shape) == x.numel(), "reshape", to_string(x.shape()) + " to " + to_string(shape));
    std::vector<R> out(x.data().begin(), x.data().end());
    return Tensor<R>::from_op(std::move(shape), std::move(out), {x}, [x](Node<R>& node) {
        auto& g = *grad_of(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += node.grad[i];
        }
    });
}

template <typename R>
Tensor<R> mean_last(const Tensor<R>& x) {
    require(x.rank() >= 1, "mean_last", "needs rank >= 1");
    const auto n = x.shape().back(), rows = x.numel() / n;
    Shape shape(x.shape().begin(), x.shape().end() - 1);
    auto xv = x.data();
    std::vector<R> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        R s = 0;
        for (std::size_t i = 0; i < n; ++i) {
            s += xv[r * n + i];
        }
        out[r] = s / static_cast<R>(n);
    }
    return Tensor<R>::from_op(std::move(shape), std::move(out), {x}, [x, n, rows](Node<R>& node) {
        auto& g = *grad_of(x);
        for (std::size_t r = 0; r < rows; ++r) {
            const R v = node.grad[r] / static_cast<R>(n);
            for (std::size_t i = 0; i < n; ++i) {
                g[r * n + i] += v;
            }
        }
    });
}

template <typename R>
Tensor<R> slice_cols(const Tensor<R>& x, std::size_t begin, std::size_t count) {
    require(x.rank() == 2 && begin + count <= x.dim(1), "slice_cols",
            "columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") of " + to_string(x.shape()));
    const auto m = x.dim(0), n = x.dim(1);
    std::vector<R> out(m * count);
    as_matrix(out, m, count) = as_matrix(x.data(), m, n).middleCols(static_cast<Eigen::Index>(begin),
                                                                    static_cast<Eigen::Index>(count));
    return Tensor<R>::from_op({m, count}, std::move(out), {x}, [x, m, n, begin, count](Node<R>& node) {
        as_matrix(*grad_of(x), m, n).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) +=
            as_matrix(std::span<const R>(node.grad), m, count);
    });
}

template <typename R>
Tensor<R> concat_cols(const std::vector<Tensor<R>>& parts) {
    if (parts.empty()) {
        throw Error("concat_cols: no inputs");
    }
    const auto m = parts.front().dim(0);
    std::size_t n = 0;
    for (const auto& p : parts) {
        require(p.rank() == 2 && p.dim(0) == m, "concat_cols", shapes(parts.front(), p));
        n += p.dim(1);
    }
    std::vector<R> out(m * n);
    auto y = as_matrix(out, m, n);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        y.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(p.dim(1))) =
            as_matrix(p.data(), m, p.dim(1));
        offset += p.dim(1);
    }
    return Tensor<R>::from_op({m, n}, std::move(out), parts, [parts, m, n](Node<R>& node) {
        const auto g = as_matrix(std::span<const R>(node.grad), m, n);
        std::size_t offset = 0;
        for (const auto& p : parts) {
            const auto w = p.dim(1);
            if (auto* gp = grad_of(p)) {
                as_matrix(*gp, m, w) += g.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(w));
            }
            offset += w;
        }
    });
}

template <typename R>
Tensor<R> sum(const Tensor<R>& x) {
    R s = 0;
    for (R v : x.data()) {
        s += v;
    }
    return Tensor<R>::from_op({}, {s}, {x}, [x](Node<R>& node) {
        for (auto& g : *grad_of(x)) {
            g += node.grad[0];
        }
    });
}

template <typename R>
Tensor<R> weighted_sum(const Tensor<R>& x, const std::vector<R>& weights) {
    require(weights.size() == x.numel(), "weighted_sum",
            to_string(x.shape()) + " vs " + std::to_string(weights.size()) + " weights");
    R s = 0;
    auto xv = x.data();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        s += xv[i] * weights[i];
    }
    return Tensor<R>::from_op({}, {s}, {x}, [x, weights](Node<R>& node) {
        auto& g = *grad_of(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += node.grad[0] * weights[i];
        }
    });
}

template <typename R>
Tensor<R> accddoa_activation(const Tensor<R>& x) {
    require(x.rank() == 2 && x.dim(1) % 4 == 0, "accddoa_activation",
            "needs [T, N*C*4], got " + to_string(x.shape()));
    auto xv = x.data();
    std::vector<R> out(x.numel());
    const auto cols = x.dim(1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto comp = (i % cols) % 4;
        out[i] = comp < 2 ? std::tanh(xv[i]) : comp == 2 ? softplus_value(xv[i]) : sigmoid_value(xv[i]);
    }
    return Tensor<R>::from_op(x.shape(), std::move(out), {x}, [x, cols](Node<R>& node) {
        auto xv = x.data();
        auto& g = *grad_of(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto comp = (i % cols) % 4;
            const R y = node.value[i];
            const R d = comp < 2 ? R(1) - y * y : comp == 2 ? sigmoid_value(xv[i]) : y * (R(1) - y);
            g[i] += node.grad[i] * d;
        }
    });
}

#define SELD_INSTANTIATE_OPS(R)                                                                                 \
    template Tensor<R> matmul(const Tensor<R>&, const Tensor<R>&);                                             \
    template Tensor<R> add(const Tensor<R>&, const Tensor<R>&);                                                \
    template Tensor<R> sub(const Tensor<R>&, const Tensor<R>&);                                                \
    template Tensor<R> mul(const Tensor<R>&, const Tensor<R>&);                                                \
    template Tensor<R> scale(const Tensor<R>&, R);                                                             \
    template Tensor<R> linear(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&);                           \
    template Tensor<R> conv2d(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&);                           \
    template Tensor<R> depthwise_conv1d(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&);                 \
    template Tensor<R> avg_pool2d(const Tensor<R>&);                                                           \
    template Tensor<R> batch_norm(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&, BatchNormState<R>&,   \
                                  bool, std::size_t);                                                          \
    template Tensor<R> layer_norm(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&, R);                    \
    template Tensor<R> relu(const Tensor<R>&);                                                                 \
    template Tensor<R> sigmoid(const Tensor<R>&);                                                              \
    template Tensor<R> tanh(const Tensor<R>&);                                                                 \
    template Tensor<R> swish(const Tensor<R>&);                                                                \
    template Tensor<R> softplus(const Tensor<R>&);                                                             \
    template Tensor<R> glu(const Tensor<R>&);                                                                  \
    template Tensor<R> softmax(const Tensor<R>&);                                                              \
    template Tensor<R> scaled_dot_attention(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&);             \
    template Tensor<R> transpose(const Tensor<R>&);                                                            \
    template Tensor<R> reshape(const Tensor<R>&, Shape);                                                       \
    template Tensor<R> mean_last(const Tensor<R>&);                                                            \
    template Tensor<R> slice_cols(const Tensor<R>&, std::size_t, std::size_t);                                 \
    template Tensor<R> concat_cols(const std::vector<Tensor<R>>&);                                             \
    template Tensor<R> sum(const Tensor<R>&);                                                                  \
    template Tensor<R> weighted_sum(const Tensor<R>&, const std::vector<R>&);                                  \
    template Tensor<R> accddoa_activation(const Tensor<R>&);

SELD_INSTANTIATE_OPS(float)
SELD_INSTANTIATE_OPS(double)

}  // namespace seld::nn
