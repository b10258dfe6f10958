#include "seld/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace seld::nn {

namespace {

using T = Tensor<double>;

T random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(numel(shape));
    for (auto& x : v) {
        x = dist(rng);
    }
    return T(std::move(shape), std::move(v), true);
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

}  // namespace

GradcheckResult gradcheck(const std::string& name, const std::function<Tensor<double>()>& f,
                          const std::vector<Tensor<double>*>& wrt, std::uint64_t seed,
                          const GradcheckOptions& options) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    GradcheckResult result{name, seed, 0.0, 0, true};

    for (auto* x : wrt) {
        x->zero_grad();
    }
    auto out = f();
    std::normal_distribution<double> normal;
    std::vector<double> w(out.numel());
    for (auto& v : w) {
        v = normal(rng);
    }
    weighted_sum(out, w).backward();

    auto loss = [&]() {
        NoGradGuard guard;
        return weighted_sum(f(), w).item();
    };

    std::vector<std::vector<double>> analytic(wrt.size()), numeric(wrt.size());
    double largest = 0.0;
    for (std::size_t j = 0; j < wrt.size(); ++j) {
        auto* x = wrt[j];
        const auto n = x->numel();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), 0);
        if (n > options.max_coords) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.max_coords);
        }
        const auto grad = x->grad();
        for (auto i : coords) {
            analytic[j].push_back(grad.empty() ? 0.0 : grad[i]);
            auto data = x->mutable_data();
            const double saved = data[i];
            data[i] = saved + options.eps;
            const double plus = loss();
            data[i] = saved - options.eps;
            const double minus = loss();
            data[i] = saved;
            numeric[j].push_back((plus - minus) / (2.0 * options.eps));
        }
        largest = std::max({largest, norm(analytic[j]), norm(numeric[j])});
        result.coords += coords.size();
    }
    const double floor = options.abs_floor * std::max(1.0, largest);
    for (std::size_t j = 0; j < wrt.size(); ++j) {
        std::vector<double> diff(analytic[j].size());
        for (std::size_t i = 0; i < diff.size(); ++i) {
            diff[i] = analytic[j][i] - numeric[j][i];
        }
        const double scale = std::max({norm(analytic[j]), norm(numeric[j]), floor});
        result.max_error = std::max(result.max_error, norm(diff) / scale);
    }
    result.passed = result.max_error <= options.tolerance;
    return result;
}

std::vector<GradcheckResult> gradcheck_ops(std::uint64_t seed, const GradcheckOptions& options) {
    Rng rng(seed);
    std::vector<GradcheckResult> results;
    auto check = [&](const std::string& name, std::vector<T> inputs, std::function<T(const std::vector<T>&)> op) {
        std::vector<T*> wrt;
        for (auto& t : inputs) {
            wrt.push_back(&t);
        }
        results.push_back(gradcheck(name, [&] { return op(inputs); }, wrt, seed, options));
    };
    using V = std::vector<T>;

    check("matmul", {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)},
          [](const V& in) { return matmul(in[0], in[1]); });
    check("add", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
          [](const V& in) { return add(in[0], in[1]); });
    check("sub", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
          [](const V& in) { return sub(in[0], in[1]); });
    check("mul", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
          [](const V& in) { return mul(in[0], in[1]); });
    check("scale", {random_tensor({5}, rng)}, [](const V& in) { return scale(in[0], 0.7); });
    check("linear", {random_tensor({3, 4}, rng), random_tensor({4, 6}, rng), random_tensor({6}, rng)},
          [](const V& in) { return linear(in[0], in[1], in[2]); });
    check("conv2d_3x3", {random_tensor({2, 5, 6}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
          [](const V& in) { return conv2d(in[0], in[1], in[2]); });
    check("conv2d_1x1", {random_tensor({2, 4, 3}, rng), random_tensor({3, 2, 1, 1}, rng), random_tensor({3}, rng)},
          [](const V& in) { return conv2d(in[0], in[1], in[2]); });
    check("depthwise_conv1d", {random_tensor({7, 4}, rng), random_tensor({4, 5}, rng), random_tensor({4}, rng)},
          [](const V& in) { return depthwise_conv1d(in[0], in[1], in[2]); });
    check("avg_pool2d", {random_tensor({2, 4, 6}, rng)}, [](const V& in) { return avg_pool2d(in[0]); });
    {
        auto state = std::make_shared<BatchNormState<double>>(3);
        check("batch_norm_train_axis0", {random_tensor({3, 4, 5}, rng), random_tensor({3}, rng), random_tensor({3}, rng)},
              [state](const V& in) { return batch_norm(in[0], in[1], in[2], *state, true, 0); });
        check("batch_norm_train_axis1", {random_tensor({6, 3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)},
              [state](const V& in) { return batch_norm(in[0], in[1], in[2], *state, true, 1); });
        auto frozen = std::make_shared<BatchNormState<double>>(3);
        frozen->running_mean = {0.1, -0.2, 0.3};
        frozen->running_var = {0.5, 1.5, 2.0};
        check("batch_norm_eval", {random_tensor({3, 4, 2}, rng), random_tensor({3}, rng), random_tensor({3}, rng)},
              [frozen](const V& in) { return batch_norm(in[0], in[1], in[2], *frozen, false, 0); });
    }
    check("layer_norm", {random_tensor({4, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)},
          [](const V& in) { return layer_norm(in[0], in[1], in[2]); });
    check("relu", {random_tensor({4, 5}, rng)}, [](const V& in) { return relu(in[0]); });
    check("sigmoid", {random_tensor({4, 5}, rng, -4, 4)}, [](const V& in) { return sigmoid(in[0]); });
    check("tanh", {random_tensor({4, 5}, rng, -3, 3)}, [](const V& in) { return tanh(in[0]); });
    check("swish", {random_tensor({4, 5}, rng, -4, 4)}, [](const V& in) { return swish(in[0]); });
    check("softplus", {random_tensor({4, 5}, rng, -4, 4)}, [](const V& in) { return softplus(in[0]); });
    check("glu", {random_tensor({3, 8}, rng, -2, 2)}, [](const V& in) { return glu(in[0]); });
    check("softmax", {random_tensor({3, 5}, rng, -3, 3)}, [](const V& in) { return softmax(in[0]); });
    check("scaled_dot_attention", {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng), random_tensor({5, 6}, rng)},
          [](const V& in) { return scaled_dot_attention(in[0], in[1], in[2]); });
    check("transpose", {random_tensor({3, 4}, rng)}, [](const V& in) { return transpose(in[0]); });
    check("reshape", {random_tensor({3, 4}, rng)}, [](const V& in) { return reshape(in[0], {2, 6}); });
    check("mean_last", {random_tensor({2, 3, 4}, rng)}, [](const V& in) { return mean_last(in[0]); });
    check("slice_cols", {random_tensor({3, 6}, rng)}, [](const V& in) { return slice_cols(in[0], 2, 3); });
    check("concat_cols", {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)},
          [](const V& in) { return concat_cols(std::vector<T>{in[0], in[1]}); });
    check("sum", {random_tensor({3, 4}, rng)}, [](const V& in) { return sum(in[0]); });
    check("accddoa_activation", {random_tensor({2, 8}, rng, -3, 3)},
          [](const V& in) { return accddoa_activation(in[0]); });
    return results;
}

std::vector<GradcheckResult> gradcheck_blocks(std::uint64_t seed, const GradcheckOptions& options) {
    Rng rng(seed);
    std::vector<GradcheckResult> results;
    constexpr std::size_t d = 8, heads = 2, kernel = 5;

    auto params_of = [](auto& block) {
        StateDict<double> sd;
        block.collect("block", sd);
        std::vector<T*> wrt;
        for (auto& [name, t] : sd.params) {
            wrt.push_back(t);
        }
        return wrt;
    };

    {
        ResidualConvBlock<double> block(3, 4, rng);
        auto x = random_tensor({3, 8, 8}, rng);
        auto wrt = params_of(block);
        wrt.insert(wrt.begin(), &x);
        results.push_back(gradcheck("cnn_block", [&] { return block(x, true); }, wrt, seed, options));
    }
    {
        ConformerBlock<double> block(d, heads, kernel, rng);
        auto x = random_tensor({6, d}, rng);
        auto wrt = params_of(block);
        wrt.insert(wrt.begin(), &x);
        results.push_back(gradcheck("conformer_block", [&] { return block(x, true); }, wrt, seed, options));
    }
    for (std::size_t tokens : {std::size_t{1}, std::size_t{577}}) {
        CrossModalBlock<double> block(d, heads, kernel, rng);
        auto alpha = random_tensor({6, d}, rng);
        auto beta = random_tensor({tokens, d}, rng);
        auto wrt = params_of(block);
        wrt.insert(wrt.begin(), {&alpha, &beta});
        // Both streams feed the next layer, so both outputs are checked.
        auto f = [&] {
            auto [a, b] = block(alpha, beta, true);
            return concat_cols(std::vector<T>{reshape(a, {1, a.numel()}), reshape(b, {1, b.numel()})});
        };
        results.push_back(gradcheck("cross_modal_block_tb" + std::to_string(tokens), f, wrt, seed, options));
    }
    return results;
}

}  // namespace seld::nn
