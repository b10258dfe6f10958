#include "seld/nn/gradcheck.hpp"
#include "seld/nn/model.hpp"
#include "seld/nn/train.hpp"
#include "seld/scenesynth.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace seld;
using namespace seld::nn;
using namespace seld::test;
using T = Tensor<double>;

namespace {

T rand_t(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(numel(shape));
    for (auto& x : v) {
        x = uniform(rng, lo, hi);
    }
    return T(std::move(shape), std::move(v));
}

void expect_close(std::span<const double> a, std::span<const double> b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_NEAR(a[i], b[i], tol) << "index " << i;
    }
}

std::vector<double> copy(const T& t) { return {t.data().begin(), t.data().end()}; }

ModelConfig tiny_config(bool audio_visual = true) {
    auto c = ModelConfig::toy();
    c.d_model = 16;
    c.n_heads = 2;
    c.conv_kernel = 5;
    c.cnn_channels = {4, 8, 16, 16};
    c.audio_visual = audio_visual;
    return c;
}

io::NdArray random_features(Rng& rng, std::uint32_t frames) {
    io::NdArray a({4, frames, 64});
    for (auto& v : a.data) {
        v = static_cast<float>(uniform(rng, -2.0, 2.0));
    }
    return a;
}

}  // namespace

TEST(Ops, MatmulIdentity) {
    Rng rng(1);
    const auto x = rand_t({4, 3}, rng);
    std::vector<double> eye(16, 0.0);
    for (int i = 0; i < 4; ++i) {
        eye[static_cast<std::size_t>(i * 5)] = 1.0;
    }
    EXPECT_EQ(copy(matmul(T({4, 4}, eye), x)), copy(x));
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
    Rng rng(2);
    try {
        matmul(rand_t({2, 3}, rng), rand_t({4, 5}, rng));
        FAIL() << "no error";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[4, 5]"), std::string::npos) << msg;
    }
}

TEST(Ops, SoftmaxRowsSumToOne) {
    Rng rng(3);
    const auto s = softmax(rand_t({7, 11}, rng, -30, 30));
    for (std::size_t r = 0; r < 7; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < 11; ++c) {
            acc += s.data()[r * 11 + c];
        }
        EXPECT_NEAR(acc, 1.0, 1e-12);
    }
}

TEST(Ops, Conv2dMatchesDirectSum) {
    Rng rng(4);
    const auto x = rand_t({2, 5, 6}, rng);
    const auto w = rand_t({3, 2, 3, 3}, rng);
    const auto b = rand_t({3}, rng);
    const auto y = conv2d(x, w, b);
    ASSERT_EQ(y.shape(), (Shape{3, 5, 6}));
    for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 6; ++j) {
                double acc = b.data()[static_cast<std::size_t>(o)];
                for (int c = 0; c < 2; ++c) {
                    for (int di = -1; di <= 1; ++di) {
                        for (int dj = -1; dj <= 1; ++dj) {
                            const int ii = i + di, jj = j + dj;
                            if (ii < 0 || ii >= 5 || jj < 0 || jj >= 6) {
                                continue;
                            }
                            acc += x.data()[static_cast<std::size_t>((c * 5 + ii) * 6 + jj)] *
                                   w.data()[static_cast<std::size_t>(((o * 2 + c) * 3 + di + 1) * 3 + dj + 1)];
                        }
                    }
                }
                ASSERT_NEAR(y.data()[static_cast<std::size_t>((o * 5 + i) * 6 + j)], acc, 1e-12);
            }
        }
    }
}

TEST(Ops, DepthwiseConvAndPoolMatchDirectSums) {
    Rng rng(5);
    const auto x = rand_t({7, 3}, rng);
    const auto w = rand_t({3, 5}, rng);
    const auto b = rand_t({3}, rng);
    const auto y = depthwise_conv1d(x, w, b);
    for (int t = 0; t < 7; ++t) {
        for (int c = 0; c < 3; ++c) {
            double acc = b.data()[static_cast<std::size_t>(c)];
            for (int k = 0; k < 5; ++k) {
                const int s = t + k - 2;
                if (s >= 0 && s < 7) {
                    acc += x.data()[static_cast<std::size_t>(s * 3 + c)] * w.data()[static_cast<std::size_t>(c * 5 + k)];
                }
            }
            ASSERT_NEAR(y.data()[static_cast<std::size_t>(t * 3 + c)], acc, 1e-12);
        }
    }
    const auto img = rand_t({2, 4, 6}, rng);
    const auto p = avg_pool2d(img);
    ASSERT_EQ(p.shape(), (Shape{2, 2, 3}));
    const auto at = [&](int c, int i, int j) { return img.data()[static_cast<std::size_t>((c * 4 + i) * 6 + j)]; };
    EXPECT_NEAR(p.data()[4], (at(0, 2, 2) + at(0, 2, 3) + at(0, 3, 2) + at(0, 3, 3)) / 4.0, 1e-15);
}

TEST(Ops, NormalizationForward) {
    Rng rng(6);
    const auto x = rand_t({4, 6}, rng, -3, 3);
    const auto g = rand_t({6}, rng);
    const auto b = rand_t({6}, rng);
    const auto y = layer_norm(x, g, b);
    for (std::size_t r = 0; r < 4; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t c = 0; c < 6; ++c) {
            mean += x.data()[r * 6 + c] / 6.0;
        }
        for (std::size_t c = 0; c < 6; ++c) {
            var += std::pow(x.data()[r * 6 + c] - mean, 2) / 6.0;
        }
        for (std::size_t c = 0; c < 6; ++c) {
            const double expect = (x.data()[r * 6 + c] - mean) / std::sqrt(var + 1e-5) * g.data()[c] + b.data()[c];
            ASSERT_NEAR(y.data()[r * 6 + c], expect, 1e-12);
        }
    }
    // Eval-mode batch norm is an affine map with the running statistics.
    BatchNormState<double> state(6);
    state.running_mean = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    state.running_var = {1, 2, 3, 4, 5, 6};
    const auto z = batch_norm(x, g, b, state, false, 1);
    for (std::size_t i = 0; i < 24; ++i) {
        const auto c = i % 6;
        ASSERT_NEAR(z.data()[i],
                    (x.data()[i] - state.running_mean[c]) / std::sqrt(state.running_var[c] + 1e-5) * g.data()[c] + b.data()[c],
                    1e-12);
    }
}

TEST(Ops, TrainBatchNormUpdatesRunningStats) {
    Rng rng(7);
    const auto x = rand_t({2, 5}, rng);
    BatchNormState<double> state(2);
    const auto y = batch_norm(x, T({2}, {1.0, 1.0}), T({2}, {0.0, 0.0}), state, true, 0);
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0, ss = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            mean += x.data()[c * 5 + j] / 5.0;
        }
        for (std::size_t j = 0; j < 5; ++j) {
            ss += std::pow(x.data()[c * 5 + j] - mean, 2);
        }
        EXPECT_NEAR(state.running_mean[c], 0.1 * mean, 1e-12);
        EXPECT_NEAR(state.running_var[c], 0.9 + 0.1 * ss / 4.0, 1e-12);
        EXPECT_NEAR(y.data()[c * 5], (x.data()[c * 5] - mean) / std::sqrt(ss / 5.0 + 1e-5), 1e-12);
    }
}

TEST(Ops, AttentionMatchesManual) {
    Rng rng(8);
    const auto q = rand_t({2, 3}, rng), k = rand_t({4, 3}, rng), v = rand_t({4, 2}, rng);
    const auto y = scaled_dot_attention(q, k, v);
    for (std::size_t i = 0; i < 2; ++i) {
        std::vector<double> s(4);
        double z = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < 3; ++d) {
                dot += q.data()[i * 3 + d] * k.data()[j * 3 + d];
            }
            s[j] = std::exp(dot / std::sqrt(3.0));
            z += s[j];
        }
        for (std::size_t c = 0; c < 2; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < 4; ++j) {
                acc += s[j] / z * v.data()[j * 2 + c];
            }
            ASSERT_NEAR(y.data()[i * 2 + c], acc, 1e-12);
        }
    }
}

TEST(Ops, ActivationRanges) {
    Rng rng(9);
    const auto y = accddoa_activation(rand_t({5, 24}, rng, -40, 40));
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const auto comp = (i % 24) % 4;
        const double v = y.data()[i];
        if (comp < 2) {
            ASSERT_TRUE(v >= -1.0 && v <= 1.0);
        } else if (comp == 2) {
            ASSERT_GE(v, 0.0);
        } else {
            ASSERT_TRUE(v >= 0.0 && v <= 1.0);
        }
    }
    const auto g = glu(T({1, 4}, {2.0, 3.0, 0.0, 1.0}));
    EXPECT_NEAR(g.data()[0], 1.0, 1e-15);
    EXPECT_NEAR(g.data()[1], 3.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Autodiff, BackwardAccumulatesThroughSharedNodes) {
    T x({2}, {1.5, -2.0}, true);
    auto y = sum(add(mul(x, x), x));  // d/dx = 2x + 1
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], -3.0);
}

class Gradcheck : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(Gradcheck, EveryOp) {
    for (const auto& r : gradcheck_ops(GetParam())) {
        EXPECT_TRUE(r.passed) << r.name << " error " << r.max_error;
    }
}

TEST_P(Gradcheck, EveryBlock) {
    const auto results = gradcheck_blocks(GetParam());
    EXPECT_EQ(results.size(), 4u);
    for (const auto& r : results) {
        EXPECT_TRUE(r.passed) << r.name << " error " << r.max_error;
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, Gradcheck, ::testing::Values(1u, 2u, 3u));

TEST(Gradcheck, DetectsAWrongGradient) {
    // x * x with a deliberately broken backward.
    T x({3}, {0.5, -1.0, 2.0}, true);
    auto f = [&] {
        return T::from_op({3}, {x.data()[0] * x.data()[0], x.data()[1] * x.data()[1], x.data()[2] * x.data()[2]}, {x},
                          [x](Node<double>& out) mutable {
                              auto g = x.mutable_grad();
                              for (std::size_t i = 0; i < 3; ++i) {
                                  g[i] += out.grad[i] * x.data()[i];
                              }
                          });
    };
    EXPECT_FALSE(gradcheck("broken_square", f, {&x}, 1).passed);
}

TEST(Blocks, ConformerPreservesShapeAndIsPure) {
    Rng rng(10);
    ConformerBlock<double> block(8, 2, 5, rng);
    for (std::size_t t : {1u, 3u, 12u}) {
        const auto x = rand_t({t, 8}, rng);
        const auto y = block(x, false);
        EXPECT_EQ(y.shape(), x.shape());
        EXPECT_EQ(copy(block(x, false)), copy(y));
        EXPECT_EQ(copy(block(block(x, false), false)), copy(block(y, false)));
    }
}

TEST(Blocks, CrossModalOutputLengthFollowsAlpha) {
    Rng rng(11);
    CrossModalBlock<double> block(8, 2, 5, rng);
    const auto alpha = rand_t({50, 8}, rng);
    for (std::size_t tb : {1u, 577u}) {
        const auto [a, b] = block(alpha, rand_t({tb, 8}, rng), false);
        EXPECT_EQ(a.shape(), (Shape{50, 8}));
        EXPECT_EQ(b.shape(), (Shape{tb, 8}));
    }
    EXPECT_THROW(block(alpha, rand_t({3, 6}, rng), false), Error);
}

TEST(Blocks, CrossModalWithoutValuesEqualsAttentionFreePath) {
    Rng rng(12);
    CrossModalBlock<double> block(8, 2, 5, rng);
    for (auto* t : {&block.attn.v.weight, &block.attn.v.bias, &block.attn.o.bias}) {
        std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0);
    }
    const auto alpha = rand_t({6, 8}, rng);
    const auto beta = rand_t({9, 8}, rng);
    const auto [out, unused] = block(alpha, beta, false);

    auto a = add(alpha, scale(block.ff_alpha(alpha), 0.5));
    a = add(a, block.conv(a, false));
    a = add(a, scale(block.ff2(a), 0.5));
    expect_close(out.data(), block.out_norm(a).data(), 1e-12);
}

TEST(Blocks, CnnBlockHalvesBothAxes) {
    Rng rng(13);
    ResidualConvBlock<double> block(4, 6, rng);
    const auto y = block(rand_t({4, 16, 8}, rng), false);
    EXPECT_EQ(y.shape(), (Shape{6, 8, 4}));
}

TEST(Model, ToyEncoderShapeAndZeroInput) {
    SeldModel<double> model(ModelConfig::toy(), 1);
    Rng rng(14);
    const auto seq = model.encode(to_tensor<double>(random_features(rng, 160)), false);
    EXPECT_EQ(seq.shape(), (Shape{10, 64}));
    const auto zero = model.encode(to_tensor<double>(io::NdArray({4, 160, 64})), false);
    for (std::size_t t = 1; t < 10; ++t) {
        for (std::size_t d = 0; d < 64; ++d) {
            ASSERT_NEAR(zero.data()[t * 64 + d], zero.data()[d], 1e-12);
        }
    }
    EXPECT_THROW(model.encode(to_tensor<double>(io::NdArray({4, 150, 64})), false), Error);
}

TEST(Model, ForwardContract) {
    SeldModel<double> model(tiny_config(), 2);
    Rng rng(15);
    const auto feats = to_tensor<double>(random_features(rng, 160));
    const auto clap = to_tensor<double>(io::make_fixture(io::Modality::ClapAudio, 1));
    const auto owl = to_tensor<double>(io::make_fixture(io::Modality::OwlVitVisual, 2));
    const auto out = model.forward(feats, clap, &owl, false);
    EXPECT_EQ(out.shape(), (Shape{10, 3 * 13 * 4}));
    EXPECT_EQ(copy(model.forward(feats, clap, &owl, false)), copy(out));
    const auto frames = to_frames(out, 13);
    ASSERT_EQ(frames.size(), 10u);
    EXPECT_EQ(frames[3].at(2, 12, 3), out.data()[3 * 156 + (2 * 13 + 12) * 4 + 3]);
    for (const auto& f : frames) {
        for (int k = 0; k < 3; ++k) {
            for (int c = 0; c < 13; ++c) {
                ASSERT_LT(std::abs(f.at(k, c, 0)), 1.0);
                ASSERT_LT(std::abs(f.at(k, c, 1)), 1.0);
                ASSERT_GE(f.at(k, c, 2), 0.0);
                ASSERT_GT(f.at(k, c, 3), 0.0);
                ASSERT_LT(f.at(k, c, 3), 1.0);
            }
        }
    }
    EXPECT_THROW(model.forward(feats, clap, nullptr, false), Error);
}

TEST(Model, AudioOnlyIgnoresVisualFixture) {
    SeldModel<double> model(tiny_config(false), 3);
    Rng rng(16);
    const auto feats = to_tensor<double>(random_features(rng, 64));
    const auto clap = to_tensor<double>(io::make_fixture(io::Modality::ClapAudio, 1));
    const auto owl1 = to_tensor<double>(io::make_fixture(io::Modality::OwlVitVisual, 1));
    const auto owl2 = to_tensor<double>(io::make_fixture(io::Modality::OwlVitVisual, 2));
    const auto a = copy(model.forward(feats, clap, &owl1, false));
    EXPECT_EQ(a, copy(model.forward(feats, clap, &owl2, false)));
    EXPECT_EQ(a, copy(model.forward(feats, clap, nullptr, false)));
}

TEST(Model, ConfigJsonAndValidation) {
    const auto paper = ModelConfig::paper();
    EXPECT_EQ(paper.d_model, 512u);
    EXPECT_EQ(paper.n_heads, 8u);
    EXPECT_EQ(paper.conv_kernel, 51u);
    EXPECT_EQ(paper.seld_conformer_layers, 4u);
    EXPECT_EQ(ModelConfig::from_json(paper.to_json()), paper);
    auto bad = ModelConfig::toy();
    bad.cnn_channels.back() = 32;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Model, CheckpointRoundtripIsBitExact) {
    SeldModel<float> model(tiny_config(), 4);
    Rng rng(17);
    const auto feats = features::as_feature_tensor(random_features(rng, 32));
    const auto clap = io::make_fixture(io::Modality::ClapAudio, 1);
    const auto owl = io::make_fixture(io::Modality::OwlVitVisual, 2);
    const auto bytes = encode_checkpoint(model);
    auto back = decode_checkpoint(bytes);
    EXPECT_EQ(back->config(), model.config());
    EXPECT_EQ(encode_checkpoint(*back), bytes);
    const auto a = infer(model, feats, clap, &owl);
    const auto b = infer(*back, feats, clap, &owl);
    EXPECT_EQ(a, b);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), Error);
    EXPECT_THROW(decode_checkpoint("SSLD" + bytes.substr(4)), Error);
}

TEST(Training, LearningRateSchedule) {
    EXPECT_EQ(learning_rate(1e-3, 1), 1e-3);
    EXPECT_EQ(learning_rate(1e-3, 30), 1e-3);
    EXPECT_EQ(learning_rate(1e-3, 31), 1e-3 * 0.95);
    EXPECT_EQ(learning_rate(1e-3, 32), 1e-3 * (0.95 * 0.95));
    EXPECT_NEAR(learning_rate(1e-3, 31), 9.5e-4, 1e-18);
    EXPECT_NEAR(learning_rate(1e-3, 32), 9.025e-4, 1e-18);
}

namespace {

std::vector<TrainingExample> tiny_dataset(std::size_t clips, double seconds) {
    const auto classes = accddoa::ClassMap::dcase2025();
    std::vector<TrainingExample> data;
    for (std::size_t i = 0; i < clips; ++i) {
        scenesynth::SceneSpec spec;
        spec.seed = 100 + i;
        spec.duration_s = seconds;
        spec.mean_events = 3;
        spec.std_events = 1;
        const auto scene = scenesynth::generate_scene(spec, classes);
        TrainingExample ex;
        ex.features = features::extract_features(scene.clip);
        ex.labels = group_by_frame(scene.labels, ex.features.frames() / 16);
        ex.clap = io::make_fixture(io::Modality::ClapAudio, 10 + i);
        ex.owl = io::make_fixture(io::Modality::OwlVitVisual, 20 + i);
        data.push_back(std::move(ex));
    }
    return data;
}

}  // namespace

TEST(Training, ZeroLearningRateKeepsWeights) {
    SeldModel<float> model(tiny_config(), 5);
    std::vector<std::vector<float>> before;
    for (auto& [name, t] : model.state_dict().params) {
        before.emplace_back(t->data().begin(), t->data().end());
    }
    TrainConfig tc;
    tc.epochs = 2;
    tc.lr0 = 0.0;
    tc.batch = 2;
    train_toy(model, tiny_dataset(2, 1.6), tc);
    std::size_t i = 0;
    for (auto& [name, t] : model.state_dict().params) {
        EXPECT_EQ(std::vector<float>(t->data().begin(), t->data().end()), before[i++]) << name;
    }
}

TEST(Training, LossDecreasesOnFixedData) {
    SeldModel<float> model(tiny_config(), 6);
    TrainConfig tc;
    tc.epochs = 100;
    tc.lr0 = 3e-3;
    tc.batch = 2;
    const auto log = train_toy(model, tiny_dataset(2, 1.6), tc);
    ASSERT_EQ(log.size(), 100u);
    EXPECT_LT(log.back().loss, log.front().loss);
    EXPECT_EQ(log[31].lr, learning_rate(3e-3, 32));
}

TEST(Training, RejectsMismatchedLabels) {
    SeldModel<float> model(tiny_config(), 7);
    auto data = tiny_dataset(1, 1.6);
    data[0].labels.resize(3);
    TrainConfig tc;
    tc.epochs = 1;
    EXPECT_THROW(train_toy(model, data, tc), Error);
}
