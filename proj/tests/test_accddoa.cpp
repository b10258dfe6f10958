#include "seld/accddoa.hpp"
#include "oracles.hpp"
#include "generators.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace seld;
using namespace seld::accddoa;
using namespace seld::test;

TEST(ClassMap, Default) {
    const auto m = ClassMap::dcase2025();
    ASSERT_EQ(m.size(), 13u);
    EXPECT_EQ(m.index_of("Bell"), 11);
    EXPECT_EQ(m.index_of("knock"), 12);
    EXPECT_TRUE(m.is_single_system(11));
    EXPECT_TRUE(m.is_single_system(12));
    EXPECT_FALSE(m.is_single_system(8));
    EXPECT_EQ(m.keypoint_rules.at(m.index_of("female_speech")), KeypointRule::Nose);
    EXPECT_EQ(m.keypoint_rules.at(m.index_of("clapping")), KeypointRule::Wrists);
    EXPECT_EQ(m.keypoint_rules.at(m.index_of("footsteps")), KeypointRule::Ankles);
    EXPECT_EQ(m.keypoint_rules.count(m.index_of("music")), 0u);
    EXPECT_THROW(m.index_of("theremin"), Error);
}

TEST(ClassMap, FromJson) {
    const auto m = ClassMap::from_json(R"({"classes": ["a", "b", "c"], "single_system_classes": ["c"]})");
    EXPECT_EQ(m.size(), 3u);
    EXPECT_TRUE(m.is_single_system(2));
    EXPECT_THROW(ClassMap::from_json(R"({"classes": ["a", "a"]})"), Error);
    EXPECT_THROW(ClassMap::from_json("[1, 2"), Error);
}

TEST(Encode, Examples) {
    const auto f = encode_frame({{0, 0, 0, 0.0, 2.0, true}}, 13);
    EXPECT_EQ(f.at(0, 0, 0), 1.0);
    EXPECT_EQ(f.at(0, 0, 1), 0.0);
    EXPECT_EQ(f.at(0, 0, 2), 2.0);
    EXPECT_EQ(f.at(0, 0, 3), 1.0);
    const auto left = encode_frame({{0, 3, 0, 90.0, 1.0, false}}, 13);
    EXPECT_NEAR(left.at(0, 3, 0), 0.0, 1e-15);
    EXPECT_EQ(left.at(0, 3, 1), 1.0);
    const auto right = encode_frame({{0, 3, 0, -90.0, 1.0, false}}, 13);
    EXPECT_NEAR(right.at(0, 3, 0), 0.0, 1e-15);
    EXPECT_EQ(right.at(0, 3, 1), -1.0);
    EXPECT_EQ(encode_frame({}, 13), AccddoaFrame(13));
}

TEST(Encode, TrackOrderBySource) {
    const auto f = encode_frame({{0, 1, 7, 10.0, 1.0, false}, {0, 1, 2, -10.0, 3.0, false}}, 4);
    EXPECT_EQ(f.at(0, 1, 2), 3.0);
    EXPECT_EQ(f.at(1, 1, 2), 1.0);
    EXPECT_EQ(f.at(2, 1, 2), 0.0);
}

TEST(Encode, Errors) {
    std::vector<EventRecord> four;
    for (int s = 0; s < 4; ++s) {
        four.push_back({0, 2, s, 0.0, 1.0, false});
    }
    EXPECT_THROW(encode_frame(four, 13), Error);
    EXPECT_THROW(encode_frame({{0, 0, 0, 95.0, 1.0, false}}, 13), Error);
    EXPECT_THROW(encode_frame({{0, 13, 0, 0.0, 1.0, false}}, 13), Error);
}

TEST(Decode, Examples) {
    AccddoaFrame f(13);
    f.at(0, 5, 0) = 0.8;
    f.at(0, 5, 2) = 1.6;
    f.at(0, 5, 3) = 0.9;
    f.at(1, 6, 0) = 0.3;
    f.at(1, 6, 1) = 0.3;
    const auto events = decode_frame(f, 4);
    ASSERT_EQ(events.size(), 1u);
    EXPECT_EQ(events[0].frame, 4);
    EXPECT_EQ(events[0].class_index, 5);
    EXPECT_EQ(events[0].azimuth_deg, 0.0);
    EXPECT_DOUBLE_EQ(events[0].distance_m, 2.0);
    EXPECT_TRUE(events[0].onscreen);
    f.at(0, 0, 0) = std::nan("");
    EXPECT_THROW(decode_frame(f), Error);
}

TEST(Decode, RoundtripOnRandomEvents) {
    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        auto events = random_frame(rng, 3, 13, 3, 0.4);
        for (auto& e : events) {
            e.azimuth_deg = uniform(rng, -90.0, 90.0);
            e.distance_m = uniform(rng, 0.05, 8.0);
        }
        auto back = decode_frame(encode_frame(events, 13), 3);
        ASSERT_EQ(back.size(), events.size());
        std::sort(events.begin(), events.end(), event_order);
        for (std::size_t i = 0; i < events.size(); ++i) {
            EXPECT_EQ(back[i].class_index, events[i].class_index);
            EXPECT_EQ(back[i].source_id, events[i].source_id);
            EXPECT_EQ(back[i].onscreen, events[i].onscreen);
            EXPECT_NEAR(back[i].azimuth_deg, events[i].azimuth_deg, 1e-6);
            EXPECT_NEAR(back[i].distance_m, events[i].distance_m, 1e-9);
        }
    }
}

TEST(Tensor, SequenceRoundtripLayout) {
    Rng rng(22);
    const auto frames = random_frames(rng, 7, 13, 3);
    const auto enc = encode_sequence(frames, 13);
    const auto t = to_tensor(enc);
    EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{3, 13, 4, 7}));
    EXPECT_EQ(t.at({1, 2, 3, 4}), static_cast<float>(enc[4].at(1, 2, 3)));
    const auto back = from_tensor(t);
    ASSERT_EQ(back.size(), enc.size());
    for (std::size_t i = 0; i < enc.size(); ++i) {
        for (std::size_t j = 0; j < enc[i].values.size(); ++j) {
            ASSERT_EQ(back[i].values[j], static_cast<double>(static_cast<float>(enc[i].values[j])));
        }
    }
}

TEST(OnscreenFactor, Values) {
    EXPECT_EQ(weighted_onscreen_loss_factor(true), 4.0);
    EXPECT_EQ(weighted_onscreen_loss_factor(false), 1.0);
    EXPECT_EQ(weighted_onscreen_loss_factor(true, false), 1.0);
}

TEST(Adpit, AssignmentCounts) {
    EXPECT_EQ(surjective_assignments(0).size(), 1u);
    EXPECT_EQ(surjective_assignments(1).size(), 1u);
    EXPECT_EQ(surjective_assignments(2).size(), 6u);
    EXPECT_EQ(surjective_assignments(3).size(), 6u);
}

TEST(Adpit, ZeroForDuplicatedTarget) {
    const EventRecord e{0, 2, 0, 30.0, 2.5, false};
    auto pred = encode_frame({e}, 4);
    for (int k = 1; k < 3; ++k) {
        for (int j = 0; j < 4; ++j) {
            pred.at(k, 2, j) = pred.at(0, 2, j);
        }
    }
    const auto res = adpit_loss(std::vector<AccddoaFrame>{pred}, FrameEvents{{e}});
    EXPECT_EQ(res.loss, 0.0);
}

TEST(Adpit, TwoEventsMatchOracle) {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<AccddoaFrame> pred{random_pred(rng, 3)};
        FrameEvents refs{{{0, 1, 0, random_azimuth(rng), 1.5, coin(rng)}, {0, 1, 1, random_azimuth(rng), 3.0, coin(rng)}}};
        ASSERT_EQ(adpit_loss(pred, refs, 4.0).loss, oracle_adpit(pred, refs, 4.0));
    }
}

TEST(Adpit, RandomFramesMatchOracleAndArePermutationInvariant) {
    Rng rng(24);
    const std::vector<std::array<int, 3>> perms = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<AccddoaFrame> pred{random_pred(rng, 5)};
        const FrameEvents refs{random_frame(rng, 0, 5, 3, 0.6)};
        const double w = coin(rng) ? 4.0 : 1.0;
        const double loss = adpit_loss(pred, refs, w).loss;
        ASSERT_EQ(loss, oracle_adpit(pred, refs, w));
        ASSERT_GE(loss, 0.0);
        for (const auto& p : perms) {
            ASSERT_EQ(adpit_loss(std::vector<AccddoaFrame>{permute_tracks(pred[0], p)}, refs, w).loss, loss);
        }
    }
}

TEST(Adpit, GradientMatchesFiniteDifferences) {
    Rng rng(25);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<AccddoaFrame> pred{random_pred(rng, 4), random_pred(rng, 4)};
        const FrameEvents refs{random_frame(rng, 0, 4, 3, 0.6), random_frame(rng, 1, 4, 3, 0.6)};
        const auto res = adpit_loss(pred, refs, 4.0);
        double num2 = 0.0, diff2 = 0.0, ana2 = 0.0;
        for (std::size_t t = 0; t < pred.size(); ++t) {
            for (std::size_t i = 0; i < pred[t].values.size(); ++i) {
                auto plus = pred, minus = pred;
                plus[t].values[i] += 1e-6;
                minus[t].values[i] -= 1e-6;
                const double fd = (adpit_loss(plus, refs, 4.0).loss - adpit_loss(minus, refs, 4.0).loss) / 2e-6;
                const double an = res.grad[t].values[i];
                num2 += fd * fd;
                ana2 += an * an;
                diff2 += (fd - an) * (fd - an);
            }
        }
        EXPECT_LE(std::sqrt(diff2) / std::max(std::sqrt(num2), std::sqrt(ana2)), 1e-4);
    }
}

TEST(Adpit, MonotoneInDistanceError) {
    const EventRecord e{0, 0, 0, 20.0, 2.0, true};
    auto pred = encode_frame({e}, 2);
    for (int k = 1; k < 3; ++k) {
        for (int j = 0; j < 4; ++j) {
            pred.at(k, 0, j) = pred.at(0, 0, j);
        }
    }
    for (int k = 0; k < 3; ++k) {
        pred.at(k, 0, 3) = 0.8;
    }
    double last = -1.0;
    for (int step = 0; step < 30; ++step) {
        pred.at(1, 0, 2) = 2.0 + 0.1 * step;
        const double loss = adpit_loss(std::vector<AccddoaFrame>{pred}, FrameEvents{{e}}).loss;
        EXPECT_GE(loss, last);
        last = loss;
    }
}

TEST(Adpit, OnscreenWeightScalesBce) {
    const EventRecord e{0, 0, 0, 0.0, 1.0, true};
    auto pred = encode_frame({e}, 1);
    for (int k = 0; k < 3; ++k) {
        for (int j = 0; j < 3; ++j) {
            pred.at(k, 0, j) = pred.at(0, 0, j);
        }
        pred.at(k, 0, 3) = 0.5;
    }
    const std::vector<AccddoaFrame> p{pred};
    EXPECT_NEAR(adpit_loss(p, FrameEvents{{e}}, 1.0).loss, std::log(2.0), 1e-15);
    EXPECT_NEAR(adpit_loss(p, FrameEvents{{e}}, 4.0).loss, 4.0 * std::log(2.0), 1e-15);
}

TEST(Adpit, Misaligned) {
    EXPECT_THROW(adpit_loss(std::vector<AccddoaFrame>(2, AccddoaFrame(13)), FrameEvents(3)), Error);
}
