#include "seld/accddoa.hpp"
#include "seld/features.hpp"
#include "seld/metrics.hpp"
#include "seld/scenesynth.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <numbers>

using namespace seld;
using namespace seld::scenesynth;
using namespace seld::test;

namespace {

const accddoa::ClassMap& classes() {
    static const auto m = accddoa::ClassMap::dcase2025();
    return m;
}

SceneSpec short_spec(std::uint64_t seed, double duration = 10.0) {
    SceneSpec s;
    s.seed = seed;
    s.duration_s = duration;
    s.mean_events = 6.0;
    s.std_events = 2.0;
    return s;
}

SynthEvent fixed_event(int cls, double onset, double dur, double az, double dist = 1.0) {
    SynthEvent e;
    e.class_index = cls;
    e.onset_s = onset;
    e.duration_s = dur;
    e.az_start_deg = e.az_end_deg = az;
    e.dist_start_m = e.dist_end_m = dist;
    e.recipe_seed = 99;
    return e;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(PanGains, ConstantPowerLaw) {
    for (double az = -90.0; az <= 90.0; az += 7.5) {
        const auto [l, r] = pan_gains(az);
        EXPECT_NEAR(l * l + r * r, 1.0, 1e-15);
        EXPECT_NEAR(l, std::cos((90.0 - az) / 2.0 * std::numbers::pi / 180.0), 1e-15);
        EXPECT_GE(l, 0.0);
        EXPECT_GE(r, 0.0);
    }
    EXPECT_NEAR(pan_gains(90.0).second, 0.0, 1e-15);
    EXPECT_NEAR(pan_gains(-90.0).first, 0.0, 1e-15);
    EXPECT_NEAR(pan_gains(0.0).first, pan_gains(0.0).second, 1e-15);
}

TEST(EventFrames, IndexArithmetic) {
    EXPECT_EQ(event_frames(7.2, 0.6), std::make_pair(72, 78));
    EXPECT_EQ(event_frames(0.0, 1.0), std::make_pair(0, 10));
    EXPECT_EQ(event_frames(0.05, 0.1), std::make_pair(1, 1));
}

TEST(GenerateScene, Deterministic) {
    const auto a = generate_scene(short_spec(5), classes());
    const auto b = generate_scene(short_spec(5), classes());
    EXPECT_TRUE(same_bits(a.clip.left, b.clip.left));
    EXPECT_TRUE(same_bits(a.clip.right, b.clip.right));
    EXPECT_EQ(a.labels, b.labels);
    const auto c = generate_scene(short_spec(6), classes());
    EXPECT_FALSE(same_bits(a.clip.left, c.clip.left));
}

TEST(GenerateScene, SixtySecondsGivesSixHundredFrames) {
    SceneSpec s;
    s.seed = 1;
    const auto scene = generate_scene(s, classes());
    EXPECT_EQ(scene.clip.size(), 60u * 24000u);
    EXPECT_EQ(group_by_frame(scene.labels, 600).size(), 600u);
    for (const auto& e : scene.labels) {
        EXPECT_LT(e.frame, 600);
    }
}

TEST(GenerateScene, LabelsValid) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto scene = generate_scene(short_spec(seed), classes());
        validate_clip(scene.clip);
        const auto frames = group_by_frame(scene.labels, 100);
        for (const auto& e : scene.labels) {
            EXPECT_NO_THROW(validate_event(e));
            EXPECT_GE(e.azimuth_deg, -90.0);
            EXPECT_LE(e.azimuth_deg, 90.0);
            EXPECT_GT(e.distance_m, 0.0);
        }
        EXPECT_TRUE(std::is_sorted(scene.labels.begin(), scene.labels.end(), event_order));
        // Encodable: at most three same-class sources per frame.
        for (const auto& f : frames) {
            EXPECT_NO_THROW(accddoa::encode_frame(f, 13));
        }
        EXPECT_EQ(accddoa::decode_sequence(accddoa::encode_sequence(frames, 13)).size(), frames.size());
    }
}

TEST(GenerateScene, SelfScoreAndFeatures) {
    const auto scene = generate_scene(short_spec(3, 5.0), classes());
    const auto frames = group_by_frame(scene.labels, 50);
    const auto r = metrics::score(frames, frames, 13);
    EXPECT_EQ(r.f1_le20_1, 1.0);
    const auto f = features::extract_features(scene.clip);
    EXPECT_EQ(f.data.dims, (std::vector<std::uint32_t>{4, 800, 64}));
}

TEST(GenerateScene, RightSourceIsLouderOnTheRight) {
    auto spec = short_spec(1, 4.0);
    spec.noise_floor_db_mean = -80.0;
    const auto scene = render_scene(spec, {fixed_event(classes().index_of("telephone"), 1.0, 2.0, -45.0)}, -80.0);
    double pl = 0.0, pr = 0.0;
    for (std::size_t i = 24000; i < 72000; ++i) {
        pl += double{scene.clip.left[i]} * scene.clip.left[i];
        pr += double{scene.clip.right[i]} * scene.clip.right[i];
    }
    EXPECT_GT(pr, pl);
    const double expected = std::pow(std::tan(67.5 * std::numbers::pi / 180.0), 2);
    EXPECT_NEAR(pr / pl, expected, 0.01 * expected);

    const auto feats = features::extract_features(scene.clip).data;
    const std::size_t t_count = feats.dims[1], bins = feats.dims[2];
    double ild = 0.0;
    std::size_t n = 0;
    // Feature frames 160..480 span 1 s to 3 s.
    for (std::size_t t = 170; t < 470; ++t) {
        for (std::size_t b = 0; b < bins; ++b) {
            ild += feats.data[(2 * t_count + t) * bins + b];
            ++n;
        }
    }
    EXPECT_LT(ild / static_cast<double>(n), 0.0);
}

TEST(GenerateScene, LabelsFollowEvents) {
    const auto scene = render_scene(short_spec(1, 10.0), {fixed_event(11, 7.2, 0.6, 30.0, 2.0)}, -70.0);
    ASSERT_EQ(scene.labels.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_EQ(scene.labels[i].frame, 72 + static_cast<int>(i));
        EXPECT_EQ(scene.labels[i].azimuth_deg, 30.0);
        EXPECT_EQ(scene.labels[i].distance_m, 2.0);
        EXPECT_EQ(scene.labels[i].class_index, 11);
    }
}

TEST(GenerateScene, MovingSourceInterpolates) {
    auto e = fixed_event(0, 1.0, 2.0, -20.0, 1.0);
    e.az_end_deg = 20.0;
    e.dist_end_m = 3.0;
    EXPECT_DOUBLE_EQ(e.azimuth_at(2.0), 0.0);
    EXPECT_DOUBLE_EQ(e.distance_at(2.0), 2.0);
    EXPECT_DOUBLE_EQ(e.azimuth_at(0.0), -20.0);
    EXPECT_DOUBLE_EQ(e.azimuth_at(5.0), 20.0);
}

TEST(GenerateScene, NoiseLevelMatchesSpec) {
    // Scene seeds as the synth command derives them from a run seed.
    double sum_db = 0.0;
    for (std::uint64_t i = 0; i < 200; ++i) {
        SceneSpec s;
        s.seed = derive_seed(7, i);
        s.duration_s = 0.5;
        s.mean_events = 0.0;
        s.std_events = 0.0;
        const auto scene = generate_scene(s, classes());
        ASSERT_TRUE(scene.labels.empty());
        double power = 0.0;
        for (std::size_t k = 0; k < scene.clip.size(); ++k) {
            power += double{scene.clip.left[k]} * scene.clip.left[k] + double{scene.clip.right[k]} * scene.clip.right[k];
        }
        const double db = 10.0 * std::log10(power / (2.0 * static_cast<double>(scene.clip.size())));
        EXPECT_NEAR(db, scene.noise_db, 0.5) << i;
        sum_db += db;
    }
    EXPECT_NEAR(sum_db / 200.0, -65.0, 2.0);
}

TEST(GenerateScene, NoiseLevelDistribution) {
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        SceneSpec s;
        s.seed = static_cast<std::uint64_t>(i);
        s.duration_s = 0.01;
        s.mean_events = 0.0;
        s.std_events = 0.0;
        const double db = generate_scene(s, classes()).noise_db;
        sum += db;
        sq += db * db;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, -65.0, 0.5);
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 15.0, 0.5);
}

TEST(GenerateScene, ClassWeightsSteerSampling) {
    auto s = short_spec(2, 20.0);
    s.mean_events = 20.0;
    s.class_weights.assign(13, 0.0);
    s.class_weights[4] = 1.0;
    for (const auto& e : generate_scene(s, classes()).labels) {
        EXPECT_EQ(e.class_index, 4);
    }
}

TEST(GenerateScene, RenderSourcePeak) {
    for (int c = 0; c < 13; ++c) {
        const auto x = render_source(fixed_event(c, 0.0, 1.0, 0.0), 24000);
        float peak = 0.0f;
        for (float v : x) {
            peak = std::max(peak, std::abs(v));
        }
        EXPECT_GT(peak, 0.3f) << c;
        EXPECT_LE(peak, 0.5f + 1e-6f) << c;
    }
}

TEST(SceneSpec, Validation) {
    SceneSpec s;
    EXPECT_NO_THROW(s.validate(13));
    s.duration_s = 0.0;
    EXPECT_THROW(s.validate(13), Error);
    s = SceneSpec{};
    s.class_weights.assign(13, 0.0);
    EXPECT_THROW(s.validate(13), Error);
    s.class_weights[0] = -1.0;
    EXPECT_THROW(s.validate(13), Error);
    s = SceneSpec{};
    s.std_events = -1.0;
    EXPECT_THROW(s.validate(13), Error);
    s = SceneSpec{};
    s.segment_hop_s = 0.0;
    EXPECT_THROW(s.validate(13), Error);
}

TEST(SegmentScene, TwelveSegmentsOfFiveSeconds) {
    SceneSpec s;
    s.seed = 4;
    s.mean_events = 40.0;
    s.std_events = 0.0;
    const auto scene = generate_scene(s, classes());
    const auto segs = segment_scene(scene.clip, scene.labels, s);
    EXPECT_LE(segs.size(), 12u);
    EXPECT_GT(segs.size(), 0u);
    std::size_t labels = 0;
    for (const auto& seg : segs) {
        EXPECT_EQ(seg.clip.size(), 120000u);
        EXPECT_FALSE(seg.labels.empty());
        for (const auto& e : seg.labels) {
            EXPECT_GE(e.frame, 0);
            EXPECT_LT(e.frame, 50);
        }
        labels += seg.labels.size();
        EXPECT_NO_THROW(features::extract_features(seg.clip));
    }
    EXPECT_EQ(labels, scene.labels.size());
}

TEST(SegmentScene, SilentSceneHasNoSegments) {
    SceneSpec s;
    s.mean_events = 0.0;
    s.std_events = 0.0;
    const auto scene = generate_scene(s, classes());
    EXPECT_TRUE(segment_scene(scene.clip, scene.labels, s).empty());
}

TEST(SegmentScene, EventLandsInItsWindow) {
    SceneSpec s;
    s.duration_s = 20.0;
    const auto scene = render_scene(s, {fixed_event(2, 7.2, 0.6, 10.0)}, -70.0);
    const auto segs = segment_scene(scene.clip, scene.labels, s);
    ASSERT_EQ(segs.size(), 1u);
    ASSERT_EQ(segs[0].labels.size(), 7u);
    EXPECT_EQ(segs[0].labels.front().frame, 22);
    EXPECT_EQ(segs[0].labels.back().frame, 28);
    EXPECT_EQ(segs[0].clip.clip_id, "scene_01");
    EXPECT_TRUE(same_bits(segs[0].clip.left, std::vector<float>(scene.clip.left.begin() + 120000,
                                                                scene.clip.left.begin() + 240000)));
}

TEST(SegmentScene, OverlappingHop) {
    SceneSpec s;
    s.duration_s = 10.0;
    s.segment_hop_s = 2.5;
    const auto scene = render_scene(s, {fixed_event(2, 4.0, 2.0, 10.0)}, -70.0);
    const auto segs = segment_scene(scene.clip, scene.labels, s);
    ASSERT_EQ(segs.size(), 3u);
    EXPECT_EQ(segs[1].labels.front().frame, 15);
}
