#pragma once

// Random fixtures shared by the unit suites and the acceptance binary.

#include "seld/accddoa.hpp"
#include "seld/ensemble.hpp"
#include "seld/io.hpp"
#include "support.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace seld::test {

inline accddoa::AccddoaFrame random_pred(Rng& rng, int classes) {
    accddoa::AccddoaFrame f(classes);
    for (int k = 0; k < kMaxTracks; ++k) {
        for (int c = 0; c < classes; ++c) {
            f.at(k, c, 0) = uniform(rng, -1, 1);
            f.at(k, c, 1) = uniform(rng, -1, 1);
            f.at(k, c, 2) = uniform(rng, 0, 5);
            f.at(k, c, 3) = uniform(rng, 0.01, 0.99);
        }
    }
    return f;
}

inline accddoa::AccddoaFrame permute_tracks(const accddoa::AccddoaFrame& f, const std::array<int, 3>& perm) {
    accddoa::AccddoaFrame out(f.classes);
    for (int k = 0; k < kMaxTracks; ++k) {
        for (int c = 0; c < f.classes; ++c) {
            for (int j = 0; j < accddoa::kComponents; ++j) {
                out.at(k, c, j) = f.at(perm[static_cast<std::size_t>(k)], c, j);
            }
        }
    }
    return out;
}

/// Systems that each see a jittered, incomplete copy of one underlying
/// scene, plus occasional spurious detections.
inline std::vector<ensemble::SystemPredictions> random_systems(Rng& rng, std::size_t frames) {
    const auto truth = random_frames(rng, frames, 13, 3, 0.25);
    const int n = uniform_int(rng, 1, 4);
    std::vector<ensemble::SystemPredictions> out;
    for (int s = 0; s < n; ++s) {
        ensemble::SystemPredictions p{"sys" + std::to_string(s), FrameEvents(frames)};
        for (std::size_t t = 0; t < frames; ++t) {
            for (const auto& e : truth[t]) {
                if (!coin(rng, 0.7)) {
                    continue;
                }
                auto d = e;
                d.azimuth_deg = std::clamp(std::round((e.azimuth_deg + uniform(rng, -15, 15)) * 100) / 100, -90.0, 90.0);
                d.distance_m = std::round((e.distance_m + uniform(rng, 0, 1)) * 100) / 100;
                d.onscreen = coin(rng, 0.3);
                p.frames[t].push_back(d);
            }
            if (coin(rng, 0.3)) {
                auto extra = random_frame(rng, static_cast<int>(t), 13, 1, 0.1);
                for (auto& e : extra) {
                    e.source_id = 3;
                    p.frames[t].push_back(e);
                }
            }
            std::sort(p.frames[t].begin(), p.frames[t].end(), event_order);
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// Keypoint frames at irregular steps, each with up to three persons whose
/// keypoints are independently missing, anywhere in the image and of any
/// confidence.
inline std::vector<io::KeypointFrame> random_keypoints(Rng& rng, std::size_t frames) {
    std::vector<io::KeypointFrame> kp;
    for (int f = 0; f < static_cast<int>(frames); f += uniform_int(rng, 1, 8)) {
        io::KeypointFrame k{f, {}};
        for (int p = uniform_int(rng, 0, 3); p > 0; --p) {
            auto kpt = [&rng]() -> std::optional<io::Keypoint> {
                if (!coin(rng, 0.85)) {
                    return std::nullopt;
                }
                return io::Keypoint{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)};
            };
            k.persons.push_back({kpt(), kpt(), kpt(), kpt(), kpt()});
        }
        kp.push_back(k);
    }
    return kp;
}

}  // namespace seld::test
