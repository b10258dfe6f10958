#include "seld/keypost.hpp"

#include <cmath>
#include <numbers>

namespace seld::keypost {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

}  // namespace

double pixel_to_azimuth(double u, double fov_deg) {
    if (!(u >= 0.0 && u <= 1.0)) {
        throw Error("pixel_to_azimuth: u = " + std::to_string(u) + " outside [0, 1]");
    }
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
        throw Error("pixel_to_azimuth: field of view " + std::to_string(fov_deg) + " outside (0, 180)");
    }
    // The edges map to exactly half the field of view.
    if (u == 0.0 || u == 1.0) {
        return u == 0.0 ? fov_deg / 2.0 : -fov_deg / 2.0;
    }
    return std::atan((1.0 - 2.0 * u) * std::tan(fov_deg / 2.0 / kDegPerRad)) * kDegPerRad;
}

std::optional<double> keypoint_azimuth(const io::Person& person, accddoa::KeypointRule rule,
                                       const KeypostOptions& options) {
    auto confident = [&options](const std::optional<io::Keypoint>& k) {
        return k && k->confidence >= options.min_confidence;
    };
    auto pair = [&](const std::optional<io::Keypoint>& a,
                    const std::optional<io::Keypoint>& b) -> std::optional<double> {
        if (!confident(a) || !confident(b)) {
            return std::nullopt;
        }
        return 0.5 * (pixel_to_azimuth(a->u, options.fov_deg) + pixel_to_azimuth(b->u, options.fov_deg));
    };
    switch (rule) {
        case accddoa::KeypointRule::Nose:
            if (!confident(person.nose)) {
                return std::nullopt;
            }
            return pixel_to_azimuth(person.nose->u, options.fov_deg);
        case accddoa::KeypointRule::Wrists:
            return pair(person.wrist_left, person.wrist_right);
        case accddoa::KeypointRule::Ankles:
            return pair(person.ankle_left, person.ankle_right);
    }
    return std::nullopt;
}

FrameEvents apply_keypoint_override(const FrameEvents& preds, const std::vector<io::KeypointFrame>& keypoints,
                                    const accddoa::ClassMap& class_map, const KeypostOptions& options) {
    FrameEvents out = preds;
    if (keypoints.empty()) {
        return out;
    }
    for (auto& frame : out) {
        for (auto& e : frame) {
            if (e.onscreen) {
                continue;
            }
            const auto rule = class_map.keypoint_rules.find(e.class_index);
            if (rule == class_map.keypoint_rules.end()) {
                continue;
            }
            // Nearest keypoint frame, earlier one on ties.
            const io::KeypointFrame* nearest = nullptr;
            int best_gap = 0;
            for (const auto& kf : keypoints) {
                const int gap = std::abs(kf.frame - e.frame);
                if (nearest == nullptr || gap < best_gap || (gap == best_gap && kf.frame < nearest->frame)) {
                    nearest = &kf;
                    best_gap = gap;
                }
            }
            if (best_gap > options.max_frame_gap) {
                continue;
            }
            for (const auto& person : nearest->persons) {
                const auto az = keypoint_azimuth(person, rule->second, options);
                if (az && std::abs(*az - e.azimuth_deg) <= options.gate_deg) {
                    e.onscreen = true;
                    break;
                }
            }
        }
    }
    return out;
}

}  // namespace seld::keypost
