#pragma once

// On-screen override from human pose keypoints: a prediction of a class
// tied to a body part becomes on-screen when that body part of some visible
// person lies within a gate of the predicted azimuth.

#include "seld/accddoa.hpp"
#include "seld/io.hpp"

#include <optional>
#include <vector>

namespace seld::keypost {

/// Pinhole camera with horizontal field of view `fov_deg`; u = 0 is the
/// left image edge and positive azimuth points left.
double pixel_to_azimuth(double u, double fov_deg = 100.0);

struct KeypostOptions {
    double fov_deg = 100.0;
    double gate_deg = 20.0;
    double min_confidence = 0.5;
    /// Prediction frames further than this from every keypoint frame pass through.
    int max_frame_gap = 5;
};

/// Azimuth of the keypoint a rule selects for one person, if detected
/// confidently (both limbs for the wrist and ankle rules).
std::optional<double> keypoint_azimuth(const io::Person& person, accddoa::KeypointRule rule,
                                       const KeypostOptions& options = {});

/// Only ever sets onscreen from false to true; everything else is copied.
FrameEvents apply_keypoint_override(const FrameEvents& preds, const std::vector<io::KeypointFrame>& keypoints,
                                    const accddoa::ClassMap& class_map, const KeypostOptions& options = {});

}  // namespace seld::keypost
