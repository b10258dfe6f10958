#pragma once

// Audio channel swap (ACS): exchanging left and right mirrors every source
// about the median plane, so azimuths flip sign.

#include "seld/core.hpp"
#include "seld/io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace seld::augment {

StereoClip swap_channels(const StereoClip& clip);

/// az -> -az; zero stays +0 so written labels never read "-0".
EventRecord swap_event(const EventRecord& event);
std::vector<EventRecord> swap_labels(const std::vector<EventRecord>& events);
FrameEvents swap_labels(const FrameEvents& frames);

/// u -> 1 - u for every keypoint.
std::vector<io::KeypointFrame> mirror_keypoints(const std::vector<io::KeypointFrame>& frames);

struct TrainingItem {
    std::string id;
    StereoClip clip;
    std::vector<EventRecord> labels;
    std::optional<std::vector<io::KeypointFrame>> keypoints;
};

inline constexpr const char* kSwapSuffix = "_acs";

/// Originals followed by their swapped copies (ids suffixed with "_acs").
/// Throws if the input ids are not distinct.
std::vector<TrainingItem> augment_dataset(const std::vector<TrainingItem>& items);

}  // namespace seld::augment
