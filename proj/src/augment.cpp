#include "seld/augment.hpp"

#include <set>

namespace seld::augment {

StereoClip swap_channels(const StereoClip& clip) {
    StereoClip out = clip;
    std::swap(out.left, out.right);
    return out;
}

EventRecord swap_event(const EventRecord& event) {
    EventRecord out = event;
    out.azimuth_deg = event.azimuth_deg == 0.0 ? 0.0 : -event.azimuth_deg;
    return out;
}

std::vector<EventRecord> swap_labels(const std::vector<EventRecord>& events) {
    std::vector<EventRecord> out;
    out.reserve(events.size());
    for (const auto& e : events) {
        out.push_back(swap_event(e));
    }
    return out;
}

FrameEvents swap_labels(const FrameEvents& frames) {
    FrameEvents out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        out.push_back(swap_labels(f));
    }
    return out;
}

std::vector<io::KeypointFrame> mirror_keypoints(const std::vector<io::KeypointFrame>& frames) {
    auto out = frames;
    auto flip = [](std::optional<io::Keypoint>& k) {
        if (k) {
            k->u = 1.0 - k->u;
        }
    };
    for (auto& f : out) {
        for (auto& p : f.persons) {
            // A mirrored image also exchanges the person's left and right limbs.
            std::swap(p.wrist_left, p.wrist_right);
            std::swap(p.ankle_left, p.ankle_right);
            flip(p.nose);
            flip(p.wrist_left);
            flip(p.wrist_right);
            flip(p.ankle_left);
            flip(p.ankle_right);
        }
    }
    return out;
}

std::vector<TrainingItem> augment_dataset(const std::vector<TrainingItem>& items) {
    std::set<std::string> ids;
    for (const auto& item : items) {
        if (!ids.insert(item.id).second) {
            throw Error("augment: duplicate item id '" + item.id + "'");
        }
    }
    std::vector<TrainingItem> out = items;
    for (const auto& item : items) {
        TrainingItem swapped;
        swapped.id = item.id + kSwapSuffix;
        swapped.clip = swap_channels(item.clip);
        if (!swapped.clip.clip_id.empty()) {
            swapped.clip.clip_id += kSwapSuffix;
        }
        swapped.labels = swap_labels(item.labels);
        if (item.keypoints) {
            swapped.keypoints = mirror_keypoints(*item.keypoints);
        }
        if (!ids.insert(swapped.id).second) {
            throw Error("augment: swapped id '" + swapped.id + "' collides with an existing item");
        }
        out.push_back(std::move(swapped));
    }
    return out;
}

}  // namespace seld::augment
