#include "seld/core.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace seld {

void validate_clip(const StereoClip& clip) {
    if (clip.left.size() != clip.right.size()) {
        throw Error("channel length mismatch: left " + std::to_string(clip.left.size()) +
                    " vs right " + std::to_string(clip.right.size()));
    }
    if (clip.sample_rate_hz != kSampleRate) {
        throw Error("sample rate " + std::to_string(clip.sample_rate_hz) + " Hz, expected " +
                    std::to_string(kSampleRate));
    }
    auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(clip.left.begin(), clip.left.end(), finite) ||
        !std::all_of(clip.right.begin(), clip.right.end(), finite)) {
        throw Error("non-finite sample");
    }
}

void validate_event(const EventRecord& event) {
    if (event.frame < 0) {
        throw Error("negative frame index " + std::to_string(event.frame));
    }
    if (event.class_index < 0) {
        throw Error("negative class index " + std::to_string(event.class_index));
    }
    if (event.source_id < 0) {
        throw Error("negative source id " + std::to_string(event.source_id));
    }
    if (!(event.azimuth_deg >= kMinAzimuthDeg && event.azimuth_deg <= kMaxAzimuthDeg)) {
        throw Error("azimuth " + std::to_string(event.azimuth_deg) + " outside [-90, 90]");
    }
    if (!(event.distance_m > 0.0) || !std::isfinite(event.distance_m)) {
        throw Error("distance " + std::to_string(event.distance_m) + " must be positive");
    }
}

bool event_order(const EventRecord& a, const EventRecord& b) {
    return std::tie(a.frame, a.class_index, a.source_id) <
           std::tie(b.frame, b.class_index, b.source_id);
}

FrameEvents group_by_frame(const std::vector<EventRecord>& events, std::size_t min_frames) {
    std::size_t n = min_frames;
    for (const auto& e : events) {
        n = std::max(n, static_cast<std::size_t>(e.frame) + 1);
    }
    FrameEvents frames(n);
    for (const auto& e : events) {
        frames[static_cast<std::size_t>(e.frame)].push_back(e);
    }
    return frames;
}

std::vector<EventRecord> flatten(const FrameEvents& frames) {
    std::vector<EventRecord> out;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        for (auto e : frames[t]) {
            e.frame = static_cast<int>(t);
            out.push_back(e);
        }
    }
    std::stable_sort(out.begin(), out.end(), event_order);
    return out;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix(seed ^ splitmix(stream)); }

}  // namespace seld
