#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace seld {

/// Raised for every structured failure inside the library: malformed input
/// files, violated preconditions, shape mismatches.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kSampleRate = 24000;
inline constexpr int kLabelFramesPerSecond = 10;
inline constexpr int kSamplesPerLabelFrame = kSampleRate / kLabelFramesPerSecond;
inline constexpr int kMaxTracks = 3;
inline constexpr double kMinAzimuthDeg = -90.0;
inline constexpr double kMaxAzimuthDeg = 90.0;

struct StereoClip {
    std::vector<float> left;
    std::vector<float> right;
    int sample_rate_hz = kSampleRate;
    std::string clip_id;

    std::size_t size() const { return left.size(); }
    double duration_s() const {
        return static_cast<double>(left.size()) / static_cast<double>(sample_rate_hz);
    }
};

/// Throws unless both channels have equal length, the rate is 24 kHz and
/// every sample is finite.
void validate_clip(const StereoClip& clip);

/// One active source in one 100 ms label frame.
struct EventRecord {
    int frame = 0;
    int class_index = 0;
    int source_id = 0;
    double azimuth_deg = 0.0;
    double distance_m = 1.0;
    bool onscreen = false;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Throws if the record violates the label invariants (azimuth range,
/// positive distance, non-negative indices).
void validate_event(const EventRecord& event);

/// Sort key used everywhere labels are stored: (frame, class, source).
bool event_order(const EventRecord& a, const EventRecord& b);

using FrameEvents = std::vector<std::vector<EventRecord>>;

/// Groups a flat record list by frame index. The result has
/// max(min_frames, last_frame + 1) entries.
FrameEvents group_by_frame(const std::vector<EventRecord>& events, std::size_t min_frames = 0);

std::vector<EventRecord> flatten(const FrameEvents& frames);

/// Independent child seed for stream `stream` of a run seeded with `seed`
/// (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace seld
