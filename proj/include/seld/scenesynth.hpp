#pragma once

// Deterministic synthetic stereo scenes: parametric class sounds panned
// with a constant-power law, attenuated by 1/distance and mixed over a
// Gaussian noise floor. Not acoustically faithful; intended for pipeline
// tests and toy training data.

#include "seld/accddoa.hpp"
#include "seld/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace seld::scenesynth {

struct SceneSpec {
    std::uint64_t seed = 0;
    double duration_s = 60.0;
    double mean_events = 18.0;
    double std_events = 6.0;
    double noise_floor_db_mean = -65.0;
    double noise_floor_db_std = 15.0;
    std::vector<double> class_weights;  // empty: the class map's synth weights
    double segment_len_s = 5.0;
    double segment_hop_s = 5.0;
    double onscreen_prob = 0.2;
    double moving_prob = 0.3;
    double min_event_s = 0.5;
    double max_event_s = 4.0;
    double min_distance_m = 0.5;
    double max_distance_m = 5.0;
    std::string clip_id = "scene";

    /// Throws on invalid settings.
    void validate(std::size_t n_classes) const;
};

struct SynthEvent {
    int class_index = 0;
    int source_id = 0;
    double onset_s = 0.0;
    double duration_s = 0.0;
    double az_start_deg = 0.0;
    double az_end_deg = 0.0;
    double dist_start_m = 1.0;
    double dist_end_m = 1.0;
    bool onscreen = false;
    std::uint64_t recipe_seed = 0;

    double azimuth_at(double t) const;
    double distance_at(double t) const;
};

struct Scene {
    StereoClip clip;
    std::vector<EventRecord> labels;
    std::vector<SynthEvent> events;
    double noise_db = 0.0;
};

/// Mono source signal for one event, `samples` long, peak about 0.5.
std::vector<float> render_source(const SynthEvent& event, std::size_t samples);

/// Constant-power gains (left, right) for an azimuth in degrees.
std::pair<double, double> pan_gains(double azimuth_deg);

/// Label frames [first, last] covered by an event (10 frames per second).
std::pair<int, int> event_frames(double onset_s, double duration_s);

Scene generate_scene(const SceneSpec& spec, const accddoa::ClassMap& class_map);

/// Renders a fixed event list over the spec's noise floor.
Scene render_scene(const SceneSpec& spec, std::vector<SynthEvent> events, double noise_db);

struct Segment {
    StereoClip clip;
    std::vector<EventRecord> labels;  // frames relative to the segment start
};

/// Cuts consecutive windows of segment_len_s every segment_hop_s seconds,
/// drops windows without labels and rebases label frames.
std::vector<Segment> segment_scene(const StereoClip& clip, const std::vector<EventRecord>& labels,
                                   const SceneSpec& spec);

}  // namespace seld::scenesynth
