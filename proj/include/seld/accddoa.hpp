#pragma once

// Multi-ACCDDOA targets: for each of N = 3 tracks and C classes a vector
// (x, y, d, o) where (x, y) is activity times the unit DOA vector, d is
// activity times distance in meters and o the on-screen probability.
// Azimuth is measured positive to the left, x = cos(az), y = sin(az).

#include "seld/core.hpp"
#include "seld/io.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seld::accddoa {

enum class KeypointRule { Nose, Wrists, Ankles };

/// Ordered class list plus the class-specific rules used by ensembling,
/// keypoint post-processing and the scene generator.
struct ClassMap {
    std::vector<std::string> names;
    std::vector<int> single_system_classes;  // classes accepted from one system
    int bell_index = -1;
    int knock_index = -1;
    std::map<int, KeypointRule> keypoint_rules;
    std::vector<double> synth_weights;  // per class, relative sampling weight

    std::size_t size() const { return names.size(); }
    /// Case-insensitive lookup; throws for unknown names.
    int index_of(std::string_view name) const;
    bool is_single_system(int class_index) const;

    static ClassMap from_json(std::string_view text);
    static ClassMap load(const std::filesystem::path& path);
    /// The 13 stereo SELD classes shipped in config/classes.json.
    static ClassMap dcase2025();
};

/// JSON text of the built-in class map.
std::string_view default_class_map_json();

inline constexpr int kComponents = 4;
inline constexpr int kDefaultClasses = 13;
inline constexpr double kActivityThreshold = 0.5;
inline constexpr double kOnscreenThreshold = 0.5;
inline constexpr double kOnscreenWeight = 4.0;

struct AccddoaFrame {
    int classes = kDefaultClasses;
    std::vector<double> values;  // kMaxTracks x classes x 4, row-major

    AccddoaFrame() : AccddoaFrame(kDefaultClasses) {}
    explicit AccddoaFrame(int n_classes)
        : classes(n_classes), values(static_cast<std::size_t>(kMaxTracks * n_classes * kComponents), 0.0) {}

    std::size_t index(int track, int cls, int comp) const {
        return (static_cast<std::size_t>(track) * classes + cls) * kComponents + comp;
    }
    double& at(int track, int cls, int comp) { return values[index(track, cls, comp)]; }
    double at(int track, int cls, int comp) const { return values[index(track, cls, comp)]; }

    friend bool operator==(const AccddoaFrame&, const AccddoaFrame&) = default;
};

/// Same-class events occupy tracks in source_id order. Throws for more than
/// three simultaneous same-class events or invalid records.
AccddoaFrame encode_frame(const std::vector<EventRecord>& events, int n_classes);

/// Slots with |(x, y)| > act_threshold become events (source_id = track).
std::vector<EventRecord> decode_frame(const AccddoaFrame& pred, int frame = 0,
                                      double act_threshold = kActivityThreshold,
                                      double on_threshold = kOnscreenThreshold);

std::vector<AccddoaFrame> encode_sequence(const FrameEvents& frames, int n_classes);
FrameEvents decode_sequence(std::span<const AccddoaFrame> frames, double act_threshold = kActivityThreshold,
                            double on_threshold = kOnscreenThreshold);

/// SSLD layout N x C x 4 x T.
io::NdArray to_tensor(std::span<const AccddoaFrame> frames);
std::vector<AccddoaFrame> from_tensor(const io::NdArray& tensor);

/// On-screen BCE multiplier: 4.0 for on-screen references when the
/// weighted variant is enabled, 1.0 otherwise.
double weighted_onscreen_loss_factor(bool onscreen_ref, bool weighted = true);

struct AdpitResult {
    double loss = 0.0;
    std::vector<AccddoaFrame> grad;  // d loss / d pred, same layout as pred
};

/// Class-wise auxiliary duplicating PIT loss. For each frame and class the
/// three tracks are assigned surjectively onto the active references (or an
/// all-zero target when none is active); the cost of an assignment is the
/// mean over tracks of MSE(x, y, d) + w * BCE(o). The class-frame loss is
/// the minimum over assignments and the total is the mean over classes and
/// frames. Gradients flow through the first minimizing assignment only.
AdpitResult adpit_loss(std::span<const AccddoaFrame> pred, const FrameEvents& refs,
                       double onscreen_weight = 1.0);

/// Cost of one track prediction against one target slot (ax, ay, ad, o).
double track_cost(std::span<const double, 4> pred, std::span<const double, 4> target, double onscreen_weight);

/// Surjective maps from the three tracks onto `active` events
/// (1 map for one event, 6 for two or three).
const std::vector<std::array<int, kMaxTracks>>& surjective_assignments(int active);

}  // namespace seld::accddoa
