#pragma once

// Agreement-based fusion of several systems' per-frame detections.

#include "seld/accddoa.hpp"
#include "seld/core.hpp"

#include <string>
#include <vector>

namespace seld::ensemble {

struct SystemPredictions {
    std::string system_id;
    FrameEvents frames;
};

struct EnsembleOptions {
    /// Two detections from different systems agree when their azimuths are
    /// at most this far apart.
    double doa_gate_deg = 20.0;
    /// Maximum azimuth span of one association cluster. Kept separate from
    /// the gate so that widening the gate only ever admits more clusters.
    double assoc_deg = 20.0;
    std::size_t max_events = kMaxTracks;
};

/// Largest group of mutually close same-class detections handled in one
/// exhaustive partition search.
inline constexpr std::size_t kMaxGroupSize = 16;

/// Per frame and class, detections are partitioned into clusters holding at
/// most one detection per system and spanning at most assoc_deg. Among all
/// such partitions the one with the fewest clusters wins, then the smallest
/// azimuth scatter, then the smallest distance scatter. A cluster is emitted
/// when two of its members agree within doa_gate_deg, or for any cluster of
/// a single-system class. Emitted azimuth and distance are member means,
/// on-screen is the OR of members; at most max_events clusters per class
/// survive (largest first, then tightest).
FrameEvents ensemble(const std::vector<SystemPredictions>& systems, const accddoa::ClassMap& class_map,
                     const EnsembleOptions& options = {});

}  // namespace seld::ensemble
