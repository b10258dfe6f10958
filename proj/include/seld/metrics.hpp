#pragma once

// Frame-level SELD scoring at the 100 ms label rate: location- and
// distance-gated F1 (azimuth error <= 20 deg, relative distance error <= 1),
// its on-screen variant, DOA error, relative distance error and on/off
// accuracy over matched prediction-reference pairs.

#include "seld/core.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace seld::metrics {

inline constexpr double kDoaThresholdDeg = 20.0;
inline constexpr double kRelDistThreshold = 1.0;

/// Minimum-cost assignment for a rectangular cost matrix (rows x cols,
/// row-major). Returns for each row the assigned column or -1. Ties are
/// resolved deterministically by index.
std::vector<int> hungarian(const std::vector<double>& cost, std::size_t rows, std::size_t cols);

struct Match {
    std::size_t pred = 0;
    std::size_t ref = 0;
};

/// Optimal pairing of same-class events on absolute azimuth difference.
std::vector<Match> match_frame(const std::vector<EventRecord>& preds, const std::vector<EventRecord>& refs);

struct ClassCounts {
    long tp = 0, fp = 0, fn = 0;
    long tp_on = 0, fp_on = 0, fn_on = 0;
    long matched = 0;
    double doa_error_sum = 0.0;
    double rel_dist_error_sum = 0.0;
    long onoff_correct = 0;
    long refs = 0, preds = 0;

    double f1() const;
    double f1_on() const;
};

struct MetricsReport {
    double f1_le20_1 = 0.0;
    double f1_le20_1_on = 0.0;
    /// Absent when no prediction was matched to a reference.
    std::optional<double> doae_deg;
    std::optional<double> rde;
    std::optional<double> onoff_acc;
    std::size_t matched_pairs = 0;
    std::size_t scored_classes = 0;
    std::vector<ClassCounts> per_class;

    /// Versioned JSON with every field; absent statistics are null.
    std::string to_json(const std::vector<std::string>& class_names = {}) const;
};

/// Accumulates counts for one clip into `per_class`.
void accumulate(const FrameEvents& preds, const FrameEvents& refs, std::vector<ClassCounts>& per_class);

/// Macro F1 over classes with at least one reference or prediction. When
/// no class has any event both F1 values are 1.
MetricsReport summarize(const std::vector<ClassCounts>& per_class);

/// Frame counts must agree.
MetricsReport score(const FrameEvents& preds, const FrameEvents& refs, std::size_t n_classes);

/// Label CSV, or an SSLD multi-ACCDDOA tensor (N x C x 4 x T) decoded with
/// the default thresholds.
std::vector<EventRecord> read_events(const std::filesystem::path& path);

/// File against file, or directory against directory matching clips (label
/// CSVs or ACCDDOA tensors) by file stem. A prediction clip without a reference is an error; reference
/// clips without predictions count as empty predictions.
MetricsReport score_files(const std::filesystem::path& pred, const std::filesystem::path& ref,
                          std::size_t n_classes);

}  // namespace seld::metrics
