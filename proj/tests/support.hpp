#pragma once

// Generators and helpers shared by the unit tests and the acceptance runner.

#include "seld/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace seld::test {

namespace fs = std::filesystem;
using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

inline StereoClip random_clip(Rng& rng, std::size_t samples, double amplitude = 0.5) {
    StereoClip clip;
    std::normal_distribution<float> n(0.0f, static_cast<float>(amplitude) / 3.0f);
    clip.left.resize(samples);
    clip.right.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        clip.left[i] = std::clamp(n(rng), -1.0f, 1.0f);
        clip.right[i] = std::clamp(n(rng), -1.0f, 1.0f);
    }
    return clip;
}

/// Azimuth on a 0.01 degree grid, like the labels written by the generator.
inline double random_azimuth(Rng& rng) { return std::round(uniform(rng, -90.0, 90.0) * 100.0) / 100.0; }

/// One frame of valid events: each class independently gets 0..max_per_class
/// events with distinct source ids.
inline std::vector<EventRecord> random_frame(Rng& rng, int frame, int n_classes, int max_per_class,
                                             double density = 0.3) {
    std::vector<EventRecord> out;
    for (int c = 0; c < n_classes; ++c) {
        if (!coin(rng, density)) {
            continue;
        }
        const int k = uniform_int(rng, 1, max_per_class);
        for (int s = 0; s < k; ++s) {
            EventRecord e;
            e.frame = frame;
            e.class_index = c;
            e.source_id = s;
            e.azimuth_deg = random_azimuth(rng);
            e.distance_m = std::round(uniform(rng, 0.3, 6.0) * 100.0) / 100.0;
            e.onscreen = coin(rng, 0.3);
            out.push_back(e);
        }
    }
    return out;
}

inline FrameEvents random_frames(Rng& rng, std::size_t frames, int n_classes, int max_per_class,
                                 double density = 0.3) {
    FrameEvents out(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        out[t] = random_frame(rng, static_cast<int>(t), n_classes, max_per_class, density);
    }
    return out;
}

struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& tag = "seld") {
        static std::random_device rd;
        path = fs::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    fs::path operator/(const std::string& name) const { return path / name; }
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Relative path -> file bytes for every regular file below `root`.
inline std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            out[fs::relative(entry.path(), root).string()] = slurp(entry.path());
        }
    }
    return out;
}

struct CommandResult {
    int exit_code = -1;
    std::string out;
};

/// Runs a shell command, capturing stdout; stderr is discarded.
inline CommandResult run(const std::string& command) {
    CommandResult r;
    FILE* pipe = popen((command + " 2>/dev/null").c_str(), "r");
    if (!pipe) {
        return r;
    }
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof(buf), pipe)) > 0;) {
        r.out.append(buf, n);
    }
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

}  // namespace seld::test
