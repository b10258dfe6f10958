#pragma once

// File formats: stereo WAV, label CSV, "SSLD" binary tensors, keypoint
// JSON and embedding fixtures.

#include "seld/core.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seld::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- audio

/// Reads a 2-channel 24 kHz RIFF/WAVE file (PCM16, PCM24 or float32,
/// plain or WAVE_FORMAT_EXTENSIBLE). Channel 0 is left.
StereoClip read_wav(const fs::path& path);
StereoClip parse_wav(std::string_view bytes, std::string clip_id = {});

/// Writes float32 WAV. Refuses non-finite samples.
void write_wav(const StereoClip& clip, const fs::path& path);
std::string encode_wav(const StereoClip& clip);

// --------------------------------------------------------------- labels

/// CSV rows `frame,class,source,azimuth,distance,onscreen`, no header.
/// Result is sorted by (frame, class, source).
std::vector<EventRecord> read_labels(const fs::path& path);
std::vector<EventRecord> parse_labels(std::string_view text);

void write_labels(const std::vector<EventRecord>& events, const fs::path& path);
std::string format_labels(const std::vector<EventRecord>& events);

// -------------------------------------------------------------- tensors

struct NdArray {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    NdArray() = default;
    explicit NdArray(std::vector<std::uint32_t> d);

    std::size_t numel() const;
    float& at(std::initializer_list<std::size_t> index);
    float at(std::initializer_list<std::size_t> index) const;

    friend bool operator==(const NdArray&, const NdArray&) = default;
};

inline constexpr std::array<char, 4> kTensorMagic = {'S', 'S', 'L', 'D'};
inline constexpr std::uint16_t kTensorVersion = 1;

/// Layout: magic "SSLD", u16 version, u8 ndim, ndim x u32 dims, f32 payload;
/// all little-endian, payload row-major.
std::string encode_tensor(const NdArray& tensor);
NdArray decode_tensor(std::string_view bytes);
void write_tensor(const NdArray& tensor, const fs::path& path);
NdArray read_tensor(const fs::path& path);

// ------------------------------------------------------------ keypoints

struct Keypoint {
    double u = 0.0;
    double v = 0.0;
    double confidence = 0.0;

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct Person {
    std::optional<Keypoint> nose;
    std::optional<Keypoint> wrist_left;
    std::optional<Keypoint> wrist_right;
    std::optional<Keypoint> ankle_left;
    std::optional<Keypoint> ankle_right;

    friend bool operator==(const Person&, const Person&) = default;
};

/// Keypoints for one label frame; coordinates are normalized to the unit
/// square with u = 0 at the left image edge.
struct KeypointFrame {
    int frame = 0;
    std::vector<Person> persons;

    friend bool operator==(const KeypointFrame&, const KeypointFrame&) = default;
};

/// Accepts either a JSON array of frame objects or JSON lines (one object
/// per line). Frame object: {"frame": 12, "persons": [{"nose": {"u":..,
/// "v":.., "conf":..}, "wrist_left": ..., ...}]}.
std::vector<KeypointFrame> read_keypoints(const fs::path& path);
std::vector<KeypointFrame> parse_keypoints(std::string_view text);
void write_keypoints(const std::vector<KeypointFrame>& frames, const fs::path& path);
std::string format_keypoints(const std::vector<KeypointFrame>& frames);

// ------------------------------------------------------------- fixtures

enum class Modality { ClapAudio, OwlVitVisual };

inline constexpr std::size_t kClapTokens = 1;
inline constexpr std::size_t kClapDim = 512;
inline constexpr std::size_t kOwlVitTokens = 577;  // 24 x 24 patches + class token
inline constexpr std::size_t kOwlVitDim = 768;

/// Stand-in for a frozen pretrained encoder's output: tokens x dim, row-major.
struct EmbeddingFixture {
    Modality modality = Modality::ClapAudio;
    std::size_t tokens = 0;
    std::size_t dim = 0;
    std::vector<float> values;
};

std::size_t expected_tokens(Modality m);
void validate_fixture(const EmbeddingFixture& fixture);

/// Deterministic pseudo-random fixture with unit-variance entries.
EmbeddingFixture make_fixture(Modality m, std::uint64_t seed, std::size_t dim = 0);

EmbeddingFixture read_fixture(const fs::path& path, Modality m);
void write_fixture(const EmbeddingFixture& fixture, const fs::path& path);

// ---------------------------------------------------------------- files

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

}  // namespace seld::io
