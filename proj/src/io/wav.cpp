#include "seld/io.hpp"

#include "binary.hpp"

#include <cmath>

namespace seld::io {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct WavFormat {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits = 0;
};

WavFormat parse_fmt(std::string_view chunk) {
    detail::ByteReader r(chunk);
    WavFormat f;
    f.format = r.read<std::uint16_t>("fmt chunk");
    f.channels = r.read<std::uint16_t>("fmt chunk");
    f.sample_rate = r.read<std::uint32_t>("fmt chunk");
    r.skip(4, "fmt chunk");  // byte rate
    f.block_align = r.read<std::uint16_t>("fmt chunk");
    f.bits = r.read<std::uint16_t>("fmt chunk");
    if (f.format == kFormatExtensible) {
        auto cb_size = r.read<std::uint16_t>("fmt extension");
        if (cb_size < 22) {
            throw Error("malformed header: WAVE_FORMAT_EXTENSIBLE extension too short");
        }
        r.skip(2 + 4, "fmt extension");  // valid bits, channel mask
        // The first two bytes of the sub-format GUID carry the format tag.
        f.format = r.read<std::uint16_t>("fmt extension");
    }
    return f;
}

}  // namespace

StereoClip parse_wav(std::string_view bytes, std::string clip_id) {
    detail::ByteReader r(bytes);
    if (bytes.size() < 12 || r.take(4, "RIFF tag") != "RIFF") {
        throw Error("malformed header: missing RIFF tag");
    }
    r.skip(4, "RIFF size");
    if (r.take(4, "WAVE tag") != "WAVE") {
        throw Error("malformed header: missing WAVE tag");
    }

    std::optional<WavFormat> fmt;
    std::optional<std::string_view> data;
    while (r.remaining() >= 8) {
        auto id = r.take(4, "chunk id");
        auto size = r.read<std::uint32_t>("chunk size");
        if (size > r.remaining()) {
            // Tolerate an over-long data chunk only by truncating to whole frames.
            if (id != "data") {
                throw Error("malformed header: chunk '" + std::string(id) + "' exceeds file size");
            }
            size = static_cast<std::uint32_t>(r.remaining());
        }
        auto body = r.take(size, "chunk body");
        if (id == "fmt ") {
            fmt = parse_fmt(body);
        } else if (id == "data") {
            data = body;
        }
        if ((size & 1u) != 0 && r.remaining() > 0) {
            r.skip(1, "chunk padding");
        }
        if (fmt && data) {
            break;
        }
    }
    if (!fmt) {
        throw Error("malformed header: no fmt chunk");
    }
    if (!data) {
        throw Error("malformed header: no data chunk");
    }
    if (fmt->channels != 2) {
        throw Error("channel count ≠ 2 (got " + std::to_string(fmt->channels) + ")");
    }
    const bool pcm16 = fmt->format == kFormatPcm && fmt->bits == 16;
    const bool pcm24 = fmt->format == kFormatPcm && fmt->bits == 24;
    const bool f32 = fmt->format == kFormatFloat && fmt->bits == 32;
    if (!pcm16 && !pcm24 && !f32) {
        throw Error("unsupported codec: format " + std::to_string(fmt->format) + " with " +
                    std::to_string(fmt->bits) + " bits");
    }
    if (fmt->sample_rate != static_cast<std::uint32_t>(kSampleRate)) {
        throw Error("sample rate " + std::to_string(fmt->sample_rate) + " Hz unsupported, expected " +
                    std::to_string(kSampleRate) + " (no resampling)");
    }
    const std::size_t bytes_per_sample = fmt->bits / 8;
    if (fmt->block_align != 2 * bytes_per_sample) {
        throw Error("malformed header: block align " + std::to_string(fmt->block_align));
    }

    const std::size_t frames = data->size() / fmt->block_align;
    StereoClip clip;
    clip.clip_id = std::move(clip_id);
    clip.sample_rate_hz = kSampleRate;
    clip.left.resize(frames);
    clip.right.resize(frames);
    detail::ByteReader d(*data);
    auto next = [&]() -> float {
        if (pcm16) {
            return static_cast<float>(d.read<std::int16_t>("sample") / 32768.0);
        }
        if (pcm24) {
            auto raw = d.take(3, "sample");
            std::int32_t v = static_cast<unsigned char>(raw[0]) |
                             (static_cast<unsigned char>(raw[1]) << 8) |
                             (static_cast<std::int32_t>(static_cast<signed char>(raw[2])) << 16);
            return static_cast<float>(v / 8388608.0);
        }
        float v = d.read_f32("sample");
        if (!std::isfinite(v)) {
            throw Error("non-finite sample");
        }
        return v;
    };
    for (std::size_t i = 0; i < frames; ++i) {
        clip.left[i] = next();
        clip.right[i] = next();
    }
    return clip;
}

StereoClip read_wav(const fs::path& path) {
    return parse_wav(read_file(path), path.stem().string());
}

std::string encode_wav(const StereoClip& clip) {
    validate_clip(clip);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.size() * 2 * sizeof(float));
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    detail::put<std::uint32_t>(out, 36 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    detail::put<std::uint32_t>(out, 16);
    detail::put<std::uint16_t>(out, kFormatFloat);
    detail::put<std::uint16_t>(out, 2);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 8);
    detail::put<std::uint16_t>(out, 8);
    detail::put<std::uint16_t>(out, 32);
    out += "data";
    detail::put<std::uint32_t>(out, data_bytes);
    for (std::size_t i = 0; i < clip.size(); ++i) {
        detail::put_f32(out, clip.left[i]);
        detail::put_f32(out, clip.right[i]);
    }
    return out;
}

void write_wav(const StereoClip& clip, const fs::path& path) {
    write_file(path, encode_wav(clip));
}

}  // namespace seld::io
