#pragma once

// Acoustic input features: per-channel log-mel spectrograms, inter-channel
// level difference in the mel domain, and short-term power of the
// autocorrelation (stpACC).

#include "seld/core.hpp"
#include "seld/io.hpp"

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace seld::features {

inline constexpr int kMelBins = 64;
inline constexpr double kLogFloor = 1e-8;
inline constexpr double kAutocorrFloor = 1e-12;
inline constexpr int kStpaccLags = 512;
inline constexpr int kStpaccPool = 8;
inline constexpr int kFeatureChannels = 4;

struct StftConfig {
    int window_len = 512;
    int fft_len = 512;
    int hop = 150;
};

inline constexpr StftConfig kMelStft{512, 512, 150};
/// 1014-point window reaches ~21 ms of lag; the 2048 FFT keeps the
/// autocorrelation linear rather than circular.
inline constexpr StftConfig kStpaccStft{1014, 2048, 150};

void validate(const StftConfig& cfg);

/// Row-major real matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// frames x (fft_len / 2 + 1) complex STFT, row-major.
struct Spectrogram {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::vector<std::complex<double>> values;

    std::complex<double> operator()(std::size_t t, std::size_t f) const { return values[t * bins + f]; }
};

/// Periodic Hann window.
std::vector<double> hann_window(int length);

/// Real-input FFT of a fixed size backed by FFTW. Instances own their
/// plans and scratch buffers and are not shareable across threads.
class RealFft {
public:
    explicit RealFft(int size);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return size_; }
    /// in: size samples; out: size/2 + 1 bins.
    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    /// Unnormalized inverse (scales by size).
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
    int size_;
    double* real_ = nullptr;
    void* spectrum_ = nullptr;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

/// Centered framing with reflect padding of window_len / 2, Hann window,
/// zero padding to fft_len; floor(len / hop) frames.
Spectrogram stft(std::span<const double> samples, const StftConfig& cfg);

/// Applies the same framing as stft and returns the windowed, zero-padded
/// frame t (length fft_len).
std::vector<double> windowed_frame(std::span<const double> samples, const StftConfig& cfg, std::size_t t);

struct MelBank {
    Matrix weights;  // n_mels x (fft_len / 2 + 1)
    double f_min = 0.0;
    double f_max = 0.0;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// HTK-scale triangular filters with unit peak, ordered by center frequency.
MelBank make_mel_bank(int n_mels = kMelBins, int fft_len = 512, int sample_rate = kSampleRate,
                      double f_min = 0.0, double f_max = kSampleRate / 2.0);

Matrix power_spectrum(const Spectrogram& spec);

/// log(H_mel * power + 1e-8), frames x n_mels.
Matrix log_mel(const Matrix& power, const MelBank& mel);

/// log(H_mel (|L|^2 + eps)) - log(H_mel (|R|^2 + eps)); exact antisymmetry
/// under exchanging the inputs.
Matrix ild(const Spectrogram& left, const Spectrogram& right, const MelBank& mel);

/// Normalized frame autocorrelation of the (L + R) / 2 downmix, lags 0..511
/// mean-pooled in groups of 8, frames x 64.
Matrix stpacc(const StereoClip& clip, const StftConfig& cfg = kStpaccStft);

inline const std::vector<std::string>& channel_names() {
    static const std::vector<std::string> names{"mel_left", "mel_right", "ild", "stpacc"};
    return names;
}

struct FeatureTensor {
    io::NdArray data;  // 4 x T x 64
    int frame_hop_samples = kMelStft.hop;
    int sample_rate_hz = kSampleRate;

    std::size_t frames() const { return data.dims.size() == 3 ? data.dims[1] : 0; }
};

/// Stacks mel_left, mel_right, ild, stpacc.
FeatureTensor extract_features(const StereoClip& clip);

/// Wraps a tensor read from disk after checking the 4 x T x 64 layout.
FeatureTensor as_feature_tensor(io::NdArray data);

}  // namespace seld::features
