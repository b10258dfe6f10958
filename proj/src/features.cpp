#include "seld/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

namespace seld::features {

namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t len) {
    if (len == 1) {
        return 0;
    }
    const auto n = static_cast<std::ptrdiff_t>(len);
    const std::ptrdiff_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) {
        i += period;
    }
    return static_cast<std::size_t>(i < n ? i : period - i);
}

std::vector<double> to_double(std::span<const float> in) { return {in.begin(), in.end()}; }

void check_mel_shape(std::size_t bins, const MelBank& mel) {
    if (bins != mel.weights.cols) {
        throw Error("shape mismatch: spectrum has " + std::to_string(bins) + " bins, mel bank expects " +
                    std::to_string(mel.weights.cols));
    }
}

}  // namespace

void validate(const StftConfig& cfg) {
    if (cfg.window_len <= 0 || cfg.hop <= 0 || cfg.fft_len < cfg.window_len) {
        throw Error("invalid STFT config: window " + std::to_string(cfg.window_len) + ", fft " +
                    std::to_string(cfg.fft_len) + ", hop " + std::to_string(cfg.hop));
    }
}

std::vector<double> hann_window(int length) {
    std::vector<double> w(static_cast<std::size_t>(length));
    for (int n = 0; n < length; ++n) {
        w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
    }
    return w;
}

RealFft::RealFft(int size) : size_(size) {
    if (size <= 0) {
        throw Error("FFT size must be positive");
    }
    std::lock_guard lock(planner_mutex());
    real_ = fftw_alloc_real(static_cast<std::size_t>(size));
    auto* spectrum = fftw_alloc_complex(static_cast<std::size_t>(size / 2 + 1));
    spectrum_ = spectrum;
    forward_plan_ = fftw_plan_dft_r2c_1d(size, real_, spectrum, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r_1d(size, spectrum, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    fftw_free(real_);
    fftw_free(spectrum_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(static_cast<fftw_plan>(forward_plan_));
    const auto* spec = static_cast<const fftw_complex*>(spectrum_);
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = {spec[k][0], spec[k][1]};
    }
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    auto* spec = static_cast<fftw_complex*>(spectrum_);
    for (std::size_t k = 0; k < in.size(); ++k) {
        spec[k][0] = in[k].real();
        spec[k][1] = in[k].imag();
    }
    // c2r destroys its input, which is scratch here.
    fftw_execute(static_cast<fftw_plan>(inverse_plan_));
    std::copy(real_, real_ + out.size(), out.begin());
}

std::vector<double> windowed_frame(std::span<const double> samples, const StftConfig& cfg, std::size_t t) {
    static thread_local std::vector<double> window;
    if (window.size() != static_cast<std::size_t>(cfg.window_len)) {
        window = hann_window(cfg.window_len);
    }
    std::vector<double> frame(static_cast<std::size_t>(cfg.fft_len), 0.0);
    const auto pad = static_cast<std::ptrdiff_t>(cfg.window_len / 2);
    const auto start = static_cast<std::ptrdiff_t>(t) * cfg.hop - pad;
    for (int n = 0; n < cfg.window_len; ++n) {
        const auto src = reflect_index(start + n, samples.size());
        frame[static_cast<std::size_t>(n)] = samples[src] * window[static_cast<std::size_t>(n)];
    }
    return frame;
}

Spectrogram stft(std::span<const double> samples, const StftConfig& cfg) {
    validate(cfg);
    if (samples.empty()) {
        throw Error("stft: empty input");
    }
    Spectrogram spec;
    spec.frames = samples.size() / static_cast<std::size_t>(cfg.hop);
    spec.bins = static_cast<std::size_t>(cfg.fft_len / 2 + 1);
    spec.values.resize(spec.frames * spec.bins);
    RealFft fft(cfg.fft_len);
    for (std::size_t t = 0; t < spec.frames; ++t) {
        auto frame = windowed_frame(samples, cfg, t);
        fft.forward(frame, std::span(spec.values).subspan(t * spec.bins, spec.bins));
    }
    return spec;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelBank make_mel_bank(int n_mels, int fft_len, int sample_rate, double f_min, double f_max) {
    if (n_mels <= 0 || fft_len <= 0 || !(f_max > f_min) || f_min < 0.0) {
        throw Error("invalid mel bank parameters");
    }
    const std::size_t bins = static_cast<std::size_t>(fft_len / 2 + 1);
    MelBank bank{Matrix(static_cast<std::size_t>(n_mels), bins), f_min, f_max};
    const double mel_lo = hz_to_mel(f_min);
    const double mel_hi = hz_to_mel(f_max);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_mels + 1));
    }
    const double bin_hz = static_cast<double>(sample_rate) / fft_len;
    for (std::size_t m = 0; m < static_cast<std::size_t>(n_mels); ++m) {
        const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            double w = 0.0;
            if (f > lo && f <= center) {
                w = (f - lo) / (center - lo);
            } else if (f > center && f < hi) {
                w = (hi - f) / (hi - center);
            }
            bank.weights(m, k) = w;
        }
    }
    return bank;
}

Matrix power_spectrum(const Spectrogram& spec) {
    Matrix p(spec.frames, spec.bins);
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        p.data[i] = std::norm(spec.values[i]);
    }
    return p;
}

namespace {

// out(t, m) = sum_k H(m, k) * (power(t, k) + offset)
Matrix project(const Matrix& power, const MelBank& mel, double offset) {
    check_mel_shape(power.cols, mel);
    const auto& h = mel.weights;
    Matrix out(power.rows, h.rows);
    for (std::size_t t = 0; t < power.rows; ++t) {
        const auto row = power.row(t);
        for (std::size_t m = 0; m < h.rows; ++m) {
            const auto w = h.row(m);
            double acc = 0.0;
            for (std::size_t k = 0; k < h.cols; ++k) {
                acc += w[k] * (row[k] + offset);
            }
            out(t, m) = acc;
        }
    }
    return out;
}

}  // namespace

Matrix log_mel(const Matrix& power, const MelBank& mel) {
    for (double v : power.data) {
        if (!(v >= 0.0)) {
            throw Error("log_mel: power must be non-negative");
        }
    }
    auto out = project(power, mel, 0.0);
    for (auto& v : out.data) {
        v = std::log(v + kLogFloor);
    }
    return out;
}

Matrix ild(const Spectrogram& left, const Spectrogram& right, const MelBank& mel) {
    if (left.frames != right.frames || left.bins != right.bins) {
        throw Error("ild: shape mismatch between left (" + std::to_string(left.frames) + "x" +
                    std::to_string(left.bins) + ") and right (" + std::to_string(right.frames) + "x" +
                    std::to_string(right.bins) + ")");
    }
    const auto l = project(power_spectrum(left), mel, kLogFloor);
    const auto r = project(power_spectrum(right), mel, kLogFloor);
    Matrix out(l.rows, l.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = std::log(l.data[i]) - std::log(r.data[i]);
    }
    return out;
}

Matrix stpacc(const StereoClip& clip, const StftConfig& cfg) {
    validate_clip(clip);
    validate(cfg);
    if (clip.size() == 0) {
        throw Error("stpacc: empty input");
    }
    const std::size_t lags = kStpaccLags;
    if (static_cast<std::size_t>(cfg.fft_len) + 1 < static_cast<std::size_t>(cfg.window_len) + lags) {
        throw Error("stpacc: FFT length too short for a linear autocorrelation");
    }
    std::vector<double> mono(clip.size());
    for (std::size_t i = 0; i < mono.size(); ++i) {
        mono[i] = (static_cast<double>(clip.left[i]) + static_cast<double>(clip.right[i])) / 2.0;
    }
    const std::size_t frames = mono.size() / static_cast<std::size_t>(cfg.hop);
    const std::size_t bins = static_cast<std::size_t>(cfg.fft_len / 2 + 1);
    const std::size_t pooled = lags / kStpaccPool;
    Matrix out(frames, pooled);
    RealFft fft(cfg.fft_len);
    std::vector<std::complex<double>> spectrum(bins);
    std::vector<double> acf(static_cast<std::size_t>(cfg.fft_len));
    for (std::size_t t = 0; t < frames; ++t) {
        auto frame = windowed_frame(mono, cfg, t);
        fft.forward(frame, spectrum);
        for (auto& c : spectrum) {
            c = std::norm(c);
        }
        fft.inverse(spectrum, acf);
        const double r0 = acf[0] / cfg.fft_len;
        if (r0 <= kAutocorrFloor) {
            continue;
        }
        for (std::size_t b = 0; b < pooled; ++b) {
            double acc = 0.0;
            for (std::size_t j = 0; j < kStpaccPool; ++j) {
                acc += acf[b * kStpaccPool + j] / cfg.fft_len / r0;
            }
            out(t, b) = acc / kStpaccPool;
        }
    }
    return out;
}

FeatureTensor extract_features(const StereoClip& clip) {
    validate_clip(clip);
    const auto left = to_double(clip.left);
    const auto right = to_double(clip.right);
    static const MelBank mel = make_mel_bank();
    const auto spec_l = stft(left, kMelStft);
    const auto spec_r = stft(right, kMelStft);
    const auto mel_l = log_mel(power_spectrum(spec_l), mel);
    const auto mel_r = log_mel(power_spectrum(spec_r), mel);
    const auto ild_m = ild(spec_l, spec_r, mel);
    const auto acc = stpacc(clip);

    const std::size_t frames = spec_l.frames;
    if (acc.rows != frames) {
        throw Error("internal: stpacc frame count differs from mel frames");
    }
    FeatureTensor ft;
    ft.data = io::NdArray({kFeatureChannels, static_cast<std::uint32_t>(frames), kMelBins});
    const std::array<const Matrix*, 4> channels{&mel_l, &mel_r, &ild_m, &acc};
    for (std::size_t c = 0; c < channels.size(); ++c) {
        const auto& src = channels[c]->data;
        std::transform(src.begin(), src.end(), ft.data.data.begin() + static_cast<std::ptrdiff_t>(c * frames * kMelBins),
                       [](double v) { return static_cast<float>(v); });
    }
    return ft;
}

FeatureTensor as_feature_tensor(io::NdArray data) {
    if (data.dims.size() != 3 || data.dims[0] != kFeatureChannels || data.dims[2] != kMelBins) {
        throw Error("feature tensor must have shape 4 x T x 64");
    }
    FeatureTensor ft;
    ft.data = std::move(data);
    return ft;
}

}  // namespace seld::features
