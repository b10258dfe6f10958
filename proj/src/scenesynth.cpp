#include "seld/scenesynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace seld::scenesynth {

namespace {

using Rng = std::mt19937_64;
constexpr double kPi = std::numbers::pi;
constexpr double kSr = kSampleRate;

double round_to(double x, double step) { return std::round(x / step) / std::round(1.0 / step); }

double lerp(double a, double b, double w) { return a + (b - a) * w; }

}  // namespace

void SceneSpec::validate(std::size_t n_classes) const {
    auto fail = [](const std::string& what) { throw Error("invalid scene spec: " + what); };
    if (!(duration_s > 0.0)) {
        fail("duration_s must be positive");
    }
    if (!(std_events >= 0.0) || !(noise_floor_db_std >= 0.0)) {
        fail("standard deviations must be non-negative");
    }
    if (!class_weights.empty()) {
        if (class_weights.size() != n_classes) {
            fail("class_weights has " + std::to_string(class_weights.size()) + " entries for " +
                 std::to_string(n_classes) + " classes");
        }
        double total = 0.0;
        for (double w : class_weights) {
            if (!(w >= 0.0)) {
                fail("class weights must be non-negative");
            }
            total += w;
        }
        if (!(total > 0.0)) {
            fail("class weights are all zero");
        }
    }
    if (!(segment_len_s > 0.0) || !(segment_hop_s > 0.0)) {
        fail("segment length and hop must be positive");
    }
    if (!(onscreen_prob >= 0.0 && onscreen_prob <= 1.0) || !(moving_prob >= 0.0 && moving_prob <= 1.0)) {
        fail("probabilities must lie in [0, 1]");
    }
    if (!(min_event_s > 0.0) || !(max_event_s >= min_event_s)) {
        fail("event duration bounds must satisfy 0 < min <= max");
    }
    if (!(min_distance_m > 0.0) || !(max_distance_m >= min_distance_m)) {
        fail("distance bounds must satisfy 0 < min <= max");
    }
}

double SynthEvent::azimuth_at(double t) const {
    const double w = duration_s > 0.0 ? std::clamp((t - onset_s) / duration_s, 0.0, 1.0) : 0.0;
    return std::clamp(lerp(az_start_deg, az_end_deg, w), kMinAzimuthDeg, kMaxAzimuthDeg);
}

double SynthEvent::distance_at(double t) const {
    const double w = duration_s > 0.0 ? std::clamp((t - onset_s) / duration_s, 0.0, 1.0) : 0.0;
    return lerp(dist_start_m, dist_end_m, w);
}

std::pair<double, double> pan_gains(double azimuth_deg) {
    const double half = (90.0 - azimuth_deg) / 2.0 * kPi / 180.0;
    return {std::cos(half), std::sin(half)};
}

std::pair<int, int> event_frames(double onset_s, double duration_s) {
    const double fps = kLabelFramesPerSecond;
    return {static_cast<int>(std::ceil(onset_s * fps - 1e-9)),
            static_cast<int>(std::floor((onset_s + duration_s) * fps + 1e-9))};
}

std::vector<float> render_source(const SynthEvent& event, std::size_t samples) {
    Rng rng(event.recipe_seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss;
    auto range = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };
    std::vector<double> x(samples, 0.0);
    auto decaying = [&](double period, double tau, auto&& tone) {
        for (std::size_t i = 0; i < samples; ++i) {
            const double t = static_cast<double>(i) / kSr;
            const double local = std::fmod(t, period);
            x[i] = std::exp(-local / tau) * tone(t, local);
        }
    };
    auto harmonic = [&](double f0, double rate, int partials) {
        const double vib = range(3.0, 6.0);
        double phase = 0.0;
        for (std::size_t i = 0; i < samples; ++i) {
            const double t = static_cast<double>(i) / kSr;
            const double f = f0 * (1.0 + 0.03 * std::sin(2.0 * kPi * vib * t));
            phase += 2.0 * kPi * f / kSr;
            double s = 0.0;
            for (int k = 1; k <= partials; ++k) {
                s += std::sin(k * phase) / k;
            }
            x[i] = s * 0.5 * (1.0 - std::cos(2.0 * kPi * rate * t));
        }
    };

    switch (event.class_index % 13) {
        case 0:  // female speech
            harmonic(range(190.0, 260.0), range(3.0, 5.0), 8);
            break;
        case 1:  // male speech
            harmonic(range(95.0, 140.0), range(3.0, 5.0), 10);
            break;
        case 2: {  // clapping
            const double period = 1.0 / range(3.0, 6.0);
            std::vector<double> noise(samples);
            for (auto& n : noise) {
                n = gauss(rng);
            }
            decaying(period, 0.015, [&](double t, double) { return noise[static_cast<std::size_t>(t * kSr)]; });
            break;
        }
        case 3:  // telephone ring cadence
            for (std::size_t i = 0; i < samples; ++i) {
                const double t = static_cast<double>(i) / kSr;
                const bool on = std::fmod(t, 0.6) < 0.4;
                x[i] = on ? std::sin(2.0 * kPi * 440.0 * t) + std::sin(2.0 * kPi * 480.0 * t) : 0.0;
            }
            break;
        case 4:  // laughter
            harmonic(range(250.0, 330.0), range(4.5, 6.0), 6);
            break;
        case 5: {  // domestic: leaky integrated noise
            double y = 0.0;
            for (auto& v : x) {
                y = 0.995 * y + 0.05 * gauss(rng);
                v = y;
            }
            break;
        }
        case 6: {  // footsteps
            const double f = range(60.0, 100.0);
            decaying(1.0 / range(1.5, 2.5), 0.04, [&](double, double local) { return std::sin(2.0 * kPi * f * local); });
            break;
        }
        case 7: {  // door slam
            std::vector<double> noise(samples);
            for (auto& n : noise) {
                n = gauss(rng);
            }
            decaying(1.5, 0.12, [&](double t, double local) {
                return 0.5 * noise[static_cast<std::size_t>(t * kSr)] + std::sin(2.0 * kPi * 70.0 * local);
            });
            break;
        }
        case 8: {  // music: chords changing every half second
            const double notes[] = {261.63, 293.66, 329.63, 349.23, 392.0, 440.0, 493.88};
            std::vector<std::array<double, 3>> chords;
            for (std::size_t i = 0; i < samples; ++i) {
                const double t = static_cast<double>(i) / kSr;
                const auto idx = static_cast<std::size_t>(t / 0.5);
                while (chords.size() <= idx) {
                    chords.push_back({notes[rng() % 7], notes[rng() % 7], notes[rng() % 7] / 2.0});
                }
                for (double f : chords[idx]) {
                    x[i] += std::sin(2.0 * kPi * f * t);
                }
            }
            break;
        }
        case 9: {  // plucked instrument
            const double f = range(150.0, 600.0);
            decaying(1.0, 0.6, [&](double, double local) {
                return std::sin(2.0 * kPi * f * local) + 0.5 * std::sin(4.0 * kPi * f * local) +
                       0.25 * std::sin(6.0 * kPi * f * local);
            });
            break;
        }
        case 10: {  // water tap: high-passed noise with flutter
            double prev = 0.0, y = 0.0;
            const double flutter = range(5.0, 9.0);
            for (std::size_t i = 0; i < samples; ++i) {
                const double n = gauss(rng);
                y = 0.9 * (y + n - prev);
                prev = n;
                const double t = static_cast<double>(i) / kSr;
                x[i] = y * (0.7 + 0.3 * std::sin(2.0 * kPi * flutter * t));
            }
            break;
        }
        case 11: {  // bell: inharmonic partials
            const double f = range(600.0, 1000.0);
            decaying(1.2, 0.8, [&](double, double local) {
                return std::sin(2.0 * kPi * f * local) + 0.6 * std::sin(2.0 * kPi * 2.76 * f * local) +
                       0.3 * std::sin(2.0 * kPi * 5.4 * f * local);
            });
            break;
        }
        default: {  // knock: three quick hits per second
            const double f = range(250.0, 400.0);
            for (std::size_t i = 0; i < samples; ++i) {
                const double t = static_cast<double>(i) / kSr;
                const double local = std::fmod(t, 1.0);
                const double hit = std::fmod(local, 0.12);
                x[i] = local < 0.36 ? std::exp(-hit / 0.02) * std::sin(2.0 * kPi * f * hit) : 0.0;
            }
            break;
        }
    }

    double peak = 0.0;
    for (double v : x) {
        peak = std::max(peak, std::abs(v));
    }
    const double gain = peak > 0.0 ? 0.5 / peak : 0.0;
    const auto fade = std::min<std::size_t>(samples / 2, static_cast<std::size_t>(0.01 * kSr));
    std::vector<float> out(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        double env = 1.0;
        if (fade > 0 && i < fade) {
            env = static_cast<double>(i) / static_cast<double>(fade);
        } else if (fade > 0 && samples - 1 - i < fade) {
            env = static_cast<double>(samples - 1 - i) / static_cast<double>(fade);
        }
        out[i] = static_cast<float>(x[i] * gain * env);
    }
    return out;
}

Scene render_scene(const SceneSpec& spec, std::vector<SynthEvent> events, double noise_db) {
    const auto n_samples = static_cast<std::size_t>(std::llround(spec.duration_s * kSr));
    const int n_frames = static_cast<int>(std::floor(spec.duration_s * kLabelFramesPerSecond + 1e-9));
    Scene scene;
    scene.noise_db = noise_db;
    scene.clip.clip_id = spec.clip_id;
    std::vector<double> left(n_samples, 0.0), right(n_samples, 0.0);

    for (const auto& ev : events) {
        const auto start = static_cast<std::size_t>(std::llround(ev.onset_s * kSr));
        const auto stop = std::min(n_samples, static_cast<std::size_t>(std::llround((ev.onset_s + ev.duration_s) * kSr)));
        if (stop <= start) {
            continue;
        }
        const auto src = render_source(ev, stop - start);
        for (std::size_t i = start; i < stop; ++i) {
            const double t = static_cast<double>(i) / kSr;
            const auto [gl, gr] = pan_gains(ev.azimuth_at(t));
            const double g = 0.25 / ev.distance_at(t);
            left[i] += g * gl * src[i - start];
            right[i] += g * gr * src[i - start];
        }
        const auto [f0, f1] = event_frames(ev.onset_s, ev.duration_s);
        for (int f = std::max(f0, 0); f <= std::min(f1, n_frames - 1); ++f) {
            const double t = std::clamp(static_cast<double>(f) / kLabelFramesPerSecond, ev.onset_s, ev.onset_s + ev.duration_s);
            EventRecord rec;
            rec.frame = f;
            rec.class_index = ev.class_index;
            rec.source_id = ev.source_id;
            rec.azimuth_deg = std::clamp(round_to(ev.azimuth_at(t), 0.01), kMinAzimuthDeg, kMaxAzimuthDeg);
            rec.distance_m = std::max(0.01, round_to(ev.distance_at(t), 0.01));
            rec.onscreen = ev.onscreen;
            scene.labels.push_back(rec);
        }
    }

    Rng noise_rng(spec.seed * 0x9e3779b97f4a7c15ULL + 1);
    std::normal_distribution<double> gauss;
    const double sigma = std::pow(10.0, noise_db / 20.0);
    scene.clip.left.resize(n_samples);
    scene.clip.right.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double l = left[i] + sigma * gauss(noise_rng);
        const double r = right[i] + sigma * gauss(noise_rng);
        scene.clip.left[i] = static_cast<float>(std::clamp(l, -1.0, 1.0));
        scene.clip.right[i] = static_cast<float>(std::clamp(r, -1.0, 1.0));
    }
    std::sort(scene.labels.begin(), scene.labels.end(), event_order);
    scene.events = std::move(events);
    return scene;
}

Scene generate_scene(const SceneSpec& spec, const accddoa::ClassMap& class_map) {
    const auto n_classes = class_map.size();
    spec.validate(n_classes);
    auto weights = spec.class_weights.empty() ? class_map.synth_weights : spec.class_weights;
    if (weights.size() != n_classes) {
        weights.assign(n_classes, 1.0);
    }
    Rng rng(spec.seed);
    std::normal_distribution<double> count_dist(spec.mean_events, spec.std_events);
    std::normal_distribution<double> noise_dist(spec.noise_floor_db_mean, spec.noise_floor_db_std);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::discrete_distribution<int> class_dist(weights.begin(), weights.end());
    auto range = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

    const double noise_db = noise_dist(rng);
    const auto n_events = static_cast<int>(std::max(0.0, std::round(count_dist(rng))));
    const int n_frames = static_cast<int>(std::floor(spec.duration_s * kLabelFramesPerSecond + 1e-9));
    // Active sources per (frame, class), to respect the three-track capacity.
    std::vector<int> active(static_cast<std::size_t>(std::max(n_frames, 0)) * n_classes, 0);

    std::vector<SynthEvent> events;
    for (int k = 0; k < n_events; ++k) {
        for (int attempt = 0; attempt < 10; ++attempt) {
            SynthEvent ev;
            ev.class_index = class_dist(rng);
            ev.duration_s = range(spec.min_event_s, std::min(spec.max_event_s, spec.duration_s));
            ev.onset_s = range(0.0, std::max(0.0, spec.duration_s - ev.duration_s));
            ev.az_start_deg = range(kMinAzimuthDeg, kMaxAzimuthDeg);
            ev.dist_start_m = range(spec.min_distance_m, spec.max_distance_m);
            const bool moving = uni(rng) < spec.moving_prob;
            ev.az_end_deg = moving ? std::clamp(ev.az_start_deg + range(-45.0, 45.0), kMinAzimuthDeg, kMaxAzimuthDeg)
                                   : ev.az_start_deg;
            ev.dist_end_m = moving ? std::clamp(ev.dist_start_m * range(0.8, 1.25), spec.min_distance_m, spec.max_distance_m)
                                   : ev.dist_start_m;
            ev.onscreen = uni(rng) < spec.onscreen_prob;
            ev.recipe_seed = rng();
            const auto [f0, f1] = event_frames(ev.onset_s, ev.duration_s);
            const int lo = std::max(f0, 0), hi = std::min(f1, n_frames - 1);
            bool fits = true;
            for (int f = lo; f <= hi && fits; ++f) {
                fits = active[static_cast<std::size_t>(f) * n_classes + static_cast<std::size_t>(ev.class_index)] < kMaxTracks;
            }
            if (!fits) {
                continue;
            }
            for (int f = lo; f <= hi; ++f) {
                ++active[static_cast<std::size_t>(f) * n_classes + static_cast<std::size_t>(ev.class_index)];
            }
            ev.source_id = static_cast<int>(events.size());
            events.push_back(ev);
            break;
        }
    }
    return render_scene(spec, std::move(events), noise_db);
}

std::vector<Segment> segment_scene(const StereoClip& clip, const std::vector<EventRecord>& labels,
                                   const SceneSpec& spec) {
    const auto len = static_cast<std::size_t>(std::llround(spec.segment_len_s * kSr));
    const auto hop = static_cast<std::size_t>(std::llround(spec.segment_hop_s * kSr));
    const int len_frames = static_cast<int>(std::llround(spec.segment_len_s * kLabelFramesPerSecond));
    const int hop_frames = static_cast<int>(std::llround(spec.segment_hop_s * kLabelFramesPerSecond));
    if (len == 0 || hop == 0) {
        throw Error("segment_scene: segment length and hop must be positive");
    }
    std::vector<Segment> out;
    int index = 0;
    for (std::size_t start = 0; start + len <= clip.size(); start += hop, ++index) {
        const int first = index * hop_frames;
        Segment seg;
        for (const auto& e : labels) {
            if (e.frame >= first && e.frame < first + len_frames) {
                auto r = e;
                r.frame -= first;
                seg.labels.push_back(r);
            }
        }
        if (seg.labels.empty()) {
            continue;
        }
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "_%02d", index);
        seg.clip.clip_id = clip.clip_id + suffix;
        seg.clip.sample_rate_hz = clip.sample_rate_hz;
        seg.clip.left.assign(clip.left.begin() + static_cast<std::ptrdiff_t>(start),
                             clip.left.begin() + static_cast<std::ptrdiff_t>(start + len));
        seg.clip.right.assign(clip.right.begin() + static_cast<std::ptrdiff_t>(start),
                              clip.right.begin() + static_cast<std::ptrdiff_t>(start + len));
        out.push_back(std::move(seg));
    }
    return out;
}

}  // namespace seld::scenesynth
