#include "seld/accddoa.hpp"

#include "class_map_default.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace seld::accddoa {

namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kBceClamp = 1e-12;

}  // namespace

// ------------------------------------------------------------ class map

std::string_view default_class_map_json() { return detail::kDefaultClassMapJson; }

int ClassMap::index_of(std::string_view name) const {
    const auto key = lower(name);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (lower(names[i]) == key) {
            return static_cast<int>(i);
        }
    }
    throw Error("unknown class '" + std::string(name) + "'");
}

bool ClassMap::is_single_system(int class_index) const {
    return std::find(single_system_classes.begin(), single_system_classes.end(), class_index) !=
           single_system_classes.end();
}

ClassMap ClassMap::from_json(std::string_view text) {
    ClassMap map;
    try {
        const auto doc = json::parse(text);
        map.names = doc.at("classes").get<std::vector<std::string>>();
        if (map.names.empty()) {
            throw Error("class map: empty class list");
        }
        for (std::size_t i = 0; i < map.names.size(); ++i) {
            if (map.index_of(map.names[i]) != static_cast<int>(i)) {
                throw Error("class map: duplicate class '" + map.names[i] + "'");
            }
        }
        if (doc.contains("single_system_classes")) {
            for (const auto& n : doc.at("single_system_classes")) {
                map.single_system_classes.push_back(map.index_of(n.get<std::string>()));
            }
        }
        if (doc.contains("keypoint_rules")) {
            for (const auto& [name, rule] : doc.at("keypoint_rules").items()) {
                const auto r = lower(rule.get<std::string>());
                KeypointRule kr;
                if (r == "nose") {
                    kr = KeypointRule::Nose;
                } else if (r == "wrists") {
                    kr = KeypointRule::Wrists;
                } else if (r == "ankles") {
                    kr = KeypointRule::Ankles;
                } else {
                    throw Error("class map: unknown keypoint rule '" + r + "'");
                }
                map.keypoint_rules[map.index_of(name)] = kr;
            }
        }
        map.synth_weights.assign(map.names.size(), 1.0);
        if (doc.contains("synth_weights")) {
            for (const auto& [name, w] : doc.at("synth_weights").items()) {
                const double v = w.get<double>();
                if (!(v >= 0.0) || !std::isfinite(v)) {
                    throw Error("class map: synth weight for '" + name + "' must be non-negative");
                }
                map.synth_weights[static_cast<std::size_t>(map.index_of(name))] = v;
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("class map: ") + e.what());
    }
    for (std::size_t i = 0; i < map.names.size(); ++i) {
        const auto n = lower(map.names[i]);
        if (n == "bell") {
            map.bell_index = static_cast<int>(i);
        } else if (n == "knock") {
            map.knock_index = static_cast<int>(i);
        }
    }
    return map;
}

ClassMap ClassMap::load(const std::filesystem::path& path) {
    try {
        return from_json(io::read_file(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

ClassMap ClassMap::dcase2025() {
    static const ClassMap map = from_json(default_class_map_json());
    return map;
}

// ------------------------------------------------------- encode / decode

AccddoaFrame encode_frame(const std::vector<EventRecord>& events, int n_classes) {
    if (n_classes <= 0) {
        throw Error("class count must be positive");
    }
    AccddoaFrame out(n_classes);
    std::vector<std::vector<const EventRecord*>> per_class(static_cast<std::size_t>(n_classes));
    for (const auto& e : events) {
        validate_event(e);
        if (e.class_index >= n_classes) {
            throw Error("class index " + std::to_string(e.class_index) + " outside [0, " +
                        std::to_string(n_classes) + ")");
        }
        per_class[static_cast<std::size_t>(e.class_index)].push_back(&e);
    }
    for (int c = 0; c < n_classes; ++c) {
        auto& list = per_class[static_cast<std::size_t>(c)];
        if (list.size() > static_cast<std::size_t>(kMaxTracks)) {
            throw Error("more than 3 simultaneous events of class " + std::to_string(c));
        }
        std::stable_sort(list.begin(), list.end(),
                         [](const EventRecord* a, const EventRecord* b) { return a->source_id < b->source_id; });
        for (std::size_t k = 0; k < list.size(); ++k) {
            const auto& e = *list[k];
            const double az = e.azimuth_deg * kDegToRad;
            const int track = static_cast<int>(k);
            out.at(track, c, 0) = std::cos(az);
            out.at(track, c, 1) = std::sin(az);
            out.at(track, c, 2) = e.distance_m;
            out.at(track, c, 3) = e.onscreen ? 1.0 : 0.0;
        }
    }
    return out;
}

std::vector<EventRecord> decode_frame(const AccddoaFrame& pred, int frame, double act_threshold,
                                      double on_threshold) {
    for (double v : pred.values) {
        if (std::isnan(v)) {
            throw Error("decode_frame: NaN in prediction");
        }
    }
    std::vector<EventRecord> out;
    for (int c = 0; c < pred.classes; ++c) {
        for (int k = 0; k < kMaxTracks; ++k) {
            const double x = pred.at(k, c, 0);
            const double y = pred.at(k, c, 1);
            const double norm = std::hypot(x, y);
            if (!(norm > act_threshold)) {
                continue;
            }
            EventRecord e;
            e.frame = frame;
            e.class_index = c;
            e.source_id = k;
            e.azimuth_deg = std::clamp(std::atan2(y, x) / kDegToRad, kMinAzimuthDeg, kMaxAzimuthDeg);
            // Keep the record valid even for a non-positive distance output.
            e.distance_m = std::max(pred.at(k, c, 2) / std::max(norm, 1e-12), 1e-6);
            e.onscreen = pred.at(k, c, 3) > on_threshold;
            out.push_back(e);
        }
    }
    return out;
}

std::vector<AccddoaFrame> encode_sequence(const FrameEvents& frames, int n_classes) {
    std::vector<AccddoaFrame> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        out.push_back(encode_frame(f, n_classes));
    }
    return out;
}

FrameEvents decode_sequence(std::span<const AccddoaFrame> frames, double act_threshold, double on_threshold) {
    FrameEvents out(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        out[t] = decode_frame(frames[t], static_cast<int>(t), act_threshold, on_threshold);
    }
    return out;
}

io::NdArray to_tensor(std::span<const AccddoaFrame> frames) {
    const int classes = frames.empty() ? kDefaultClasses : frames.front().classes;
    const auto T = static_cast<std::uint32_t>(frames.size());
    io::NdArray t({static_cast<std::uint32_t>(kMaxTracks), static_cast<std::uint32_t>(classes),
                   static_cast<std::uint32_t>(kComponents), T});
    for (std::uint32_t f = 0; f < T; ++f) {
        if (frames[f].classes != classes) {
            throw Error("inconsistent class counts across frames");
        }
        for (int k = 0; k < kMaxTracks; ++k) {
            for (int c = 0; c < classes; ++c) {
                for (int j = 0; j < kComponents; ++j) {
                    t.at({static_cast<std::size_t>(k), static_cast<std::size_t>(c), static_cast<std::size_t>(j), f}) =
                        static_cast<float>(frames[f].at(k, c, j));
                }
            }
        }
    }
    return t;
}

std::vector<AccddoaFrame> from_tensor(const io::NdArray& t) {
    if (t.dims.size() != 4 || t.dims[0] != static_cast<std::uint32_t>(kMaxTracks) ||
        t.dims[2] != static_cast<std::uint32_t>(kComponents) || t.dims[1] == 0) {
        throw Error("ACCDDOA tensor must have shape 3 x C x 4 x T");
    }
    const int classes = static_cast<int>(t.dims[1]);
    std::vector<AccddoaFrame> out(t.dims[3], AccddoaFrame(classes));
    for (std::size_t f = 0; f < out.size(); ++f) {
        for (int k = 0; k < kMaxTracks; ++k) {
            for (int c = 0; c < classes; ++c) {
                for (int j = 0; j < kComponents; ++j) {
                    out[f].at(k, c, j) =
                        t.at({static_cast<std::size_t>(k), static_cast<std::size_t>(c), static_cast<std::size_t>(j), f});
                }
            }
        }
    }
    return out;
}

// ------------------------------------------------------------------ ADPIT

double weighted_onscreen_loss_factor(bool onscreen_ref, bool weighted) {
    return weighted && onscreen_ref ? kOnscreenWeight : 1.0;
}

const std::vector<std::array<int, kMaxTracks>>& surjective_assignments(int active) {
    static const std::vector<std::array<int, kMaxTracks>> none{{0, 0, 0}};
    static const std::vector<std::array<int, kMaxTracks>> one{{0, 0, 0}};
    static const std::vector<std::array<int, kMaxTracks>> two{
        {0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
    static const std::vector<std::array<int, kMaxTracks>> three{
        {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    switch (active) {
        case 0: return none;
        case 1: return one;
        case 2: return two;
        case 3: return three;
        default: throw Error("ADPIT supports at most 3 simultaneous same-class events");
    }
}

namespace {

double bce(double o, double target) {
    return target > 0.5 ? -std::log(std::max(o, kBceClamp)) : -std::log(std::max(1.0 - o, kBceClamp));
}

double bce_grad(double o, double target) {
    if (target > 0.5) {
        return o > kBceClamp ? -1.0 / o : 0.0;
    }
    return 1.0 - o > kBceClamp ? 1.0 / (1.0 - o) : 0.0;
}

}  // namespace

double track_cost(std::span<const double, 4> pred, std::span<const double, 4> target, double onscreen_weight) {
    const double dx = pred[0] - target[0];
    const double dy = pred[1] - target[1];
    const double dd = pred[2] - target[2];
    const double w = target[3] > 0.5 ? onscreen_weight : 1.0;
    return (dx * dx + dy * dy + dd * dd) / 3.0 + w * bce(pred[3], target[3]);
}

AdpitResult adpit_loss(std::span<const AccddoaFrame> pred, const FrameEvents& refs, double onscreen_weight) {
    if (pred.size() != refs.size()) {
        throw Error("adpit_loss: misaligned lengths, " + std::to_string(pred.size()) + " prediction frames vs " +
                    std::to_string(refs.size()) + " reference frames");
    }
    AdpitResult result;
    if (pred.empty()) {
        return result;
    }
    const int classes = pred.front().classes;
    result.grad.assign(pred.size(), AccddoaFrame(classes));
    const double norm = 1.0 / (static_cast<double>(pred.size()) * classes);

    double total = 0.0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (pred[t].classes != classes) {
            throw Error("adpit_loss: inconsistent class counts");
        }
        const auto targets = encode_frame(refs[t], classes);
        std::vector<int> active(static_cast<std::size_t>(classes), 0);
        for (const auto& e : refs[t]) {
            ++active[static_cast<std::size_t>(e.class_index)];
        }
        for (int c = 0; c < classes; ++c) {
            const int a = active[static_cast<std::size_t>(c)];
            // cost[k][e]: track k against reference e (encoded on track e).
            std::array<std::array<double, kMaxTracks>, kMaxTracks> cost{};
            for (int k = 0; k < kMaxTracks; ++k) {
                const std::span<const double, 4> p(&pred[t].values[pred[t].index(k, c, 0)], 4);
                for (int e = 0; e < std::max(a, 1); ++e) {
                    const std::span<const double, 4> tgt(&targets.values[targets.index(e, c, 0)], 4);
                    cost[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)] = track_cost(p, tgt, onscreen_weight);
                }
            }
            double best = 0.0;
            const std::array<int, kMaxTracks>* best_map = nullptr;
            for (const auto& map : surjective_assignments(a)) {
                std::array<double, kMaxTracks> parts{};
                for (int k = 0; k < kMaxTracks; ++k) {
                    parts[static_cast<std::size_t>(k)] =
                        cost[static_cast<std::size_t>(k)][static_cast<std::size_t>(map[static_cast<std::size_t>(k)])];
                }
                // Sorted summation makes the value independent of track order.
                std::sort(parts.begin(), parts.end());
                const double c_map = (parts[0] + parts[1] + parts[2]) / 3.0;
                if (best_map == nullptr || c_map < best) {
                    best = c_map;
                    best_map = &map;
                }
            }
            total += best;

            for (int k = 0; k < kMaxTracks; ++k) {
                const int e = (*best_map)[static_cast<std::size_t>(k)];
                const auto p = pred[t].index(k, c, 0);
                const auto q = targets.index(e, c, 0);
                auto& g = result.grad[t].values;
                const double scale = norm / kMaxTracks;
                for (int j = 0; j < 3; ++j) {
                    g[p + static_cast<std::size_t>(j)] =
                        scale * 2.0 * (pred[t].values[p + static_cast<std::size_t>(j)] - targets.values[q + static_cast<std::size_t>(j)]) / 3.0;
                }
                const double target_o = targets.values[q + 3];
                const double w = target_o > 0.5 ? onscreen_weight : 1.0;
                g[p + 3] = scale * w * bce_grad(pred[t].values[p + 3], target_o);
            }
        }
    }
    result.loss = total * norm;
    return result;
}

}  // namespace seld::accddoa
