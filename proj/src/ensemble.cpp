#include "seld/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace seld::ensemble {

namespace {

struct Detection {
    std::size_t system = 0;
    std::size_t order = 0;  // position among this system's same-class detections
    EventRecord event;
};

struct Cost {
    std::size_t clusters = 0;
    double az_scatter = 0.0;
    double dist_scatter = 0.0;

    bool operator<(const Cost& o) const {
        if (clusters != o.clusters) {
            return clusters < o.clusters;
        }
        if (az_scatter != o.az_scatter) {
            return az_scatter < o.az_scatter;
        }
        return dist_scatter < o.dist_scatter;
    }
};

double scatter(const std::vector<double>& values) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double s = 0.0;
    for (double v : values) {
        s += (v - mean) * (v - mean);
    }
    return s;
}

// Mean written as reference plus mean offset: exact for identical members
// and exactly sign-symmetric.
double anchored_mean(const std::vector<double>& values) {
    const double ref = values.front();
    double offset = 0.0;
    for (double v : values) {
        offset += v - ref;
    }
    const double m = ref + offset / static_cast<double>(values.size());
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return std::clamp(m, *lo, *hi);
}

/// Optimal partition of one group; returns clusters as member index lists.
std::vector<std::vector<std::size_t>> partition(const std::vector<Detection>& group, double assoc_deg) {
    const std::size_t n = group.size();
    const std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<char> valid(full + 1, 0);
    std::vector<double> az_cost(full + 1, 0.0), dist_cost(full + 1, 0.0);
    for (std::size_t mask = 1; mask <= full; ++mask) {
        std::vector<double> az, dist;
        std::vector<std::size_t> systems;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1u) {
                az.push_back(group[i].event.azimuth_deg);
                dist.push_back(group[i].event.distance_m);
                systems.push_back(group[i].system);
            }
        }
        std::sort(systems.begin(), systems.end());
        if (std::adjacent_find(systems.begin(), systems.end()) != systems.end()) {
            continue;
        }
        const auto [lo, hi] = std::minmax_element(az.begin(), az.end());
        if (*hi - *lo > assoc_deg) {
            continue;
        }
        valid[mask] = 1;
        az_cost[mask] = scatter(az);
        dist_cost[mask] = scatter(dist);
    }

    std::vector<Cost> best(full + 1);
    std::vector<std::size_t> choice(full + 1, 0);
    for (std::size_t mask = 1; mask <= full; ++mask) {
        const std::size_t low = mask & (~mask + 1);
        const std::size_t rest = mask ^ low;
        bool found = false;
        // Every submask of `rest`, joined with the lowest member.
        for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
            const std::size_t cluster = sub | low;
            if (valid[cluster]) {
                const auto& r = best[mask ^ cluster];
                Cost c{r.clusters + 1, r.az_scatter + az_cost[cluster], r.dist_scatter + dist_cost[cluster]};
                if (!found || c < best[mask]) {
                    best[mask] = c;
                    choice[mask] = cluster;
                    found = true;
                }
            }
            if (sub == 0) {
                break;
            }
        }
    }

    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t mask = full; mask != 0; mask ^= choice[mask]) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (choice[mask] >> i & 1u) {
                members.push_back(i);
            }
        }
        clusters.push_back(std::move(members));
    }
    return clusters;
}

struct Cluster {
    std::vector<const Detection*> members;  // sorted by (system, order)
    double az_spread = 0.0;                 // mean |az - centroid|
};

std::vector<EventRecord> fuse_class(std::vector<Detection> dets, bool single_system, const EnsembleOptions& opt) {
    std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.system, a.order) < std::tie(b.system, b.order);
    });
    // Groups of detections chained by azimuth gaps no wider than assoc_deg;
    // no cluster can straddle two groups.
    std::vector<std::size_t> by_az(dets.size());
    std::iota(by_az.begin(), by_az.end(), 0);
    std::stable_sort(by_az.begin(), by_az.end(), [&dets](std::size_t a, std::size_t b) {
        return dets[a].event.azimuth_deg < dets[b].event.azimuth_deg;
    });
    std::vector<std::size_t> group_of(dets.size(), 0);
    std::size_t groups = 0;
    for (std::size_t k = 0; k < by_az.size(); ++k) {
        if (k > 0 && dets[by_az[k]].event.azimuth_deg - dets[by_az[k - 1]].event.azimuth_deg > opt.assoc_deg) {
            ++groups;
        }
        group_of[by_az[k]] = groups;
    }

    std::vector<Cluster> clusters;
    for (std::size_t g = 0; g <= groups && !dets.empty(); ++g) {
        std::vector<Detection> group;
        std::vector<std::size_t> members_idx;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (group_of[i] == g) {
                group.push_back(dets[i]);
                members_idx.push_back(i);
            }
        }
        if (group.size() > kMaxGroupSize) {
            throw Error("ensemble: " + std::to_string(group.size()) + " mutually close detections of one class in frame " +
                        std::to_string(group.front().event.frame) + " exceed the limit of " +
                        std::to_string(kMaxGroupSize));
        }
        for (const auto& part : partition(group, opt.assoc_deg)) {
            Cluster c;
            for (auto i : part) {
                c.members.push_back(&dets[members_idx[i]]);
            }
            clusters.push_back(std::move(c));
        }
    }

    std::vector<Cluster> eligible;
    for (auto& c : clusters) {
        bool agree = single_system;
        for (std::size_t i = 0; i < c.members.size() && !agree; ++i) {
            for (std::size_t j = i + 1; j < c.members.size() && !agree; ++j) {
                agree = std::abs(c.members[i]->event.azimuth_deg - c.members[j]->event.azimuth_deg) <= opt.doa_gate_deg;
            }
        }
        if (!agree) {
            continue;
        }
        std::vector<double> az;
        for (const auto* m : c.members) {
            az.push_back(m->event.azimuth_deg);
        }
        const double centroid = anchored_mean(az);
        for (double a : az) {
            c.az_spread += std::abs(a - centroid);
        }
        c.az_spread /= static_cast<double>(az.size());
        eligible.push_back(std::move(c));
    }
    auto key = [](const Cluster& c) { return std::make_pair(c.members.front()->system, c.members.front()->order); };
    std::stable_sort(eligible.begin(), eligible.end(), [&key](const Cluster& a, const Cluster& b) {
        if (a.members.size() != b.members.size()) {
            return a.members.size() > b.members.size();
        }
        if (a.az_spread != b.az_spread) {
            return a.az_spread < b.az_spread;
        }
        return key(a) < key(b);
    });
    if (eligible.size() > opt.max_events) {
        eligible.resize(opt.max_events);
    }
    std::sort(eligible.begin(), eligible.end(), [&key](const Cluster& a, const Cluster& b) { return key(a) < key(b); });

    std::vector<EventRecord> out;
    std::vector<int> used_ids;
    for (const auto& c : eligible) {
        std::vector<double> az, dist;
        bool onscreen = false;
        for (const auto* m : c.members) {
            az.push_back(m->event.azimuth_deg);
            dist.push_back(m->event.distance_m);
            onscreen = onscreen || m->event.onscreen;
        }
        EventRecord e = c.members.front()->event;
        e.azimuth_deg = anchored_mean(az);
        e.distance_m = anchored_mean(dist);
        e.onscreen = onscreen;
        while (std::find(used_ids.begin(), used_ids.end(), e.source_id) != used_ids.end()) {
            ++e.source_id;
        }
        used_ids.push_back(e.source_id);
        out.push_back(e);
    }
    return out;
}

}  // namespace

FrameEvents ensemble(const std::vector<SystemPredictions>& systems, const accddoa::ClassMap& class_map,
                     const EnsembleOptions& options) {
    if (systems.empty()) {
        throw Error("ensemble: no systems given");
    }
    const auto frames = systems.front().frames.size();
    for (const auto& s : systems) {
        if (s.frames.size() != frames) {
            throw Error("ensemble: system '" + s.system_id + "' has " + std::to_string(s.frames.size()) +
                        " frames, expected " + std::to_string(frames));
        }
    }
    if (!(options.doa_gate_deg >= 0.0) || !(options.assoc_deg >= 0.0)) {
        throw Error("ensemble: gate and association radius must be non-negative");
    }
    const auto n_classes = class_map.size();
    FrameEvents out(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        std::vector<std::vector<Detection>> per_class(n_classes);
        for (std::size_t s = 0; s < systems.size(); ++s) {
            std::vector<std::size_t> seen(n_classes, 0);
            for (const auto& e : systems[s].frames[t]) {
                if (e.class_index < 0 || static_cast<std::size_t>(e.class_index) >= n_classes) {
                    throw Error("ensemble: unknown class index " + std::to_string(e.class_index) + " in system '" +
                                systems[s].system_id + "'");
                }
                const auto c = static_cast<std::size_t>(e.class_index);
                per_class[c].push_back(Detection{s, seen[c]++, e});
            }
        }
        for (std::size_t c = 0; c < n_classes; ++c) {
            if (per_class[c].empty()) {
                continue;
            }
            auto fused = fuse_class(std::move(per_class[c]), class_map.is_single_system(static_cast<int>(c)), options);
            for (auto& e : fused) {
                e.frame = static_cast<int>(t);
                out[t].push_back(e);
            }
        }
        std::sort(out[t].begin(), out[t].end(), event_order);
    }
    return out;
}

}  // namespace seld::ensemble
