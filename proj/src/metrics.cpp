#include "seld/metrics.hpp"

#include "seld/accddoa.hpp"
#include "seld/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace seld::metrics {

std::vector<int> hungarian(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
    if (cost.size() != rows * cols) {
        throw Error("hungarian: cost matrix size mismatch");
    }
    if (rows == 0 || cols == 0) {
        return std::vector<int>(rows, -1);
    }
    const bool transposed = rows > cols;
    const std::size_t n = transposed ? cols : rows;  // n <= m
    const std::size_t m = transposed ? rows : cols;
    auto a = [&](std::size_t i, std::size_t j) { return transposed ? cost[j * cols + i] : cost[i * cols + j]; };

    // Shortest augmenting path with potentials, 1-based.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assign(rows, -1);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] == 0) {
            continue;
        }
        if (transposed) {
            assign[j - 1] = static_cast<int>(p[j] - 1);
        } else {
            assign[p[j] - 1] = static_cast<int>(j - 1);
        }
    }
    return assign;
}

std::vector<Match> match_frame(const std::vector<EventRecord>& preds, const std::vector<EventRecord>& refs) {
    std::vector<double> cost(preds.size() * refs.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (std::size_t j = 0; j < refs.size(); ++j) {
            cost[i * refs.size() + j] = std::abs(preds[i].azimuth_deg - refs[j].azimuth_deg);
        }
    }
    const auto assign = hungarian(cost, preds.size(), refs.size());
    std::vector<Match> out;
    for (std::size_t i = 0; i < assign.size(); ++i) {
        if (assign[i] >= 0) {
            out.push_back(Match{i, static_cast<std::size_t>(assign[i])});
        }
    }
    return out;
}

namespace {

double f1_of(long tp, long fp, long fn) {
    const long denom = 2 * tp + fp + fn;
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

double ClassCounts::f1() const { return f1_of(tp, fp, fn); }
double ClassCounts::f1_on() const { return f1_of(tp_on, fp_on, fn_on); }

void accumulate(const FrameEvents& preds, const FrameEvents& refs, std::vector<ClassCounts>& per_class) {
    if (preds.size() != refs.size()) {
        throw Error("score: frame misalignment, " + std::to_string(preds.size()) + " prediction frames vs " +
                    std::to_string(refs.size()) + " reference frames");
    }
    const auto n_classes = per_class.size();
    for (std::size_t t = 0; t < preds.size(); ++t) {
        std::vector<std::vector<EventRecord>> p(n_classes), r(n_classes);
        auto split = [n_classes](const std::vector<EventRecord>& events, auto& out, const char* what) {
            for (const auto& e : events) {
                if (e.class_index < 0 || static_cast<std::size_t>(e.class_index) >= n_classes) {
                    throw Error(std::string("score: ") + what + " class index " + std::to_string(e.class_index) +
                                " outside [0, " + std::to_string(n_classes) + ")");
                }
                out[static_cast<std::size_t>(e.class_index)].push_back(e);
            }
        };
        split(preds[t], p, "prediction");
        split(refs[t], r, "reference");
        for (std::size_t c = 0; c < n_classes; ++c) {
            auto& counts = per_class[c];
            counts.preds += static_cast<long>(p[c].size());
            counts.refs += static_cast<long>(r[c].size());
            long tp = 0, tp_on = 0;
            for (const auto& m : match_frame(p[c], r[c])) {
                const auto& pe = p[c][m.pred];
                const auto& re = r[c][m.ref];
                const double doa = std::abs(pe.azimuth_deg - re.azimuth_deg);
                const double rel = std::abs(pe.distance_m - re.distance_m) / re.distance_m;
                ++counts.matched;
                counts.doa_error_sum += doa;
                counts.rel_dist_error_sum += rel;
                const bool same_screen = pe.onscreen == re.onscreen;
                counts.onoff_correct += same_screen ? 1 : 0;
                if (doa <= kDoaThresholdDeg && rel <= kRelDistThreshold) {
                    ++tp;
                    tp_on += same_screen ? 1 : 0;
                }
            }
            const auto np = static_cast<long>(p[c].size()), nr = static_cast<long>(r[c].size());
            counts.tp += tp;
            counts.fp += np - tp;
            counts.fn += nr - tp;
            counts.tp_on += tp_on;
            counts.fp_on += np - tp_on;
            counts.fn_on += nr - tp_on;
        }
    }
}

MetricsReport summarize(const std::vector<ClassCounts>& per_class) {
    MetricsReport report;
    report.per_class = per_class;
    double f1 = 0.0, f1_on = 0.0, doa = 0.0, rde = 0.0;
    long matched = 0, correct = 0;
    for (const auto& c : per_class) {
        matched += c.matched;
        doa += c.doa_error_sum;
        rde += c.rel_dist_error_sum;
        correct += c.onoff_correct;
        if (c.refs + c.preds > 0) {
            ++report.scored_classes;
            f1 += c.f1();
            f1_on += c.f1_on();
        }
    }
    if (report.scored_classes == 0) {
        report.f1_le20_1 = 1.0;
        report.f1_le20_1_on = 1.0;
    } else {
        report.f1_le20_1 = f1 / static_cast<double>(report.scored_classes);
        report.f1_le20_1_on = f1_on / static_cast<double>(report.scored_classes);
    }
    report.matched_pairs = static_cast<std::size_t>(matched);
    if (matched > 0) {
        const auto n = static_cast<double>(matched);
        report.doae_deg = doa / n;
        report.rde = rde / n;
        report.onoff_acc = static_cast<double>(correct) / n;
    }
    return report;
}

MetricsReport score(const FrameEvents& preds, const FrameEvents& refs, std::size_t n_classes) {
    std::vector<ClassCounts> per_class(n_classes);
    accumulate(preds, refs, per_class);
    return summarize(per_class);
}

std::string MetricsReport::to_json(const std::vector<std::string>& class_names) const {
    using nlohmann::ordered_json;
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    ordered_json j;
    j["schema"] = 1;
    j["f1_le20_1"] = f1_le20_1;
    j["f1_le20_1_on"] = f1_le20_1_on;
    j["doae_deg"] = opt(doae_deg);
    j["rde"] = opt(rde);
    j["onoff_acc"] = opt(onoff_acc);
    j["matched_pairs"] = matched_pairs;
    j["scored_classes"] = scored_classes;
    j["conventions"] = {{"frame_rate_hz", kLabelFramesPerSecond},
                        {"matching", "hungarian on absolute azimuth difference per frame and class"},
                        {"doa_threshold_deg", kDoaThresholdDeg},
                        {"rel_dist_threshold", kRelDistThreshold},
                        {"f1_averaging", "macro over classes with at least one reference or prediction"},
                        {"doae_rde_onoff_population", "all matched pairs"}};
    auto classes = ordered_json::array();
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const auto& k = per_class[c];
        ordered_json e;
        e["class_index"] = c;
        if (c < class_names.size()) {
            e["name"] = class_names[c];
        }
        e["tp"] = k.tp;
        e["fp"] = k.fp;
        e["fn"] = k.fn;
        e["tp_on"] = k.tp_on;
        e["fp_on"] = k.fp_on;
        e["fn_on"] = k.fn_on;
        e["matched"] = k.matched;
        e["doa_error_sum"] = k.doa_error_sum;
        e["rel_dist_error_sum"] = k.rel_dist_error_sum;
        e["onoff_correct"] = k.onoff_correct;
        e["refs"] = k.refs;
        e["preds"] = k.preds;
        classes.push_back(e);
    }
    j["per_class"] = classes;
    return j.dump(2);
}

std::vector<EventRecord> read_events(const std::filesystem::path& path) {
    if (path.extension() == ".ssld") {
        const auto frames = accddoa::from_tensor(io::read_tensor(path));
        return flatten(accddoa::decode_sequence(frames));
    }
    return io::read_labels(path);
}

namespace {

int last_frame(const std::vector<EventRecord>& events) {
    int last = -1;
    for (const auto& e : events) {
        last = std::max(last, e.frame);
    }
    return last;
}

void accumulate_pair(const std::vector<EventRecord>& pred, const std::vector<EventRecord>& ref,
                     std::vector<ClassCounts>& per_class) {
    const auto frames = static_cast<std::size_t>(std::max(last_frame(pred), last_frame(ref)) + 1);
    accumulate(group_by_frame(pred, frames), group_by_frame(ref, frames), per_class);
}

std::map<std::string, std::filesystem::path> csv_by_stem(const std::filesystem::path& dir) {
    std::map<std::string, std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".csv" || ext == ".ssld")) {
            const auto stem = entry.path().stem().string();
            if (out.count(stem)) {
                throw Error("evaluate: clip '" + stem + "' appears twice in " + dir.string());
            }
            out[stem] = entry.path();
        }
    }
    return out;
}

}  // namespace

MetricsReport score_files(const std::filesystem::path& pred, const std::filesystem::path& ref,
                          std::size_t n_classes) {
    namespace fs = std::filesystem;
    std::vector<ClassCounts> per_class(n_classes);
    const bool pred_dir = fs::is_directory(pred), ref_dir = fs::is_directory(ref);
    if (pred_dir != ref_dir) {
        throw Error("evaluate: --pred and --ref must both be files or both be directories");
    }
    if (!pred_dir) {
        accumulate_pair(read_events(pred), read_events(ref), per_class);
        return summarize(per_class);
    }
    const auto preds = csv_by_stem(pred);
    const auto refs = csv_by_stem(ref);
    for (const auto& [stem, path] : preds) {
        if (!refs.count(stem)) {
            throw Error("evaluate: prediction clip '" + stem + "' has no reference in " + ref.string());
        }
    }
    for (const auto& [stem, path] : refs) {
        const auto it = preds.find(stem);
        const auto p = it == preds.end() ? std::vector<EventRecord>{} : read_events(it->second);
        accumulate_pair(p, read_events(path), per_class);
    }
    return summarize(per_class);
}

}  // namespace seld::metrics
