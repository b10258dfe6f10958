// seld: command-line front end for the stereo SELD toolkit.

#include "seld/accddoa.hpp"
#include "seld/augment.hpp"
#include "seld/ensemble.hpp"
#include "seld/features.hpp"
#include "seld/io.hpp"
#include "seld/keypost.hpp"
#include "seld/metrics.hpp"
#include "seld/nn/gradcheck.hpp"
#include "seld/nn/model.hpp"
#include "seld/nn/train.hpp"
#include "seld/scenesynth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace seld;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string class_map_path;

    accddoa::ClassMap class_map() const {
        return class_map_path.empty() ? accddoa::ClassMap::dcase2025() : accddoa::ClassMap::load(class_map_path);
    }
};

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

void log(const std::string& msg) { std::cerr << msg << '\n'; }

/// Regular files with the given extension: the path itself, or the sorted
/// contents of a directory.
std::vector<fs::path> collect(const fs::path& in, const std::string& ext) {
    if (!fs::exists(in)) {
        throw Error(in.string() + ": no such file or directory");
    }
    if (!fs::is_directory(in)) {
        return {in};
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ext) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Runs f(0..n-1) on up to `threads` workers; rethrows the first failure in index order.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            f(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(precision);
    s << v;
    return s.str();
}

int last_frame(const std::vector<EventRecord>& events) {
    int last = -1;
    for (const auto& e : events) {
        last = std::max(last, e.frame);
    }
    return last;
}

/// CLAP and OWL-ViT fixtures for a clip: read from `dir` when given
/// (<stem>.clap.ssld, <stem>.owl.ssld), otherwise generated from the seed.
std::pair<io::EmbeddingFixture, io::EmbeddingFixture> fixtures_for(const std::string& stem, const std::string& dir,
                                                                     std::uint64_t seed) {
    if (!dir.empty()) {
        return {io::read_fixture(fs::path(dir) / (stem + ".clap.ssld"), io::Modality::ClapAudio),
                io::read_fixture(fs::path(dir) / (stem + ".owl.ssld"), io::Modality::OwlVitVisual)};
    }
    const auto base = derive_seed(seed, fnv1a(stem));
    return {io::make_fixture(io::Modality::ClapAudio, derive_seed(base, 1)),
            io::make_fixture(io::Modality::OwlVitVisual, derive_seed(base, 2))};
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    std::string out_dir;
    int n_scenes = 1;
    scenesynth::SceneSpec spec;
    bool segment = false;
    bool fixtures = false;
};

int run_synth(const Globals& g, const SynthArgs& a) {
    const auto class_map = g.class_map();
    if (a.n_scenes < 0) {
        throw Error("synth: --n-scenes must be non-negative");
    }
    a.spec.validate(class_map.size());
    log("synth: seed " + std::to_string(g.seed));
    fs::create_directories(a.out_dir);
    if (a.fixtures) {
        fs::create_directories(fs::path(a.out_dir) / "fixtures");
    }
    std::atomic<std::size_t> written{0};
    parallel_for(static_cast<std::size_t>(a.n_scenes), g.threads, [&](std::size_t i) {
        auto spec = a.spec;
        spec.seed = derive_seed(g.seed, i);
        char id[32];
        std::snprintf(id, sizeof(id), "scene_%04zu", i);
        spec.clip_id = id;
        const auto scene = scenesynth::generate_scene(spec, class_map);
        std::vector<scenesynth::Segment> items;
        if (a.segment) {
            items = scenesynth::segment_scene(scene.clip, scene.labels, spec);
        } else {
            items.push_back({scene.clip, scene.labels});
        }
        for (std::size_t k = 0; k < items.size(); ++k) {
            const auto& item = items[k];
            const auto stem = item.clip.clip_id;
            io::write_wav(item.clip, fs::path(a.out_dir) / (stem + ".wav"));
            io::write_labels(item.labels, fs::path(a.out_dir) / (stem + ".csv"));
            if (a.fixtures) {
                const auto [clap, owl] = fixtures_for(stem, "", g.seed);
                io::write_fixture(clap, fs::path(a.out_dir) / "fixtures" / (stem + ".clap.ssld"));
                io::write_fixture(owl, fs::path(a.out_dir) / "fixtures" / (stem + ".owl.ssld"));
            }
            ++written;
        }
    });
    log("synth: wrote " + std::to_string(written.load()) + " clips to " + a.out_dir);
    return 0;
}

// ------------------------------------------------------- extract-features

struct PathArgs {
    std::string in;
    std::string out_dir;
};

int run_extract(const Globals& g, const PathArgs& a) {
    const auto files = collect(a.in, ".wav");
    fs::create_directories(a.out_dir);
    parallel_for(files.size(), g.threads, [&](std::size_t i) {
        const auto clip = io::read_wav(files[i]);
        const auto feats = features::extract_features(clip);
        io::write_tensor(feats.data, fs::path(a.out_dir) / (files[i].stem().string() + ".ssld"));
    });
    log("extract-features: " + std::to_string(files.size()) + " files");
    return 0;
}

// ---------------------------------------------------------------- augment

int run_augment(const Globals& g, const PathArgs& a) {
    const auto wavs = collect(a.in, ".wav");
    fs::create_directories(a.out_dir);
    std::vector<augment::TrainingItem> items;
    for (const auto& wav : wavs) {
        augment::TrainingItem item;
        item.id = wav.stem().string();
        item.clip = io::read_wav(wav);
        const auto csv = fs::path(wav).replace_extension(".csv");
        if (!fs::exists(csv)) {
            throw Error("augment: " + wav.string() + " has no label file " + csv.string());
        }
        item.labels = io::read_labels(csv);
        const auto kp = fs::path(wav).replace_extension(".json");
        if (fs::exists(kp)) {
            item.keypoints = io::read_keypoints(kp);
        }
        items.push_back(std::move(item));
    }
    const auto out = augment::augment_dataset(items);
    parallel_for(out.size(), g.threads, [&](std::size_t i) {
        const auto base = fs::path(a.out_dir) / out[i].id;
        io::write_wav(out[i].clip, fs::path(base).replace_extension(".wav"));
        io::write_labels(out[i].labels, fs::path(base).replace_extension(".csv"));
        if (out[i].keypoints) {
            io::write_keypoints(*out[i].keypoints, fs::path(base).replace_extension(".json"));
        }
    });
    log("augment: " + std::to_string(items.size()) + " clips -> " + std::to_string(out.size()) + " items");
    return 0;
}

// ---------------------------------------------------------- encode-labels

struct EncodeArgs {
    std::string in;
    std::string out_dir;
    int frames = 0;
};

int run_encode(const Globals& g, const EncodeArgs& a) {
    const auto n_classes = static_cast<int>(g.class_map().size());
    const auto files = collect(a.in, ".csv");
    fs::create_directories(a.out_dir);
    parallel_for(files.size(), g.threads, [&](std::size_t i) {
        const auto events = io::read_labels(files[i]);
        const int last = last_frame(events);
        if (a.frames > 0 && last >= a.frames) {
            throw Error(files[i].string() + ": label frame " + std::to_string(last) + " beyond --frames " +
                        std::to_string(a.frames));
        }
        const auto frames = static_cast<std::size_t>(a.frames > 0 ? a.frames : last + 1);
        const auto encoded = accddoa::encode_sequence(group_by_frame(events, frames), n_classes);
        io::write_tensor(accddoa::to_tensor(encoded), fs::path(a.out_dir) / (files[i].stem().string() + ".ssld"));
    });
    log("encode-labels: " + std::to_string(files.size()) + " files");
    return 0;
}

// -------------------------------------------------------------- train-toy

struct TrainArgs {
    std::string data_dir;
    std::string fixture_dir;
    std::string out;
    std::string log_path;
    std::string preset = "toy";
    int epochs = 100;
    double lr0 = 1e-3;
    std::size_t batch = 32;
    bool weighted = false;
    bool audio_only = false;
    bool json = false;
};

int run_train(const Globals& g, const TrainArgs& a) {
    auto config = a.preset == "paper" ? nn::ModelConfig::paper() : nn::ModelConfig::toy();
    config.n_classes = g.class_map().size();
    config.audio_visual = !a.audio_only;
    log("train-toy: seed " + std::to_string(g.seed) + ", preset " + a.preset);

    const auto wavs = collect(a.data_dir, ".wav");
    if (wavs.empty()) {
        throw Error("train-toy: no .wav files in " + a.data_dir);
    }
    std::vector<nn::TrainingExample> data(wavs.size());
    parallel_for(wavs.size(), g.threads, [&](std::size_t i) {
        auto& ex = data[i];
        ex.features = features::extract_features(io::read_wav(wavs[i]));
        const auto out_frames = ex.features.frames() / 16;
        const auto events = io::read_labels(fs::path(wavs[i]).replace_extension(".csv"));
        if (last_frame(events) >= static_cast<int>(out_frames)) {
            throw Error(wavs[i].string() + ": labels extend past the " + std::to_string(out_frames) + " model frames");
        }
        ex.labels = group_by_frame(events, out_frames);
        auto [clap, owl] = fixtures_for(wavs[i].stem().string(), a.fixture_dir, g.seed);
        ex.clap = std::move(clap);
        ex.owl = std::move(owl);
    });

    nn::SeldModel<float> model(config, g.seed);
    nn::TrainConfig tc;
    tc.epochs = a.epochs;
    tc.lr0 = a.lr0;
    tc.batch = a.batch;
    tc.onscreen_weight = a.weighted ? accddoa::kOnscreenWeight : 1.0;
    tc.seed = derive_seed(g.seed, 0x7261696e);
    tc.on_epoch = [](int epoch, double lr, double loss) {
        log("epoch " + std::to_string(epoch) + "  lr " + std::to_string(lr) + "  loss " + fmt(loss, 6));
    };
    const auto history = nn::train_toy(model, data, tc);
    nn::save_checkpoint(model, a.out);
    if (!a.log_path.empty()) {
        std::ostringstream csv;
        csv.precision(17);
        csv << "epoch,lr,loss\n";
        for (const auto& e : history) {
            csv << e.epoch << ',' << e.lr << ',' << e.loss << '\n';
        }
        io::write_file(a.log_path, csv.str());
    }
    if (a.json) {
        nlohmann::ordered_json j;
        j["schema"] = 1;
        j["seed"] = g.seed;
        j["clips"] = data.size();
        j["parameters"] = model.parameter_count();
        auto epochs = nlohmann::ordered_json::array();
        for (const auto& e : history) {
            epochs.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"loss", e.loss}});
        }
        j["epochs"] = epochs;
        std::cout << j.dump(2) << '\n';
    }
    return 0;
}

// ------------------------------------------------------------------ infer

struct InferArgs {
    std::string model;
    std::string in;
    std::string fixture_dir;
    std::string out_dir;
    double act_threshold = accddoa::kActivityThreshold;
    double on_threshold = accddoa::kOnscreenThreshold;
};

int run_infer(const Globals& g, const InferArgs& a) {
    auto model = nn::load_checkpoint(a.model);
    const auto files = collect(a.in, ".ssld");
    fs::create_directories(a.out_dir);
    parallel_for(files.size(), g.threads, [&](std::size_t i) {
        const auto stem = files[i].stem().string();
        const auto feats = features::as_feature_tensor(io::read_tensor(files[i]));
        const auto [clap, owl] = fixtures_for(stem, a.fixture_dir, g.seed);
        const auto frames = nn::infer(*model, feats, clap, &owl);
        const auto events = flatten(accddoa::decode_sequence(frames, a.act_threshold, a.on_threshold));
        io::write_labels(events, fs::path(a.out_dir) / (stem + ".csv"));
    });
    log("infer: " + std::to_string(files.size()) + " files");
    return 0;
}

// --------------------------------------------------------------- ensemble

struct EnsembleArgs {
    std::vector<std::string> inputs;
    std::string out;
    std::string single_system;
    ensemble::EnsembleOptions options;
};

int run_ensemble(const Globals& g, const EnsembleArgs& a) {
    auto class_map = g.class_map();
    if (!a.single_system.empty()) {
        class_map.single_system_classes.clear();
        std::stringstream ss(a.single_system);
        for (std::string name; std::getline(ss, name, ',');) {
            if (!name.empty()) {
                class_map.single_system_classes.push_back(class_map.index_of(name));
            }
        }
    }
    std::vector<std::vector<EventRecord>> raw;
    int last = -1;
    for (const auto& path : a.inputs) {
        raw.push_back(io::read_labels(path));
        last = std::max(last, last_frame(raw.back()));
    }
    std::vector<ensemble::SystemPredictions> systems;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        systems.push_back({a.inputs[i], group_by_frame(raw[i], static_cast<std::size_t>(last + 1))});
    }
    const auto fused = ensemble::ensemble(systems, class_map, a.options);
    io::write_labels(flatten(fused), a.out);
    log("ensemble: " + std::to_string(systems.size()) + " systems -> " + a.out);
    return 0;
}

// ------------------------------------------------------------ postprocess

struct PostArgs {
    std::string pred;
    std::string keypoints;
    std::string out;
    keypost::KeypostOptions options;
};

int run_postprocess(const Globals& g, const PostArgs& a) {
    const auto events = io::read_labels(a.pred);
    const auto kps = io::read_keypoints(a.keypoints);
    const auto frames = group_by_frame(events);
    const auto out = keypost::apply_keypoint_override(frames, kps, g.class_map(), a.options);
    io::write_labels(flatten(out), a.out);
    return 0;
}

// --------------------------------------------------------------- evaluate

struct EvalArgs {
    std::string pred;
    std::string ref;
    std::string json_path;
};

std::string opt_text(const std::optional<double>& v, int precision) {
    return v ? fmt(*v, precision) : std::string("n/a (no matches)");
}

int run_evaluate(const Globals& g, const EvalArgs& a, bool json) {
    const auto class_map = g.class_map();
    const auto report = metrics::score_files(a.pred, a.ref, class_map.size());
    if (json) {
        const auto text = report.to_json(class_map.names) + "\n";
        if (a.json_path.empty()) {
            std::cout << text;
        } else {
            io::write_file(a.json_path, text);
        }
        return 0;
    }
    std::cout << "F1 (<=20deg/1)      " << fmt(report.f1_le20_1) << '\n'
              << "F1 on-screen        " << fmt(report.f1_le20_1_on) << '\n'
              << "DOAE (deg)          " << opt_text(report.doae_deg, 2) << '\n'
              << "RDE                 " << opt_text(report.rde, 4) << '\n'
              << "On/off accuracy     " << opt_text(report.onoff_acc, 4) << '\n'
              << "matched pairs       " << report.matched_pairs << '\n';
    std::cout << "\nclass                 TP     FP     FN     F1\n";
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& k = report.per_class[c];
        if (k.refs + k.preds == 0) {
            continue;
        }
        char line[160];
        std::snprintf(line, sizeof(line), "%-20s %5ld  %5ld  %5ld  %.4f\n", class_map.names[c].c_str(), k.tp, k.fp,
                      k.fn, k.f1());
        std::cout << line;
    }
    return 0;
}

// -------------------------------------------------------------- gradcheck

struct GradArgs {
    std::string ops = "all";
    int n_seeds = 3;
    double tolerance = 1e-4;
    bool json = false;
};

int run_gradcheck(const Globals& g, const GradArgs& a) {
    nn::GradcheckOptions opt;
    opt.tolerance = a.tolerance;
    std::vector<nn::GradcheckResult> results;
    for (int k = 0; k < a.n_seeds; ++k) {
        const auto seed = g.seed + static_cast<std::uint64_t>(k);
        if (a.ops == "all" || a.ops == "ops") {
            auto r = nn::gradcheck_ops(seed, opt);
            results.insert(results.end(), r.begin(), r.end());
        }
        if (a.ops == "all" || a.ops == "blocks") {
            auto r = nn::gradcheck_blocks(seed, opt);
            results.insert(results.end(), r.begin(), r.end());
        }
    }
    // Worst error per check across seeds.
    std::vector<nn::GradcheckResult> worst;
    for (const auto& r : results) {
        auto it = std::find_if(worst.begin(), worst.end(), [&r](const auto& w) { return w.name == r.name; });
        if (it == worst.end()) {
            worst.push_back(r);
        } else if (r.max_error > it->max_error) {
            *it = r;
        }
    }
    const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
    if (a.json) {
        nlohmann::ordered_json j;
        j["schema"] = 1;
        j["seeds"] = a.n_seeds;
        j["tolerance"] = a.tolerance;
        auto checks = nlohmann::ordered_json::array();
        for (const auto& w : worst) {
            checks.push_back({{"name", w.name}, {"max_rel_error", w.max_error}, {"passed", w.passed}});
        }
        j["checks"] = checks;
        j["passed"] = ok;
        std::cout << j.dump(2) << '\n';
    } else {
        char line[160];
        for (const auto& w : worst) {
            std::snprintf(line, sizeof(line), "%-32s %.3e  %s\n", w.name.c_str(), w.max_error, w.passed ? "ok" : "FAIL");
            std::cout << line;
        }
        std::cout << (ok ? "all checks within " : "some checks exceed ") << a.tolerance << " over " << a.n_seeds
                  << " seeds\n";
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stereo sound event localization and detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");

    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random choice");
    app.add_option("--threads", g.threads, "Worker threads across files (1 = serial)")->check(CLI::PositiveNumber);
    app.add_option("--class-map", g.class_map_path, "Class map JSON (default: built-in 13 classes)");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate synthetic stereo scenes (WAV + label CSV)");
    s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
    s->add_option("--n-scenes", synth.n_scenes, "Number of scenes");
    s->add_option("--duration", synth.spec.duration_s, "Scene length in seconds");
    s->add_option("--mean-events", synth.spec.mean_events, "Mean events per scene");
    s->add_option("--std-events", synth.spec.std_events, "Standard deviation of events per scene");
    s->add_option("--noise-db-mean", synth.spec.noise_floor_db_mean, "Mean noise floor (dB)");
    s->add_option("--noise-db-std", synth.spec.noise_floor_db_std, "Noise floor standard deviation (dB)");
    s->add_option("--onscreen-prob", synth.spec.onscreen_prob, "Probability that an event is on-screen");
    s->add_option("--moving-prob", synth.spec.moving_prob, "Probability that an event moves");
    s->add_flag("--segment", synth.segment, "Write non-silent fixed-length segments instead of whole scenes");
    s->add_option("--segment-len", synth.spec.segment_len_s, "Segment length in seconds");
    s->add_option("--segment-hop", synth.spec.segment_hop_s, "Segment hop in seconds");
    s->add_flag("--fixtures", synth.fixtures, "Also write CLAP/OWL-ViT embedding fixtures under fixtures/");

    PathArgs extract;
    auto* x = app.add_subcommand("extract-features", "Compute 4 x T x 64 feature tensors from WAV files");
    x->add_option("--in", extract.in, "WAV file or directory")->required();
    x->add_option("--out-dir", extract.out_dir, "Output directory for .ssld tensors")->required();

    PathArgs aug;
    auto* au = app.add_subcommand("augment", "Channel-swap augmentation of a WAV + CSV (+ keypoint JSON) directory");
    au->add_option("--in-dir", aug.in, "Input directory")->required();
    au->add_option("--out-dir", aug.out_dir, "Output directory (originals and _acs copies)")->required();

    EncodeArgs encode;
    auto* en = app.add_subcommand("encode-labels", "Encode label CSVs as multi-ACCDDOA tensors (3 x C x 4 x T)");
    en->add_option("--in", encode.in, "Label CSV file or directory")->required();
    en->add_option("--out-dir", encode.out_dir, "Output directory")->required();
    en->add_option("--frames", encode.frames, "Frames per clip (0: last labelled frame + 1)");

    TrainArgs train;
    auto* tr = app.add_subcommand("train-toy", "Train the SELD model on WAV + CSV clips");
    tr->add_option("--data-dir", train.data_dir, "Directory of WAV + CSV clips")->required();
    tr->add_option("--fixture-dir", train.fixture_dir, "Directory of <stem>.clap.ssld / <stem>.owl.ssld (default: generated)");
    tr->add_option("--out", train.out, "Checkpoint path")->required();
    tr->add_option("--log", train.log_path, "Per-epoch CSV log (epoch,lr,loss)");
    tr->add_option("--preset", train.preset, "Model size")->check(CLI::IsMember({"toy", "paper"}));
    tr->add_option("--epochs", train.epochs, "Epochs");
    tr->add_option("--lr0", train.lr0, "Initial learning rate (decays 5% per epoch after epoch 30)");
    tr->add_option("--batch", train.batch, "Batch size")->check(CLI::PositiveNumber);
    tr->add_flag("--weighted", train.weighted, "Weight on-screen BCE by 4.0 for on-screen references");
    tr->add_flag("--audio-only", train.audio_only, "Replace the audio-visual blocks with a plain Conformer");
    tr->add_flag("--json", train.json, "Print the training log as JSON");

    InferArgs infer;
    auto* in = app.add_subcommand("infer", "Predict label CSVs from feature tensors");
    in->add_option("--model", infer.model, "Checkpoint")->required();
    in->add_option("--in", infer.in, "Feature .ssld file or directory")->required();
    in->add_option("--fixture-dir", infer.fixture_dir, "Directory of embedding fixtures (default: generated)");
    in->add_option("--out-dir", infer.out_dir, "Output directory")->required();
    in->add_option("--act-threshold", infer.act_threshold, "Activity threshold on |(x, y)|");
    in->add_option("--on-threshold", infer.on_threshold, "On-screen probability threshold");

    EnsembleArgs ens;
    auto* es = app.add_subcommand("ensemble", "Fuse label CSVs from several systems");
    es->add_option("--in", ens.inputs, "Prediction CSVs, one per system")->required()->expected(1, -1)->default_str("");
    es->add_option("--out", ens.out, "Output CSV")->required();
    es->add_option("--gate-deg", ens.options.doa_gate_deg, "Azimuth agreement gate between two systems");
    es->add_option("--assoc-deg", ens.options.assoc_deg, "Maximum azimuth span of an association cluster");
    es->add_option("--max-events", ens.options.max_events, "Events kept per class and frame");
    es->add_option("--single-system-classes", ens.single_system,
                   "Comma-separated classes accepted from one system (default: class map, bell,knock)");

    PostArgs post;
    auto* pp = app.add_subcommand("postprocess", "Keypoint-based on-screen override");
    pp->add_option("--pred", post.pred, "Prediction CSV")->required();
    pp->add_option("--keypoints", post.keypoints, "Keypoint JSON / JSON lines")->required();
    pp->add_option("--out", post.out, "Output CSV")->required();
    pp->add_option("--fov-deg", post.options.fov_deg, "Horizontal camera field of view");
    pp->add_option("--gate-deg", post.options.gate_deg, "Azimuth gate to a keypoint");
    pp->add_option("--min-conf", post.options.min_confidence, "Minimum keypoint confidence");
    pp->add_option("--max-frame-gap", post.options.max_frame_gap, "Largest label-frame distance to a keypoint frame");

    EvalArgs eval;
    auto* ev = app.add_subcommand("evaluate", "Score predictions against references");
    ev->add_option("--pred", eval.pred, "Prediction CSV/SSLD file or directory")->required();
    ev->add_option("--ref", eval.ref, "Reference CSV/SSLD file or directory")->required();
    auto* json_opt = ev->add_option("--json", eval.json_path, "Emit the JSON report (to stdout, or to the given path)")
                         ->expected(0, 1);

    GradArgs grad;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and block");
    gc->add_option("--ops", grad.ops, "What to check")->check(CLI::IsMember({"all", "ops", "blocks"}));
    gc->add_option("--n-seeds", grad.n_seeds, "Seeds, starting at --seed")->check(CLI::PositiveNumber);
    gc->add_option("--tolerance", grad.tolerance, "Maximum relative error");
    gc->add_flag("--json", grad.json, "Emit JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*s) return run_synth(g, synth);
        if (*x) return run_extract(g, extract);
        if (*au) return run_augment(g, aug);
        if (*en) return run_encode(g, encode);
        if (*tr) return run_train(g, train);
        if (*in) return run_infer(g, infer);
        if (*es) return run_ensemble(g, ens);
        if (*pp) return run_postprocess(g, post);
        if (*ev) return run_evaluate(g, eval, json_opt->count() > 0);
        if (*gc) return run_gradcheck(g, grad);
    } catch (const seld::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
