#include "seld/nn/model.hpp"

#include "io/binary.hpp"

#include <json.hpp>

namespace seld::nn {

using json = nlohmann::json;

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.d_model = 512;
    c.n_heads = 8;
    c.conv_kernel = 51;
    c.cnn_channels = {64, 128, 256, 512};
    return c;
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error("invalid model config: " + what); };
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
        fail("d_model " + std::to_string(d_model) + " not divisible by n_heads " + std::to_string(n_heads));
    }
    if (conv_kernel % 2 == 0) {
        fail("conv_kernel must be odd");
    }
    if (cnn_channels.size() != 4) {
        fail("cnn_channels needs four entries");
    }
    if (cnn_channels.back() != d_model) {
        fail("last CNN width must equal d_model");
    }
    if (n_tracks != static_cast<std::size_t>(kMaxTracks)) {
        fail("n_tracks must be 3");
    }
    if (n_classes == 0 || clap_dim == 0 || owl_dim == 0) {
        fail("zero-sized dimension");
    }
}

std::string ModelConfig::to_json() const {
    json j{{"d_model", d_model},
           {"n_heads", n_heads},
           {"conv_kernel", conv_kernel},
           {"seld_conformer_layers", seld_conformer_layers},
           {"audio_cmc_layers", audio_cmc_layers},
           {"av_cmc_layers", av_cmc_layers},
           {"cnn_channels", cnn_channels},
           {"n_tracks", n_tracks},
           {"n_classes", n_classes},
           {"audio_visual", audio_visual},
           {"clap_dim", clap_dim},
           {"owl_dim", owl_dim}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
    ModelConfig c;
    try {
        const auto j = json::parse(text);
        if (j.contains("preset")) {
            const auto preset = j.at("preset").get<std::string>();
            if (preset == "paper") {
                c = paper();
            } else if (preset != "toy") {
                throw Error("unknown model preset '" + preset + "'");
            }
        }
        auto get = [&j](const char* key, auto& field) {
            if (j.contains(key)) {
                j.at(key).get_to(field);
            }
        };
        get("d_model", c.d_model);
        get("n_heads", c.n_heads);
        get("conv_kernel", c.conv_kernel);
        get("seld_conformer_layers", c.seld_conformer_layers);
        get("audio_cmc_layers", c.audio_cmc_layers);
        get("av_cmc_layers", c.av_cmc_layers);
        get("cnn_channels", c.cnn_channels);
        get("n_tracks", c.n_tracks);
        get("n_classes", c.n_classes);
        get("audio_visual", c.audio_visual);
        get("clap_dim", c.clap_dim);
        get("owl_dim", c.owl_dim);
    } catch (const json::exception& e) {
        throw Error(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

template <typename Real>
SeldModel<Real>::SeldModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    const auto d = config_.d_model;
    std::size_t in = 4;
    for (auto ch : config_.cnn_channels) {
        cnn_.emplace_back(in, ch, rng);
        in = ch;
    }
    for (std::size_t i = 0; i < config_.seld_conformer_layers; ++i) {
        seld_conformer_.emplace_back(d, config_.n_heads, config_.conv_kernel, rng);
    }
    clap_proj_ = Linear<Real>(config_.clap_dim, d, rng);
    for (std::size_t i = 0; i < config_.audio_cmc_layers; ++i) {
        audio_cmc_.emplace_back(d, config_.n_heads, config_.conv_kernel, rng);
    }
    if (config_.audio_visual) {
        owl_proj_ = Linear<Real>(config_.owl_dim, d, rng);
        for (std::size_t i = 0; i < config_.av_cmc_layers; ++i) {
            av_cmc_.emplace_back(d, config_.n_heads, config_.conv_kernel, rng);
        }
    } else {
        for (std::size_t i = 0; i < config_.av_cmc_layers; ++i) {
            ao_conformer_.emplace_back(d, config_.n_heads, config_.conv_kernel, rng);
        }
    }
    head_hidden_ = Linear<Real>(d, d, rng);
    head_out_ = Linear<Real>(d, config_.output_width(), rng);
}

template <typename Real>
Tensor<Real> SeldModel<Real>::encode(const Tensor<Real>& features, bool training) {
    if (features.rank() != 3 || features.dim(0) != 4) {
        throw Error("model input must be [4, T, F], got " + to_string(features.shape()));
    }
    if (features.dim(1) % 16 != 0 || features.dim(2) % 16 != 0) {
        throw Error("model input frames and bins must be divisible by 16, got " + to_string(features.shape()));
    }
    auto h = features;
    for (auto& block : cnn_) {
        h = block(h, training);
    }
    // [C, T/16, F/16] -> mean over frequency -> [T/16, C]
    return transpose(mean_last(h));
}

template <typename Real>
Tensor<Real> SeldModel<Real>::forward(const Tensor<Real>& features, const Tensor<Real>& clap, const Tensor<Real>* owl,
                                      bool training) {
    auto x = encode(features, training);
    x = add(x, sinusoidal_positions<Real>(x.dim(0), config_.d_model));
    for (auto& block : seld_conformer_) {
        x = block(x, training);
    }
    auto beta = clap_proj_(clap);
    for (auto& block : audio_cmc_) {
        std::tie(x, beta) = block(x, beta, training);
    }
    if (config_.audio_visual) {
        if (owl == nullptr) {
            throw Error("audio-visual model needs a visual embedding fixture");
        }
        auto visual = owl_proj_(*owl);
        for (auto& block : av_cmc_) {
            std::tie(x, visual) = block(x, visual, training);
        }
    } else {
        for (auto& block : ao_conformer_) {
            x = block(x, training);
        }
    }
    return accddoa_activation(head_out_(relu(head_hidden_(x))));
}

template <typename Real>
StateDict<Real> SeldModel<Real>::state_dict() {
    StateDict<Real> sd;
    for (std::size_t i = 0; i < cnn_.size(); ++i) {
        cnn_[i].collect("cnn." + std::to_string(i), sd);
    }
    for (std::size_t i = 0; i < seld_conformer_.size(); ++i) {
        seld_conformer_[i].collect("conformer." + std::to_string(i), sd);
    }
    clap_proj_.collect("clap_proj", sd);
    for (std::size_t i = 0; i < audio_cmc_.size(); ++i) {
        audio_cmc_[i].collect("audio_cmc." + std::to_string(i), sd);
    }
    if (config_.audio_visual) {
        owl_proj_.collect("owl_proj", sd);
        for (std::size_t i = 0; i < av_cmc_.size(); ++i) {
            av_cmc_[i].collect("av_cmc." + std::to_string(i), sd);
        }
    } else {
        for (std::size_t i = 0; i < ao_conformer_.size(); ++i) {
            ao_conformer_[i].collect("ao_conformer." + std::to_string(i), sd);
        }
    }
    head_hidden_.collect("head.hidden", sd);
    head_out_.collect("head.out", sd);
    return sd;
}

template <typename Real>
std::size_t SeldModel<Real>::parameter_count() {
    std::size_t n = 0;
    for (const auto& [name, t] : state_dict().params) {
        n += t->numel();
    }
    return n;
}

template <typename Real>
Tensor<Real> to_tensor(const io::NdArray& array, bool requires_grad) {
    Shape shape(array.dims.begin(), array.dims.end());
    return Tensor<Real>(std::move(shape), std::vector<Real>(array.data.begin(), array.data.end()), requires_grad);
}

template <typename Real>
Tensor<Real> to_tensor(const io::EmbeddingFixture& fixture) {
    io::validate_fixture(fixture);
    return Tensor<Real>({fixture.tokens, fixture.dim}, std::vector<Real>(fixture.values.begin(), fixture.values.end()));
}

template <typename Real>
std::vector<accddoa::AccddoaFrame> to_frames(const Tensor<Real>& output, std::size_t n_classes) {
    const auto width = static_cast<std::size_t>(kMaxTracks) * n_classes * accddoa::kComponents;
    if (output.rank() != 2 || output.dim(1) != width) {
        throw Error("head output " + to_string(output.shape()) + " does not hold " + std::to_string(n_classes) +
                    " classes");
    }
    std::vector<accddoa::AccddoaFrame> frames(output.dim(0), accddoa::AccddoaFrame(static_cast<int>(n_classes)));
    auto v = output.data();
    for (std::size_t t = 0; t < frames.size(); ++t) {
        for (std::size_t i = 0; i < width; ++i) {
            frames[t].values[i] = static_cast<double>(v[t * width + i]);
        }
    }
    return frames;
}

template <typename Real>
std::vector<accddoa::AccddoaFrame> infer(SeldModel<Real>& model, const features::FeatureTensor& features,
                                         const io::EmbeddingFixture& clap, const io::EmbeddingFixture* owl) {
    NoGradGuard guard;
    const auto x = to_tensor<Real>(features.data);
    const auto c = to_tensor<Real>(clap);
    std::optional<Tensor<Real>> o;
    if (owl != nullptr && model.config().audio_visual) {
        o = to_tensor<Real>(*owl);
    }
    const auto out = model.forward(x, c, o ? &*o : nullptr, false);
    return to_frames(out, model.config().n_classes);
}

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'S', 'L', 'C'};
constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace

std::string encode_checkpoint(SeldModel<float>& model) {
    auto sd = model.state_dict();
    json manifest;
    manifest["config"] = json::parse(model.config().to_json());
    json entries = json::array();
    for (const auto& [name, t] : sd.params) {
        entries.push_back({{"name", name}, {"kind", "param"}});
    }
    for (const auto& [name, v] : sd.buffers) {
        entries.push_back({{"name", name}, {"kind", "buffer"}});
    }
    manifest["tensors"] = entries;
    const auto text = manifest.dump();

    std::string out(kCheckpointMagic, 4);
    io::detail::put(out, kCheckpointVersion);
    io::detail::put(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    auto append = [&out](io::NdArray arr) {
        const auto bytes = io::encode_tensor(arr);
        io::detail::put(out, static_cast<std::uint64_t>(bytes.size()));
        out += bytes;
    };
    for (const auto& [name, t] : sd.params) {
        io::NdArray arr;
        arr.dims.assign(t->shape().begin(), t->shape().end());
        if (arr.dims.empty()) {
            arr.dims.push_back(1);
        }
        arr.data.assign(t->data().begin(), t->data().end());
        append(std::move(arr));
    }
    for (const auto& [name, v] : sd.buffers) {
        io::NdArray arr;
        arr.dims = {static_cast<std::uint32_t>(v->size())};
        arr.data = *v;
        append(std::move(arr));
    }
    return out;
}

std::unique_ptr<SeldModel<float>> decode_checkpoint(std::string_view bytes) {
    io::detail::ByteReader r(bytes);
    if (r.take(4, "checkpoint magic") != std::string_view(kCheckpointMagic, 4)) {
        throw Error("checkpoint: bad magic");
    }
    if (const auto version = r.read<std::uint16_t>("checkpoint version"); version != kCheckpointVersion) {
        throw Error("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto manifest_len = r.read<std::uint32_t>("manifest length");
    json manifest;
    try {
        manifest = json::parse(r.take(manifest_len, "manifest"));
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint manifest: ") + e.what());
    }
    auto model = std::make_unique<SeldModel<float>>(ModelConfig::from_json(manifest.at("config").dump()), 0);
    auto sd = model->state_dict();
    const auto& entries = manifest.at("tensors");
    if (entries.size() != sd.params.size() + sd.buffers.size()) {
        throw Error("checkpoint: manifest lists " + std::to_string(entries.size()) + " tensors, model has " +
                    std::to_string(sd.params.size() + sd.buffers.size()));
    }
    auto next = [&r]() {
        const auto len = r.read<std::uint64_t>("tensor length");
        return io::decode_tensor(r.take(static_cast<std::size_t>(len), "tensor payload"));
    };
    std::size_t i = 0;
    for (auto& [name, t] : sd.params) {
        if (entries[i++].at("name").get<std::string>() != name) {
            throw Error("checkpoint: unexpected tensor order at '" + name + "'");
        }
        const auto arr = next();
        if (arr.data.size() != t->numel()) {
            throw Error("checkpoint: size mismatch for '" + name + "'");
        }
        std::copy(arr.data.begin(), arr.data.end(), t->mutable_data().begin());
    }
    for (auto& [name, v] : sd.buffers) {
        if (entries[i++].at("name").get<std::string>() != name) {
            throw Error("checkpoint: unexpected tensor order at '" + name + "'");
        }
        const auto arr = next();
        if (arr.data.size() != v->size()) {
            throw Error("checkpoint: size mismatch for '" + name + "'");
        }
        *v = arr.data;
    }
    if (r.remaining() != 0) {
        throw Error("checkpoint: trailing bytes");
    }
    return model;
}

void save_checkpoint(SeldModel<float>& model, const std::filesystem::path& path) {
    io::write_file(path, encode_checkpoint(model));
}

std::unique_ptr<SeldModel<float>> load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path));
}

template class SeldModel<float>;
template class SeldModel<double>;
template Tensor<float> to_tensor<float>(const io::NdArray&, bool);
template Tensor<double> to_tensor<double>(const io::NdArray&, bool);
template Tensor<float> to_tensor<float>(const io::EmbeddingFixture&);
template Tensor<double> to_tensor<double>(const io::EmbeddingFixture&);
template std::vector<accddoa::AccddoaFrame> to_frames(const Tensor<float>&, std::size_t);
template std::vector<accddoa::AccddoaFrame> to_frames(const Tensor<double>&, std::size_t);
template std::vector<accddoa::AccddoaFrame> infer(SeldModel<float>&, const features::FeatureTensor&,
                                                  const io::EmbeddingFixture&, const io::EmbeddingFixture*);
template std::vector<accddoa::AccddoaFrame> infer(SeldModel<double>&, const features::FeatureTensor&,
                                                  const io::EmbeddingFixture&, const io::EmbeddingFixture*);

}  // namespace seld::nn
