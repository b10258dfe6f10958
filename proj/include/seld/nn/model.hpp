#pragma once

// The SELD network: CNN encoder -> Conformer stack -> audio cross-modal
// block fused with CLAP -> audio-visual cross-modal blocks fused with
// OWL-ViT (or a plain Conformer stack in audio-only mode) -> two-layer
// multi-ACCDDOA head.

#include "seld/accddoa.hpp"
#include "seld/features.hpp"
#include "seld/io.hpp"
#include "seld/nn/layers.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace seld::nn {

struct ModelConfig {
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t conv_kernel = 15;
    std::size_t seld_conformer_layers = 4;
    std::size_t audio_cmc_layers = 1;
    std::size_t av_cmc_layers = 2;
    std::vector<std::size_t> cnn_channels{16, 32, 64, 64};
    std::size_t n_tracks = kMaxTracks;
    std::size_t n_classes = accddoa::kDefaultClasses;
    bool audio_visual = true;
    std::size_t clap_dim = io::kClapDim;
    std::size_t owl_dim = io::kOwlVitDim;

    static ModelConfig paper();
    static ModelConfig toy();

    std::size_t output_width() const { return n_tracks * n_classes * accddoa::kComponents; }
    /// Throws on inconsistent settings.
    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(std::string_view text);

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Real>
class SeldModel {
public:
    SeldModel(ModelConfig config, std::uint64_t seed);
    SeldModel(const SeldModel&) = delete;
    SeldModel& operator=(const SeldModel&) = delete;

    const ModelConfig& config() const { return config_; }

    /// [4, T, 64] -> [T/16, d]
    Tensor<Real> encode(const Tensor<Real>& features, bool training);

    /// features [4, T, 64], clap [1, clap_dim], owl [577, owl_dim] (ignored
    /// in audio-only mode). Returns the activated head output [T/16, N*C*4].
    Tensor<Real> forward(const Tensor<Real>& features, const Tensor<Real>& clap, const Tensor<Real>* owl,
                         bool training);

    /// Fresh name -> tensor view over every parameter and BN buffer.
    StateDict<Real> state_dict();
    std::size_t parameter_count();

private:
    ModelConfig config_;
    std::vector<ResidualConvBlock<Real>> cnn_;
    std::vector<ConformerBlock<Real>> seld_conformer_;
    Linear<Real> clap_proj_;
    std::vector<CrossModalBlock<Real>> audio_cmc_;
    Linear<Real> owl_proj_;
    std::vector<CrossModalBlock<Real>> av_cmc_;
    std::vector<ConformerBlock<Real>> ao_conformer_;
    Linear<Real> head_hidden_;
    Linear<Real> head_out_;
};

template <typename Real>
Tensor<Real> to_tensor(const io::NdArray& array, bool requires_grad = false);
template <typename Real>
Tensor<Real> to_tensor(const io::EmbeddingFixture& fixture);

/// Splits a head output [T, N*C*4] into per-frame ACCDDOA vectors.
template <typename Real>
std::vector<accddoa::AccddoaFrame> to_frames(const Tensor<Real>& output, std::size_t n_classes);

/// Eval-mode forward without gradient tracking.
template <typename Real>
std::vector<accddoa::AccddoaFrame> infer(SeldModel<Real>& model, const features::FeatureTensor& features,
                                         const io::EmbeddingFixture& clap, const io::EmbeddingFixture* owl);

/// Container: "SSLC" magic, u16 version, u32 manifest length, JSON manifest
/// (config plus ordered tensor names), then one u64-length-prefixed SSLD
/// tensor per entry. Values are stored as float32, so float models
/// round-trip bit-exactly.
void save_checkpoint(SeldModel<float>& model, const std::filesystem::path& path);
std::unique_ptr<SeldModel<float>> load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(SeldModel<float>& model);
std::unique_ptr<SeldModel<float>> decode_checkpoint(std::string_view bytes);

}  // namespace seld::nn
