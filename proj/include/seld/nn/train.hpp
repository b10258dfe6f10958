#pragma once

#include "seld/nn/model.hpp"

#include <functional>
#include <optional>

namespace seld::nn {

/// Constant for the first 30 epochs, then decays by 5% per epoch. `epoch` is 1-based.
double learning_rate(double lr0, int epoch);

template <typename Real>
class Adam {
public:
    explicit Adam(StateDict<Real> state, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    /// Applies one update from the accumulated gradients.
    void step(double lr);
    long steps() const { return steps_; }

private:
    StateDict<Real> state_;
    double beta1_, beta2_, eps_;
    long steps_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct TrainingExample {
    features::FeatureTensor features;
    FrameEvents labels;  // one entry per output frame
    io::EmbeddingFixture clap;
    std::optional<io::EmbeddingFixture> owl;
};

struct TrainConfig {
    int epochs = 100;
    double lr0 = 1e-3;
    std::size_t batch = 32;
    double onscreen_weight = 1.0;
    bool shuffle = true;
    std::uint64_t seed = 0;
    std::function<void(int epoch, double lr, double loss)> on_epoch;
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;  // mean ADPIT loss over the epoch's clips
};

/// Mini-batch Adam on the ADPIT loss. Each clip runs its own forward pass
/// (batch-norm statistics are per clip) and batch gradients are averaged.
/// Throws if the loss becomes non-finite.
template <typename Real>
std::vector<EpochLog> train_toy(SeldModel<Real>& model, const std::vector<TrainingExample>& data,
                                const TrainConfig& config);

}  // namespace seld::nn
