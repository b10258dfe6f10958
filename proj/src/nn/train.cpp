#include "seld/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace seld::nn {

double learning_rate(double lr0, int epoch) {
    if (epoch <= 30) {
        return lr0;
    }
    return lr0 * std::pow(0.95, epoch - 30);
}

template <typename Real>
Adam<Real>::Adam(StateDict<Real> state, double beta1, double beta2, double eps)
    : state_(std::move(state)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, t] : state_.params) {
        m_.emplace_back(t->numel(), 0.0);
        v_.emplace_back(t->numel(), 0.0);
    }
}

template <typename Real>
void Adam<Real>::zero_grad() {
    for (auto& [name, t] : state_.params) {
        t->zero_grad();
    }
}

template <typename Real>
void Adam<Real>::step(double lr) {
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t p = 0; p < state_.params.size(); ++p) {
        auto& t = *state_.params[p].second;
        auto g = t.grad();
        if (g.empty()) {
            continue;
        }
        auto w = t.mutable_data();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
            const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            w[i] = static_cast<Real>(static_cast<double>(w[i]) - lr * update);
        }
    }
}

template <typename Real>
std::vector<EpochLog> train_toy(SeldModel<Real>& model, const std::vector<TrainingExample>& data,
                                const TrainConfig& config) {
    if (data.empty()) {
        throw Error("train_toy: empty dataset");
    }
    if (config.batch == 0 || config.epochs < 0) {
        throw Error("train_toy: batch must be positive and epochs non-negative");
    }
    struct Prepared {
        Tensor<Real> features, clap;
        std::optional<Tensor<Real>> owl;
    };
    std::vector<Prepared> prepared;
    for (const auto& ex : data) {
        Prepared p{to_tensor<Real>(ex.features.data), to_tensor<Real>(ex.clap), std::nullopt};
        if (model.config().audio_visual) {
            if (!ex.owl) {
                throw Error("train_toy: audio-visual model needs a visual fixture for every clip");
            }
            p.owl = to_tensor<Real>(*ex.owl);
        }
        prepared.push_back(std::move(p));
    }

    Adam<Real> adam(model.state_dict());
    Rng rng(config.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochLog> log;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = learning_rate(config.lr0, epoch);
        if (config.shuffle) {
            std::shuffle(order.begin(), order.end(), rng);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const auto stop = std::min(order.size(), start + config.batch);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            adam.zero_grad();
            for (std::size_t i = start; i < stop; ++i) {
                const auto& ex = data[order[i]];
                auto& p = prepared[order[i]];
                auto out = model.forward(p.features, p.clap, p.owl ? &*p.owl : nullptr, true);
                const auto frames = to_frames(out, model.config().n_classes);
                if (ex.labels.size() != frames.size()) {
                    throw Error("train_toy: clip has " + std::to_string(ex.labels.size()) + " label frames but the model emits " +
                                std::to_string(frames.size()));
                }
                const auto res = accddoa::adpit_loss(frames, ex.labels, config.onscreen_weight);
                if (!std::isfinite(res.loss)) {
                    std::ostringstream msg;
                    msg << "train_toy: loss diverged (" << res.loss << ") at epoch " << epoch << ", lr " << lr;
                    throw Error(msg.str());
                }
                epoch_loss += res.loss;
                std::vector<Real> seed;
                seed.reserve(out.numel());
                for (const auto& f : res.grad) {
                    for (double g : f.values) {
                        seed.push_back(static_cast<Real>(g * inv_batch));
                    }
                }
                out.backward(seed);
            }
            adam.step(lr);
        }
        EpochLog entry{epoch, lr, epoch_loss / static_cast<double>(data.size())};
        log.push_back(entry);
        if (config.on_epoch) {
            config.on_epoch(entry.epoch, entry.lr, entry.loss);
        }
    }
    return log;
}

template class Adam<float>;
template class Adam<double>;
template std::vector<EpochLog> train_toy(SeldModel<float>&, const std::vector<TrainingExample>&, const TrainConfig&);
template std::vector<EpochLog> train_toy(SeldModel<double>&, const std::vector<TrainingExample>&, const TrainConfig&);

}  // namespace seld::nn
