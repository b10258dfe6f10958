#pragma once

// Central finite-difference checks of the autodiff engine in 64-bit.

#include "seld/nn/layers.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace seld::nn {

struct GradcheckOptions {
    double eps = 1e-5;
    double tolerance = 1e-4;
    std::size_t max_coords = 48;  // sampled coordinates per checked tensor
    double abs_floor = 1e-5;      // see gradcheck()
};

struct GradcheckResult {
    std::string name;
    std::uint64_t seed = 0;
    double max_error = 0.0;  // worst per-tensor relative error
    std::size_t coords = 0;
    bool passed = false;
};

/// Checks d(w . f())/dx for every tensor x in `wrt` with a fixed random w.
/// The relative error of a tensor is |analytic - numeric| / max(|analytic|,
/// |numeric|, floor) over the sampled coordinates (Euclidean norms), where
/// floor = abs_floor * max(1, largest gradient norm in the check). The floor
/// keeps exactly-zero gradients, such as a bias feeding batch norm or a key
/// bias under softmax, from being judged against finite-difference rounding
/// noise.
GradcheckResult gradcheck(const std::string& name, const std::function<Tensor<double>()>& f,
                          const std::vector<Tensor<double>*>& wrt, std::uint64_t seed,
                          const GradcheckOptions& options = {});

/// Every differentiable op on random small shapes.
std::vector<GradcheckResult> gradcheck_ops(std::uint64_t seed, const GradcheckOptions& options = {});

/// CNN block, Conformer block and cross-modal blocks with 1 and 577 memory
/// tokens, each checked against inputs and parameters.
std::vector<GradcheckResult> gradcheck_blocks(std::uint64_t seed, const GradcheckOptions& options = {});

}  // namespace seld::nn
