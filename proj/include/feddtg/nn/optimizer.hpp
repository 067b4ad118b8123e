#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feddtg/nn/network.hpp"

namespace feddtg::nn {

enum class OptimizerRule { sgd, adam };

std::string to_string(OptimizerRule r);
OptimizerRule optimizer_rule_from_string(const std::string& s);

struct OptimizerConfig {
    OptimizerRule rule = OptimizerRule::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct OptimizerState {
    OptimizerConfig config;
    std::uint64_t step = 0;
    std::vector<double> m;  // adam only
    std::vector<double> v;  // adam only

    static OptimizerState make(const OptimizerConfig& config, std::size_t param_count);

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// In-place update of params. sgd: p -= lr * g. adam: bias-corrected moment update.
void optimizer_step(ParamVector& params, const Gradients& grads, OptimizerState& state);

}  // namespace feddtg::nn
