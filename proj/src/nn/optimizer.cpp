#include "feddtg/nn/optimizer.hpp"

#include <cmath>

#include "feddtg/error.hpp"
#include "feddtg/simd/kernels.hpp"

namespace feddtg::nn {

std::string to_string(OptimizerRule r) { return r == OptimizerRule::sgd ? "sgd" : "adam"; }

OptimizerRule optimizer_rule_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerRule::sgd;
    if (s == "adam") return OptimizerRule::adam;
    throw ParameterError("unknown optimizer rule '" + s + "'");
}

OptimizerState OptimizerState::make(const OptimizerConfig& config, std::size_t param_count) {
    if (!(config.lr > 0.0)) throw ParameterError("learning rate must be positive");
    OptimizerState s;
    s.config = config;
    if (config.rule == OptimizerRule::adam) {
        s.m.assign(param_count, 0.0);
        s.v.assign(param_count, 0.0);
    }
    return s;
}

void optimizer_step(ParamVector& params, const Gradients& grads, OptimizerState& state) {
    if (params.layout != grads.layout) throw DimensionError("gradient layout size", params.layout.total, grads.layout.total);
    if (grads.values.size() != params.values.size()) {
        throw DimensionError("gradient length", params.values.size(), grads.values.size());
    }
    const auto& k = simd::active_kernels();
    const auto& c = state.config;
    ++state.step;
    if (c.rule == OptimizerRule::sgd) {
        k.axpy(params.size(), -c.lr, grads.values.data(), params.values.data());
        return;
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw DimensionError("optimizer accumulator length", params.size(), state.m.size());
    }
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    k.adam(params.size(), params.values.data(), grads.values.data(), state.m.data(), state.v.data(), c.lr, c.beta1,
           c.beta2, c.eps, bc1, bc2);
}

}  // namespace feddtg::nn
