#pragma once

// Comparison algorithms sharing the classifier architecture and data pipeline
// with FedDTG: local-only training, FedAvg and FedProx.

#include <span>
#include <string>

#include "feddtg/fed/protocol.hpp"

namespace feddtg::fed {

enum class Algorithm { feddtg, fedavg, fedprox, local };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

enum class AggregationWeighting { uniform, data_size };

std::string to_string(AggregationWeighting w);
AggregationWeighting weighting_from_string(const std::string& s);

struct BaselineConfig {
    Algorithm algorithm = Algorithm::fedavg;
    double fedprox_mu = 0.01;
    std::size_t local_epochs = 1;
    AggregationWeighting weighting = AggregationWeighting::uniform;
};

struct ProximalTerm {
    double value = 0.0;  // (mu / 2) * ||local - global||^2
    nn::Gradients grad;  // mu * (local - global)
};

ProximalTerm proximal_term(const ParamVector& local, const ParamVector& global, double mu);

/// One classifier step on mean CE over the batch plus, for mu > 0, the proximal
/// term around `global`. Returns the CE value before the step.
double fedprox_local_step(const TripletSpecs& specs, ParamVector& cls, nn::OptimizerState& opt,
                          const ParamVector& global, const Tensor& batch, std::span<const int> labels, double mu);

/// Classifier-only local training over a shard. mu = 0 is the FedAvg local update.
ClientRoundRecord train_classifier_locally(const TripletSpecs& specs, const ProtocolConfig& proto,
                                           const BaselineConfig& cfg, const data::LabeledDataset& train,
                                           const data::Shard& shard, TripletState& client,
                                           const ParamVector& global, std::uint64_t global_seed, int round);

/// Select -> local CE (+ proximal) training -> upload classifiers -> average -> broadcast to all clients.
RoundRecord fedavg_round(RoundContext ctx, const BaselineConfig& cfg);

/// Every client trains its own classifier on its shard; nothing is communicated.
RoundRecord local_only_round(RoundContext ctx, const BaselineConfig& cfg);

/// run_round with the given ablation switches.
RoundRecord feddtg_ablated_round(RoundContext ctx, const AblationFlags& flags);

}  // namespace feddtg::fed
