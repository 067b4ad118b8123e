#pragma once

// The FedDTG round: select -> broadcast G/D -> local three-player training ->
// upload G/D -> average -> re-broadcast -> synchronized fake samples -> soft
// labels up -> leave-one-out targets down -> classifier distillation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feddtg/data/dataset.hpp"
#include "feddtg/data/partition.hpp"
#include "feddtg/fed/ledger.hpp"
#include "feddtg/gan/triplet.hpp"
#include "feddtg/rng.hpp"

namespace feddtg::fed {

using gan::TripletSpecs;
using gan::TripletState;
using nn::ParamVector;
using nn::Tensor;

struct ServerState {
    ParamVector gen;
    ParamVector disc;
    ParamVector cls;  // global classifier; used by the parameter-averaging baselines only
    int round = 0;
    std::uint64_t seed = 0;
};

struct RoundPlan {
    int round = 0;
    std::vector<int> selected;  // sorted client ids
    std::uint64_t noise_seed = 0;
    std::size_t distill_sample_count = 0;
    std::size_t batch_size = 0;
};

struct ClientUpdate {
    int client_id = 0;
    ParamVector gen;
    ParamVector disc;
};

/// Soft labels y_c^k of the selected clients on the shared fake set, and the derived targets.
struct SoftLabelMatrix {
    std::vector<int> clients;
    std::vector<Tensor> soft_labels;
};

enum class LooNormalization {
    leave_one_out,  // divide the (M-1)-term sum by M-1
    printed,        // divide by M, then renormalize rows
};

std::string to_string(LooNormalization n);
LooNormalization loo_normalization_from_string(const std::string& s);

struct AblationFlags {
    bool use_global_generator = true;
    bool use_co_distillation = true;

    friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct ProtocolConfig {
    std::size_t clients = 20;
    double frac = 0.5;
    std::size_t batch_size = 32;
    std::size_t local_epochs = 1;
    std::size_t local_steps = 0;  // > 0 caps local steps per round instead of whole epochs
    gan::DistillConfig distill;
    std::size_t distill_batch_size = 32;
    std::size_t distill_epochs = 1;
    LooNormalization loo = LooNormalization::leave_one_out;
    AblationFlags ablation;
    std::size_t threads = 1;

    void validate() const;
};

/// Uniform sample of max(1, floor(frac * K)) clients without replacement, sorted.
std::vector<int> select_clients(std::size_t clients, double frac, Rng& rng);

/// Plan for round `round` derived from the global seed.
RoundPlan make_round_plan(const ProtocolConfig& cfg, std::uint64_t global_seed, int round);

/// Order-independent elementwise mean of the given vectors (weights default to uniform).
/// Each coordinate is reduced in sorted order around its minimum, so identical inputs
/// reproduce themselves exactly and any permutation of the inputs gives identical bits.
std::vector<double> average_vectors(std::span<const std::vector<double>* const> inputs,
                                    std::span<const double> weights = {});

/// Uniform mean of generator and discriminator parameters.
std::pair<ParamVector, ParamVector> aggregate_parameters(std::span<const ClientUpdate> updates);

/// y_dis^k for every client of m, or nullopt when fewer than two clients took part.
std::optional<std::vector<Tensor>> distillation_targets(const SoftLabelMatrix& m,
                                                       LooNormalization norm = LooNormalization::leave_one_out);

/// FNV-1a over the raw bytes of a value sequence; used to compare synchronized tensors.
std::uint64_t digest(std::span<const double> values);

struct ClientRoundRecord {
    int client_id = 0;
    std::size_t local_steps = 0;
    double loss_discriminator = 0.0;
    double loss_generator = 0.0;
    double loss_classifier = 0.0;
    double loss_distill = 0.0;
    std::uint64_t fake_digest = 0;      // digest of every distillation fake sample this client generated
    std::uint64_t gen_digest = 0;       // after the post-aggregation broadcast
    std::uint64_t disc_digest = 0;
};

struct RoundRecord {
    int round = 0;
    std::vector<int> selected;
    bool distilled = false;
    std::vector<ClientRoundRecord> clients;
    LedgerTotals ledger;  // this round only
    std::vector<std::string> warnings;
};

/// Everything one round touches.
struct RoundContext {
    const TripletSpecs& specs;
    const ProtocolConfig& cfg;
    const data::LabeledDataset& train;
    const std::vector<data::Shard>& shards;
    ServerState& server;
    std::vector<TripletState>& clients;
    CommLedger& ledger;
};

/// One FedDTG round (or an ablated variant, per cfg.ablation). Advances server.round.
RoundRecord run_round(RoundContext ctx);

/// Local three-player training for one client over its shard for the configured budget.
/// Returns mean losses and the number of steps taken (0 for an empty shard).
ClientRoundRecord train_client_locally(const TripletSpecs& specs, const ProtocolConfig& cfg,
                                       const data::LabeledDataset& train, const data::Shard& shard,
                                       TripletState& client, std::uint64_t global_seed, int round);

}  // namespace feddtg::fed
