#pragma once

// Typed envelopes for simulated client/server traffic. Each envelope type has
// one fixed direction and payload kind, and the courier prices it into the
// ledger on delivery. The FedDTG round never constructs a ClassifierUpload.

#include "feddtg/fed/ledger.hpp"
#include "feddtg/nn/network.hpp"
#include "feddtg/nn/tensor.hpp"

namespace feddtg::fed {

struct GeneratorUpload {
    int client_id;
    const nn::ParamVector& params;
};
struct DiscriminatorUpload {
    int client_id;
    const nn::ParamVector& params;
};
struct SoftLabelUpload {
    int client_id;
    const nn::Tensor& probs;
};
struct ClassifierUpload {
    int client_id;
    const nn::ParamVector& params;
};

struct GeneratorBroadcast {
    int client_id;
    const nn::ParamVector& params;
};
struct DiscriminatorBroadcast {
    int client_id;
    const nn::ParamVector& params;
};
struct DistillTargetDelivery {
    int client_id;
    const nn::Tensor& targets;
};
struct ClassifierBroadcast {
    int client_id;
    const nn::ParamVector& params;
};

class Courier {
public:
    Courier(CommLedger& ledger, int round) : ledger_(ledger), round_(round) {}

    void deliver(const GeneratorUpload& m) { log(m.client_id, Direction::uplink, PayloadKind::generator, m.params.size()); }
    void deliver(const DiscriminatorUpload& m) {
        log(m.client_id, Direction::uplink, PayloadKind::discriminator, m.params.size());
    }
    void deliver(const SoftLabelUpload& m) { log(m.client_id, Direction::uplink, PayloadKind::soft_labels, m.probs.size()); }
    void deliver(const ClassifierUpload& m) {
        log(m.client_id, Direction::uplink, PayloadKind::classifier, m.params.size());
    }
    void deliver(const GeneratorBroadcast& m) {
        log(m.client_id, Direction::downlink, PayloadKind::generator, m.params.size());
    }
    void deliver(const DiscriminatorBroadcast& m) {
        log(m.client_id, Direction::downlink, PayloadKind::discriminator, m.params.size());
    }
    void deliver(const DistillTargetDelivery& m) {
        log(m.client_id, Direction::downlink, PayloadKind::distill_targets, m.targets.size());
    }
    void deliver(const ClassifierBroadcast& m) {
        log(m.client_id, Direction::downlink, PayloadKind::classifier, m.params.size());
    }

private:
    void log(int client, Direction d, PayloadKind k, std::size_t floats) {
        ledger_.record(round_, client, d, k, static_cast<std::uint64_t>(floats));
    }

    CommLedger& ledger_;
    int round_;
};

}  // namespace feddtg::fed
