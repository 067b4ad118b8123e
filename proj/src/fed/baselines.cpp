#include "feddtg/fed/baselines.hpp"

#include "feddtg/error.hpp"
#include "feddtg/fed/messages.hpp"
#include "feddtg/nn/losses.hpp"
#include "feddtg/parallel.hpp"
#include "feddtg/simd/kernels.hpp"

namespace feddtg::fed {

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::feddtg: return "feddtg";
        case Algorithm::fedavg: return "fedavg";
        case Algorithm::fedprox: return "fedprox";
        case Algorithm::local: return "local";
    }
    return "feddtg";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "feddtg") return Algorithm::feddtg;
    if (s == "fedavg") return Algorithm::fedavg;
    if (s == "fedprox") return Algorithm::fedprox;
    if (s == "local") return Algorithm::local;
    throw ParameterError("unknown algorithm '" + s + "'");
}

std::string to_string(AggregationWeighting w) { return w == AggregationWeighting::uniform ? "uniform" : "data_size"; }

AggregationWeighting weighting_from_string(const std::string& s) {
    if (s == "uniform") return AggregationWeighting::uniform;
    if (s == "data_size") return AggregationWeighting::data_size;
    throw ParameterError("unknown aggregation weighting '" + s + "'");
}

ProximalTerm proximal_term(const ParamVector& local, const ParamVector& global, double mu) {
    if (mu < 0.0) throw ParameterError("fedprox mu must be non-negative");
    if (local.layout != global.layout) throw DimensionError("proximal layout", global.size(), local.size());
    ProximalTerm t{0.0, nn::Gradients(local.layout, std::vector<double>(local.size(), 0.0))};
    for (std::size_t i = 0; i < local.size(); ++i) {
        const double d = local.values[i] - global.values[i];
        t.value += d * d;
        t.grad.values[i] = mu * d;
    }
    t.value *= 0.5 * mu;
    return t;
}

double fedprox_local_step(const TripletSpecs& specs, ParamVector& cls, nn::OptimizerState& opt,
                          const ParamVector& global, const Tensor& batch, std::span<const int> labels, double mu) {
    const auto trace = nn::forward_trace(specs.classifier, cls, batch);
    const auto ce = nn::cross_entropy(trace.result(), labels);
    auto grads = nn::backward_trace(specs.classifier, cls, trace, ce.grad, false).grads;
    if (mu > 0.0) {
        const auto prox = proximal_term(cls, global, mu);
        simd::active_kernels().axpy(grads.size(), 1.0, prox.grad.values.data(), grads.values.data());
    } else if (mu < 0.0) {
        throw ParameterError("fedprox mu must be non-negative");
    }
    nn::optimizer_step(cls, grads, opt);
    return ce.value;
}

ClientRoundRecord train_classifier_locally(const TripletSpecs& specs, const ProtocolConfig& proto,
                                           const BaselineConfig& cfg, const data::LabeledDataset& train,
                                           const data::Shard& shard, TripletState& client,
                                           const ParamVector& global, std::uint64_t global_seed, int round) {
    ClientRoundRecord rec;
    rec.client_id = client.client_id;
    if (shard.empty()) return rec;
    const double mu = cfg.algorithm == Algorithm::fedprox ? cfg.fedprox_mu : 0.0;
    const std::size_t budget = proto.local_steps;
    for (std::size_t epoch = 0;; ++epoch) {
        if (budget == 0 && epoch >= cfg.local_epochs) break;
        if (budget > 0 && rec.local_steps >= budget) break;
        Rng rng = derive_stream(global_seed, StreamTag::baseline, round, client.client_id, epoch);
        for (const auto& idx : data::batch_iter(shard, proto.batch_size, rng)) {
            if (budget > 0 && rec.local_steps >= budget) break;
            std::vector<int> labels;
            labels.reserve(idx.size());
            for (auto i : idx) labels.push_back(train.labels[i]);
            rec.loss_classifier +=
                fedprox_local_step(specs, client.cls, client.cls_opt, global, train.samples.gather_rows(idx), labels, mu);
            ++rec.local_steps;
        }
    }
    if (rec.local_steps > 0) rec.loss_classifier /= static_cast<double>(rec.local_steps);
    return rec;
}

RoundRecord fedavg_round(RoundContext ctx, const BaselineConfig& cfg) {
    auto& server = ctx.server;
    auto& clients = ctx.clients;
    const int round = server.round;
    const RoundPlan plan = make_round_plan(ctx.cfg, server.seed, round);
    Courier courier(ctx.ledger, round);
    const std::size_t m = plan.selected.size();

    RoundRecord record;
    record.round = round;
    record.selected = plan.selected;
    record.clients.resize(m);

    const ParamVector global = server.cls;
    parallel_for(m, ctx.cfg.threads, [&](std::size_t i) {
        const auto k = static_cast<std::size_t>(plan.selected[i]);
        record.clients[i] = train_classifier_locally(ctx.specs, ctx.cfg, cfg, ctx.train, ctx.shards[k], clients[k],
                                                     global, server.seed, round);
    });

    std::vector<const std::vector<double>*> uploads;
    std::vector<double> weights;
    for (int k : plan.selected) {
        const auto& c = clients[static_cast<std::size_t>(k)];
        if (c.cls.layout != global.layout) throw ProtocolError("classifier layout mismatch in aggregation");
        courier.deliver(ClassifierUpload{k, c.cls});
        uploads.push_back(&c.cls.values);
        weights.push_back(static_cast<double>(ctx.shards[static_cast<std::size_t>(k)].size()));
    }
    if (cfg.weighting == AggregationWeighting::data_size) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total > 0.0) {
            server.cls.values = average_vectors(uploads, weights);
        } else {
            record.warnings.push_back("all selected shards empty; global classifier unchanged");
        }
    } else {
        server.cls.values = average_vectors(uploads);
    }

    for (std::size_t k = 0; k < clients.size(); ++k) {
        courier.deliver(ClassifierBroadcast{static_cast<int>(k), server.cls});
        clients[k].cls = server.cls;
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (record.clients[i].local_steps == 0) {
            record.warnings.push_back("client " + std::to_string(plan.selected[i]) + " has an empty shard");
        }
    }
    record.ledger = ctx.ledger.round_totals(round);
    server.round = round + 1;
    return record;
}

RoundRecord local_only_round(RoundContext ctx, const BaselineConfig& cfg) {
    auto& server = ctx.server;
    auto& clients = ctx.clients;
    const int round = server.round;
    RoundRecord record;
    record.round = round;
    record.clients.resize(clients.size());
    for (std::size_t k = 0; k < clients.size(); ++k) record.selected.push_back(static_cast<int>(k));

    BaselineConfig local_cfg = cfg;
    local_cfg.algorithm = Algorithm::local;
    parallel_for(clients.size(), ctx.cfg.threads, [&](std::size_t k) {
        record.clients[k] = train_classifier_locally(ctx.specs, ctx.cfg, local_cfg, ctx.train, ctx.shards[k], clients[k],
                                                     clients[k].cls, server.seed, round);
    });
    for (std::size_t k = 0; k < clients.size(); ++k) {
        if (record.clients[k].local_steps == 0) record.warnings.push_back("client " + std::to_string(k) + " skipped: empty shard");
    }
    record.ledger = ctx.ledger.round_totals(round);
    server.round = round + 1;
    return record;
}

RoundRecord feddtg_ablated_round(RoundContext ctx, const AblationFlags& flags) {
    ProtocolConfig cfg = ctx.cfg;
    cfg.ablation = flags;
    return run_round(RoundContext{ctx.specs, cfg, ctx.train, ctx.shards, ctx.server, ctx.clients, ctx.ledger});
}

}  // namespace feddtg::fed
