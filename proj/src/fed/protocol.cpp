#include "feddtg/fed/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "feddtg/error.hpp"
#include "feddtg/fed/messages.hpp"
#include "feddtg/parallel.hpp"

namespace feddtg::fed {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t digest_update(std::uint64_t h, std::span<const double> values) {
    for (double v : values) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= kFnvPrime;
        }
    }
    return h;
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

struct DistillSlice {
    std::size_t begin;
    std::size_t size;
};

std::vector<DistillSlice> distill_slices(std::size_t total, std::size_t batch) {
    std::vector<DistillSlice> out;
    for (std::size_t at = 0; at < total; at += batch) out.push_back({at, std::min(batch, total - at)});
    return out;
}

gan::FakeBatch distill_fake_batch(const TripletSpecs& specs, const ParamVector& gen, std::uint64_t noise_seed,
                                  std::size_t index, const DistillSlice& slice) {
    const auto z = gan::noise_batch_at(noise_seed, index, slice.size, specs.z_dim);
    const auto y = gan::balanced_labels(slice.size, specs.n_classes, slice.begin);
    return gan::generate(specs, gen, z, y);
}

Tensor rows_of(const Tensor& t, const DistillSlice& slice) {
    std::vector<double> data(t.data().begin() + static_cast<std::ptrdiff_t>(slice.begin * t.cols()),
                             t.data().begin() + static_cast<std::ptrdiff_t>((slice.begin + slice.size) * t.cols()));
    return Tensor(slice.size, t.cols(), std::move(data));
}

}  // namespace

std::string to_string(LooNormalization n) { return n == LooNormalization::printed ? "printed" : "leave_one_out"; }

LooNormalization loo_normalization_from_string(const std::string& s) {
    if (s == "leave_one_out") return LooNormalization::leave_one_out;
    if (s == "printed") return LooNormalization::printed;
    throw ParameterError("unknown leave-one-out normalization '" + s + "'");
}

void ProtocolConfig::validate() const {
    std::vector<std::string> problems;
    if (clients < 1) problems.push_back("K must be at least 1");
    if (!(frac > 0.0 && frac <= 1.0)) problems.push_back("frac must lie in (0, 1]");
    if (batch_size < 1) problems.push_back("B must be at least 1");
    if (local_epochs < 1 && local_steps == 0) problems.push_back("local_epochs or local_steps must be positive");
    if (distill_batch_size < 1) problems.push_back("distill_batch_size must be at least 1");
    if (!(distill.alpha_kd >= 0.0 && distill.alpha_kd <= 1.0)) problems.push_back("alpha_kd must lie in [0, 1]");
    if (distill.distill_sample_count < 1) problems.push_back("distill_sample_count must be positive");
    if (!(distill.temperature > 0.0)) problems.push_back("temperature must be positive");
    if (!problems.empty()) throw ValidationError(problems);
}

std::vector<int> select_clients(std::size_t clients, double frac, Rng& rng) {
    if (!(frac > 0.0 && frac <= 1.0)) throw ParameterError("frac must lie in (0, 1]");
    if (clients == 0) throw ParameterError("client count must be positive");
    const auto want = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(clients) + 1e-9)));
    std::vector<int> ids(clients);
    std::iota(ids.begin(), ids.end(), 0);
    // Partial Fisher-Yates: the first `want` slots are a uniform subset.
    for (std::size_t i = 0; i < want; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, clients - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(want);
    std::sort(ids.begin(), ids.end());
    return ids;
}

RoundPlan make_round_plan(const ProtocolConfig& cfg, std::uint64_t global_seed, int round) {
    Rng rng = derive_stream(global_seed, StreamTag::selection, round);
    RoundPlan plan;
    plan.round = round;
    plan.selected = select_clients(cfg.clients, cfg.frac, rng);
    plan.noise_seed = derive_seed(global_seed, StreamTag::distill_noise, round);
    plan.distill_sample_count = cfg.distill.distill_sample_count;
    plan.batch_size = cfg.distill_batch_size;
    return plan;
}

std::vector<double> average_vectors(std::span<const std::vector<double>* const> inputs, std::span<const double> weights) {
    if (inputs.empty()) throw ProtocolError("cannot average an empty update list");
    if (!weights.empty() && weights.size() != inputs.size()) {
        throw DimensionError("aggregation weight count", inputs.size(), weights.size());
    }
    const std::size_t n = inputs.front()->size();
    for (const auto* v : inputs) {
        if (v->size() != n) throw ProtocolError("update length mismatch in aggregation");
    }
    const std::size_t m = inputs.size();
    double total_w = 0.0;
    for (std::size_t i = 0; i < m; ++i) total_w += weights.empty() ? 1.0 : weights[i];
    if (!(total_w > 0.0)) throw ProtocolError("aggregation weights must have a positive sum");

    std::vector<double> out(n);
    std::vector<std::pair<double, double>> column(m);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) column[i] = {(*inputs[i])[j], weights.empty() ? 1.0 : weights[i]};
        std::sort(column.begin(), column.end());
        const double ref = column.front().first;
        double acc = 0.0;
        for (const auto& [value, w] : column) acc += w * (value - ref);
        out[j] = ref + acc / total_w;
    }
    return out;
}

std::pair<ParamVector, ParamVector> aggregate_parameters(std::span<const ClientUpdate> updates) {
    if (updates.empty()) throw ProtocolError("cannot aggregate an empty update list");
    const auto& gl = updates.front().gen.layout;
    const auto& dl = updates.front().disc.layout;
    std::vector<const std::vector<double>*> gens;
    std::vector<const std::vector<double>*> discs;
    for (const auto& u : updates) {
        if (u.gen.layout != gl || u.disc.layout != dl) {
            throw ProtocolError("client " + std::to_string(u.client_id) + " uploaded a mismatched parameter layout");
        }
        gens.push_back(&u.gen.values);
        discs.push_back(&u.disc.values);
    }
    return {ParamVector(gl, average_vectors(gens)), ParamVector(dl, average_vectors(discs))};
}

std::optional<std::vector<Tensor>> distillation_targets(const SoftLabelMatrix& m, LooNormalization norm) {
    const std::size_t count = m.soft_labels.size();
    if (m.clients.size() != count) throw DimensionError("soft-label client count", m.clients.size(), count);
    if (count < 2) return std::nullopt;
    const Tensor& first = m.soft_labels.front();
    for (const auto& y : m.soft_labels) {
        if (y.rows() != first.rows() || y.cols() != first.cols()) {
            throw ProtocolError("soft-label matrices of different shapes");
        }
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double s = 0.0;
            for (double v : y.row(r)) s += v;
            if (std::abs(s - 1.0) > 1e-6) throw ParameterError("soft-label row not normalized");
        }
    }

    std::vector<Tensor> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<const std::vector<double>*> others;
        for (std::size_t i = 0; i < count; ++i) {
            if (i != k) others.push_back(&m.soft_labels[i].data());
        }
        Tensor t(first.rows(), first.cols(), average_vectors(others));
        if (norm == LooNormalization::printed) {
            // Printed rule: the (M-1)-term sum over M. Rows then sum to (M-1)/M, so they
            // are renormalized to keep the KL target a distribution.
            const double shrink = static_cast<double>(count - 1) / static_cast<double>(count);
            for (std::size_t r = 0; r < t.rows(); ++r) {
                auto row = t.row(r);
                double s = 0.0;
                for (double& v : row) {
                    v *= shrink;
                    s += v;
                }
                for (double& v : row) v /= s;
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::uint64_t digest(std::span<const double> values) { return digest_update(kFnvOffset, values); }

ClientRoundRecord train_client_locally(const TripletSpecs& specs, const ProtocolConfig& cfg,
                                       const data::LabeledDataset& train, const data::Shard& shard,
                                       TripletState& client, std::uint64_t global_seed, int round) {
    ClientRoundRecord rec;
    rec.client_id = client.client_id;
    if (shard.empty()) return rec;
    Rng gan_rng = derive_stream(global_seed, StreamTag::local_gan, round, client.client_id);
    const std::size_t budget = cfg.local_steps > 0 ? cfg.local_steps : 0;
    for (std::size_t epoch = 0;; ++epoch) {
        if (budget == 0 && epoch >= cfg.local_epochs) break;
        if (budget > 0 && rec.local_steps >= budget) break;
        Rng batch_rng = derive_stream(global_seed, StreamTag::local_batches, round, client.client_id, epoch);
        for (const auto& idx : data::batch_iter(shard, cfg.batch_size, batch_rng)) {
            if (budget > 0 && rec.local_steps >= budget) break;
            const Tensor real = train.samples.gather_rows(idx);
            std::vector<int> labels;
            labels.reserve(idx.size());
            for (auto i : idx) labels.push_back(train.labels[i]);
            const auto losses = gan::local_adversarial_step(specs, client, real, labels, gan_rng);
            rec.loss_discriminator += losses.discriminator;
            rec.loss_generator += losses.generator;
            rec.loss_classifier += losses.classifier;
            ++rec.local_steps;
        }
    }
    if (rec.local_steps > 0) {
        const double inv = 1.0 / static_cast<double>(rec.local_steps);
        rec.loss_discriminator *= inv;
        rec.loss_generator *= inv;
        rec.loss_classifier *= inv;
    }
    return rec;
}

RoundRecord run_round(RoundContext ctx) {
    const auto& cfg = ctx.cfg;
    const auto& specs = ctx.specs;
    auto& server = ctx.server;
    auto& clients = ctx.clients;
    if (clients.size() != cfg.clients) throw DimensionError("client state count", cfg.clients, clients.size());
    if (ctx.shards.size() != cfg.clients) throw DimensionError("shard count", cfg.clients, ctx.shards.size());

    const int round = server.round;
    const RoundPlan plan = run_stage("select", [&] { return make_round_plan(cfg, server.seed, round); });
    const bool global_gan = cfg.ablation.use_global_generator;
    Courier courier(ctx.ledger, round);
    const std::size_t m = plan.selected.size();

    RoundRecord record;
    record.round = round;
    record.selected = plan.selected;
    record.clients.resize(m);

    if (global_gan) {
        run_stage("broadcast", [&] {
            for (int k : plan.selected) {
                auto& c = clients[static_cast<std::size_t>(k)];
                courier.deliver(GeneratorBroadcast{k, server.gen});
                courier.deliver(DiscriminatorBroadcast{k, server.disc});
                c.gen = server.gen;
                c.disc = server.disc;
            }
        });
    }

    run_stage("local_training", [&] {
        parallel_for(m, cfg.threads, [&](std::size_t i) {
            const auto k = static_cast<std::size_t>(plan.selected[i]);
            record.clients[i] = train_client_locally(specs, cfg, ctx.train, ctx.shards[k], clients[k], server.seed, round);
        });
    });

    if (global_gan) {
        run_stage("aggregate", [&] {
            std::vector<ClientUpdate> updates;
            updates.reserve(m);
            for (int k : plan.selected) {
                const auto& c = clients[static_cast<std::size_t>(k)];
                courier.deliver(GeneratorUpload{k, c.gen});
                courier.deliver(DiscriminatorUpload{k, c.disc});
                updates.push_back({k, c.gen, c.disc});
            }
            auto [gen, disc] = aggregate_parameters(updates);
            server.gen = std::move(gen);
            server.disc = std::move(disc);
            for (int k : plan.selected) {
                auto& c = clients[static_cast<std::size_t>(k)];
                courier.deliver(GeneratorBroadcast{k, server.gen});
                courier.deliver(DiscriminatorBroadcast{k, server.disc});
                c.gen = server.gen;
                c.disc = server.disc;
            }
        });
    }
    for (std::size_t i = 0; i < m; ++i) {
        const auto& c = clients[static_cast<std::size_t>(plan.selected[i])];
        record.clients[i].gen_digest = digest(c.gen.values);
        record.clients[i].disc_digest = digest(c.disc.values);
    }

    if (cfg.ablation.use_co_distillation) {
        const auto slices = distill_slices(plan.distill_sample_count, plan.batch_size);
        SoftLabelMatrix matrix;
        matrix.clients = plan.selected;
        matrix.soft_labels.resize(m);

        run_stage("soft_labels", [&] {
            parallel_for(m, cfg.threads, [&](std::size_t i) {
                const auto& c = clients[static_cast<std::size_t>(plan.selected[i])];
                Tensor probs(plan.distill_sample_count, specs.n_classes);
                std::uint64_t h = kFnvOffset;
                for (std::size_t j = 0; j < slices.size(); ++j) {
                    const auto fake = distill_fake_batch(specs, c.gen, plan.noise_seed, j, slices[j]);
                    h = digest_update(h, fake.samples.data());
                    const Tensor y = gan::soft_label_output(specs, c.cls, fake.samples, cfg.distill.temperature);
                    std::copy(y.data().begin(), y.data().end(),
                              probs.data().begin() + static_cast<std::ptrdiff_t>(slices[j].begin * specs.n_classes));
                }
                record.clients[i].fake_digest = h;
                matrix.soft_labels[i] = std::move(probs);
            });
            for (std::size_t i = 0; i < m; ++i) courier.deliver(SoftLabelUpload{plan.selected[i], matrix.soft_labels[i]});
        });

        const auto targets = run_stage("distill_targets", [&] { return distillation_targets(matrix, cfg.loo); });
        if (targets) {
            record.distilled = true;
            for (std::size_t i = 0; i < m; ++i) courier.deliver(DistillTargetDelivery{plan.selected[i], (*targets)[i]});
            run_stage("distill", [&] {
                parallel_for(m, cfg.threads, [&](std::size_t i) {
                    const int k = plan.selected[i];
                    auto& c = clients[static_cast<std::size_t>(k)];
                    double total = 0.0;
                    std::size_t steps = 0;
                    for (std::size_t epoch = 0; epoch < cfg.distill_epochs; ++epoch) {
                        std::vector<std::size_t> order(slices.size());
                        std::iota(order.begin(), order.end(), 0);
                        Rng rng = derive_stream(server.seed, StreamTag::distill_batches, round, k, epoch);
                        std::shuffle(order.begin(), order.end(), rng);
                        for (auto j : order) {
                            const auto fake = distill_fake_batch(specs, c.gen, plan.noise_seed, j, slices[j]);
                            total += gan::distillation_step(specs, c, fake, rows_of((*targets)[i], slices[j]),
                                                            cfg.distill);
                            ++steps;
                        }
                    }
                    record.clients[i].loss_distill = steps > 0 ? total / static_cast<double>(steps) : 0.0;
                });
            });
        }
    }

    record.ledger = ctx.ledger.round_totals(round);
    server.round = round + 1;
    return record;
}

}  // namespace feddtg::fed
