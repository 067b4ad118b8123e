#include "feddtg/exp/runner.hpp"

#include <chrono>

#include "feddtg/data/idx.hpp"
#include "feddtg/error.hpp"
#include "feddtg/exp/checkpoint.hpp"
#include "feddtg/parallel.hpp"

namespace feddtg::exp {

LoadedData load_data(const RunConfig& cfg) {
    const std::uint64_t ds = cfg.effective_data_seed();
    LoadedData out;
    data::LabeledDataset full;
    if (cfg.dataset.kind == "idx") {
        const auto map = data::LabelMap::fit(data::parse_idx_labels(data::read_file_bytes(cfg.dataset.train_labels)));
        full = data::load_idx_dataset(cfg.dataset.train_images, cfg.dataset.train_labels, &map);
        out.test = data::load_idx_dataset(cfg.dataset.test_images, cfg.dataset.test_labels, &map);
    } else {
        full = data::synth_gaussian_mixture(cfg.dataset.mixture, derive_seed(ds, StreamTag::mixture, 0));
        auto test_spec = cfg.dataset.mixture;
        test_spec.samples_per_class = cfg.dataset.test_samples_per_class;
        out.test = data::synth_gaussian_mixture(test_spec, derive_seed(ds, StreamTag::mixture, 1));
    }
    out.train = cfg.r >= 1.0 ? std::move(full) : data::subsample(full, cfg.r, derive_seed(ds, StreamTag::subsample));
    if (out.train.size() == 0) throw ValidationError({"r: sampling ratio leaves no training data"});
    if (out.test.size() == 0) throw ValidationError({"dataset: test set is empty"});
    return out;
}

std::vector<data::Shard> partition_train(const RunConfig& cfg, const data::LabeledDataset& train) {
    const std::uint64_t seed = derive_seed(cfg.effective_data_seed(), StreamTag::partition);
    if (cfg.partition.mode == "class_per_client") return data::class_per_client_partition(train, cfg.K, seed);
    if (cfg.partition.mode == "quantity_skew") return data::quantity_skew_partition(train, cfg.partition.sizes, seed);
    data::PartitionPlan plan{cfg.dirichlet_alpha, cfg.K, cfg.r, seed};
    return data::dirichlet_partition(train, plan);
}

std::vector<data::Shard> partition_test(const RunConfig& cfg, const data::LabeledDataset& test) {
    const std::uint64_t seed = derive_seed(cfg.effective_data_seed(), StreamTag::partition);
    const std::uint64_t test_seed = derive_seed(cfg.effective_data_seed(), StreamTag::test_partition);
    if (cfg.partition.mode == "class_per_client") return data::class_per_client_partition(test, cfg.K, test_seed);
    if (cfg.partition.mode == "quantity_skew") {
        // Class balance is the same for every client, so each one sees the whole test set.
        std::vector<data::Shard> shards(cfg.K);
        for (std::size_t k = 0; k < cfg.K; ++k) {
            shards[k].client_id = static_cast<int>(k);
            for (std::size_t i = 0; i < test.size(); ++i) shards[k].indices.push_back(i);
        }
        return shards;
    }
    const auto props = data::dirichlet_proportions(test.n_classes, cfg.K, cfg.dirichlet_alpha, seed);
    return data::allocate_by_proportions(test, props, test_seed);
}

Experiment::Experiment(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    data_ = load_data(cfg_);
    if (data_.train.sample_dim() != data_.test.sample_dim())
        throw DimensionError("test sample width", data_.train.sample_dim(), data_.test.sample_dim());
    shards_ = partition_train(cfg_, data_.train);
    if (cfg_.local_eval) test_shards_ = partition_test(cfg_, data_.test);
    specs_ = cfg_.specs(data_.train.sample_dim(), data_.train.n_classes);
    proto_ = cfg_.protocol();
    proto_.validate();
    baseline_ = cfg_.baseline();

    // One shared initialization: server and every client start from the same weights.
    Rng rng = derive_stream(cfg_.seed, StreamTag::init);
    const auto base = gan::TripletState::init(specs_, cfg_.optimizers(), 0, rng);
    server_.gen = base.gen;
    server_.disc = base.disc;
    server_.cls = base.cls;
    server_.round = 0;
    server_.seed = cfg_.seed;
    clients_.assign(cfg_.K, base);
    for (std::size_t k = 0; k < cfg_.K; ++k) clients_[k].client_id = static_cast<int>(k);
    record_metrics();
}

void Experiment::step() {
    if (finished()) throw ProtocolError("experiment already ran all " + std::to_string(cfg_.T) + " rounds");
    const auto t0 = std::chrono::steady_clock::now();
    fed::RoundContext ctx{specs_, proto_, data_.train, shards_, server_, clients_, ledger_};
    fed::RoundRecord rec;
    switch (cfg_.algorithm) {
        case fed::Algorithm::feddtg: rec = fed::run_round(ctx); break;
        case fed::Algorithm::fedavg:
        case fed::Algorithm::fedprox: rec = fed::fedavg_round(ctx, baseline_); break;
        case fed::Algorithm::local: rec = fed::local_only_round(ctx, baseline_); break;
    }
    rounds_.push_back(std::move(rec));
    const bool due = static_cast<std::size_t>(server_.round) % cfg_.eval_every == 0 || finished();
    if (due) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        record_metrics(secs);
    }
}

void Experiment::run(const std::function<void(const Experiment&)>& on_round) {
    while (!finished()) {
        step();
        if (on_round) on_round(*this);
    }
}

std::vector<double> Experiment::client_accuracies() const {
    std::vector<double> acc(clients_.size());
    parallel_for(clients_.size(), cfg_.threads,
                 [&](std::size_t k) { acc[k] = evaluate(specs_.classifier, clients_[k].cls, data_.test); });
    return acc;
}

std::vector<double> Experiment::local_accuracies() const {
    std::vector<double> acc(clients_.size(), 0.0);
    parallel_for(clients_.size(), cfg_.threads, [&](std::size_t k) {
        // A client without local test data is scored on the global test set.
        if (test_shards_[k].empty()) {
            acc[k] = evaluate(specs_.classifier, clients_[k].cls, data_.test);
        } else {
            acc[k] = evaluate(specs_.classifier, clients_[k].cls, data_.test.subset(test_shards_[k].indices));
        }
    });
    return acc;
}

void Experiment::record_metrics(double wall_seconds) {
    MetricsRecord rec;
    rec.round = server_.round;
    rec.accuracy = summarize_clients(client_accuracies());
    if (cfg_.local_eval) rec.local_accuracy = summarize_clients(local_accuracies());
    if (!rounds_.empty() && rounds_.back().round + 1 == server_.round) rec.losses = summarize_losses(rounds_.back());
    rec.ledger = ledger_.totals();
    rec.wall_seconds = wall_seconds;
    metrics_.clients = cfg_.K;
    metrics_.records.push_back(std::move(rec));
}

void Experiment::emit(const std::filesystem::path& dir) const {
    emit_metrics(metrics_, dir);
    write_text_file(dir / "rounds.jsonl", rounds_jsonl(rounds_));
    write_text_file(dir / "config.json", cfg_.to_json().dump(2) + "\n");
}

MetricsSeries run_experiment(const RunConfig& cfg, const RunOptions& options) {
    std::unique_ptr<Experiment> exp;
    if (!options.resume_from.empty()) {
        exp = load_checkpoint(options.resume_from);
        if (exp->config().to_json() != cfg.to_json())
            throw ValidationError({"checkpoint config differs from the requested config"});
    } else {
        exp = std::make_unique<Experiment>(cfg);
    }
    const auto dir = cfg.run_directory();
    const auto ckpt = options.checkpoint_dir.empty() ? dir / "checkpoint.bin" : options.checkpoint_dir / "checkpoint.bin";
    exp->run([&](const Experiment& e) {
        if (cfg.checkpoint_every > 0 && static_cast<std::size_t>(e.round()) % cfg.checkpoint_every == 0)
            save_checkpoint(e, ckpt);
    });
    if (options.write_files) exp->emit(dir);
    return exp->metrics();
}

}  // namespace feddtg::exp
