#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "feddtg/data/dataset.hpp"
#include "feddtg/data/partition.hpp"
#include "feddtg/exp/config.hpp"
#include "feddtg/exp/metrics.hpp"
#include "feddtg/fed/protocol.hpp"

namespace feddtg::exp {

struct LoadedData {
    data::LabeledDataset train;  // after the r-subsample
    data::LabeledDataset test;
};

/// Loads or synthesizes the configured dataset and applies the sampling ratio r.
LoadedData load_data(const RunConfig& cfg);

/// Training shards per the configured partition mode.
std::vector<data::Shard> partition_train(const RunConfig& cfg, const data::LabeledDataset& train);

/// Per-client test shards drawn with the same class proportions as training.
std::vector<data::Shard> partition_test(const RunConfig& cfg, const data::LabeledDataset& test);

/// A whole simulation: data, shards, server and client state, ledger and metrics.
class Experiment {
public:
    explicit Experiment(RunConfig cfg);

    const RunConfig& config() const noexcept { return cfg_; }
    const gan::TripletSpecs& specs() const noexcept { return specs_; }
    const LoadedData& data() const noexcept { return data_; }
    const std::vector<data::Shard>& shards() const noexcept { return shards_; }
    const std::vector<data::Shard>& test_shards() const noexcept { return test_shards_; }

    /// Rounds completed so far.
    int round() const noexcept { return server_.round; }
    bool finished() const noexcept { return static_cast<std::size_t>(server_.round) >= cfg_.T; }

    /// Runs one round and records metrics if the cadence (or the final round) calls for it.
    void step();
    /// Steps until T rounds are done. on_round runs after every round.
    void run(const std::function<void(const Experiment&)>& on_round = {});

    /// Accuracy of every client's classifier on the global test set.
    std::vector<double> client_accuracies() const;
    std::vector<double> local_accuracies() const;
    void record_metrics(double wall_seconds = 0.0);

    const MetricsSeries& metrics() const noexcept { return metrics_; }
    const std::vector<fed::RoundRecord>& rounds() const noexcept { return rounds_; }
    const fed::CommLedger& ledger() const noexcept { return ledger_; }
    const fed::ServerState& server() const noexcept { return server_; }
    const std::vector<gan::TripletState>& clients() const noexcept { return clients_; }

    /// Writes metrics.csv, metrics.jsonl, rounds.jsonl and config.json to dir.
    void emit(const std::filesystem::path& dir) const;

private:
    friend struct CheckpointAccess;

    RunConfig cfg_;
    LoadedData data_;
    std::vector<data::Shard> shards_;
    std::vector<data::Shard> test_shards_;
    gan::TripletSpecs specs_;
    fed::ProtocolConfig proto_;
    fed::BaselineConfig baseline_;
    fed::ServerState server_;
    std::vector<gan::TripletState> clients_;
    fed::CommLedger ledger_;
    MetricsSeries metrics_;
    std::vector<fed::RoundRecord> rounds_;
};

struct RunOptions {
    bool write_files = true;
    std::filesystem::path checkpoint_dir;  // empty: {run dir}/checkpoint.bin when checkpoint_every > 0
    std::filesystem::path resume_from;     // optional checkpoint to continue from
};

/// Builds (or resumes) an experiment, runs it to completion and emits its files.
MetricsSeries run_experiment(const RunConfig& cfg, const RunOptions& options = {});

}  // namespace feddtg::exp
