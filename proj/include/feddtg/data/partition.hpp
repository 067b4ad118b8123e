#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "feddtg/data/dataset.hpp"
#include "feddtg/rng.hpp"

namespace feddtg::data {

/// One client's private data: indices into a parent dataset.
struct Shard {
    int client_id = 0;
    std::vector<std::size_t> indices;

    std::size_t size() const noexcept { return indices.size(); }
    bool empty() const noexcept { return indices.empty(); }
};

struct PartitionPlan {
    double dirichlet_alpha = 0.05;
    std::size_t clients = 20;
    double sampling_ratio = 0.25;
    std::uint64_t seed = 0;

    void validate() const;
};

/// proportions[c][k]: share of class c given to client k, each row drawn from Dir(alpha * 1_K).
using ClassProportions = std::vector<std::vector<double>>;

ClassProportions dirichlet_proportions(std::size_t n_classes, std::size_t clients, double alpha, std::uint64_t seed);

/// Splits each class by largest-remainder rounding of proportions[c] * count_c.
/// Shards are disjoint and cover ds.
std::vector<Shard> allocate_by_proportions(const LabeledDataset& ds, const ClassProportions& proportions,
                                           std::uint64_t seed);

/// Per-class Dir(alpha) proportions followed by allocate_by_proportions.
std::vector<Shard> dirichlet_partition(const LabeledDataset& ds, const PartitionPlan& plan);

/// Class c goes to client c mod K; clients sharing a class split it evenly.
std::vector<Shard> class_per_client_partition(const LabeledDataset& ds, std::size_t clients, std::uint64_t seed);

/// Client k receives sizes[k] items with per-class counts as equal as possible.
/// Items not requested stay unassigned.
std::vector<Shard> quantity_skew_partition(const LabeledDataset& ds, const std::vector<std::size_t>& sizes,
                                           std::uint64_t seed);

/// counts[k][c]: items of class c held by client k.
std::vector<std::vector<std::size_t>> class_count_matrix(const LabeledDataset& ds, const std::vector<Shard>& shards);

/// One epoch: a seeded permutation of the shard cut into batches of B; the last batch may be short.
std::vector<std::vector<std::size_t>> batch_iter(const Shard& shard, std::size_t batch_size, Rng& rng);

}  // namespace feddtg::data
