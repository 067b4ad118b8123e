#include "feddtg/data/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "feddtg/error.hpp"

namespace feddtg::data {
namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledDataset& ds) {
    std::vector<std::vector<std::size_t>> by_class(ds.n_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    return by_class;
}

// Integer counts summing to total, proportional to shares; leftover units go to
// the largest fractional parts, ties to the lower index.
std::vector<std::size_t> largest_remainder(const std::vector<double>& shares, std::size_t total) {
    const std::size_t k = shares.size();
    std::vector<std::size_t> counts(k, 0);
    std::vector<double> frac(k, 0.0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double quota = shares[i] * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(quota));
        frac[i] = quota - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    // Floating error can push the floors one over total; trim from the smallest fractions.
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < total; i = (i + 1) % k) {
        ++counts[order[i]];
        ++assigned;
    }
    for (std::size_t i = k; assigned > total && i-- > 0;) {
        if (counts[order[i]] > 0) {
            --counts[order[i]];
            --assigned;
        }
    }
    return counts;
}

std::vector<Shard> empty_shards(std::size_t clients) {
    std::vector<Shard> shards(clients);
    for (std::size_t k = 0; k < clients; ++k) shards[k].client_id = static_cast<int>(k);
    return shards;
}

}  // namespace

void PartitionPlan::validate() const {
    std::vector<std::string> problems;
    if (!(dirichlet_alpha > 0.0)) problems.push_back("dirichlet_alpha must be positive");
    if (clients < 1) problems.push_back("client count K must be at least 1");
    if (!(sampling_ratio > 0.0 && sampling_ratio <= 1.0)) problems.push_back("sampling ratio r must lie in (0, 1]");
    if (!problems.empty()) throw ValidationError(problems);
}

ClassProportions dirichlet_proportions(std::size_t n_classes, std::size_t clients, double alpha, std::uint64_t seed) {
    if (!(alpha > 0.0)) throw ParameterError("dirichlet_alpha must be positive");
    if (clients == 0) throw ParameterError("client count must be positive");
    Rng rng = derive_stream(seed, StreamTag::partition, 0);
    // Gamma(alpha) draws are taken in log space, log G(a) = log G(a + 1) + log(U) / a,
    // because tiny alpha underflows plain draws to exactly zero.
    std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ClassProportions out(n_classes, std::vector<double>(clients, 0.0));
    for (auto& row : out) {
        std::vector<double> logs(clients);
        for (auto& lg : logs) {
            double u = unif(rng);
            while (u <= 0.0) u = unif(rng);
            lg = std::log(gamma(rng)) + std::log(u) / alpha;
        }
        const double mx = *std::max_element(logs.begin(), logs.end());
        double s = 0.0;
        for (std::size_t k = 0; k < clients; ++k) {
            row[k] = std::exp(logs[k] - mx);
            s += row[k];
        }
        for (double& p : row) p /= s;
    }
    return out;
}

std::vector<Shard> allocate_by_proportions(const LabeledDataset& ds, const ClassProportions& proportions,
                                           std::uint64_t seed) {
    if (proportions.size() != ds.n_classes) throw DimensionError("proportion rows", ds.n_classes, proportions.size());
    const std::size_t clients = proportions.empty() ? 0 : proportions.front().size();
    if (clients == 0) throw ParameterError("proportions must cover at least one client");
    auto by_class = indices_by_class(ds);
    auto shards = empty_shards(clients);
    Rng rng = derive_stream(seed, StreamTag::partition, 1);
    for (std::size_t c = 0; c < ds.n_classes; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto counts = largest_remainder(proportions[c], idx.size());
        std::size_t at = 0;
        for (std::size_t k = 0; k < clients; ++k) {
            shards[k].indices.insert(shards[k].indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(at),
                                     idx.begin() + static_cast<std::ptrdiff_t>(at + counts[k]));
            at += counts[k];
        }
    }
    for (auto& s : shards) std::sort(s.indices.begin(), s.indices.end());
    return shards;
}

std::vector<Shard> dirichlet_partition(const LabeledDataset& ds, const PartitionPlan& plan) {
    plan.validate();
    if (ds.size() == 0) throw ParameterError("cannot partition an empty dataset");
    const auto props = dirichlet_proportions(ds.n_classes, plan.clients, plan.dirichlet_alpha, plan.seed);
    return allocate_by_proportions(ds, props, plan.seed);
}

std::vector<Shard> class_per_client_partition(const LabeledDataset& ds, std::size_t clients, std::uint64_t seed) {
    if (clients == 0) throw ParameterError("client count must be positive");
    auto by_class = indices_by_class(ds);
    auto shards = empty_shards(clients);
    Rng rng = derive_stream(seed, StreamTag::partition, 2);
    for (std::size_t c = 0; c < ds.n_classes; ++c) {
        std::vector<std::size_t> owners;
        for (std::size_t k = 0; k < clients; ++k) {
            if (k % ds.n_classes == c) owners.push_back(k);
        }
        if (owners.empty()) owners.push_back(c % clients);
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::vector<double> even(owners.size(), 1.0 / static_cast<double>(owners.size()));
        const auto counts = largest_remainder(even, idx.size());
        std::size_t at = 0;
        for (std::size_t o = 0; o < owners.size(); ++o) {
            auto& dst = shards[owners[o]].indices;
            dst.insert(dst.end(), idx.begin() + static_cast<std::ptrdiff_t>(at),
                       idx.begin() + static_cast<std::ptrdiff_t>(at + counts[o]));
            at += counts[o];
        }
    }
    for (auto& s : shards) std::sort(s.indices.begin(), s.indices.end());
    return shards;
}

std::vector<Shard> quantity_skew_partition(const LabeledDataset& ds, const std::vector<std::size_t>& sizes,
                                           std::uint64_t seed) {
    if (sizes.empty()) throw ParameterError("quantity-skew partition needs at least one client size");
    auto by_class = indices_by_class(ds);
    Rng rng = derive_stream(seed, StreamTag::partition, 3);
    for (auto& idx : by_class) std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::size_t> cursor(ds.n_classes, 0);
    auto shards = empty_shards(sizes.size());
    const std::vector<double> even(ds.n_classes, 1.0 / static_cast<double>(ds.n_classes));
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        const auto per_class = largest_remainder(even, sizes[k]);
        for (std::size_t c = 0; c < ds.n_classes; ++c) {
            if (cursor[c] + per_class[c] > by_class[c].size()) {
                throw ParameterError("class " + std::to_string(c) + " has too few items for the requested client sizes");
            }
            auto first = by_class[c].begin() + static_cast<std::ptrdiff_t>(cursor[c]);
            shards[k].indices.insert(shards[k].indices.end(), first, first + static_cast<std::ptrdiff_t>(per_class[c]));
            cursor[c] += per_class[c];
        }
        std::sort(shards[k].indices.begin(), shards[k].indices.end());
    }
    return shards;
}

std::vector<std::vector<std::size_t>> class_count_matrix(const LabeledDataset& ds, const std::vector<Shard>& shards) {
    std::vector<std::vector<std::size_t>> m(shards.size(), std::vector<std::size_t>(ds.n_classes, 0));
    for (std::size_t k = 0; k < shards.size(); ++k) {
        for (auto i : shards[k].indices) ++m[k][static_cast<std::size_t>(ds.labels[i])];
    }
    return m;
}

std::vector<std::vector<std::size_t>> batch_iter(const Shard& shard, std::size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw ParameterError("batch size must be at least 1");
    std::vector<std::size_t> order = shard.indices;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
        const std::size_t end = std::min(order.size(), at + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace feddtg::data
