#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <zlib.h>

#include "feddtg/data/dataset.hpp"
#include "feddtg/data/idx.hpp"
#include "feddtg/data/partition.hpp"
#include "feddtg/error.hpp"
#include "feddtg/nn/losses.hpp"
#include "feddtg/nn/network.hpp"
#include "feddtg/nn/optimizer.hpp"

using namespace feddtg;
using namespace feddtg::data;
using Bytes = std::vector<std::uint8_t>;

namespace {

Bytes be32(std::uint32_t v) {
    return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
            static_cast<std::uint8_t>(v)};
}

Bytes cat(std::initializer_list<Bytes> parts) {
    Bytes out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

Bytes image_file(std::uint32_t n, std::uint32_t r, std::uint32_t c, Bytes payload) {
    return cat({be32(0x803), be32(n), be32(r), be32(c), payload});
}

LabeledDataset toy(std::vector<std::size_t> per_class, std::size_t dim = 2) {
    LabeledDataset ds;
    ds.n_classes = per_class.size();
    std::size_t total = std::accumulate(per_class.begin(), per_class.end(), std::size_t{0});
    ds.samples = nn::Tensor(total, dim);
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        for (std::size_t i = 0; i < per_class[c]; ++i) ds.labels.push_back(static_cast<int>(c));
    }
    for (std::size_t i = 0; i < total; ++i) ds.samples(i, 0) = static_cast<double>(i);
    return ds;
}

void expect_disjoint_cover(const std::vector<Shard>& shards, std::size_t n) {
    std::vector<int> seen(n, 0);
    for (const auto& s : shards)
        for (auto i : s.indices) {
            ASSERT_LT(i, n);
            ++seen[i];
        }
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(seen[i], 1) << "index " << i;
}

Bytes gzip(const Bytes& raw) {
    z_stream zs{};
    deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY);
    Bytes out(raw.size() + 128);
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

}  // namespace

TEST(Idx, SingleByteImage) {
    auto img = parse_idx_images(image_file(1, 1, 1, {0xFF}));
    EXPECT_EQ(img.pixels, nn::Tensor(1, 1, {1.0}));
    EXPECT_EQ(img.rows, 1u);
}

TEST(Idx, ShapeArithmetic) {
    auto img = parse_idx_images(image_file(2, 2, 2, {0, 1, 2, 3, 4, 5, 6, 7}));
    EXPECT_EQ(img.pixels.rows(), 2u);
    EXPECT_EQ(img.pixels.cols(), 4u);
}

TEST(Idx, PixelNormalizationEndpointsExact) {
    EXPECT_EQ(pixel_to_unit(0), -1.0);
    EXPECT_EQ(pixel_to_unit(255), 1.0);
    for (int v = 0; v < 256; ++v) EXPECT_EQ(unit_to_pixel(pixel_to_unit(static_cast<std::uint8_t>(v))), v);
}

TEST(Idx, Labels) {
    EXPECT_EQ(parse_idx_labels(cat({be32(0x801), be32(3), Bytes{0, 5, 9}})), (std::vector<int>{0, 5, 9}));
    EXPECT_TRUE(parse_idx_labels(cat({be32(0x801), be32(0)})).empty());
}

TEST(Idx, WrongMagicNamesBothValues) {
    try {
        parse_idx_images(cat({be32(0x801), be32(0), be32(1), be32(1)}));
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("0x00000803"), std::string::npos) << msg;
        EXPECT_NE(msg.find("0x00000801"), std::string::npos) << msg;
    }
    EXPECT_THROW(parse_idx_labels(image_file(0, 1, 1, {})), FormatError);
}

TEST(Idx, TruncationIsALengthError) {
    EXPECT_THROW(parse_idx_images(image_file(2, 2, 2, {1, 2, 3})), LengthError);
    EXPECT_THROW(parse_idx_images(Bytes{0, 0, 8}), LengthError);
    EXPECT_THROW(parse_idx_images(cat({be32(0x803), be32(1)})), LengthError);
    EXPECT_THROW(parse_idx_labels(cat({be32(0x801), be32(4), Bytes{1, 2}})), LengthError);
    try {
        parse_idx_labels(cat({be32(0x801), be32(4), Bytes{1, 2}}));
    } catch (const LengthError& e) {
        EXPECT_EQ(e.expected(), 12u);
        EXPECT_EQ(e.found(), 10u);
    }
}

TEST(Idx, TrailingBytesRejected) {
    EXPECT_THROW(parse_idx_images(image_file(1, 1, 1, {1, 2})), FormatError);
    EXPECT_THROW(parse_idx_labels(cat({be32(0x801), be32(1), Bytes{1, 2}})), FormatError);
}

TEST(Idx, RoundTripIsByteIdentical) {
    std::mt19937_64 rng(1);
    Bytes payload(3 * 4 * 5);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    auto file = image_file(3, 4, 5, payload);
    EXPECT_EQ(serialize_idx_images(parse_idx_images(file)), file);
    auto labels = cat({be32(0x801), be32(4), Bytes{9, 0, 3, 255}});
    EXPECT_EQ(serialize_idx_labels(parse_idx_labels(labels)), labels);
}

TEST(Idx, GzipInputAccepted) {
    auto file = image_file(2, 1, 2, {0, 255, 128, 7});
    auto gz = gzip(file);
    ASSERT_TRUE(is_gzip(gz));
    EXPECT_EQ(gunzip(gz), file);
    auto dir = std::filesystem::temp_directory_path() / "feddtg_idx_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "x.gz", std::ios::binary).write(reinterpret_cast<const char*>(gz.data()), gz.size());
    }
    EXPECT_EQ(read_file_bytes(dir / "x.gz"), file);
    Bytes broken(gz.begin(), gz.begin() + static_cast<std::ptrdiff_t>(gz.size() / 2));
    EXPECT_THROW(gunzip(broken), FormatError);
    std::filesystem::remove_all(dir);
}

TEST(Dataset, LabelMapReindexesDensely) {
    const std::vector<int> raw{7, 3, 7, 11};
    auto map = LabelMap::fit(raw);
    EXPECT_EQ(map.n_classes(), 3u);
    EXPECT_EQ(map.apply(raw), (std::vector<int>{1, 0, 1, 2}));
    EXPECT_THROW(map.apply(std::vector<int>{5}), ParameterError);
}

TEST(Mixture, DefaultSpecCountsAndDeterminism) {
    auto spec = MixtureSpec::default_spec();
    auto ds = synth_gaussian_mixture(spec, 3);
    EXPECT_EQ(ds.size(), 2000u);
    EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{500, 500, 500, 500}));
    EXPECT_EQ(ds.samples, synth_gaussian_mixture(spec, 3).samples);
    for (double v : ds.samples.data()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Mixture, ZeroStdCollapsesToMeans) {
    auto spec = MixtureSpec::default_spec();
    spec.stds.assign(4, 0.0);
    spec.means[0] = {-2.0, 0.25};  // clipped to -1
    auto ds = synth_gaussian_mixture(spec, 1);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto c = static_cast<std::size_t>(ds.labels[i]);
        auto want = spec.means[c];
        for (auto& v : want) v = std::clamp(v, -1.0, 1.0);
        EXPECT_EQ(ds.samples(i, 0), want[0]);
        EXPECT_EQ(ds.samples(i, 1), want[1]);
    }
}

TEST(Mixture, LinearClassifierSeparatesDefaultSpec) {
    auto ds = synth_gaussian_mixture(MixtureSpec::default_spec(), 4);
    const std::vector<std::size_t> w{2, 4};
    auto spec = nn::NetworkSpec::mlp(w, nn::Activation::identity, nn::Activation::identity, nn::OutputHead::logits);
    auto p = nn::ParamVector::zeros(spec);
    auto opt = nn::OptimizerState::make({nn::OptimizerRule::sgd, 0.5}, p.size());
    for (int epoch = 0; epoch < 200; ++epoch) {
        auto ce = nn::cross_entropy(nn::forward(spec, p, ds.samples), ds.labels);
        auto g = nn::backward(spec, p, ds.samples, ce.grad);
        nn::optimizer_step(p, g, opt);
    }
    auto logits = nn::forward(spec, p, ds.samples);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto row = logits.row(i);
        correct += (std::max_element(row.begin(), row.end()) - row.begin()) == ds.labels[i];
    }
    EXPECT_GT(static_cast<double>(correct) / ds.size(), 0.95);
}

TEST(Subsample, StratifiedFloorAndDeterministic) {
    auto ds = toy({6000, 6000, 6000});
    auto s = subsample(ds, 0.1, 7);
    EXPECT_EQ(s.class_counts(), (std::vector<std::size_t>{600, 600, 600}));
    EXPECT_EQ(s.samples, subsample(ds, 0.1, 7).samples);
    EXPECT_NE(s.samples, subsample(ds, 0.1, 8).samples);
    auto uneven = subsample(toy({10, 7, 3}), 0.25, 1);
    EXPECT_EQ(uneven.class_counts(), (std::vector<std::size_t>{2, 1, 0}));
    auto full = subsample(ds, 1.0, 3);
    EXPECT_EQ(full.size(), ds.size());
    EXPECT_THROW(subsample(ds, 0.0, 1), ParameterError);
    EXPECT_THROW(subsample(ds, 1.5, 1), ParameterError);
}

TEST(Partition, SingleClientGetsEverything) {
    auto ds = toy({5, 9, 2});
    auto shards = dirichlet_partition(ds, {0.05, 1, 1.0, 3});
    ASSERT_EQ(shards.size(), 1u);
    EXPECT_EQ(shards[0].size(), ds.size());
    expect_disjoint_cover(shards, ds.size());
}

TEST(Partition, DisjointCoverExhaustive) {
    std::mt19937_64 rng(11);
    const double alphas[] = {0.01, 0.05, 0.4, 1.0, 100.0};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> per(1 + rng() % 6);
        for (auto& c : per) c = rng() % 40;
        per[0] += 1;
        auto ds = toy(per);
        const std::size_t k = 1 + rng() % 12;
        auto shards = dirichlet_partition(ds, {alphas[trial % 5], k, 1.0, rng()});
        ASSERT_EQ(shards.size(), k);
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_EQ(shards[i].client_id, static_cast<int>(i));
            std::set<std::size_t> u(shards[i].indices.begin(), shards[i].indices.end());
            EXPECT_EQ(u.size(), shards[i].size());
        }
        expect_disjoint_cover(shards, ds.size());
    }
}

TEST(Partition, LargeAlphaIsNearlyEven) {
    auto ds = toy(std::vector<std::size_t>(10, 1000));
    auto shards = dirichlet_partition(ds, {1e6, 10, 1.0, 5});
    auto counts = class_count_matrix(ds, shards);
    for (const auto& row : counts)
        for (auto v : row) EXPECT_NEAR(static_cast<double>(v) / 1000.0, 0.1, 0.01);
}

TEST(Partition, SmallAlphaConcentratesClients) {
    auto ds = toy(std::vector<std::size_t>(10, 600));
    auto shards = dirichlet_partition(ds, {0.05, 20, 1.0, 17});
    auto counts = class_count_matrix(ds, shards);
    std::vector<double> top_share;
    for (const auto& row : counts) {
        const auto total = std::accumulate(row.begin(), row.end(), std::size_t{0});
        if (total == 0) {
            top_share.push_back(1.0);
            continue;
        }
        top_share.push_back(static_cast<double>(*std::max_element(row.begin(), row.end())) / total);
    }
    std::sort(top_share.begin(), top_share.end());
    EXPECT_GE(top_share[top_share.size() / 2], 0.7);
}

namespace {

double mean_max_share(double alpha, std::uint64_t seed) {
    auto props = dirichlet_proportions(10, 10, alpha, seed);
    double total = 0;
    for (const auto& row : props) total += *std::max_element(row.begin(), row.end());
    return total / props.size();
}

}  // namespace

TEST(Partition, ConcentrationMonotoneInAlpha) {
    double a = 0, b = 0, c = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        a += mean_max_share(0.05, s);
        b += mean_max_share(0.4, s);
        c += mean_max_share(100.0, s);
    }
    EXPECT_GT(a, b);
    EXPECT_GT(b, c);
}

TEST(Partition, ProportionRowsAreDistributions) {
    auto props = dirichlet_proportions(5, 7, 0.01, 3);
    for (const auto& row : props) {
        double s = 0;
        for (double v : row) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_THROW(dirichlet_proportions(5, 7, 0.0, 3), ParameterError);
}

TEST(Partition, LargestRemainderAllocation) {
    auto ds = toy({10});
    ClassProportions p{{0.25, 0.25, 0.5}};
    // 2.5, 2.5, 5: remainders tie, the lower index gets the extra item.
    auto shards = allocate_by_proportions(ds, p, 1);
    EXPECT_EQ(shards[0].size(), 3u);
    EXPECT_EQ(shards[1].size(), 2u);
    EXPECT_EQ(shards[2].size(), 5u);
}

TEST(Partition, ClassPerClientAndQuantitySkew) {
    auto ds = toy({8, 8, 8, 8});
    auto shards = class_per_client_partition(ds, 4, 2);
    auto counts = class_count_matrix(ds, shards);
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(counts[k][c], k == c ? 8u : 0u);
    expect_disjoint_cover(shards, ds.size());

    auto ten = toy(std::vector<std::size_t>(10, 400));
    std::vector<std::size_t> sizes{10, 10, 10, 10, 10, 600, 600, 600, 600, 600};
    auto q = quantity_skew_partition(ten, sizes, 3);
    auto qc = class_count_matrix(ten, q);
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        EXPECT_EQ(q[k].size(), sizes[k]);
        auto [lo, hi] = std::minmax_element(qc[k].begin(), qc[k].end());
        EXPECT_LE(*hi - *lo, 1u);
    }
    std::set<std::size_t> all;
    for (const auto& s : q) all.insert(s.indices.begin(), s.indices.end());
    EXPECT_EQ(all.size(), 3050u);
}

TEST(BatchIter, RemainderAndCover) {
    Shard s{0, {}};
    for (std::size_t i = 0; i < 70; ++i) s.indices.push_back(i * 3);
    Rng rng(4);
    auto batches = batch_iter(s, 32, rng);
    ASSERT_EQ(batches.size(), 3u);
    EXPECT_EQ(batches[0].size(), 32u);
    EXPECT_EQ(batches[2].size(), 6u);
    std::multiset<std::size_t> seen;
    for (const auto& b : batches) seen.insert(b.begin(), b.end());
    EXPECT_EQ(seen, std::multiset<std::size_t>(s.indices.begin(), s.indices.end()));

    Shard even{0, std::vector<std::size_t>(64)};
    EXPECT_EQ(batch_iter(even, 32, rng).size(), 2u);
    EXPECT_TRUE(batch_iter(Shard{}, 32, rng).empty());
    EXPECT_THROW(batch_iter(s, 0, rng), ParameterError);
}
