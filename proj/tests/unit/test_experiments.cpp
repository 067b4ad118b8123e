#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "feddtg/error.hpp"
#include "feddtg/exp/checkpoint.hpp"
#include "feddtg/exp/config.hpp"
#include "feddtg/exp/metrics.hpp"
#include "feddtg/exp/runner.hpp"
#include "support.hpp"

using namespace feddtg;
using namespace feddtg::exp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("feddtg_exp_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

RunConfig tiny(const fs::path& out, fed::Algorithm alg = fed::Algorithm::feddtg) {
    RunConfig c;
    c.run_id = "tiny";
    c.output_dir = out.string();
    c.algorithm = alg;
    c.K = 4;
    c.frac = 0.5;
    c.r = 0.2;
    c.dirichlet_alpha = 0.5;
    c.T = 4;
    c.z_dim = 4;
    c.distill_sample_count = 64;
    c.architecture = {{8}, {8}, {8}};
    c.dataset.test_samples_per_class = 20;
    return c;
}

nn::NetworkSpec linear(std::size_t in, std::size_t out) {
    const std::vector<std::size_t> w{in, out};
    return nn::NetworkSpec::mlp(w, nn::Activation::identity, nn::Activation::identity, nn::OutputHead::logits);
}

// Samples are one-hot rows of their label, so an identity weight matrix classifies perfectly.
data::LabeledDataset one_hot_set(std::size_t n, std::size_t count, std::mt19937_64& rng) {
    data::LabeledDataset d;
    d.n_classes = n;
    d.samples = nn::Tensor(count, n);
    for (std::size_t i = 0; i < count; ++i) {
        const int y = static_cast<int>(rng() % n);
        d.labels.push_back(y);
        d.samples(i, static_cast<std::size_t>(y)) = 1.0;
    }
    return d;
}

}  // namespace

TEST(Evaluate, PerfectAndConstantPredictors) {
    std::mt19937_64 rng(1);
    const std::size_t n = 5;
    auto spec = linear(n, n);
    auto params = nn::ParamVector::zeros(spec);
    auto d = one_hot_set(n, 200, rng);
    for (std::size_t i = 0; i < n; ++i) params.values[i * n + i] = 1.0;
    EXPECT_EQ(evaluate(spec, params, d), 1.0);

    // All-zero weights tie every class; ties resolve to class 0.
    std::fill(params.values.begin(), params.values.end(), 0.0);
    data::LabeledDataset balanced;
    balanced.n_classes = n;
    balanced.samples = nn::Tensor(n * 40, n);
    for (std::size_t i = 0; i < n * 40; ++i) balanced.labels.push_back(static_cast<int>(i % n));
    EXPECT_DOUBLE_EQ(evaluate(spec, params, balanced), 1.0 / n);
}

TEST(Evaluate, MatchesBruteForceAndIgnoresOrder) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 4, dim = 1 + rng() % 3, count = 1 + rng() % 30;
        auto spec = linear(dim, n);
        auto params = nn::ParamVector::zeros(spec);
        for (auto& v : params.values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
        data::LabeledDataset d;
        d.n_classes = n;
        d.samples = testing_support::random_tensor(rng, count, dim);
        for (std::size_t i = 0; i < count; ++i) d.labels.push_back(static_cast<int>(rng() % n));
        const auto logits = nn::forward(spec, params, d.samples);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < count; ++i) {
            auto row = logits.row(i);
            const auto best = std::max_element(row.begin(), row.end()) - row.begin();
            hits += best == d.labels[i];
        }
        const double acc = evaluate(spec, params, d);
        EXPECT_NEAR(acc, static_cast<double>(hits) / count, 1e-12);
        std::vector<std::size_t> perm(count);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        EXPECT_EQ(evaluate(spec, params, d.subset(perm)), acc);
    }
}

TEST(Evaluate, RejectsEmptyAndMismatchedSets) {
    auto spec = linear(3, 2);
    auto params = nn::ParamVector::zeros(spec);
    data::LabeledDataset empty;
    empty.n_classes = 2;
    empty.samples = nn::Tensor(0, 3);
    EXPECT_THROW(evaluate(spec, params, empty), ParameterError);
    data::LabeledDataset wide;
    wide.n_classes = 2;
    wide.samples = nn::Tensor(1, 4);
    wide.labels = {0};
    EXPECT_THROW(evaluate(spec, params, wide), DimensionError);
}

TEST(Summary, Examples) {
    const std::vector<double> v{0.5, 0.7, 0.9};
    auto s = summarize_clients(v);
    EXPECT_NEAR(s.mean, 0.7, 1e-12);
    EXPECT_EQ(s.min, 0.5);
    EXPECT_EQ(s.max, 0.9);
    EXPECT_NEAR(s.stddev, std::sqrt(0.08 / 3), 1e-12);

    const std::vector<double> same(7, 0.3);
    auto t = summarize_clients(same);
    EXPECT_EQ(t.mean, 0.3);
    EXPECT_EQ(t.stddev, 0.0);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(1 + rng() % 20);
        for (auto& x : a) x = std::uniform_real_distribution<double>(0, 1)(rng);
        auto r = summarize_clients(a);
        double sum = 0;
        for (double x : a) sum += x;
        EXPECT_NEAR(r.mean, sum / a.size(), 1e-12);
        EXPECT_LE(r.min, r.mean);
        EXPECT_GE(r.max, r.mean);
    }
}

TEST(MetricsFiles, CsvRoundTripAndLayout) {
    MetricsSeries s;
    s.clients = 3;
    for (int r = 0; r < 3; ++r) {
        MetricsRecord m;
        m.round = r;
        const std::vector<double> acc{0.1 * r + 0.123456789, 1.0 / 3.0, 0.7};
        m.accuracy = summarize_clients(acc);
        m.ledger.uplink_total = 100u * r;
        m.ledger.uplink_generator = 100u * r;
        s.records.push_back(m);
    }
    const auto text = metrics_csv(s);
    auto parsed = parse_metrics_csv(text);
    ASSERT_EQ(parsed.records.size(), 3u);
    EXPECT_EQ(parsed.clients, 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(parsed.records[i].accuracy, s.records[i].accuracy);
        EXPECT_EQ(parsed.records[i].ledger, s.records[i].ledger);
    }
    EXPECT_EQ(metrics_csv(parsed), text);

    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line))
        EXPECT_EQ(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1, 5 + 3 + 10);
    EXPECT_EQ(csv_header(3).size(), 18u);
}

TEST(MetricsFiles, SingleRecordAndFormatting) {
    MetricsSeries s;
    s.clients = 1;
    MetricsRecord m;
    const std::vector<double> acc{0.25};
    m.accuracy = summarize_clients(acc);
    s.records.push_back(m);
    const auto text = metrics_csv(s);
    auto lines = std::count(text.begin(), text.end(), '\n');
    EXPECT_EQ(lines, 2);
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(MetricsFiles, UnwritableDirectoryIsAnIoError) {
    auto dir = scratch("unwritable");
    std::ofstream(dir / "blocker") << "x";
    MetricsSeries s;
    s.clients = 1;
    const std::vector<double> acc{0.5};
    s.records.push_back({0, summarize_clients(acc), std::nullopt, {}, {}, 0.0});
    EXPECT_THROW(emit_metrics(s, dir / "blocker" / "sub"), IoError);
    EXPECT_THROW(emit_metrics(MetricsSeries{}, dir), ParameterError);
}

TEST(Config, DefaultsRoundTripThroughJson) {
    RunConfig c;
    auto back = RunConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    EXPECT_EQ(c.K, 20u);
    EXPECT_EQ(c.frac, 0.5);
    EXPECT_EQ(c.alpha_kd, 0.9);
    EXPECT_EQ(c.distill_sample_count, 10000u);
}

TEST(Config, RejectsUnknownKeysAndListsEveryProblem) {
    auto j = RunConfig{}.to_json();
    j["frac"] = 1.5;
    j["bogus"] = 1;
    j["architecture"]["width"] = 3;
    j["T"] = -2;
    try {
        RunConfig::from_json(j);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("frac"), std::string::npos);
        EXPECT_NE(what.find("bogus"), std::string::npos);
        EXPECT_NE(what.find("width"), std::string::npos);
        EXPECT_NE(what.find("T"), std::string::npos);
        EXPECT_GE(e.problems().size(), 4u);
    }
}

TEST(Config, AlgorithmLabels) {
    RunConfig c;
    EXPECT_EQ(c.algorithm_label(), "feddtg");
    c.ablation.use_global_generator = false;
    EXPECT_EQ(c.algorithm_label(), "feddtg_no_global_generator");
    c.algorithm = fed::Algorithm::fedavg;
    EXPECT_EQ(c.algorithm_label(), "fedavg");
}

TEST(Runner, ZeroRoundsRecordsInitialMetricsOnly) {
    auto c = tiny(scratch("t0"));
    c.T = 0;
    auto series = run_experiment(c);
    ASSERT_EQ(series.records.size(), 1u);
    EXPECT_EQ(series.records[0].round, 0);
    EXPECT_EQ(series.records[0].ledger.uplink_total, 0u);
    EXPECT_TRUE(fs::exists(c.run_directory() / "metrics.csv"));
}

TEST(Runner, CadenceAndFinalRound) {
    auto c = tiny(scratch("cadence"));
    c.T = 5;
    c.eval_every = 2;
    Experiment e(c);
    e.run();
    std::vector<int> rounds;
    for (const auto& r : e.metrics().records) rounds.push_back(r.round);
    EXPECT_EQ(rounds, (std::vector<int>{0, 2, 4, 5}));
    EXPECT_EQ(e.rounds().size(), 5u);
}

TEST(Runner, MeanAccuracyIsMeanOfClients) {
    auto c = tiny(scratch("mean"));
    c.T = 2;
    Experiment e(c);
    e.run();
    const auto acc = e.client_accuracies();
    double sum = 0;
    for (double a : acc) sum += a;
    EXPECT_NEAR(e.metrics().records.back().accuracy.mean, sum / acc.size(), 1e-12);
}

TEST(Runner, RerunsAreByteIdentical) {
    for (auto alg : {fed::Algorithm::feddtg, fed::Algorithm::fedavg, fed::Algorithm::fedprox, fed::Algorithm::local}) {
        auto a = tiny(scratch("rerun_a"), alg), b = tiny(scratch("rerun_b"), alg);
        run_experiment(a);
        run_experiment(b);
        for (const char* f : {"metrics.csv", "metrics.jsonl", "rounds.jsonl"})
            EXPECT_EQ(slurp(a.run_directory() / f), slurp(b.run_directory() / f)) << f << " " << fed::to_string(alg);
    }
}

TEST(Runner, LedgerMatchesParameterCounts) {
    auto c = tiny(scratch("ledger"));
    c.T = 1;
    Experiment e(c);
    e.run();
    const auto& rec = e.rounds()[0];
    const auto& s = e.specs();
    const std::uint64_t per = s.generator.param_count() + s.discriminator.param_count() +
                              c.distill_sample_count * s.n_classes;
    EXPECT_EQ(rec.ledger.uplink_total, per * rec.selected.size());
    EXPECT_EQ(rec.ledger.uplink_classifier, 0u);
}

TEST(Checkpoint, RoundTripPreservesState) {
    auto c = tiny(scratch("ckpt"));
    Experiment e(c);
    e.step();
    e.step();
    auto back = decode_checkpoint(encode_checkpoint(e));
    EXPECT_EQ(back->round(), 2);
    EXPECT_EQ(back->clients(), e.clients());
    EXPECT_EQ(back->ledger().entries(), e.ledger().entries());
    const auto a = e.client_accuracies(), b = back->client_accuracies();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    EXPECT_EQ(encode_checkpoint(*back), encode_checkpoint(e));
}

TEST(Checkpoint, ResumeGivesTheSameFinalFiles) {
    auto full = tiny(scratch("resume_full"));
    run_experiment(full);

    auto part = tiny(scratch("resume_part"));
    Experiment e(part);
    e.step();
    e.step();
    const auto ckpt = scratch("resume_ckpt") / "checkpoint.bin";
    save_checkpoint(e, ckpt);
    run_experiment(part, RunOptions{true, {}, ckpt});
    for (const char* f : {"metrics.csv", "metrics.jsonl", "rounds.jsonl"})
        EXPECT_EQ(slurp(full.run_directory() / f), slurp(part.run_directory() / f)) << f;
}

TEST(Checkpoint, ResumeRejectsADifferentConfig) {
    auto c = tiny(scratch("resume_other"));
    Experiment e(c);
    e.step();
    const auto ckpt = scratch("resume_other_ckpt") / "checkpoint.bin";
    save_checkpoint(e, ckpt);
    auto other = c;
    other.seed = 99;
    EXPECT_THROW(run_experiment(other, RunOptions{false, {}, ckpt}), Error);
}

TEST(Checkpoint, CorruptionIsDetected) {
    Experiment e(tiny(scratch("corrupt")));
    e.step();
    const auto bytes = encode_checkpoint(e);

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    EXPECT_THROW(decode_checkpoint(flipped), FormatError);

    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_THROW(decode_checkpoint(magic), FormatError);

    EXPECT_THROW(decode_checkpoint(bytes.substr(0, 10)), LengthError);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 100)), FormatError);
    EXPECT_THROW(load_checkpoint("/nonexistent/feddtg.bin"), IoError);
}
