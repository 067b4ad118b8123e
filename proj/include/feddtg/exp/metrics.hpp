#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feddtg/data/dataset.hpp"
#include "feddtg/fed/ledger.hpp"
#include "feddtg/fed/protocol.hpp"
#include "feddtg/nn/network.hpp"

namespace feddtg::exp {

/// Fraction of argmax-correct predictions; ties go to the lowest class index.
/// Throws ParameterError on an empty test set.
double evaluate(const nn::NetworkSpec& cls_spec, const nn::ParamVector& cls, const data::LabeledDataset& test);

/// Per-sample predicted classes (same tie rule as evaluate).
std::vector<int> predict(const nn::NetworkSpec& cls_spec, const nn::ParamVector& cls, const nn::Tensor& samples);

struct ClientSummary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double stddev = 0.0;  // population
    std::vector<double> values;

    friend bool operator==(const ClientSummary&, const ClientSummary&) = default;
};

ClientSummary summarize_clients(std::span<const double> accuracies);

/// Means over the clients that trained this round.
struct LossSummary {
    double discriminator = 0.0;
    double generator = 0.0;
    double classifier = 0.0;
    double distill = 0.0;

    friend bool operator==(const LossSummary&, const LossSummary&) = default;
};

LossSummary summarize_losses(const fed::RoundRecord& rec);

struct MetricsRecord {
    int round = 0;
    ClientSummary accuracy;
    std::optional<ClientSummary> local_accuracy;
    LossSummary losses;
    fed::LedgerTotals ledger;  // cumulative
    double wall_seconds = 0.0;  // kept in memory only; files stay byte-stable
};

struct MetricsSeries {
    std::size_t clients = 0;
    std::vector<MetricsRecord> records;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::vector<std::string> csv_header(std::size_t clients);
std::string metrics_csv(const MetricsSeries& series);
/// Local-test accuracies in the same layout; empty when no record has them.
std::string local_metrics_csv(const MetricsSeries& series);
std::string metrics_jsonl(const MetricsSeries& series);
std::string rounds_jsonl(std::span<const fed::RoundRecord> rounds);

/// Inverse of metrics_csv for the CSV columns (losses and local accuracies are not in the CSV).
MetricsSeries parse_metrics_csv(const std::string& text);

enum class EmitFormat { csv, jsonl, both };

/// Writes metrics.csv / metrics.jsonl (and local_metrics.csv when present) under dir.
/// Throws IoError when dir cannot be written.
void emit_metrics(const MetricsSeries& series, const std::filesystem::path& dir, EmitFormat format = EmitFormat::both);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace feddtg::exp
