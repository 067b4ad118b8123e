#include "feddtg/exp/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "feddtg/error.hpp"

namespace feddtg::exp {

std::vector<int> predict(const nn::NetworkSpec& cls_spec, const nn::ParamVector& cls, const nn::Tensor& samples) {
    constexpr std::size_t kChunk = 1024;
    std::vector<int> out;
    out.reserve(samples.rows());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < samples.rows(); start += kChunk) {
        std::size_t end = std::min(samples.rows(), start + kChunk);
        idx.resize(end - start);
        for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
        nn::Tensor logits = nn::forward(cls_spec, cls, samples.gather_rows(idx));
        for (std::size_t r = 0; r < logits.rows(); ++r) {
            auto row = logits.row(r);
            // max_element returns the first maximum, i.e. the lowest index on ties.
            out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        }
    }
    return out;
}

double evaluate(const nn::NetworkSpec& cls_spec, const nn::ParamVector& cls, const data::LabeledDataset& test) {
    if (test.size() == 0) throw ParameterError("evaluate: empty test set");
    if (test.sample_dim() != cls_spec.input_width())
        throw DimensionError("evaluate: sample width", cls_spec.input_width(), test.sample_dim());
    auto pred = predict(cls_spec, cls, test.samples);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test.labels[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

ClientSummary summarize_clients(std::span<const double> acc) {
    if (acc.empty()) throw ParameterError("summarize_clients: no clients");
    ClientSummary s;
    s.values.assign(acc.begin(), acc.end());
    s.min = *std::min_element(acc.begin(), acc.end());
    s.max = *std::max_element(acc.begin(), acc.end());
    double sum = 0.0;
    for (double a : acc) sum += a;
    s.mean = sum / static_cast<double>(acc.size());
    double ss = 0.0;
    for (double a : acc) ss += (a - s.mean) * (a - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(acc.size()));
    if (s.min == s.max) {
        s.mean = s.min;
        s.stddev = 0.0;
    }
    return s;
}

LossSummary summarize_losses(const fed::RoundRecord& rec) {
    LossSummary l;
    std::size_t n = 0;
    for (const auto& c : rec.clients) {
        if (c.local_steps == 0) continue;
        l.discriminator += c.loss_discriminator;
        l.generator += c.loss_generator;
        l.classifier += c.loss_classifier;
        l.distill += c.loss_distill;
        ++n;
    }
    if (n > 0) {
        double inv = 1.0 / static_cast<double>(n);
        l.discriminator *= inv;
        l.generator *= inv;
        l.classifier *= inv;
        l.distill *= inv;
    }
    return l;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> csv_header(std::size_t clients) {
    std::vector<std::string> h{"round", "mean_acc", "min_acc", "max_acc", "std_acc"};
    for (std::size_t k = 0; k < clients; ++k) h.push_back("acc_" + std::to_string(k));
    for (auto name : fed::LedgerTotals::field_names()) h.emplace_back(name);
    return h;
}

namespace {

void append_row(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
}

std::string csv_for(const MetricsSeries& series, bool local) {
    std::string out;
    append_row(out, csv_header(series.clients));
    for (const auto& rec : series.records) {
        const ClientSummary* s = local ? (rec.local_accuracy ? &*rec.local_accuracy : nullptr) : &rec.accuracy;
        if (s == nullptr) continue;
        if (s->values.size() != series.clients)
            throw ParameterError("metrics: record has " + std::to_string(s->values.size()) + " clients, series has " +
                                 std::to_string(series.clients));
        std::vector<std::string> cells{std::to_string(rec.round), format_double(s->mean), format_double(s->min),
                                       format_double(s->max), format_double(s->stddev)};
        for (double v : s->values) cells.push_back(format_double(v));
        for (auto v : rec.ledger.values()) cells.push_back(std::to_string(v));
        append_row(out, cells);
    }
    return out;
}

nlohmann::json summary_json(const ClientSummary& s) {
    return {{"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"std", s.stddev}, {"values", s.values}};
}

nlohmann::json ledger_json(const fed::LedgerTotals& t) {
    nlohmann::json j = nlohmann::json::object();
    auto values = t.values();
    const auto& names = fed::LedgerTotals::field_names();
    for (std::size_t i = 0; i < names.size(); ++i) j[std::string(names[i])] = values[i];
    return j;
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw FormatError("metrics csv line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw FormatError("metrics csv line " + std::to_string(line) + ": bad integer '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

}  // namespace

std::string metrics_csv(const MetricsSeries& series) { return csv_for(series, false); }

std::string local_metrics_csv(const MetricsSeries& series) {
    bool any = std::any_of(series.records.begin(), series.records.end(),
                           [](const MetricsRecord& r) { return r.local_accuracy.has_value(); });
    return any ? csv_for(series, true) : std::string();
}

std::string metrics_jsonl(const MetricsSeries& series) {
    std::string out;
    for (const auto& rec : series.records) {
        nlohmann::json j;
        j["round"] = rec.round;
        j["accuracy"] = summary_json(rec.accuracy);
        if (rec.local_accuracy) j["local_accuracy"] = summary_json(*rec.local_accuracy);
        j["losses"] = {{"discriminator", rec.losses.discriminator},
                       {"generator", rec.losses.generator},
                       {"classifier", rec.losses.classifier},
                       {"distill", rec.losses.distill}};
        j["ledger"] = ledger_json(rec.ledger);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string rounds_jsonl(std::span<const fed::RoundRecord> rounds) {
    std::string out;
    for (const auto& r : rounds) {
        nlohmann::json j;
        j["round"] = r.round;
        j["selected"] = r.selected;
        j["distilled"] = r.distilled;
        nlohmann::json clients = nlohmann::json::array();
        for (const auto& c : r.clients) {
            clients.push_back({{"client", c.client_id},
                               {"local_steps", c.local_steps},
                               {"loss_discriminator", c.loss_discriminator},
                               {"loss_generator", c.loss_generator},
                               {"loss_classifier", c.loss_classifier},
                               {"loss_distill", c.loss_distill},
                               {"fake_digest", c.fake_digest},
                               {"gen_digest", c.gen_digest},
                               {"disc_digest", c.disc_digest}});
        }
        j["clients"] = std::move(clients);
        j["ledger"] = ledger_json(r.ledger);
        j["warnings"] = r.warnings;
        out += j.dump();
        out += '\n';
    }
    return out;
}

MetricsSeries parse_metrics_csv(const std::string& text) {
    std::stringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("metrics csv: missing header");
    auto header = split(line);
    constexpr std::size_t kFixed = 5 + fed::LedgerTotals::kFieldCount;
    if (header.size() < kFixed) throw FormatError("metrics csv: header too short");
    MetricsSeries series;
    series.clients = header.size() - kFixed;
    if (header != csv_header(series.clients)) throw FormatError("metrics csv: unexpected header");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != header.size())
            throw FormatError("metrics csv line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
        MetricsRecord rec;
        rec.round = static_cast<int>(parse_u64(cells[0], line_no));
        rec.accuracy.mean = parse_double(cells[1], line_no);
        rec.accuracy.min = parse_double(cells[2], line_no);
        rec.accuracy.max = parse_double(cells[3], line_no);
        rec.accuracy.stddev = parse_double(cells[4], line_no);
        for (std::size_t k = 0; k < series.clients; ++k) rec.accuracy.values.push_back(parse_double(cells[5 + k], line_no));
        std::array<std::uint64_t, fed::LedgerTotals::kFieldCount> v{};
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = parse_u64(cells[5 + series.clients + i], line_no);
        rec.ledger = {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
        series.records.push_back(std::move(rec));
    }
    return series;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void emit_metrics(const MetricsSeries& series, const std::filesystem::path& dir, EmitFormat format) {
    if (series.records.empty()) throw ParameterError("emit_metrics: empty series");
    if (format != EmitFormat::jsonl) {
        write_text_file(dir / "metrics.csv", metrics_csv(series));
        std::string local = local_metrics_csv(series);
        if (!local.empty()) write_text_file(dir / "local_metrics.csv", local);
    }
    if (format != EmitFormat::csv) write_text_file(dir / "metrics.jsonl", metrics_jsonl(series));
}

}  // namespace feddtg::exp
