#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "feddtg/data/dataset.hpp"
#include "feddtg/error.hpp"
#include "feddtg/exp/checkpoint.hpp"
#include "feddtg/exp/config.hpp"
#include "feddtg/exp/metrics.hpp"
#include "feddtg/exp/runner.hpp"

namespace {

using feddtg::exp::RunConfig;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> threads;
    bool json = false;
};

RunConfig load_config(const CommonFlags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (f.threads) cfg.threads = *f.threads;
    cfg.validate();
    return cfg;
}

std::string class_table(const std::vector<std::vector<std::size_t>>& counts, std::size_t n_classes) {
    std::vector<std::string> header{"client"};
    for (std::size_t c = 0; c < n_classes; ++c) header.push_back("c" + std::to_string(c));
    header.push_back("total");
    std::vector<std::vector<std::string>> rows{header};
    for (std::size_t k = 0; k < counts.size(); ++k) {
        std::vector<std::string> row{std::to_string(k)};
        std::size_t total = 0;
        for (auto v : counts[k]) {
            row.push_back(std::to_string(v));
            total += v;
        }
        row.push_back(std::to_string(total));
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << "  ";
            out << std::setw(static_cast<int>(width[i])) << row[i];
        }
        out << '\n';
    }
    return out.str();
}

int cmd_run(const CommonFlags& f, const std::string& resume) {
    RunConfig cfg = load_config(f);
    feddtg::exp::RunOptions opts;
    opts.resume_from = resume;
    auto series = feddtg::exp::run_experiment(cfg, opts);
    const auto& last = series.records.back();
    if (f.json) {
        json j{{"run_dir", cfg.run_directory().string()},
               {"round", last.round},
               {"mean_acc", last.accuracy.mean},
               {"min_acc", last.accuracy.min},
               {"max_acc", last.accuracy.max},
               {"std_acc", last.accuracy.stddev}};
        std::cout << j.dump() << '\n';
    } else {
        std::cout << "wrote " << (cfg.run_directory() / "metrics.csv").string() << '\n'
                  << "round " << last.round << ": mean accuracy " << last.accuracy.mean << " (min "
                  << last.accuracy.min << ", max " << last.accuracy.max << ", std " << last.accuracy.stddev << ")\n";
    }
    return kExitOk;
}

int cmd_partition(const CommonFlags& f) {
    RunConfig cfg = load_config(f);
    auto data = feddtg::exp::load_data(cfg);
    auto shards = feddtg::exp::partition_train(cfg, data.train);
    auto counts = feddtg::data::class_count_matrix(data.train, shards);
    json j;
    j["K"] = cfg.K;
    j["n_classes"] = data.train.n_classes;
    j["dirichlet_alpha"] = cfg.dirichlet_alpha;
    j["r"] = cfg.r;
    j["seed"] = cfg.effective_data_seed();
    j["mode"] = cfg.partition.mode;
    j["train_size"] = data.train.size();
    j["counts"] = counts;
    std::vector<std::size_t> sizes;
    for (const auto& s : shards) sizes.push_back(s.size());
    j["shard_sizes"] = sizes;
    const std::string table = class_table(counts, data.train.n_classes);
    const auto dir = cfg.run_directory().parent_path();
    feddtg::exp::write_text_file(dir / "partition.json", j.dump(2) + "\n");
    feddtg::exp::write_text_file(dir / "partition.txt", table);
    std::cout << (f.json ? j.dump(2) + "\n" : table);
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::optional<std::string>& images,
             const std::optional<std::string>& labels, bool as_json) {
    if (images.has_value() != labels.has_value())
        throw feddtg::ValidationError({"eval: --test-images and --test-labels must be given together"});
    if (images && (images->empty() || labels->empty()))
        throw feddtg::ValidationError({"eval: dataset flags name no files"});
    auto exp = feddtg::exp::load_checkpoint(checkpoint);
    std::vector<double> acc;
    if (images) {
        auto test = feddtg::data::load_idx_dataset(*images, *labels);
        if (test.size() == 0) throw feddtg::ValidationError({"eval: dataset is empty"});
        for (const auto& c : exp->clients()) acc.push_back(feddtg::exp::evaluate(exp->specs().classifier, c.cls, test));
    } else {
        acc = exp->client_accuracies();
    }
    auto s = feddtg::exp::summarize_clients(acc);
    if (as_json) {
        json j{{"round", exp->round()}, {"accuracy", acc}, {"mean_acc", s.mean}, {"min_acc", s.min},
               {"max_acc", s.max}, {"std_acc", s.stddev}};
        std::cout << j.dump() << '\n';
    } else {
        std::cout << "round " << exp->round() << '\n';
        for (std::size_t k = 0; k < acc.size(); ++k) std::cout << "client " << k << ": " << acc[k] << '\n';
        std::cout << "mean " << s.mean << "  min " << s.min << "  max " << s.max << "  std " << s.stddev << '\n';
    }
    return kExitOk;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool with_config_required) {
    auto* c = cmd->add_option("--config", f.config, "Experiment configuration (JSON)");
    if (with_config_required) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Override the global seed");
    cmd->add_option("--out", f.out, "Output root (default: $FEDDTG_OUT_DIR or ./runs)");
    cmd->add_option("--threads", f.threads, "Worker threads for per-client stages")->check(CLI::PositiveNumber);
    cmd->add_flag("--json", f.json, "Machine-readable output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated learning simulator with data-free co-distillation"};
    app.require_subcommand(0, 1);
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "Print the default configuration and exit");

    CommonFlags run_flags, part_flags;
    std::string resume;
    auto* run = app.add_subcommand("run", "Run an experiment and write its metrics");
    add_common(run, run_flags, true);
    run->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

    auto* part = app.add_subcommand("partition", "Print the per-client class-count matrix");
    add_common(part, part_flags, true);

    std::string checkpoint;
    std::optional<std::string> test_images, test_labels;
    bool eval_json = false;
    auto* eval = app.add_subcommand("eval", "Evaluate the classifiers stored in a checkpoint");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("--test-images", test_images, "IDX images to evaluate on (default: the run's test set)");
    eval->add_option("--test-labels", test_labels, "IDX labels matching --test-images");
    eval->add_flag("--json", eval_json, "Machine-readable output");

    auto* defaults = app.add_subcommand("defaults", "Print the default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (print_defaults || defaults->parsed()) {
            std::cout << RunConfig{}.to_json().dump(2) << '\n';
            return kExitOk;
        }
        if (run->parsed()) return cmd_run(run_flags, resume);
        if (part->parsed()) return cmd_partition(part_flags);
        if (eval->parsed()) return cmd_eval(checkpoint, test_images, test_labels, eval_json);
        std::cout << app.help();
        return kExitValidation;
    } catch (const feddtg::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
