#include "feddtg/exp/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "feddtg/error.hpp"

namespace feddtg::exp {
namespace {

using nlohmann::json;

// Collects problems while reading fields so that every violation is reported at once.
class Reader {
public:
    Reader(const json& obj, std::string path, std::vector<std::string>& problems)
        : obj_(obj), path_(std::move(path)), problems_(problems) {
        if (!obj_.is_object()) problems_.push_back(where("") + " must be a JSON object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_.is_object() || !obj_.contains(key)) return;
        try {
            const json& v = obj_.at(key);
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
            }
            out = v.get<T>();
        } catch (const std::exception& e) {
            problems_.push_back(where(key) + ": " + e.what());
        }
    }

    template <typename T, typename Parse>
    void read_enum(const char* key, T& out, Parse parse) {
        std::string s;
        bool present = obj_.is_object() && obj_.contains(key);
        read(key, s);
        if (!present || s.empty()) return;
        try {
            out = parse(s);
        } catch (const std::exception& e) {
            problems_.push_back(where(key) + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
        return &obj_.at(key);
    }

    bool has(const char* key) const { return obj_.is_object() && obj_.contains(key); }

    void reject_unknown() {
        if (!obj_.is_object()) return;
        for (const auto& [k, v] : obj_.items()) {
            if (!seen_.contains(k)) problems_.push_back(where(k) + ": unknown key");
        }
    }

    std::string where(const std::string& key) const {
        if (path_.empty()) return key.empty() ? "config" : key;
        return key.empty() ? path_ : path_ + "." + key;
    }

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string>& problems_;
    std::set<std::string> seen_;
};

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    std::vector<std::string> problems;
    Reader top(j, "", problems);
    top.read("run_id", c.run_id);
    top.read("output_dir", c.output_dir);
    top.read_enum("algorithm", c.algorithm, fed::algorithm_from_string);
    if (const json* a = top.child("ablation")) {
        Reader r(*a, "ablation", problems);
        r.read("use_global_generator", c.ablation.use_global_generator);
        r.read("use_co_distillation", c.ablation.use_co_distillation);
        r.reject_unknown();
    }
    if (const json* d = top.child("dataset")) {
        Reader r(*d, "dataset", problems);
        r.read("kind", c.dataset.kind);
        r.read("train_images", c.dataset.train_images);
        r.read("train_labels", c.dataset.train_labels);
        r.read("test_images", c.dataset.test_images);
        r.read("test_labels", c.dataset.test_labels);
        r.read("test_samples_per_class", c.dataset.test_samples_per_class);
        if (const json* m = r.child("mixture")) {
            Reader mr(*m, "dataset.mixture", problems);
            mr.read("n_classes", c.dataset.mixture.n_classes);
            mr.read("means", c.dataset.mixture.means);
            mr.read("stds", c.dataset.mixture.stds);
            mr.read("samples_per_class", c.dataset.mixture.samples_per_class);
            mr.reject_unknown();
        }
        r.reject_unknown();
    }
    if (const json* p = top.child("partition")) {
        Reader r(*p, "partition", problems);
        r.read("mode", c.partition.mode);
        r.read("sizes", c.partition.sizes);
        r.reject_unknown();
    }
    top.read("K", c.K);
    top.read("frac", c.frac);
    top.read("r", c.r);
    top.read("dirichlet_alpha", c.dirichlet_alpha);
    top.read("T", c.T);
    top.read("B", c.B);
    top.read("local_epochs", c.local_epochs);
    top.read("local_steps", c.local_steps);
    top.read("z_dim", c.z_dim);
    top.read("distill_sample_count", c.distill_sample_count);
    top.read("distill_batch_size", c.distill_batch_size);
    top.read("distill_epochs", c.distill_epochs);
    top.read("alpha_kd", c.alpha_kd);
    top.read("temperature", c.temperature);
    top.read_enum("loo_normalization", c.loo_normalization, fed::loo_normalization_from_string);
    if (const json* a = top.child("architecture")) {
        Reader r(*a, "architecture", problems);
        r.read("generator_hidden", c.architecture.generator_hidden);
        r.read("discriminator_hidden", c.architecture.discriminator_hidden);
        r.read("classifier_hidden", c.architecture.classifier_hidden);
        r.reject_unknown();
    }
    if (const json* o = top.child("optimizer")) {
        Reader r(*o, "optimizer", problems);
        r.read_enum("rule", c.optimizer.rule, nn::optimizer_rule_from_string);
        r.read("lr_generator", c.optimizer.lr_generator);
        r.read("lr_discriminator", c.optimizer.lr_discriminator);
        r.read("lr_classifier", c.optimizer.lr_classifier);
        r.read("beta1_gan", c.optimizer.beta1_gan);
        r.read("beta1_classifier", c.optimizer.beta1_classifier);
        r.read("beta2", c.optimizer.beta2);
        r.reject_unknown();
    }
    top.read("fedprox_mu", c.fedprox_mu);
    top.read_enum("fedavg_weighting", c.fedavg_weighting, fed::weighting_from_string);
    top.read("seed", c.seed);
    if (top.has("data_seed")) {
        std::uint64_t ds = 0;
        top.read("data_seed", ds);
        c.data_seed = ds;
    } else {
        top.read("data_seed", c.seed);  // marks the key as known
    }
    top.read("eval_every", c.eval_every);
    top.read("local_eval", c.local_eval);
    top.read("checkpoint_every", c.checkpoint_every);
    top.read("threads", c.threads);
    top.reject_unknown();

    // Range checks run on whatever parsed, so one error lists every problem.
    try {
        c.validate();
    } catch (const ValidationError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
    if (!problems.empty()) throw ValidationError(problems);
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError({"config is not valid JSON: " + std::string(e.what())});
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    json j;
    j["run_id"] = run_id;
    j["output_dir"] = output_dir;
    j["algorithm"] = fed::to_string(algorithm);
    j["ablation"] = {{"use_global_generator", ablation.use_global_generator},
                     {"use_co_distillation", ablation.use_co_distillation}};
    j["dataset"] = {{"kind", dataset.kind},
                    {"train_images", dataset.train_images},
                    {"train_labels", dataset.train_labels},
                    {"test_images", dataset.test_images},
                    {"test_labels", dataset.test_labels},
                    {"test_samples_per_class", dataset.test_samples_per_class},
                    {"mixture",
                     {{"n_classes", dataset.mixture.n_classes},
                      {"means", dataset.mixture.means},
                      {"stds", dataset.mixture.stds},
                      {"samples_per_class", dataset.mixture.samples_per_class}}}};
    j["partition"] = {{"mode", partition.mode}, {"sizes", partition.sizes}};
    j["K"] = K;
    j["frac"] = frac;
    j["r"] = r;
    j["dirichlet_alpha"] = dirichlet_alpha;
    j["T"] = T;
    j["B"] = B;
    j["local_epochs"] = local_epochs;
    j["local_steps"] = local_steps;
    j["z_dim"] = z_dim;
    j["distill_sample_count"] = distill_sample_count;
    j["distill_batch_size"] = distill_batch_size;
    j["distill_epochs"] = distill_epochs;
    j["alpha_kd"] = alpha_kd;
    j["temperature"] = temperature;
    j["loo_normalization"] = fed::to_string(loo_normalization);
    j["architecture"] = {{"generator_hidden", architecture.generator_hidden},
                         {"discriminator_hidden", architecture.discriminator_hidden},
                         {"classifier_hidden", architecture.classifier_hidden}};
    j["optimizer"] = {{"rule", nn::to_string(optimizer.rule)},
                      {"lr_generator", optimizer.lr_generator},
                      {"lr_discriminator", optimizer.lr_discriminator},
                      {"lr_classifier", optimizer.lr_classifier},
                      {"beta1_gan", optimizer.beta1_gan},
                      {"beta1_classifier", optimizer.beta1_classifier},
                      {"beta2", optimizer.beta2}};
    j["fedprox_mu"] = fedprox_mu;
    j["fedavg_weighting"] = fed::to_string(fedavg_weighting);
    j["seed"] = seed;
    if (data_seed) j["data_seed"] = *data_seed;
    j["eval_every"] = eval_every;
    j["local_eval"] = local_eval;
    j["checkpoint_every"] = checkpoint_every;
    j["threads"] = threads;
    return j;
}

void RunConfig::validate() const {
    std::vector<std::string> p;
    if (run_id.empty() || run_id.find('/') != std::string::npos) p.push_back("run_id: must be a non-empty name without '/'");
    if (K < 1) p.push_back("K: must be at least 1");
    if (!(frac > 0.0 && frac <= 1.0)) p.push_back("frac: must lie in (0, 1]");
    if (!(r > 0.0 && r <= 1.0)) p.push_back("r: must lie in (0, 1]");
    if (!(dirichlet_alpha > 0.0)) p.push_back("dirichlet_alpha: must be positive");
    if (B < 1) p.push_back("B: must be at least 1");
    if (local_epochs < 1 && local_steps == 0) p.push_back("local_epochs: must be at least 1 when local_steps is 0");
    if (z_dim < 1) p.push_back("z_dim: must be at least 1");
    if (distill_sample_count < 1) p.push_back("distill_sample_count: must be at least 1");
    if (distill_batch_size < 1) p.push_back("distill_batch_size: must be at least 1");
    if (distill_epochs < 1) p.push_back("distill_epochs: must be at least 1");
    if (!(alpha_kd >= 0.0 && alpha_kd <= 1.0)) p.push_back("alpha_kd: must lie in [0, 1]");
    if (!(temperature > 0.0)) p.push_back("temperature: must be positive");
    if (!(optimizer.lr_generator > 0.0)) p.push_back("optimizer.lr_generator: must be positive");
    if (!(optimizer.lr_discriminator > 0.0)) p.push_back("optimizer.lr_discriminator: must be positive");
    if (!(optimizer.lr_classifier > 0.0)) p.push_back("optimizer.lr_classifier: must be positive");
    for (double b : {optimizer.beta1_gan, optimizer.beta1_classifier, optimizer.beta2}) {
        if (!(b >= 0.0 && b < 1.0)) {
            p.push_back("optimizer: beta values must lie in [0, 1)");
            break;
        }
    }
    if (!(fedprox_mu >= 0.0)) p.push_back("fedprox_mu: must be non-negative");
    if (eval_every < 1) p.push_back("eval_every: must be at least 1");
    if (threads < 1) p.push_back("threads: must be at least 1");
    for (const auto* hidden : {&architecture.generator_hidden, &architecture.discriminator_hidden,
                               &architecture.classifier_hidden}) {
        for (auto w : *hidden) {
            if (w == 0) {
                p.push_back("architecture: hidden widths must be positive");
                break;
            }
        }
    }
    if (dataset.kind == "idx") {
        if (dataset.train_images.empty()) p.push_back("dataset.train_images: required for kind 'idx'");
        if (dataset.train_labels.empty()) p.push_back("dataset.train_labels: required for kind 'idx'");
        if (dataset.test_images.empty()) p.push_back("dataset.test_images: required for kind 'idx'");
        if (dataset.test_labels.empty()) p.push_back("dataset.test_labels: required for kind 'idx'");
    } else if (dataset.kind == "mixture") {
        try {
            dataset.mixture.validate();
        } catch (const std::exception& e) {
            p.push_back(std::string("dataset.mixture: ") + e.what());
        }
        if (dataset.mixture.samples_per_class == 0) p.push_back("dataset.mixture.samples_per_class: must be positive");
        if (dataset.test_samples_per_class == 0) p.push_back("dataset.test_samples_per_class: must be positive");
    } else {
        p.push_back("dataset.kind: must be 'mixture' or 'idx'");
    }
    if (partition.mode == "quantity_skew") {
        if (partition.sizes.size() != K) p.push_back("partition.sizes: needs exactly K entries for mode 'quantity_skew'");
    } else if (partition.mode != "dirichlet" && partition.mode != "class_per_client") {
        p.push_back("partition.mode: must be 'dirichlet', 'class_per_client' or 'quantity_skew'");
    }
    if (!p.empty()) throw ValidationError(p);
}

std::filesystem::path RunConfig::run_directory() const {
    std::filesystem::path root = output_dir;
    if (root.empty()) {
        const char* env = std::getenv("FEDDTG_OUT_DIR");
        root = env != nullptr && *env != '\0' ? env : "runs";
    }
    return root / run_id / algorithm_label();
}

fed::ProtocolConfig RunConfig::protocol() const {
    fed::ProtocolConfig p;
    p.clients = K;
    p.frac = frac;
    p.batch_size = B;
    p.local_epochs = local_epochs;
    p.local_steps = local_steps;
    p.distill.alpha_kd = alpha_kd;
    p.distill.distill_sample_count = distill_sample_count;
    p.distill.temperature = temperature;
    p.distill_batch_size = distill_batch_size;
    p.distill_epochs = distill_epochs;
    p.loo = loo_normalization;
    p.ablation = ablation;
    p.threads = threads;
    return p;
}

fed::BaselineConfig RunConfig::baseline() const {
    return {algorithm, fedprox_mu, local_epochs, fedavg_weighting};
}

gan::TripletOptimizers RunConfig::optimizers() const {
    gan::TripletOptimizers o;
    o.generator = {optimizer.rule, optimizer.lr_generator, optimizer.beta1_gan, optimizer.beta2, 1e-8};
    o.discriminator = {optimizer.rule, optimizer.lr_discriminator, optimizer.beta1_gan, optimizer.beta2, 1e-8};
    o.classifier = {optimizer.rule, optimizer.lr_classifier, optimizer.beta1_classifier, optimizer.beta2, 1e-8};
    return o;
}

gan::TripletSpecs RunConfig::specs(std::size_t sample_dim, std::size_t n_classes) const {
    return gan::TripletSpecs::make(z_dim, n_classes, sample_dim, architecture.generator_hidden,
                                   architecture.discriminator_hidden, architecture.classifier_hidden);
}

std::string RunConfig::algorithm_label() const {
    std::string label = fed::to_string(algorithm);
    if (algorithm == fed::Algorithm::feddtg) {
        if (!ablation.use_global_generator) label += "_no_global_generator";
        if (!ablation.use_co_distillation) label += "_no_codistillation";
    }
    return label;
}

}  // namespace feddtg::exp
