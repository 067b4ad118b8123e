#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "feddtg/data/dataset.hpp"
#include "feddtg/fed/baselines.hpp"
#include "feddtg/fed/protocol.hpp"
#include "feddtg/gan/triplet.hpp"

namespace feddtg::exp {

struct DatasetConfig {
    std::string kind = "mixture";  // "mixture" | "idx"
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    data::MixtureSpec mixture = data::MixtureSpec::default_spec();
    std::size_t test_samples_per_class = 250;
};

struct PartitionConfig {
    std::string mode = "dirichlet";  // "dirichlet" | "class_per_client" | "quantity_skew"
    std::vector<std::size_t> sizes;  // quantity_skew only, one per client
};

struct ArchitectureConfig {
    std::vector<std::size_t> generator_hidden{128, 256};
    std::vector<std::size_t> discriminator_hidden{256, 128};
    std::vector<std::size_t> classifier_hidden{256, 128};
};

struct OptimizerSection {
    nn::OptimizerRule rule = nn::OptimizerRule::adam;
    double lr_generator = 2e-4;
    double lr_discriminator = 2e-4;
    double lr_classifier = 1e-3;
    double beta1_gan = 0.5;
    double beta1_classifier = 0.9;
    double beta2 = 0.999;
};

/// Everything an experiment needs. Parsed from JSON; unknown keys are errors.
struct RunConfig {
    std::string run_id = "run";
    std::string output_dir;  // empty: $FEDDTG_OUT_DIR, else "runs"
    fed::Algorithm algorithm = fed::Algorithm::feddtg;
    fed::AblationFlags ablation;
    DatasetConfig dataset;
    PartitionConfig partition;

    std::size_t K = 20;
    double frac = 0.5;
    double r = 0.25;
    double dirichlet_alpha = 0.05;
    std::size_t T = 100;
    std::size_t B = 32;
    std::size_t local_epochs = 1;
    std::size_t local_steps = 0;

    std::size_t z_dim = 64;
    std::size_t distill_sample_count = 10000;
    std::size_t distill_batch_size = 32;
    std::size_t distill_epochs = 1;
    double alpha_kd = 0.9;
    double temperature = 1.0;
    fed::LooNormalization loo_normalization = fed::LooNormalization::leave_one_out;

    ArchitectureConfig architecture;
    OptimizerSection optimizer;
    double fedprox_mu = 0.01;
    fed::AggregationWeighting fedavg_weighting = fed::AggregationWeighting::uniform;

    std::uint64_t seed = 1;
    std::optional<std::uint64_t> data_seed;  // defaults to seed
    std::size_t eval_every = 1;
    bool local_eval = false;
    std::size_t checkpoint_every = 0;
    std::size_t threads = 1;

    /// Throws ValidationError naming every bad or unknown field.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    /// Throws ValidationError naming every violated field.
    void validate() const;

    std::uint64_t effective_data_seed() const { return data_seed.value_or(seed); }
    std::filesystem::path run_directory() const;

    fed::ProtocolConfig protocol() const;
    fed::BaselineConfig baseline() const;
    gan::TripletOptimizers optimizers() const;
    gan::TripletSpecs specs(std::size_t sample_dim, std::size_t n_classes) const;
    /// Directory-safe algorithm label, including ablation suffixes.
    std::string algorithm_label() const;
};

}  // namespace feddtg::exp
