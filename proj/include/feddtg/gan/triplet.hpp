#pragma once

// One client's three-player GAN: generator G(z, y), discriminator D(x) and
// classifier C(x), trained locally and distilled against peers' soft labels.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "feddtg/nn/network.hpp"
#include "feddtg/nn/optimizer.hpp"
#include "feddtg/nn/tensor.hpp"
#include "feddtg/rng.hpp"

namespace feddtg::gan {

using nn::Gradients;
using nn::NetworkSpec;
using nn::ParamVector;
using nn::Tensor;

/// Shared architectures. All clients use the same three specs so parameter
/// averaging is well defined.
struct TripletSpecs {
    std::size_t z_dim = 0;
    std::size_t n_classes = 0;
    std::size_t sample_dim = 0;
    NetworkSpec generator;      // [z_dim + n_classes -> ... -> sample_dim], tanh output
    NetworkSpec discriminator;  // [sample_dim -> ... -> 1], sigmoid output
    NetworkSpec classifier;     // [sample_dim -> ... -> n_classes], logits

    static TripletSpecs make(std::size_t z_dim, std::size_t n_classes, std::size_t sample_dim,
                             std::span<const std::size_t> generator_hidden,
                             std::span<const std::size_t> discriminator_hidden,
                             std::span<const std::size_t> classifier_hidden);

    void validate() const;

    friend bool operator==(const TripletSpecs&, const TripletSpecs&) = default;
};

struct TripletOptimizers {
    nn::OptimizerConfig generator{nn::OptimizerRule::adam, 2e-4, 0.5, 0.999, 1e-8};
    nn::OptimizerConfig discriminator{nn::OptimizerRule::adam, 2e-4, 0.5, 0.999, 1e-8};
    nn::OptimizerConfig classifier{nn::OptimizerRule::adam, 1e-3, 0.9, 0.999, 1e-8};
};

struct TripletState {
    int client_id = 0;
    ParamVector gen;
    ParamVector disc;
    ParamVector cls;
    nn::OptimizerState gen_opt;
    nn::OptimizerState disc_opt;
    nn::OptimizerState cls_opt;

    /// Fresh state drawn from rng; clients seeded identically start identical.
    static TripletState init(const TripletSpecs& specs, const TripletOptimizers& opt, int client_id, Rng& rng);

    friend bool operator==(const TripletState&, const TripletState&) = default;
};

struct NoiseBatch {
    Tensor values;  // (batch, z_dim), i.i.d. N(0, 1)
};

struct LabelBatch {
    std::vector<int> labels;
    std::size_t n_classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    Tensor one_hot() const;

    friend bool operator==(const LabelBatch&, const LabelBatch&) = default;
};

struct FakeBatch {
    Tensor samples;  // (batch, sample_dim)
    LabelBatch labels;

    friend bool operator==(const FakeBatch&, const FakeBatch&) = default;
};

NoiseBatch sample_noise(Rng& rng, std::size_t batch, std::size_t z_dim);

/// Noise batch number `index` of the stream identified by seed.
NoiseBatch noise_batch_at(std::uint64_t seed, std::size_t index, std::size_t batch, std::size_t z_dim);

LabelBatch sample_labels_uniform(Rng& rng, std::size_t batch, std::size_t n);

/// Cyclic labels start, start+1, ... (mod n); class counts differ by at most one.
LabelBatch balanced_labels(std::size_t batch, std::size_t n, std::size_t start = 0);

FakeBatch generate(const TripletSpecs& specs, const ParamVector& gen, const NoiseBatch& z, const LabelBatch& y);

/// A player's loss and the gradient for that player's parameters only.
struct PlayerLoss {
    double value = 0.0;
    Gradients grads;
};

/// -[mean log D(real) + mean log(1 - D(fake))]. Fake samples are constants.
PlayerLoss discriminator_loss(const TripletSpecs& specs, const ParamVector& disc, const Tensor& real,
                              const FakeBatch& fake);

/// mean[-log D(G(z,y))] + mean CE(C(G(z,y)), y); only the generator receives a gradient.
PlayerLoss generator_loss(const TripletSpecs& specs, const ParamVector& gen, const ParamVector& disc,
                          const ParamVector& cls, const NoiseBatch& z, const LabelBatch& y);

/// mean CE on (real, labels) + mean CE on (fake, fake.labels).
PlayerLoss classifier_loss(const TripletSpecs& specs, const ParamVector& cls, const Tensor& real,
                           std::span<const int> labels, const FakeBatch& fake);

struct LossRecord {
    double discriminator = 0.0;
    double generator = 0.0;
    double classifier = 0.0;
};

/// One D, then G, then C update. Each update draws a fresh fake batch the size of the real batch.
LossRecord local_adversarial_step(const TripletSpecs& specs, TripletState& state, const Tensor& real,
                                  std::span<const int> labels, Rng& rng);

/// softmax(C(x) / T).
Tensor soft_label_output(const TripletSpecs& specs, const ParamVector& cls, const Tensor& samples,
                         double temperature);

struct DistillConfig {
    double alpha_kd = 0.9;
    std::size_t distill_sample_count = 10000;
    double temperature = 1.0;

    void validate() const;
};

/// (1 - alpha) CE(C(x_g), y) + alpha KL(y_dis || softmax(C(x_g) / T)), gradient for the classifier.
PlayerLoss distillation_loss(const TripletSpecs& specs, const ParamVector& cls, const FakeBatch& fake,
                             const Tensor& y_dis, const DistillConfig& cfg);

/// One classifier optimizer step on the distillation loss; returns the loss before the step.
double distillation_step(const TripletSpecs& specs, TripletState& state, const FakeBatch& fake, const Tensor& y_dis,
                         const DistillConfig& cfg);

}  // namespace feddtg::gan
