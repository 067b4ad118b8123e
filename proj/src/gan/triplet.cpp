#include "feddtg/gan/triplet.hpp"

#include <random>
#include <string>

#include "feddtg/error.hpp"
#include "feddtg/nn/losses.hpp"
#include "feddtg/simd/kernels.hpp"

namespace feddtg::gan {
namespace {

std::vector<std::size_t> chain(std::size_t in, std::span<const std::size_t> hidden, std::size_t out) {
    std::vector<std::size_t> widths{in};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    return widths;
}

void add_into(Gradients& acc, const Gradients& g) {
    simd::active_kernels().axpy(acc.size(), 1.0, g.values.data(), acc.values.data());
}

void check_samples(const TripletSpecs& specs, const Tensor& x, const char* what) {
    if (x.cols() != specs.sample_dim) throw DimensionError(std::string(what) + " sample width", specs.sample_dim, x.cols());
}

}  // namespace

TripletSpecs TripletSpecs::make(std::size_t z_dim, std::size_t n_classes, std::size_t sample_dim,
                                std::span<const std::size_t> generator_hidden,
                                std::span<const std::size_t> discriminator_hidden,
                                std::span<const std::size_t> classifier_hidden) {
    using nn::Activation;
    using nn::OutputHead;
    TripletSpecs s;
    s.z_dim = z_dim;
    s.n_classes = n_classes;
    s.sample_dim = sample_dim;
    s.generator = NetworkSpec::mlp(chain(z_dim + n_classes, generator_hidden, sample_dim), Activation::relu,
                                   Activation::tanh, OutputHead::logits);
    s.discriminator = NetworkSpec::mlp(chain(sample_dim, discriminator_hidden, 1), Activation::relu,
                                       Activation::sigmoid, OutputHead::probability);
    s.classifier = NetworkSpec::mlp(chain(sample_dim, classifier_hidden, n_classes), Activation::relu,
                                    Activation::identity, OutputHead::logits);
    s.validate();
    return s;
}

void TripletSpecs::validate() const {
    if (n_classes == 0) throw ParameterError("n_classes must be positive");
    generator.validate();
    discriminator.validate();
    classifier.validate();
    if (generator.input_width() != z_dim + n_classes) {
        throw DimensionError("generator input width", z_dim + n_classes, generator.input_width());
    }
    if (generator.output_width() != sample_dim) throw DimensionError("generator output width", sample_dim, generator.output_width());
    if (discriminator.input_width() != sample_dim) {
        throw DimensionError("discriminator input width", sample_dim, discriminator.input_width());
    }
    if (discriminator.output_width() != 1) throw DimensionError("discriminator output width", 1, discriminator.output_width());
    if (classifier.input_width() != sample_dim) throw DimensionError("classifier input width", sample_dim, classifier.input_width());
    if (classifier.output_width() != n_classes) {
        throw DimensionError("classifier output width", n_classes, classifier.output_width());
    }
}

TripletState TripletState::init(const TripletSpecs& specs, const TripletOptimizers& opt, int client_id, Rng& rng) {
    TripletState s;
    s.client_id = client_id;
    s.gen = nn::init_params(specs.generator, rng);
    s.disc = nn::init_params(specs.discriminator, rng);
    s.cls = nn::init_params(specs.classifier, rng);
    s.gen_opt = nn::OptimizerState::make(opt.generator, s.gen.size());
    s.disc_opt = nn::OptimizerState::make(opt.discriminator, s.disc.size());
    s.cls_opt = nn::OptimizerState::make(opt.classifier, s.cls.size());
    return s;
}

Tensor LabelBatch::one_hot() const {
    Tensor out(labels.size(), n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw ParameterError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(n_classes) + ")");
        }
        out(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return out;
}

NoiseBatch sample_noise(Rng& rng, std::size_t batch, std::size_t z_dim) {
    std::normal_distribution<double> dist(0.0, 1.0);
    NoiseBatch z{Tensor(batch, z_dim)};
    for (double& v : z.values.data()) v = dist(rng);
    return z;
}

NoiseBatch noise_batch_at(std::uint64_t seed, std::size_t index, std::size_t batch, std::size_t z_dim) {
    Rng rng = derive_stream(seed, index);
    return sample_noise(rng, batch, z_dim);
}

LabelBatch sample_labels_uniform(Rng& rng, std::size_t batch, std::size_t n) {
    if (n == 0) throw ParameterError("label sampling needs at least one class");
    std::uniform_int_distribution<int> dist(0, static_cast<int>(n) - 1);
    LabelBatch y{std::vector<int>(batch), n};
    for (int& l : y.labels) l = dist(rng);
    return y;
}

LabelBatch balanced_labels(std::size_t batch, std::size_t n, std::size_t start) {
    if (n == 0) throw ParameterError("balanced labels need at least one class");
    LabelBatch y{std::vector<int>(batch), n};
    for (std::size_t i = 0; i < batch; ++i) y.labels[i] = static_cast<int>((start + i) % n);
    return y;
}

FakeBatch generate(const TripletSpecs& specs, const ParamVector& gen, const NoiseBatch& z, const LabelBatch& y) {
    if (z.values.cols() != specs.z_dim) throw DimensionError("noise width", specs.z_dim, z.values.cols());
    if (z.values.rows() != y.size()) throw DimensionError("label count", z.values.rows(), y.size());
    if (y.n_classes != specs.n_classes) throw DimensionError("label class count", specs.n_classes, y.n_classes);
    return {nn::forward(specs.generator, gen, concat_cols(z.values, y.one_hot())), y};
}

PlayerLoss discriminator_loss(const TripletSpecs& specs, const ParamVector& disc, const Tensor& real,
                              const FakeBatch& fake) {
    if (real.empty()) throw ParameterError("discriminator loss needs a non-empty real batch");
    check_samples(specs, real, "real");
    check_samples(specs, fake.samples, "fake");

    Tensor stacked(real.rows() + fake.samples.rows(), specs.sample_dim);
    std::copy(real.data().begin(), real.data().end(), stacked.data().begin());
    std::copy(fake.samples.data().begin(), fake.samples.data().end(),
              stacked.data().begin() + static_cast<std::ptrdiff_t>(real.size()));
    std::vector<std::uint8_t> is_real(stacked.rows(), 0);
    std::fill_n(is_real.begin(), real.rows(), std::uint8_t{1});

    const auto trace = nn::forward_trace(specs.discriminator, disc, stacked);
    const auto loss = nn::binary_log_loss(trace.result(), is_real);
    return {loss.value, nn::backward_trace(specs.discriminator, disc, trace, loss.grad, false).grads};
}

PlayerLoss generator_loss(const TripletSpecs& specs, const ParamVector& gen, const ParamVector& disc,
                          const ParamVector& cls, const NoiseBatch& z, const LabelBatch& y) {
    if (z.values.cols() != specs.z_dim) throw DimensionError("noise width", specs.z_dim, z.values.cols());
    if (z.values.rows() != y.size()) throw DimensionError("label count", z.values.rows(), y.size());

    const auto g_trace = nn::forward_trace(specs.generator, gen, concat_cols(z.values, y.one_hot()));
    const Tensor& x = g_trace.result();

    const auto d_trace = nn::forward_trace(specs.discriminator, disc, x);
    const std::vector<std::uint8_t> all_real(x.rows(), 1);
    const auto adv = nn::binary_log_loss(d_trace.result(), all_real);
    auto d_back = nn::backward_trace(specs.discriminator, disc, d_trace, adv.grad, true);

    const auto c_trace = nn::forward_trace(specs.classifier, cls, x);
    const auto ce = nn::cross_entropy(c_trace.result(), y.labels);
    const auto c_back = nn::backward_trace(specs.classifier, cls, c_trace, ce.grad, true);

    Tensor dx = std::move(d_back.input_grad);
    simd::active_kernels().axpy(dx.size(), 1.0, c_back.input_grad.data().data(), dx.data().data());
    return {adv.value + ce.value, nn::backward_trace(specs.generator, gen, g_trace, dx, false).grads};
}

PlayerLoss classifier_loss(const TripletSpecs& specs, const ParamVector& cls, const Tensor& real,
                           std::span<const int> labels, const FakeBatch& fake) {
    if (real.empty() || fake.samples.empty()) throw ParameterError("classifier loss needs non-empty real and fake batches");
    check_samples(specs, real, "real");
    check_samples(specs, fake.samples, "fake");

    const auto r_trace = nn::forward_trace(specs.classifier, cls, real);
    const auto r_ce = nn::cross_entropy(r_trace.result(), labels);
    PlayerLoss out{r_ce.value, nn::backward_trace(specs.classifier, cls, r_trace, r_ce.grad, false).grads};

    const auto f_trace = nn::forward_trace(specs.classifier, cls, fake.samples);
    const auto f_ce = nn::cross_entropy(f_trace.result(), fake.labels.labels);
    out.value += f_ce.value;
    add_into(out.grads, nn::backward_trace(specs.classifier, cls, f_trace, f_ce.grad, false).grads);
    return out;
}

LossRecord local_adversarial_step(const TripletSpecs& specs, TripletState& state, const Tensor& real,
                                  std::span<const int> labels, Rng& rng) {
    if (real.empty()) throw ParameterError("local adversarial step needs a non-empty real batch");
    if (labels.size() != real.rows()) throw DimensionError("real label count", real.rows(), labels.size());
    const std::size_t b = real.rows();
    LossRecord rec;

    {
        const auto z = sample_noise(rng, b, specs.z_dim);
        const auto y = sample_labels_uniform(rng, b, specs.n_classes);
        const auto fake = generate(specs, state.gen, z, y);
        auto d = discriminator_loss(specs, state.disc, real, fake);
        nn::optimizer_step(state.disc, d.grads, state.disc_opt);
        rec.discriminator = d.value;
    }
    {
        const auto z = sample_noise(rng, b, specs.z_dim);
        const auto y = sample_labels_uniform(rng, b, specs.n_classes);
        auto g = generator_loss(specs, state.gen, state.disc, state.cls, z, y);
        nn::optimizer_step(state.gen, g.grads, state.gen_opt);
        rec.generator = g.value;
    }
    {
        const auto z = sample_noise(rng, b, specs.z_dim);
        const auto y = sample_labels_uniform(rng, b, specs.n_classes);
        const auto fake = generate(specs, state.gen, z, y);
        auto c = classifier_loss(specs, state.cls, real, labels, fake);
        nn::optimizer_step(state.cls, c.grads, state.cls_opt);
        rec.classifier = c.value;
    }
    return rec;
}

Tensor soft_label_output(const TripletSpecs& specs, const ParamVector& cls, const Tensor& samples,
                         double temperature) {
    check_samples(specs, samples, "soft-label input");
    return nn::softmax(nn::forward(specs.classifier, cls, samples), temperature);
}

void DistillConfig::validate() const {
    if (!(alpha_kd >= 0.0 && alpha_kd <= 1.0)) throw ParameterError("alpha_kd must lie in [0, 1]");
    if (distill_sample_count == 0) throw ParameterError("distill_sample_count must be positive");
    if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
}

PlayerLoss distillation_loss(const TripletSpecs& specs, const ParamVector& cls, const FakeBatch& fake,
                             const Tensor& y_dis, const DistillConfig& cfg) {
    cfg.validate();
    check_samples(specs, fake.samples, "distillation");
    const auto trace = nn::forward_trace(specs.classifier, cls, fake.samples);
    const auto ce = nn::cross_entropy(trace.result(), fake.labels.labels);
    const auto kl = nn::kl_divergence(trace.result(), y_dis, cfg.temperature);

    Tensor upstream(ce.grad.rows(), ce.grad.cols());
    const auto& k = simd::active_kernels();
    k.axpy(upstream.size(), 1.0 - cfg.alpha_kd, ce.grad.data().data(), upstream.data().data());
    k.axpy(upstream.size(), cfg.alpha_kd, kl.grad.data().data(), upstream.data().data());
    const double value = (1.0 - cfg.alpha_kd) * ce.value + cfg.alpha_kd * kl.value;
    return {value, nn::backward_trace(specs.classifier, cls, trace, upstream, false).grads};
}

double distillation_step(const TripletSpecs& specs, TripletState& state, const FakeBatch& fake, const Tensor& y_dis,
                         const DistillConfig& cfg) {
    auto loss = distillation_loss(specs, state.cls, fake, y_dis, cfg);
    nn::optimizer_step(state.cls, loss.grads, state.cls_opt);
    return loss.value;
}

}  // namespace feddtg::gan
