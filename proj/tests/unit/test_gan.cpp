#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "feddtg/error.hpp"
#include "feddtg/gan/triplet.hpp"
#include "feddtg/nn/losses.hpp"
#include "support.hpp"

using namespace feddtg;
using namespace feddtg::gan;
using testing_support::max_rel_error;
using testing_support::numeric_grad;
using testing_support::random_tensor;
using testing_support::smooth_specs;

namespace {

TripletState make_state(const TripletSpecs& specs, std::uint64_t seed, int id = 0) {
    Rng rng(seed);
    return TripletState::init(specs, TripletOptimizers{}, id, rng);
}

FakeBatch random_fake(std::mt19937_64& rng, const TripletSpecs& s, std::size_t b) {
    auto y = sample_labels_uniform(rng, b, s.n_classes);
    return {random_tensor(rng, b, s.sample_dim), y};
}

// Zero weights everywhere and the output bias set so every head emits a constant.
void constant_heads(const TripletSpecs& s, TripletState& st) {
    std::fill(st.disc.values.begin(), st.disc.values.end(), 0.0);  // sigmoid(0) = 0.5
    std::fill(st.cls.values.begin(), st.cls.values.end(), 0.0);    // uniform logits
}

}  // namespace

TEST(Noise, EmptyDeterministicAndStandardNormal) {
    Rng a(1);
    auto empty = sample_noise(a, 0, 5);
    EXPECT_EQ(empty.values.rows(), 0u);
    EXPECT_EQ(empty.values.cols(), 5u);
    Rng b(7), c(7);
    EXPECT_EQ(sample_noise(b, 4, 3).values, sample_noise(c, 4, 3).values);
    EXPECT_EQ(noise_batch_at(42, 3, 8, 2).values, noise_batch_at(42, 3, 8, 2).values);
    EXPECT_NE(noise_batch_at(42, 3, 8, 2).values, noise_batch_at(42, 4, 8, 2).values);

    Rng r(11);
    auto z = sample_noise(r, 100000, 1);
    double mean = 0.0, var = 0.0;
    for (double v : z.values.data()) mean += v;
    mean /= 1e5;
    for (double v : z.values.data()) var += (v - mean) * (v - mean);
    var /= 1e5;
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Labels, UniformSampling) {
    Rng one(1);
    for (int l : sample_labels_uniform(one, 50, 1).labels) EXPECT_EQ(l, 0);
    Rng a(3), b(3);
    EXPECT_EQ(sample_labels_uniform(a, 100, 7), sample_labels_uniform(b, 100, 7));
    Rng r(5);
    auto y = sample_labels_uniform(r, 100000, 10);
    std::vector<int> counts(10, 0);
    for (int l : y.labels) ++counts[static_cast<std::size_t>(l)];
    const double sigma = std::sqrt(1e5 * 0.1 * 0.9);
    for (int c : counts) EXPECT_LT(std::abs(c - 10000), 3 * sigma);
    EXPECT_THROW(sample_labels_uniform(r, 3, 0), ParameterError);
}

TEST(Labels, BalancedCyclicAssignment) {
    auto ten = balanced_labels(10, 10);
    for (int c = 0; c < 10; ++c) EXPECT_EQ(ten.labels[static_cast<std::size_t>(c)], c);
    auto twelve = balanced_labels(12, 10);
    std::map<int, int> counts;
    for (int l : twelve.labels) ++counts[l];
    EXPECT_EQ(counts[0], 2);
    EXPECT_EQ(counts[1], 2);
    for (int c = 2; c < 10; ++c) EXPECT_EQ(counts[c], 1);
    auto big = balanced_labels(10000, 10);
    std::vector<int> per(10, 0);
    for (int l : big.labels) ++per[static_cast<std::size_t>(l)];
    for (int c : per) EXPECT_EQ(c, 1000);
}

TEST(Generate, PureSynchronizedAndBounded) {
    auto specs = TripletSpecs::make(4, 3, 5, std::vector<std::size_t>{8}, std::vector<std::size_t>{8},
                                    std::vector<std::size_t>{8});
    auto a = make_state(specs, 1, 0);
    auto b = make_state(specs, 2, 1);
    b.gen = a.gen;  // different clients, equal generator
    Rng rng(9);
    auto z = sample_noise(rng, 64, 4);
    auto y = sample_labels_uniform(rng, 64, 3);
    auto fa = generate(specs, a.gen, z, y);
    EXPECT_EQ(fa, generate(specs, a.gen, z, y));
    EXPECT_EQ(fa, generate(specs, b.gen, z, y));
    for (double v : fa.samples.data()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_THROW(generate(specs, a.gen, sample_noise(rng, 2, 3), balanced_labels(2, 3)), DimensionError);
}

TEST(DiscriminatorLoss, HalfAndPerfectLimits) {
    auto s = smooth_specs(2, 2, 3, 4);
    auto st = make_state(s, 1);
    constant_heads(s, st);
    std::mt19937_64 rng(2);
    auto real = random_tensor(rng, 5, 3);
    auto fake = random_fake(rng, s, 7);
    EXPECT_NEAR(discriminator_loss(s, st.disc, real, fake).value, 2.0 * std::log(2.0), 1e-15);

    // Output bias drives D towards 1 on everything, first input weight separates real (x0 = +1) from fake (x0 = -1).
    auto& p = st.disc.values;
    const auto& last = st.disc.layout.slots.back();
    const auto& first = st.disc.layout.slots.front();
    for (std::size_t h = 0; h < first.rows; ++h) p[first.weight_offset + h * first.cols] = 5.0;
    for (std::size_t h = 0; h < last.cols; ++h) p[last.weight_offset + h] = 20.0;
    Tensor r(3, 3, {1, 0, 0, 1, 0, 0, 1, 0, 0});
    FakeBatch f{Tensor(3, 3, {-1, 0, 0, -1, 0, 0, -1, 0, 0}), balanced_labels(3, 2)};
    EXPECT_LT(discriminator_loss(s, st.disc, r, f).value, 1e-6);
    EXPECT_THROW(discriminator_loss(s, st.disc, Tensor(0, 3), f), ParameterError);
}

TEST(GeneratorLoss, AnalyticAtConstantHeadsAndPrintedOffset) {
    const std::size_t n = 4;
    auto s = smooth_specs(3, n, 2, 5);
    auto st = make_state(s, 3);
    constant_heads(s, st);
    Rng rng(4);
    auto z = sample_noise(rng, 6, 3);
    auto y = sample_labels_uniform(rng, 6, n);
    EXPECT_NEAR(generator_loss(s, st.gen, st.disc, st.cls, z, y).value, std::log(2.0) + std::log(double(n)), 1e-14);

    // Printed form: mean(1 - log D) + CE. The implemented form differs by exactly 1.
    auto st2 = make_state(s, 5);
    auto fake = generate(s, st2.gen, z, y);
    auto d = nn::forward(s.discriminator, st2.disc, fake.samples);
    double printed = 0.0;
    for (double p : d.data()) printed += 1.0 - std::log(std::clamp(p, nn::kProbEpsilon, 1.0 - nn::kProbEpsilon));
    printed /= 6.0;
    printed += nn::cross_entropy(nn::forward(s.classifier, st2.cls, fake.samples), y.labels).value;
    EXPECT_NEAR(printed - generator_loss(s, st2.gen, st2.disc, st2.cls, z, y).value, 1.0, 1e-12);
}

TEST(ClassifierLoss, PerfectAndUniform) {
    const std::size_t n = 3;
    auto s = smooth_specs(2, n, 2, 4);
    auto st = make_state(s, 6);
    constant_heads(s, st);
    std::mt19937_64 rng(7);
    auto real = random_tensor(rng, 4, 2);
    const std::vector<int> labels{0, 1, 2, 1};
    auto fake = random_fake(rng, s, 5);
    EXPECT_NEAR(classifier_loss(s, st.cls, real, labels, fake).value, 2.0 * std::log(3.0), 1e-14);
    EXPECT_THROW(classifier_loss(s, st.cls, real, std::vector<int>{0, 1, 5, 1}, fake), ParameterError);

    // Output bias alone: every sample gets class 1 with overwhelming margin.
    const auto& last = st.cls.layout.slots.back();
    st.cls.values[last.bias_offset + 1] = 60.0;
    const std::vector<int> ones(4, 1);
    FakeBatch f1{random_tensor(rng, 3, 2), LabelBatch{{1, 1, 1}, n}};
    EXPECT_LT(classifier_loss(s, st.cls, real, ones, f1).value, 1e-20);
}

// Gradient suite for every player loss plus the distillation loss.
TEST(PlayerLosses, FiniteDifferences) {
    std::mt19937_64 rng(8);
    double worst_d = 0, worst_g = 0, worst_c = 0, worst_k = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 3, dim = 1 + rng() % 3, zd = 1 + rng() % 3, b = 1 + rng() % 4;
        auto s = smooth_specs(zd, n, dim, 3);
        auto st = make_state(s, rng());
        auto real = random_tensor(rng, b, dim);
        std::vector<int> labels(b);
        for (auto& l : labels) l = static_cast<int>(rng() % n);
        auto fake = random_fake(rng, s, b + 1);
        Rng r2(rng());
        auto z = sample_noise(r2, b, zd);
        auto y = sample_labels_uniform(r2, b, n);

        auto d = discriminator_loss(s, st.disc, real, fake);
        worst_d = std::max(worst_d, max_rel_error(d.grads.values, numeric_grad([&] {
            return discriminator_loss(s, st.disc, real, fake).value; }, st.disc.values)));

        auto g = generator_loss(s, st.gen, st.disc, st.cls, z, y);
        worst_g = std::max(worst_g, max_rel_error(g.grads.values, numeric_grad([&] {
            return generator_loss(s, st.gen, st.disc, st.cls, z, y).value; }, st.gen.values)));

        auto c = classifier_loss(s, st.cls, real, labels, fake);
        worst_c = std::max(worst_c, max_rel_error(c.grads.values, numeric_grad([&] {
            return classifier_loss(s, st.cls, real, labels, fake).value; }, st.cls.values)));

        DistillConfig cfg{std::uniform_real_distribution<double>(0, 1)(rng), 10, 0.5 + (rng() % 3)};
        auto y_dis = testing_support::random_probs(rng, fake.samples.rows(), n);
        auto k = distillation_loss(s, st.cls, fake, y_dis, cfg);
        worst_k = std::max(worst_k, max_rel_error(k.grads.values, numeric_grad([&] {
            return distillation_loss(s, st.cls, fake, y_dis, cfg).value; }, st.cls.values)));
    }
    EXPECT_LT(worst_d, 1e-4);
    EXPECT_LT(worst_g, 1e-4);
    EXPECT_LT(worst_c, 1e-4);
    EXPECT_LT(worst_k, 1e-4);
}

// Each player's loss only moves that player: perturbing another player's parameters
// leaves the returned gradient's layout on its own network, and the local step
// touches each network only through its own optimizer.
TEST(PlayerLosses, PlayerIsolation) {
    auto s = smooth_specs(2, 3, 2, 4);
    auto st = make_state(s, 9);
    std::mt19937_64 rng(10);
    auto real = random_tensor(rng, 4, 2);
    auto fake = random_fake(rng, s, 4);
    // D's loss with fake samples held constant does not depend on theta_g or theta_c at all.
    auto before = discriminator_loss(s, st.disc, real, fake).value;
    auto gen_copy = st.gen;
    for (auto& v : st.gen.values) v += 0.1;
    for (auto& v : st.cls.values) v -= 0.1;
    EXPECT_EQ(discriminator_loss(s, st.disc, real, fake).value, before);
    st.gen = gen_copy;

    Rng r(3);
    auto z = sample_noise(r, 4, 2);
    auto y = sample_labels_uniform(r, 4, 3);
    auto g = generator_loss(s, st.gen, st.disc, st.cls, z, y);
    EXPECT_EQ(g.grads.layout, st.gen.layout);
    auto c = classifier_loss(s, st.cls, real, std::vector<int>{0, 1, 2, 0}, fake);
    EXPECT_EQ(c.grads.layout, st.cls.layout);

    // Generator update leaves D and C untouched.
    auto st2 = st;
    nn::optimizer_step(st2.gen, g.grads, st2.gen_opt);
    EXPECT_EQ(st2.disc, st.disc);
    EXPECT_EQ(st2.cls, st.cls);
}

TEST(LocalStep, ReplayAndLayouts) {
    auto specs = TripletSpecs::make(3, 2, 2, std::vector<std::size_t>{8}, std::vector<std::size_t>{8},
                                    std::vector<std::size_t>{8});
    auto st = make_state(specs, 11);
    std::mt19937_64 rng(12);
    auto real = random_tensor(rng, 6, 2);
    const std::vector<int> labels{0, 1, 0, 1, 1, 0};
    auto a = st, b = st;
    Rng ra(5), rb(5);
    auto la = local_adversarial_step(specs, a, real, labels, ra);
    auto lb = local_adversarial_step(specs, b, real, labels, rb);
    EXPECT_EQ(a, b);
    EXPECT_EQ(la.discriminator, lb.discriminator);
    EXPECT_EQ(a.gen.layout, st.gen.layout);
    EXPECT_EQ(a.cls.layout, st.cls.layout);
    EXPECT_NE(a.gen, st.gen);
    EXPECT_EQ(a.gen_opt.step, 1u);
    Rng r(1);
    EXPECT_THROW(local_adversarial_step(specs, a, Tensor(0, 2), std::vector<int>{}, r), ParameterError);
}

TEST(LocalStep, ConvergesOnTwoClassMixture) {
    auto specs = TripletSpecs::make(4, 2, 2, std::vector<std::size_t>{32}, std::vector<std::size_t>{32},
                                    std::vector<std::size_t>{32});
    auto st = make_state(specs, 13);
    std::mt19937_64 rng(14);
    std::normal_distribution<double> noise(0.0, 0.15);
    auto draw = [&](std::size_t b, Tensor& x, std::vector<int>& y) {
        x = Tensor(b, 2);
        y.assign(b, 0);
        for (std::size_t i = 0; i < b; ++i) {
            y[i] = static_cast<int>(rng() % 2);
            const double c = y[i] == 0 ? -0.5 : 0.5;
            x(i, 0) = std::clamp(c + noise(rng), -1.0, 1.0);
            x(i, 1) = std::clamp(c + noise(rng), -1.0, 1.0);
        }
    };
    Tensor x;
    std::vector<int> y;
    draw(256, x, y);
    const double initial = nn::cross_entropy(nn::forward(specs.classifier, st.cls, x), y).value;
    EXPECT_NEAR(initial, std::log(2.0), 0.3);
    Rng steps(15);
    for (int i = 0; i < 500; ++i) {
        Tensor bx;
        std::vector<int> by;
        draw(32, bx, by);
        local_adversarial_step(specs, st, bx, by, steps);
    }
    EXPECT_LT(nn::cross_entropy(nn::forward(specs.classifier, st.cls, x), y).value, 0.2);
}

TEST(SoftLabels, UniformTemperatureLimitAndNormalization) {
    auto s = smooth_specs(2, 5, 3, 4);
    auto st = make_state(s, 16);
    std::mt19937_64 rng(17);
    auto x = random_tensor(rng, 20, 3);
    auto zero = st.cls;
    std::fill(zero.values.begin(), zero.values.end(), 0.0);
    const auto flat = soft_label_output(s, zero, x, 1.0);
    for (double v : flat.data()) EXPECT_NEAR(v, 0.2, 1e-15);
    const auto hot = soft_label_output(s, st.cls, x, 1e6);
    for (double v : hot.data()) EXPECT_LT(std::abs(v - 0.2), 1e-3);
    for (double T : {0.3, 1.0, 4.0}) {
        auto p = soft_label_output(s, st.cls, x, T);
        for (std::size_t r = 0; r < p.rows(); ++r) {
            double sum = 0;
            for (double v : p.row(r)) sum += v;
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(Distillation, AlphaEndpointsAndLinearity) {
    auto s = smooth_specs(2, 3, 2, 4);
    auto st = make_state(s, 18);
    std::mt19937_64 rng(19);
    auto fake = random_fake(rng, s, 8);
    auto y_dis = testing_support::random_probs(rng, 8, 3);
    auto logits = nn::forward(s.classifier, st.cls, fake.samples);
    const double ce = nn::cross_entropy(logits, fake.labels.labels).value;
    const double kl = nn::kl_divergence(logits, y_dis, 1.0).value;
    EXPECT_EQ(distillation_loss(s, st.cls, fake, y_dis, {0.0, 8, 1.0}).value, ce);
    EXPECT_NEAR(distillation_loss(s, st.cls, fake, y_dis, {1.0, 8, 1.0}).value, kl, 1e-12);
    for (double a : {0.1, 0.5, 0.9})
        EXPECT_NEAR(distillation_loss(s, st.cls, fake, y_dis, {a, 8, 1.0}).value, (1 - a) * ce + a * kl, 1e-12);
    auto bad = y_dis;
    bad(0, 0) += 0.5;
    EXPECT_THROW(distillation_loss(s, st.cls, fake, bad, {0.5, 8, 1.0}), ParameterError);
}

TEST(Distillation, SelfTargetsAtAlphaOneLeaveSgdParametersUnchanged) {
    auto s = smooth_specs(2, 4, 3, 5);
    auto st = make_state(s, 20);
    st.cls_opt = nn::OptimizerState::make({nn::OptimizerRule::sgd, 0.1}, st.cls.size());
    std::mt19937_64 rng(21);
    auto fake = random_fake(rng, s, 10);
    for (double T : {1.0, 2.0}) {
        auto self = soft_label_output(s, st.cls, fake.samples, T);
        const auto before = st.cls;
        const double loss = distillation_step(s, st, fake, self, {1.0, 10, T});
        EXPECT_NEAR(loss, 0.0, 1e-15);
        EXPECT_EQ(st.cls, before);
    }
}

TEST(Distillation, SmallSgdStepDoesNotIncreaseLoss) {
    std::mt19937_64 rng(22);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto s = smooth_specs(2, 3, 2, 4);
        auto st = make_state(s, rng());
        st.cls_opt = nn::OptimizerState::make({nn::OptimizerRule::sgd, 1e-3}, st.cls.size());
        auto fake = random_fake(rng, s, 6);
        auto y_dis = testing_support::random_probs(rng, 6, 3);
        DistillConfig cfg{0.9, 6, 1.0};
        const double before = distillation_step(s, st, fake, y_dis, cfg);
        const double after = distillation_loss(s, st.cls, fake, y_dis, cfg).value;
        if (after > before) ++failures;
    }
    EXPECT_EQ(failures, 0);
}
