#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "feddtg/gan/triplet.hpp"
#include "feddtg/nn/network.hpp"
#include "feddtg/nn/tensor.hpp"

namespace testing_support {

using feddtg::nn::Tensor;

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(r, c);
    for (auto& x : t.data()) x = u(rng);
    return t;
}

inline Tensor random_probs(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    Tensor t = random_tensor(rng, r, c, 0.05, 1.0);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (double v : t.row(i)) s += v;
        for (double& v : t.row(i)) v /= s;
    }
    return t;
}

/// Central differences of f around x, one coordinate at a time.
inline std::vector<double> numeric_grad(const std::function<double()>& f, std::vector<double>& x, double eps = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double up = f();
        x[i] = keep - eps;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor). The floor keeps coordinates whose
/// true gradient is ~0 from turning rounding noise into a large ratio.
inline double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                            double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

/// Small triplet with smooth (tanh) hidden units so finite differences never straddle a relu kink.
inline feddtg::gan::TripletSpecs smooth_specs(std::size_t z_dim, std::size_t n, std::size_t dim, std::size_t hidden) {
    using feddtg::nn::Activation;
    using feddtg::nn::NetworkSpec;
    using feddtg::nn::OutputHead;
    feddtg::gan::TripletSpecs s;
    s.z_dim = z_dim;
    s.n_classes = n;
    s.sample_dim = dim;
    const std::vector<std::size_t> g{z_dim + n, hidden, dim}, d{dim, hidden, 1}, c{dim, hidden, n};
    s.generator = NetworkSpec::mlp(g, Activation::tanh, Activation::tanh, OutputHead::logits);
    s.discriminator = NetworkSpec::mlp(d, Activation::tanh, Activation::sigmoid, OutputHead::probability);
    s.classifier = NetworkSpec::mlp(c, Activation::tanh, Activation::identity, OutputHead::logits);
    return s;
}

}  // namespace testing_support
