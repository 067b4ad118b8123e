#include "feddtg/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "feddtg/error.hpp"

namespace feddtg::nn {
namespace {

// log-sum-exp of one row of scaled logits.
double log_sum_exp(std::span<const double> row, double inv_t) {
    double mx = -INFINITY;
    for (double z : row) mx = std::max(mx, z * inv_t);
    double s = 0.0;
    for (double z : row) s += std::exp(z * inv_t - mx);
    return mx + std::log(s);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.rows() != b.rows()) throw DimensionError(std::string(what) + " rows", a.rows(), b.rows());
    if (a.cols() != b.cols()) throw DimensionError(std::string(what) + " cols", a.cols(), b.cols());
}

}  // namespace

Tensor softmax(const Tensor& logits, double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("softmax temperature must be positive");
    const double inv_t = 1.0 / temperature;
    Tensor out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto in = logits.row(r);
        auto dst = out.row(r);
        double mx = -INFINITY;
        for (double z : in) mx = std::max(mx, z * inv_t);
        double s = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            dst[j] = std::exp(in[j] * inv_t - mx);
            s += dst[j];
        }
        for (double& v : dst) v /= s;
    }
    return out;
}

LossResult cross_entropy(const Tensor& logits, std::span<const int> targets) {
    if (targets.size() != logits.rows()) throw DimensionError("cross-entropy target count", logits.rows(), targets.size());
    const std::size_t n = logits.cols();
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= n) {
            throw ParameterError("cross-entropy target " + std::to_string(t) + " outside [0, " + std::to_string(n) + ")");
        }
    }
    LossResult res{0.0, softmax(logits)};
    if (logits.rows() == 0) return res;
    const double inv_b = 1.0 / static_cast<double>(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        const auto t = static_cast<std::size_t>(targets[r]);
        res.value += log_sum_exp(row, 1.0) - row[t];
        auto g = res.grad.row(r);
        g[t] -= 1.0;
        for (double& v : g) v *= inv_b;
    }
    res.value *= inv_b;
    return res;
}

LossResult cross_entropy(const Tensor& logits, const Tensor& target_probs) {
    check_same_shape(logits, target_probs, "cross-entropy target");
    LossResult res{0.0, softmax(logits)};
    if (logits.rows() == 0) return res;
    const double inv_b = 1.0 / static_cast<double>(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        const auto t = target_probs.row(r);
        const double lse = log_sum_exp(row, 1.0);
        double mass = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            res.value += t[j] * (lse - row[j]);
            mass += t[j];
        }
        auto g = res.grad.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) g[j] = (g[j] * mass - t[j]) * inv_b;
    }
    res.value *= inv_b;
    return res;
}

LossResult kl_divergence(const Tensor& student_logits, const Tensor& teacher_probs, double temperature) {
    check_same_shape(student_logits, teacher_probs, "KL teacher");
    if (!(temperature > 0.0)) throw ParameterError("KL temperature must be positive");
    for (std::size_t r = 0; r < teacher_probs.rows(); ++r) {
        double s = 0.0;
        for (double v : teacher_probs.row(r)) {
            if (v < 0.0) throw ParameterError("KL teacher row " + std::to_string(r) + " has a negative entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-6) {
            throw ParameterError("KL teacher row " + std::to_string(r) + " sums to " + std::to_string(s));
        }
    }
    const double inv_t = 1.0 / temperature;
    LossResult res{0.0, softmax(student_logits, temperature)};
    if (student_logits.rows() == 0) return res;
    const double inv_b = 1.0 / static_cast<double>(student_logits.rows());
    for (std::size_t r = 0; r < student_logits.rows(); ++r) {
        const auto z = student_logits.row(r);
        const auto t = teacher_probs.row(r);
        const double lse = log_sum_exp(z, inv_t);
        for (std::size_t j = 0; j < z.size(); ++j) {
            if (t[j] > 0.0) res.value += t[j] * (std::log(t[j]) - (z[j] * inv_t - lse));
        }
        // Teacher rows are validated as normalized, so d/dz = (student - teacher) / T exactly
        // vanishes when the student reproduces the teacher.
        auto g = res.grad.row(r);
        for (std::size_t j = 0; j < z.size(); ++j) g[j] = (g[j] - t[j]) * inv_t * inv_b;
    }
    res.value *= inv_b;
    return res;
}

BinaryLogLoss binary_log_loss(const Tensor& prob, std::span<const std::uint8_t> is_real) {
    if (prob.cols() != 1) throw DimensionError("binary log-loss width", 1, prob.cols());
    if (is_real.size() != prob.rows()) throw DimensionError("binary log-loss flag count", prob.rows(), is_real.size());
    std::size_t n_real = 0;
    for (auto f : is_real) n_real += f != 0 ? 1 : 0;
    const std::size_t n_fake = prob.rows() - n_real;
    const double w_real = n_real > 0 ? 1.0 / static_cast<double>(n_real) : 0.0;
    const double w_fake = n_fake > 0 ? 1.0 / static_cast<double>(n_fake) : 0.0;
    constexpr double lo = kProbEpsilon;
    constexpr double hi = 1.0 - kProbEpsilon;

    BinaryLogLoss res{0.0, 0.0, Tensor(prob.rows(), 1)};
    for (std::size_t i = 0; i < prob.rows(); ++i) {
        const double p = prob(i, 0);
        const double pc = std::clamp(p, lo, hi);
        const bool inside = p >= lo && p <= hi;
        if (is_real[i] != 0) {
            res.objective += w_real * std::log(pc);
            res.grad(i, 0) = inside ? -w_real / pc : 0.0;
        } else {
            res.objective += w_fake * std::log(1.0 - pc);
            res.grad(i, 0) = inside ? w_fake / (1.0 - pc) : 0.0;
        }
    }
    res.value = -res.objective;
    return res;
}

}  // namespace feddtg::nn
