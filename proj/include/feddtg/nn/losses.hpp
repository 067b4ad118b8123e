#pragma once

#include <cstdint>
#include <span>

#include "feddtg/nn/tensor.hpp"

namespace feddtg::nn {

/// Probabilities are clamped to [eps, 1 - eps] before any logarithm.
inline constexpr double kProbEpsilon = 1e-7;

/// A scalar loss and its gradient with respect to the loss input.
struct LossResult {
    double value = 0.0;
    Tensor grad;
};

/// Row-wise softmax(logits / temperature), max-subtracted.
Tensor softmax(const Tensor& logits, double temperature = 1.0);

/// Mean over the batch of -log softmax(logits)[target].
LossResult cross_entropy(const Tensor& logits, std::span<const int> targets);

/// Mean over the batch of -sum_j target_j * log softmax(logits)_j. Linear in the target rows.
LossResult cross_entropy(const Tensor& logits, const Tensor& target_probs);

/// Mean over the batch of KL(teacher || softmax(student_logits / temperature)), with 0 ln 0 = 0.
LossResult kl_divergence(const Tensor& student_logits, const Tensor& teacher_probs, double temperature = 1.0);

struct BinaryLogLoss {
    /// mean log p over real rows + mean log(1 - p) over fake rows; the quantity a discriminator maximizes.
    double objective = 0.0;
    /// -objective, the minimization form.
    double value = 0.0;
    /// d value / d prob.
    Tensor grad;
};

/// prob is (batch, 1); is_real[i] != 0 marks real rows. Empty groups contribute nothing.
BinaryLogLoss binary_log_loss(const Tensor& prob, std::span<const std::uint8_t> is_real);

}  // namespace feddtg::nn
