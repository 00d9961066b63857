#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "disturb/rng.hpp"
#include "disturb/tensor.hpp"

namespace disturb {

struct OneHotLabel {
    std::size_t class_index = 0;
    std::size_t class_count = 0;

    Tensor vector() const;
};

// Probability-valued label; entries sum to 1.
struct SoftLabel {
    std::vector<double> probs;

    Tensor vector() const { return Tensor({probs.size()}, probs); }
};

struct DisturbConfig {
    double alpha = 0.0;
    // Optional partition of {0..C-1} into disjoint blocks; when set, a label
    // is only redrawn inside its own block.
    std::optional<std::vector<std::vector<std::size_t>>> groups;
    std::uint64_t seed = 0;

    void validate(std::size_t class_count) const;
};

// Categorical distribution concentrated on the true class c:
// p_c = 1 - (C-1)/C * alpha, p_i = alpha / C for i != c.
SoftLabel multinoulli_probs(std::size_t c, std::size_t class_count, double alpha);

// Expectation of the disturbed one-hot label; same vector as multinoulli_probs.
SoftLabel soft_label(const OneHotLabel& y, double alpha);

// Draws a fresh one-hot label from the Multinoulli distribution around y.
// The true class may be redrawn, so the label can come back unchanged.
OneHotLabel disturb_label(const OneHotLabel& y, const DisturbConfig& cfg, RngStream& rng);

std::vector<OneHotLabel> disturb_batch(const std::vector<OneHotLabel>& labels,
                                       const DisturbConfig& cfg, RngStream& rng);

// Counts Multinoulli draws since process start; evaluation paths must leave it
// untouched.
std::uint64_t disturb_draw_count();

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d logits (or pred), same shape as the input
};

// Numerically stable softmax cross-entropy for a single logit vector.
LossResult softmax_xent(const Tensor& logits, const Tensor& target);

// Batched variant: logits [B×C], targets [B×C]; loss is the mean over rows and
// grad is already divided by B.
LossResult softmax_xent_batch(const Tensor& logits, const Tensor& targets);

// 1/2 ||pred - target||^2.
LossResult square_loss(const Tensor& pred, const Tensor& target);

// Row-major [B×C] target matrix from one-hot labels.
Tensor labels_to_matrix(const std::vector<OneHotLabel>& labels, std::size_t class_count);

Tensor softmax(const Tensor& logits);

}  // namespace disturb
