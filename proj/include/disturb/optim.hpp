#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "disturb/tensor.hpp"

namespace disturb {

struct SgdConfig {
    // (epochCount, learningRate) stages; defaults to the staged LeNet recipe.
    std::vector<std::pair<std::size_t, double>> stages = {
        {40, 1e-3}, {20, 1e-4}, {20, 1e-5}, {20, 1e-6}};
    double weight_decay = 0.0;
    std::size_t batch_size = 64;

    void validate() const;
};

// theta <- theta - gamma * (mean_grad + lambda * theta). mean_grad must
// already be the mini-batch mean.
void sgd_step(Tensor& theta, const Tensor& mean_grad, double gamma, double lambda);

void sgd_step(const std::vector<Tensor*>& theta, const std::vector<Tensor*>& mean_grad,
              double gamma, double lambda);

// Learning rate of the stage containing the epoch; epochs past the last stage
// keep the final rate.
double lr_at_epoch(const SgdConfig& cfg, std::size_t epoch);

std::size_t total_epochs(const SgdConfig& cfg);

}  // namespace disturb
