#include "disturb/optim.hpp"

#include <stdexcept>

namespace disturb {

void SgdConfig::validate() const {
    if (stages.empty()) throw std::invalid_argument("sgd: at least one schedule stage required");
    for (const auto& [epochs, rate] : stages) {
        if (rate <= 0.0) throw std::invalid_argument("sgd: learning rates must be positive");
    }
    if (batch_size == 0) throw std::invalid_argument("sgd: batch size must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("sgd: weight decay must be non-negative");
}

void sgd_step(Tensor& theta, const Tensor& mean_grad, double gamma, double lambda) {
    if (!theta.same_shape(mean_grad)) {
        throw std::invalid_argument("sgd_step: shape mismatch, " + shape_str(theta.shape()) +
                                    " vs " + shape_str(mean_grad.shape()));
    }
    double* t = theta.data();
    const double* g = mean_grad.data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        t[i] -= gamma * (g[i] + lambda * t[i]);
    }
}

void sgd_step(const std::vector<Tensor*>& theta, const std::vector<Tensor*>& mean_grad,
              double gamma, double lambda) {
    if (theta.size() != mean_grad.size()) {
        throw std::invalid_argument("sgd_step: parameter/gradient list length mismatch");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
        sgd_step(*theta[i], *mean_grad[i], gamma, lambda);
    }
}

double lr_at_epoch(const SgdConfig& cfg, std::size_t epoch) {
    cfg.validate();
    std::size_t end = 0;
    for (const auto& [epochs, rate] : cfg.stages) {
        end += epochs;
        if (epoch < end) return rate;
    }
    return cfg.stages.back().second;
}

std::size_t total_epochs(const SgdConfig& cfg) {
    std::size_t n = 0;
    for (const auto& [epochs, rate] : cfg.stages) n += epochs;
    return n;
}

}  // namespace disturb
