#pragma once

#include <optional>
#include <vector>

#include "disturb/rng.hpp"
#include "disturb/tensor.hpp"

namespace disturb {

// Scalar linear regression y = w'x, the convex setting used to contrast label
// disturbance with l2 regularization.

struct LinearModel {
    Tensor w;  // [D]
};

struct RegressionSet {
    std::vector<Tensor> points;            // each [D]
    std::vector<double> targets;
    std::optional<std::vector<double>> disturbed_targets;

    void validate() const;
    double loss(const LinearModel& m, bool use_disturbed) const;
};

// Gradient of 1/2 sum (w'x_n - y_n)^2 over w, with clean or disturbed targets.
Tensor lr_gradient(const LinearModel& m, const RegressionSet& s, bool use_disturbed);

// sum (y~_n - y_n) x_n; identical to lr_gradient(clean) - lr_gradient(disturbed)
// and independent of w.
Tensor gradient_difference(const RegressionSet& s);

// lambda * w, the gradient of (lambda/2)||w||^2; independent of the data.
Tensor l2_gradient_term(double lambda, const LinearModel& m);

// Helper for experiments: disturbed targets y~_n = y_n + noise with noise
// uniform in [-spread, spread], so E[y~] = y.
std::vector<double> perturb_targets(const std::vector<double>& targets, double spread,
                                    RngStream& rng);

}  // namespace disturb
