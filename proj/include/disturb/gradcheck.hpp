#pragma once

#include <functional>

#include "disturb/tensor.hpp"

namespace disturb {

struct GradReport {
    double max_relative_error = 0.0;
    std::size_t worst_coordinate = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Central differences (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps) per coordinate.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                   double eps = 1e-5);

// Relative error |a-n| / max(|a|, |n|, floor), floor 1e-8; reports the worst
// coordinate.
GradReport compare(const Tensor& analytic, const Tensor& numeric);

}  // namespace disturb
