#include "disturb/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace disturb {

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                   double eps) {
    if (eps <= 0.0) throw std::domain_error("finite_diff: eps must be positive");
    Tensor grad(theta.shape());
    Tensor probe = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + eps;
        const double hi = f(probe);
        probe[i] = theta[i] - eps;
        const double lo = f(probe);
        probe[i] = theta[i];
        if (!std::isfinite(hi) || !std::isfinite(lo)) {
            throw std::runtime_error("finite_diff: non-finite function value at coordinate " +
                                     std::to_string(i));
        }
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return grad;
}

GradReport compare(const Tensor& analytic, const Tensor& numeric) {
    if (!analytic.same_shape(numeric)) {
        throw std::invalid_argument("compare: shape mismatch, " + shape_str(analytic.shape()) +
                                    " vs " + shape_str(numeric.shape()));
    }
    constexpr double kFloor = 1e-8;
    GradReport report;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], n = numeric[i];
        const double denom = std::max({std::fabs(a), std::fabs(n), kFloor});
        const double rel = std::fabs(a - n) / denom;
        if (rel >= report.max_relative_error) {
            report.max_relative_error = rel;
            report.worst_coordinate = i;
            report.analytic_at_worst = a;
            report.numeric_at_worst = n;
        }
    }
    return report;
}

}  // namespace disturb
