#include "disturb/convex.hpp"

#include <stdexcept>

namespace disturb {

void RegressionSet::validate() const {
    if (points.size() != targets.size()) {
        throw std::invalid_argument("regression set: point/target count mismatch");
    }
    if (disturbed_targets && disturbed_targets->size() != targets.size()) {
        throw std::invalid_argument("regression set: disturbed target count mismatch");
    }
    for (const auto& x : points) {
        if (x.rank() != 1 || !x.same_shape(points.front())) {
            throw std::invalid_argument("regression set: points must share one [D] shape");
        }
    }
}

double RegressionSet::loss(const LinearModel& m, bool use_disturbed) const {
    validate();
    const std::vector<double>& ys = use_disturbed ? *disturbed_targets : targets;
    double total = 0.0;
    for (std::size_t n = 0; n < points.size(); ++n) {
        double r = -ys[n];
        for (std::size_t d = 0; d < m.w.size(); ++d) r += m.w[d] * points[n][d];
        total += 0.5 * r * r;
    }
    return total;
}

Tensor lr_gradient(const LinearModel& m, const RegressionSet& s, bool use_disturbed) {
    s.validate();
    if (use_disturbed && !s.disturbed_targets) {
        throw std::logic_error("lr_gradient: no disturbed targets present");
    }
    if (!s.points.empty() && s.points.front().size() != m.w.size()) {
        throw std::invalid_argument("lr_gradient: weight dimension " + shape_str(m.w.shape()) +
                                    " vs point dimension " +
                                    shape_str(s.points.front().shape()));
    }
    const std::vector<double>& ys = use_disturbed ? *s.disturbed_targets : s.targets;
    Tensor grad(m.w.shape());
    for (std::size_t n = 0; n < s.points.size(); ++n) {
        double r = -ys[n];
        for (std::size_t d = 0; d < m.w.size(); ++d) r += m.w[d] * s.points[n][d];
        for (std::size_t d = 0; d < m.w.size(); ++d) grad[d] += r * s.points[n][d];
    }
    return grad;
}

Tensor gradient_difference(const RegressionSet& s) {
    s.validate();
    if (!s.disturbed_targets) {
        throw std::logic_error("gradient_difference: no disturbed targets present");
    }
    if (s.points.empty()) throw std::invalid_argument("gradient_difference: empty set");
    Tensor diff(s.points.front().shape());
    for (std::size_t n = 0; n < s.points.size(); ++n) {
        const double dy = (*s.disturbed_targets)[n] - s.targets[n];
        for (std::size_t d = 0; d < diff.size(); ++d) diff[d] += dy * s.points[n][d];
    }
    return diff;
}

Tensor l2_gradient_term(double lambda, const LinearModel& m) {
    if (lambda < 0.0) throw std::domain_error("l2_gradient_term: lambda must be non-negative");
    return elementwise(EwOp::Mul, m.w, lambda);
}

std::vector<double> perturb_targets(const std::vector<double>& targets, double spread,
                                    RngStream& rng) {
    std::vector<double> out(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        out[i] = targets[i] + (rng.uniform() * 2.0 - 1.0) * spread;
    }
    return out;
}

}  // namespace disturb
