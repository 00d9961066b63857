#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "disturb/convex.hpp"
#include "disturb/gradcheck.hpp"

using namespace disturb;

namespace {

RegressionSet random_set(std::size_t n, std::size_t d, std::mt19937_64& gen, bool disturbed) {
    std::normal_distribution<double> dist(0.0, 1.0);
    RegressionSet s;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor x({d});
        for (std::size_t j = 0; j < d; ++j) x[j] = dist(gen);
        s.points.push_back(x);
        s.targets.push_back(dist(gen));
    }
    if (disturbed) {
        std::vector<double> noisy = s.targets;
        for (double& v : noisy) v += dist(gen);
        s.disturbed_targets = noisy;
    }
    return s;
}

LinearModel random_model(std::size_t d, std::mt19937_64& gen) {
    std::normal_distribution<double> dist(0.0, 1.0);
    LinearModel m{Tensor({d})};
    for (std::size_t j = 0; j < d; ++j) m.w[j] = dist(gen);
    return m;
}

}  // namespace

TEST_CASE("worked one-dimensional example") {
    // points 1 and 2, targets 1 and 2, w = 0: grad = (0-1)*1 + (0-2)*2 = -5
    RegressionSet s;
    s.points = {Tensor({1}, {1.0}), Tensor({1}, {2.0})};
    s.targets = {1.0, 2.0};
    LinearModel m{Tensor({1}, {0.0})};
    CHECK(lr_gradient(m, s, false)[0] == doctest::Approx(-5.0).epsilon(1e-12));

    // the interpolating weight w = 1 is a stationary point
    LinearModel fit{Tensor({1}, {1.0})};
    CHECK(lr_gradient(fit, s, false)[0] == doctest::Approx(0.0));
    CHECK(s.loss(fit, false) == doctest::Approx(0.0));
}

TEST_CASE("gradient matches finite differences of the loss") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 1 + gen() % 8;
        RegressionSet s = random_set(2 + gen() % 31, d, gen, true);
        LinearModel m = random_model(d, gen);

        for (bool disturbed : {false, true}) {
            auto f = [&](const Tensor& w) { return s.loss(LinearModel{w}, disturbed); };
            GradReport rep = compare(lr_gradient(m, s, disturbed), finite_diff(f, m.w));
            CHECK(rep.max_relative_error <= 1e-5);
        }
    }
}

TEST_CASE("clean-minus-disturbed gradient equals the target-difference term") {
    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + gen() % 8;
        RegressionSet s = random_set(1 + gen() % 32, d, gen, true);
        LinearModel m = random_model(d, gen);

        Tensor disturbed = lr_gradient(m, s, true);
        Tensor clean = lr_gradient(m, s, false);
        Tensor direct = gradient_difference(s);
        for (std::size_t j = 0; j < d; ++j) {
            CHECK(std::fabs(clean[j] - disturbed[j] - direct[j]) <= 1e-12);
        }
    }
}

TEST_CASE("difference term is independent of the weights") {
    std::mt19937_64 gen(29);
    RegressionSet s = random_set(16, 5, gen, true);
    Tensor base = gradient_difference(s);
    for (int trial = 0; trial < 10; ++trial) {
        LinearModel a = random_model(5, gen);
        LinearModel b = random_model(5, gen);
        Tensor da = elementwise(EwOp::Sub, lr_gradient(a, s, false), lr_gradient(a, s, true));
        Tensor db = elementwise(EwOp::Sub, lr_gradient(b, s, false), lr_gradient(b, s, true));
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(std::fabs(da[j] - db[j]) <= 1e-12);
            CHECK(std::fabs(da[j] - base[j]) <= 1e-12);
        }
    }
}

TEST_CASE("l2 term is lambda*w and ignores the data") {
    LinearModel m{Tensor({3}, {1.0, -2.0, 0.5})};
    Tensor g = l2_gradient_term(0.1, m);
    CHECK(g.vec() == std::vector<double>{0.1, -0.2, 0.05});
    CHECK(l2_gradient_term(0.0, m).vec() == std::vector<double>{0, 0, 0});
}

TEST_CASE("perturbed targets are unbiased") {
    RngStream rng(31, "convex");
    std::vector<double> targets(8, 2.0);
    std::vector<double> mean(8, 0.0);
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        std::vector<double> noisy = perturb_targets(targets, 0.5, rng);
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(noisy[j] >= 1.5);
            CHECK(noisy[j] <= 2.5);
            mean[j] += noisy[j];
        }
    }
    for (double v : mean) CHECK(std::fabs(v / draws - 2.0) <= 0.01);
}

TEST_CASE("validation catches inconsistent sets") {
    RegressionSet s;
    s.points = {Tensor({2}, {1.0, 2.0})};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // no target
    s.targets = {1.0};
    s.validate();
    s.disturbed_targets = std::vector<double>{1.0, 2.0};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    LinearModel m{Tensor({2})};
    RegressionSet ok;
    ok.points = {Tensor({2}, {1.0, 0.0})};
    ok.targets = {1.0};
    CHECK_THROWS_AS(lr_gradient(m, ok, true), std::logic_error);  // no disturbed targets
}
