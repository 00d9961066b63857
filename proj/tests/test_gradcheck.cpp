#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "disturb/gradcheck.hpp"

using namespace disturb;

TEST_CASE("finite_diff on closed-form derivatives") {
    // f(x) = x^2 at 3 -> 6
    auto square = [](const Tensor& t) { return t[0] * t[0]; };
    Tensor x = Tensor::scalar(3.0);
    CHECK(finite_diff(square, x)[0] == doctest::Approx(6.0).epsilon(1e-6));

    // constant -> zero
    auto constant = [](const Tensor&) { return 4.2; };
    CHECK(finite_diff(constant, Tensor({3}, {1, 2, 3})).vec() == std::vector<double>{0, 0, 0});

    // sin'(0) = 1
    auto sine = [](const Tensor& t) { return std::sin(t[0]); };
    CHECK(finite_diff(sine, Tensor::scalar(0.0))[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("finite_diff rejects non-finite evaluations") {
    auto bad = [](const Tensor& t) { return 1.0 / (t[0] - t[0]); };
    CHECK_THROWS_AS(finite_diff(bad, Tensor::scalar(1.0)), std::runtime_error);
    auto fine = [](const Tensor& t) { return t[0]; };
    CHECK_THROWS_AS(finite_diff(fine, Tensor::scalar(1.0), 0.0), std::domain_error);
}

TEST_CASE("compare reports relative error and worst coordinate") {
    Tensor a({2}, {1.0, 2.0});
    CHECK(compare(a, a).max_relative_error == 0.0);

    GradReport r = compare(Tensor({1}, {1.0}), Tensor({1}, {1.0 + 1e-5}));
    CHECK(r.max_relative_error == doctest::Approx(1e-5).epsilon(1e-2));

    GradReport worst = compare(Tensor({3}, {1, 1, 1}), Tensor({3}, {1, 2, 1}));
    CHECK(worst.worst_coordinate == 1);
    CHECK(worst.analytic_at_worst == 1.0);
    CHECK(worst.numeric_at_worst == 2.0);

    CHECK_THROWS_AS(compare(a, Tensor({3})), std::invalid_argument);
}

TEST_CASE("compare is symmetric") {
    Tensor a({4}, {0.0, 1.0, -2.0, 3.5});
    Tensor b({4}, {1e-9, 1.1, -2.0, 3.4});
    GradReport ab = compare(a, b);
    GradReport ba = compare(b, a);
    CHECK(ab.max_relative_error == ba.max_relative_error);
    CHECK(ab.worst_coordinate == ba.worst_coordinate);
}
