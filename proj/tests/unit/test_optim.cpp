#include <doctest.h>

#include <cmath>

#include "mvst/optim.hpp"

using namespace mvst;

TEST_CASE("first AdamW step moves by lr against the gradient sign") {
    std::vector<Tensor> p{Tensor::from({1}, {0.5}, true)};
    AdamWState s;
    s.weight_decay = 0.0;
    s.init(p);
    adamw_step(p, {{1.0}}, s);
    // m̂/(√v̂+ε) = 1/(1+1e-8)
    CHECK(p[0].at(0) == doctest::Approx(0.5 - 0.001 / (1.0 + 1e-8)).epsilon(1e-15));
    CHECK(s.step == 1);
}

TEST_CASE("pure decay branch") {
    std::vector<Tensor> p{Tensor::from({2}, {2.0, -4.0}, true)};
    AdamWState s;
    s.lr = 0.01;
    s.weight_decay = 0.1;
    s.init(p);
    adamw_step(p, {{0.0, 0.0}}, s);
    CHECK(p[0].at(0) == doctest::Approx(2.0 * (1 - 0.01 * 0.1)).epsilon(1e-15));
    CHECK(p[0].at(1) == doctest::Approx(-4.0 * (1 - 0.01 * 0.1)).epsilon(1e-15));
}

TEST_CASE("multi-step trajectory matches a hand recurrence") {
    std::vector<Tensor> p{Tensor::from({1}, {1.0}, true)};
    AdamWState s;
    s.init(p);
    double theta = 1.0, m = 0, v = 0;
    const double grads[] = {0.3, -0.2, 0.7, 0.1};
    for (int t = 1; t <= 4; ++t) {
        const double g = grads[t - 1];
        adamw_step(p, {{g}}, s);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        theta -= 1e-3 * (mh / (std::sqrt(vh) + 1e-8) + 1e-5 * theta);
        CHECK(p[0].at(0) == doctest::Approx(theta).epsilon(1e-14));
    }
}

TEST_CASE("lr = 0 leaves parameters bit-identical") {
    std::vector<Tensor> p{Tensor::from({3}, {0.1, -0.7, 3.3}, true)};
    const std::vector<double> before(p[0].data().begin(), p[0].data().end());
    AdamWState s;
    s.lr = 0.0;
    s.init(p);
    for (int i = 0; i < 5; ++i) adamw_step(p, {{1.0, -2.0, 0.5}}, s);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[0].at(i) == before[i]);
}

TEST_CASE("shape mismatches are rejected") {
    std::vector<Tensor> p{Tensor::from({2}, {0, 0}, true)};
    AdamWState s;
    s.init(p);
    CHECK_THROWS_AS(adamw_step(p, {{1.0}}, s), TensorError);
    CHECK_THROWS_AS(adamw_step(p, {{1.0, 1.0}, {1.0}}, s), TensorError);
}

TEST_CASE("reading gradients from tensors equals passing them explicitly") {
    std::vector<Tensor> a{Tensor::from({2}, {1, 2}, true)}, b{Tensor::from({2}, {1, 2}, true)};
    AdamWState sa, sb;
    sa.init(a);
    sb.init(b);
    backward(sum(hadamard(a[0], a[0])));
    adamw_step(a, sa);
    adamw_step(b, {{2.0, 4.0}}, sb);
    CHECK(a[0].at(0) == b[0].at(0));
    CHECK(a[0].at(1) == b[0].at(1));
}

TEST_CASE("cosine schedule") {
    CHECK(scheduled_lr(LrSchedule::cosine, 1e-3, 0, 100) == doctest::Approx(1e-3));
    CHECK(scheduled_lr(LrSchedule::cosine, 1e-3, 99, 100) == doctest::Approx(1e-5));
    CHECK(scheduled_lr(LrSchedule::constant, 1e-3, 50, 100) == 1e-3);
    double prev = 1.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const double lr = scheduled_lr(LrSchedule::cosine, 1e-3, s, 100);
        CHECK(lr <= prev);
        prev = lr;
    }
    CHECK(scheduled_lr(LrSchedule::cosine, 0.0, 7, 100) == 0.0);
}
