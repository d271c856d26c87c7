#include <doctest.h>

#include <cmath>
#include <set>

#include "mvst/rng.hpp"

using mvst::Rng;

TEST_CASE("same seed gives the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("state round-trips through key and counter") {
    Rng a(9);
    for (int i = 0; i < 17; ++i) a.next_u64();
    Rng b = Rng::from_state(a.key(), a.counter());
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split streams differ from each other and from the parent") {
    const Rng root(1);
    Rng p = root, c1 = root.split(1), c2 = root.split(2);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 50; ++i) {
        seen.insert(p.next_u64());
        seen.insert(c1.next_u64());
        seen.insert(c2.next_u64());
    }
    CHECK(seen.size() == 150);
}

TEST_CASE("uniform and normal moments") {
    Rng r(3);
    double s = 0, s2 = 0, n = 0, n2 = 0;
    const int count = 200000;
    for (int i = 0; i < count; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        s += u;
        s2 += u * u;
        const double z = r.normal();
        n += z;
        n2 += z * z;
    }
    CHECK(s / count == doctest::Approx(0.5).epsilon(0.01));
    CHECK(s2 / count - 0.25 == doctest::Approx(1.0 / 12.0).epsilon(0.02));
    CHECK(std::abs(n / count) < 0.01);
    CHECK(n2 / count == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("truncated normal stays within two standard deviations") {
    Rng r(5);
    for (int i = 0; i < 10000; ++i) CHECK(std::abs(r.truncated_normal(0.02)) <= 0.04);
}

TEST_CASE("below is in range and hits every value") {
    Rng r(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.below(7);
        REQUIRE(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK(r.below(1) == 0);
}
