#include <doctest.h>

#include <random>

#include "tdiff/errors.hpp"
#include "tdiff/torus.hpp"

using namespace tdiff;

TEST_CASE("cmod examples") {
    CHECK(cmod(0.5) == 0.5);
    CHECK(cmod(kPi) == doctest::Approx(-kPi).epsilon(1e-15));
    CHECK(cmod(3 * kPi) == doctest::Approx(-kPi).epsilon(1e-15));
    CHECK(cmod(-kPi) == -kPi);
    CHECK_THROWS_AS(cmod(std::nan("")), InvalidArgument);
    CHECK_THROWS_AS(cmod(INFINITY), InvalidArgument);
}

TEST_CASE("cmod lands in [-pi, pi) and is idempotent") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    for (int i = 0; i < 100000; ++i) {
        const double x = u(rng);
        const double c = cmod(x);
        REQUIRE(c >= -kPi);
        REQUIRE(c < kPi);
        REQUIRE(cmod(c) == c);
    }
    // negative inputs, where truncated remainders go wrong
    CHECK(cmod(-3.5) == doctest::Approx(-3.5 + 2 * kPi));
}

TEST_CASE("winding examples and reconstruction") {
    CHECK(winding(0.3) == 0);
    CHECK(winding(2 * kPi + 0.3) == 1);
    CHECK(winding(-kPi) == 0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    double worst = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        const double x = u(rng);
        worst = std::max(worst, std::abs(x - (cmod(x) + kTwoPi * winding(x))));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("torus point wraps its coordinates") {
    Vec raw(2);
    raw << 4.0, -7.0;
    const TorusPoint t(raw);
    CHECK(t[0] == doctest::Approx(4.0 - kTwoPi));
    CHECK(t[1] == doctest::Approx(-7.0 + kTwoPi));
}

TEST_CASE("circular mean examples") {
    auto mean1 = [](std::initializer_list<double> xs) {
        std::vector<TorusPoint> s;
        for (double x : xs) s.emplace_back(x);
        return circular_mean(s);
    };
    CHECK(mean1({0.1, -0.1}).mean[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(cmod(mean1({kPi - 0.1, -kPi + 0.1}).mean[0] + kPi)) < 1e-12);
    CHECK(mean1({0.2, 0.2, 0.2}).mean[0] == doctest::Approx(0.2));
    CHECK_THROWS_AS(circular_mean(std::vector<TorusPoint>{}), InvalidArgument);
}

TEST_CASE("empty row sample is rejected") {
    CHECK_THROWS_AS(circular_mean(Mat::Zero(0, 1)), InvalidArgument);
}

TEST_CASE("circular mean commutes with rotation") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 0.7);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int rep = 0; rep < 200; ++rep) {
        const double c = u(rng), loc = u(rng);
        std::vector<TorusPoint> a, b;
        for (int i = 0; i < 30; ++i) {
            const double x = loc + n(rng);
            a.emplace_back(x);
            b.emplace_back(x + c);
        }
        const double ma = circular_mean(a).mean[0], mb = circular_mean(b).mean[0];
        REQUIRE(std::abs(cmod(mb - cmod(ma + c))) < 1e-10);
    }
}

TEST_CASE("lattice enumeration") {
    auto l1 = lattice_enumerate(LatticeBox::symmetric(1, 1));
    REQUIRE(l1.size() == 3);
    CHECK(l1[0][0] == -1);
    CHECK(l1[1][0] == 0);
    CHECK(l1[2][0] == 1);
    auto l0 = lattice_enumerate(LatticeBox::symmetric(2, 0));
    REQUIRE(l0.size() == 1);
    CHECK(l0[0].isZero());
    auto l2 = lattice_enumerate(LatticeBox::symmetric(2, 1));
    REQUIRE(l2.size() == 9);
    CHECK(l2[0] == IVec::Constant(2, -1));
    CHECK(l2[1][0] == -1);
    CHECK(l2[1][1] == 0);  // last coordinate fastest
    CHECK_THROWS_AS(lattice_enumerate(LatticeBox::symmetric(3, 100)), ResourceError);
    CHECK(lattice_enumerate(LatticeBox::symmetric(3, 100), 10'000'000).size() == 201u * 201u * 201u);
    LatticeBox bad{IVec::Constant(1, 1), IVec::Constant(1, 0)};
    CHECK_THROWS_AS(bad.volume(), InvalidArgument);
}
