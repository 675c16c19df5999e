#include <doctest.h>

#include <random>

#include "test_util.hpp"
#include "tdiff/densities.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/special.hpp"

using namespace tdiff;
using testutil::rel_err;

namespace {

double wn_oracle_1d(double theta, double mu, double var, int K) {
    double s = 0.0;
    for (int k = -K; k <= K; ++k) s += testutil::gauss_pdf(theta - mu + kTwoPi * k, var);
    return s;
}

double wn_oracle_2d(const Vec& th, const Vec& mu, const Mat& S, int K) {
    const Mat P = S.inverse();
    const double norm = 1.0 / (kTwoPi * std::sqrt(S.determinant()));
    double s = 0.0;
    for (int a = -K; a <= K; ++a) {
        for (int b = -K; b <= K; ++b) {
            Vec z = th - mu;
            z[0] += kTwoPi * a;
            z[1] += kTwoPi * b;
            s += norm * std::exp(-0.5 * z.dot(P * z));
        }
    }
    return s;
}

double bessel_series(double x, int order) {
    // sum_k (x/2)^{2k+order} / (k! (k+order)!)
    double term = std::pow(0.5 * x, order);
    for (int i = 1; i <= order; ++i) term /= i;
    double s = term;
    for (int k = 1; k < 200; ++k) {
        term *= 0.25 * x * x / (static_cast<double>(k) * (k + order));
        s += term;
    }
    return s;
}

}  // namespace

TEST_CASE("Bessel functions against the power series") {
    for (double x : {0.0, 1e-6, 0.3, 1.0, 2.5, 7.0, 14.9, 15.1, 20.0, 35.0, 60.0}) {
        CHECK(rel_err(bessel_i0(x), bessel_series(x, 0)) < 1e-12);
        if (x > 0) CHECK(rel_err(bessel_i1(x), bessel_series(x, 1)) < 1e-12);
        CHECK(rel_err(bessel_i0e(x), std::exp(-x) * bessel_series(x, 0)) < 1e-12);
        CHECK(rel_err(log_bessel_i0(x) + 1.0, std::log(bessel_series(x, 0)) + 1.0) < 1e-12);
    }
    CHECK(std::isfinite(bessel_i0e(1e6)));
    CHECK(log_bessel_i0(1e6) == doctest::Approx(1e6 - 0.5 * std::log(kTwoPi * 1e6)).epsilon(1e-12));
}

TEST_CASE("A1 inverse and moment matching") {
    for (double s : {0.1, 1.0, 5.0}) {
        const A1Inverse k = vm_moment_match(s);
        CHECK(std::abs(a1_ratio(k.kappa) - std::exp(-s / 2)) < 1e-9);
    }
    // bisection oracle at sigma2 = 1
    double lo = 0.0, hi = 100.0;
    const double target = std::exp(-0.5);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (a1_ratio(mid) < target ? lo : hi) = mid;
    }
    CHECK(vm_moment_match(1.0).kappa == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));
    CHECK(vm_moment_match(1e4).kappa < 1e-6);
    CHECK(vm_moment_match(0.0).capped);
    CHECK(vm_moment_match(0.0).kappa == kKappaCap);
    CHECK_THROWS_AS(vm_moment_match(-1.0), InvalidArgument);
}

TEST_CASE("wrapped normal: uniform limit and lattice oracles") {
    const WNParams diffuse{Vec::Zero(1), Mat::Constant(1, 1, 1e4)};
    for (double th : {-3.0, -1.0, 0.0, 2.0, 3.1}) {
        CHECK(std::abs(wn_density(Vec::Constant(1, th), diffuse) - 1.0 / kTwoPi) < 1e-6);
    }
    const WNParams unit{Vec::Zero(1), Mat::Identity(1, 1)};
    CHECK(rel_err(wn_density(Vec::Zero(1), unit), wn_oracle_1d(0.0, 0.0, 1.0, 10)) < 1e-12);

    const WNParams biv{Vec::Zero(2), Mat::Identity(2, 2)};
    const Vec corner = Vec::Constant(2, kPi);
    CHECK(rel_err(wn_density(corner, biv), wn_oracle_2d(corner, biv.mu, biv.sigma, 10)) < 1e-12);
}

TEST_CASE("wrapped normal: default window matches the wide lattice for sigma <= 2") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> us(0.05, 2.0), ur(-0.9, 0.9);
    double worst = 0.0;
    for (int rep = 0; rep < 300; ++rep) {
        const double s = us(rng);
        const Vec th = testutil::uniform_angles(rng, 1), mu = testutil::uniform_angles(rng, 1);
        const WNParams w{mu, Mat::Constant(1, 1, s * s)};
        worst = std::max(worst, rel_err(wn_density(th, w), wn_oracle_1d(cmod(th[0] - mu[0]), 0.0, s * s, 10)));
    }
    for (int rep = 0; rep < 200; ++rep) {
        const double s1 = us(rng), s2 = us(rng), r = ur(rng);
        Mat S(2, 2);
        S << s1 * s1, r * s1 * s2, r * s1 * s2, s2 * s2;
        const Vec th = testutil::uniform_angles(rng, 2), mu = testutil::uniform_angles(rng, 2);
        worst = std::max(worst, rel_err(wn_density(th, {mu, S}), wn_oracle_2d(cmod(Vec(th - mu)), Vec::Zero(2), S, 10)));
    }
    CHECK(worst < 1e-8);
    // the literal {-1, 0, 1} window alone cannot reach this accuracy at sigma = 2
    const WNParams wide{Vec::Zero(1), Mat::Constant(1, 1, 4.0)};
    const double lit = wn_density(Vec::Constant(1, kPi - 1e-9), wide, WnEvalStrategy::fixed(1));
    CHECK(rel_err(lit, wn_oracle_1d(kPi - 1e-9, 0.0, 4.0, 10)) > 1e-8);
}

TEST_CASE("wrapped normal: log density agrees with density, all strategies sensible") {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec th = testutil::uniform_angles(rng, 2), mu = testutil::uniform_angles(rng, 2);
        Mat S(2, 2);
        S << 0.8, 0.2, 0.2, 0.5;
        const WrappedNormal w({mu, S});
        CHECK(rel_err(std::exp(w.log_density(th)), w.density(th)) < 1e-12);
        CHECK(rel_err(wn_logpdf(th, mu, S), w.log_density(th)) < 1e-12);
        const double exact = wn_oracle_2d(cmod(Vec(th - mu)), Vec::Zero(2), S, 10);
        CHECK(rel_err(w.density(th), exact) < 1e-8);
        CHECK(rel_err(wn_density(th, {mu, S}, WnEvalStrategy::adaptive(1e-10)), exact) < 1e-6);
    }
    // high concentration: nearest winding only
    const WNParams tight{Vec::Zero(1), Mat::Constant(1, 1, 0.01)};
    CHECK(rel_err(wn_density(Vec::Constant(1, 0.1), tight, WnEvalStrategy::high_concentration()),
                  testutil::gauss_pdf(0.1, 0.01)) < 1e-14);
    // von Mises matching is close for moderate variance
    const WNParams mid{Vec::Zero(1), Mat::Constant(1, 1, 0.3)};
    CHECK(rel_err(wn_density(Vec::Constant(1, 0.4), mid, WnEvalStrategy::vm_matched()),
                  wn_density(Vec::Constant(1, 0.4), mid)) < 0.05);
    CHECK_THROWS_AS(WrappedNormal({Vec::Zero(2), Mat::Zero(2, 2)}), InvalidArgument);
    CHECK_THROWS_AS(WrappedNormal({Vec::Zero(1), Mat::Identity(1, 1)}, WnEvalStrategy::adaptive(1.5)), InvalidArgument);
}

TEST_CASE("wrapped normal: periodicity and window monotonicity") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec th = testutil::uniform_angles(rng, 2), mu = testutil::uniform_angles(rng, 2);
        Mat S(2, 2);
        S << 1.5, -0.3, -0.3, 0.9;
        const WrappedNormal w({mu, S});
        const WrappedNormal ws({mu + Vec::Constant(2, -kTwoPi), S});
        Vec sh = th;
        sh[0] += kTwoPi;
        sh[1] -= 2 * kTwoPi;
        CHECK(rel_err(w.density(sh), w.density(th)) < 1e-12);
        CHECK(rel_err(ws.density(th), w.density(th)) < 1e-12);
        double prev = 0.0;
        for (int r = 0; r <= 4; ++r) {
            const double d = wn_density(th, {mu, S}, WnEvalStrategy::fixed(r));
            CHECK(d >= prev);
            prev = d;
        }
    }
}

TEST_CASE("wrapped normal: very diffuse laws use the Fourier form") {
    // 1D: beyond the switch only the constant term survives
    for (double v : {4000.0, 1e12, 1e20}) {
        const WNParams w{Vec::Constant(1, 0.3), Mat::Constant(1, 1, v)};
        for (double th : {-3.0, 0.3, 2.9}) {
            CHECK(rel_err(wn_density(Vec::Constant(1, th), w), 1.0 / kTwoPi) < 1e-15);
            CHECK(wn_logpdf(Vec::Constant(1, th), w.mu, w.sigma) == doctest::Approx(-std::log(kTwoPi)));
        }
    }
    // 2D, diffuse along x only: product of a uniform and a WN in y
    Mat S(2, 2);
    S << 1e8, 0.0, 0.0, 0.5;
    Vec mu(2);
    mu << 1.0, -0.5;
    const WrappedNormal w({mu, S});
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        Vec th = testutil::uniform_angles(rng, 2);
        th[1] = cmod(mu[1] + 0.75 * (th[1] / kPi) * 2.0);  // |r_y| <= 1.5
        const double expected = wn_oracle_1d(cmod(th[1] - mu[1]), 0.0, 0.5, 10) / kTwoPi;
        CHECK(rel_err(w.density(th), expected) < 1e-12);
        CHECK(rel_err(w.log_density(th), std::log(expected)) < 1e-12);
        CHECK(wn_logpdf(th, mu, S) == doctest::Approx(std::log(expected)).epsilon(1e-12));
    }
    // correlated law just past the switch agrees with a wide explicit lattice
    Mat C(2, 2);
    C << 3500.0, 20.0, 20.0, 9.0;
    for (int rep = 0; rep < 50; ++rep) {
        const Vec th = testutil::uniform_angles(rng, 2);
        const double lattice = wn_density(th, {mu, C}, WnEvalStrategy::fixed(90));
        CHECK(rel_err(wn_density(th, {mu, C}), lattice) < 1e-12);
    }
    CHECK(wn_density(Vec::Zero(2), {mu, C}) > 0.0);
}

TEST_CASE("winding weights") {
    const Mat cov = Mat::Constant(1, 1, 0.5);
    const LatticeBox box = LatticeBox::symmetric(1, 10);
    const WindingWeights ww = winding_weights(Vec::Constant(1, 2.0), Vec::Zero(1), cov, box);
    double tot = 0.0;
    for (int k = -10; k <= 10; ++k) tot += testutil::gauss_pdf(2.0 - 0.0 + kTwoPi * k, 0.5);
    for (std::size_t i = 0; i < ww.k.size(); ++i) {
        const int k = ww.k[i][0];
        CHECK(std::abs(ww.w[i] - testutil::gauss_pdf(2.0 + kTwoPi * k, 0.5) / tot) < 1e-14);
    }

    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 200; ++rep) {
        const Vec th = testutil::uniform_angles(rng, 2), mu = testutil::uniform_angles(rng, 2);
        // the nearest-winding argmax holds for independent coordinates
        Mat S(2, 2);
        S << 0.7, 0.0, 0.0, 1.3;
        const WindingWeights w = winding_weights(th, mu, S, LatticeBox::symmetric(2, 3));
        double sum = 0.0;
        std::size_t best = 0;
        for (std::size_t i = 0; i < w.w.size(); ++i) {
            sum += w.w[i];
            if (w.w[i] > w.w[best]) best = i;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
        CHECK(w.k[best] == winding(Vec(mu - th)));
    }
    // symmetry at theta = mu
    const WindingWeights sym = winding_weights(Vec::Constant(1, 0.3), Vec::Constant(1, 0.3), cov, box);
    for (std::size_t i = 0; i < sym.w.size(); ++i) CHECK(std::abs(sym.w[i] - sym.w[sym.w.size() - 1 - i]) < 1e-15);
    const WindingWeights conc =
        winding_weights(Vec::Constant(2, 1.0), Vec::Constant(2, 1.0), 1e-6 * Mat::Identity(2, 2), LatticeBox::symmetric(2, 1));
    CHECK(conc.w[4] == doctest::Approx(1.0));
    // weights are formed in log space, so an extremely tight law still normalizes
    const WindingWeights tight =
        winding_weights(Vec::Constant(1, 3.0), Vec::Constant(1, -3.0), Mat::Constant(1, 1, 1e-8), LatticeBox::symmetric(1, 2));
    CHECK_FALSE(tight.fallback);
    double tsum = 0.0;
    for (std::size_t i = 0; i < tight.w.size(); ++i) {
        tsum += tight.w[i];
        if (tight.k[i][0] == winding(-6.0)) CHECK(tight.w[i] == doctest::Approx(1.0));
    }
    CHECK(tsum == doctest::Approx(1.0));
}

TEST_CASE("von Mises family") {
    for (double th : {-2.0, 0.0, 1.0}) CHECK(vm_density(th, {0.7, 0.0}) == doctest::Approx(1.0 / kTwoPi));
    std::mt19937_64 rng(19);
    const MvMParams ind{Vec::Constant(2, 0.4), (Vec(2) << 1.5, 0.3).finished(), Mat::Zero(2, 2)};
    for (int rep = 0; rep < 100; ++rep) {
        const Vec th = testutil::uniform_angles(rng, 2);
        const double prod = vm_density(th[0], {0.4, 1.5}) * vm_density(th[1], {0.4, 0.3});
        CHECK(rel_err(std::exp(mvm_logdensity(th, ind)), prod) < 1e-12);
    }
    for (double th : {-3.0, -0.5, 0.2, 2.9}) {
        CHECK(rel_err(jp_density(th, {0.3, 2.0, 1e-8}), vm_density(th, {0.3, 2.0})) < 1e-6);
    }
    MvMParams inter = ind;
    inter.lambda(0, 1) = inter.lambda(1, 0) = 0.5;
    CHECK(inter.unimodal());
    inter.lambda(0, 1) = inter.lambda(1, 0) = 2.0;
    CHECK_FALSE(inter.unimodal());
    MvMParams bad = ind;
    bad.lambda(0, 0) = 1.0;
    CHECK_THROWS_AS(MultivariateVonMises{bad}, InvalidArgument);
    CHECK_THROWS_AS(vm_density(0.0, {0.0, -1.0}), InvalidArgument);
    MivMParams mw{Mat::Zero(2, 1), Mat::Ones(2, 1), (Vec(2) << 0.5, 0.6).finished()};
    CHECK_THROWS_AS(MixtureVonMises{mw}, InvalidArgument);
}

TEST_CASE("densities integrate to one") {
    const int n1 = 1000;
    auto integrate1 = [&](auto&& f) {
        double s = 0.0;
        for (int i = 0; i < n1; ++i) s += f(-kPi + kTwoPi * i / n1);
        return s * kTwoPi / n1;
    };
    CHECK(std::abs(integrate1([](double t) { return vm_density(t, {1.0, 3.0}); }) - 1.0) < 1e-4);
    CHECK(std::abs(integrate1([](double t) { return wn_density(Vec::Constant(1, t), {Vec::Constant(1, 0.5), Mat::Constant(1, 1, 2.0)}); }) - 1.0) < 1e-4);
    for (double psi : {-1.5, -0.5, 0.0, 0.5, 1.0, 3.0}) {
        const JonesPewsey jp({0.2, 2.5, psi});
        CHECK(std::abs(integrate1([&](double t) { return jp.density(t); }) - 1.0) < 1e-4);
    }
    const MixtureVonMises mix1({(Mat(2, 1) << -1.0, 2.0).finished(), (Mat(2, 1) << 3.0, 1.0).finished(),
                                (Vec(2) << 0.3, 0.7).finished()});
    CHECK(std::abs(integrate1([&](double t) { return mix1.density(Vec::Constant(1, t)); }) - 1.0) < 1e-4);

    const int n2 = 200;
    auto integrate2 = [&](auto&& f) {
        double s = 0.0;
        Vec x(2);
        for (int i = 0; i < n2; ++i) {
            for (int j = 0; j < n2; ++j) {
                x << -kPi + kTwoPi * i / n2, -kPi + kTwoPi * j / n2;
                s += f(x);
            }
        }
        return s * (kTwoPi / n2) * (kTwoPi / n2);
    };
    Mat S(2, 2);
    S << 1.0, 0.4, 0.4, 0.6;
    CHECK(std::abs(integrate2([&](const Vec& x) { return wn_density(x, {Vec::Constant(2, 1.0), S}); }) - 1.0) < 1e-4);
    MvMParams mp{(Vec(2) << 0.5, -1.0).finished(), (Vec(2) << 2.0, 1.0).finished(), Mat::Zero(2, 2)};
    mp.lambda(0, 1) = mp.lambda(1, 0) = 0.7;
    const MultivariateVonMises mvm(mp);
    CHECK(std::abs(integrate2([&](const Vec& x) { return mvm.density(x); }) - 1.0) < 1e-4);
    const MixtureVonMises mix2({(Mat(2, 2) << 0.0, 1.0, 2.0, -2.0).finished(), (Mat(2, 2) << 2.0, 1.0, 0.5, 3.0).finished(),
                                (Vec(2) << 0.4, 0.6).finished()});
    CHECK(std::abs(integrate2([&](const Vec& x) { return mix2.density(x); }) - 1.0) < 1e-4);
}

TEST_CASE("Bonferroni radius") {
    CHECK(bonferroni_radius(0.01, 0.01, 1) == 1);
    const int r = bonferroni_radius(100.0, 0.01, 2);
    CHECK(r == 1 + static_cast<int>(std::floor(normal_quantile(1 - 0.01 / 4) * 10.0 / kTwoPi)));
    CHECK_THROWS_AS(bonferroni_radius(1e16, 0.01, 1), ResourceError);
}
