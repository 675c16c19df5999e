#include <doctest.h>

#include <random>
#include <unsupported/Eigen/KroneckerProduct>

#include "test_util.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/pde.hpp"
#include "tdiff/tpd.hpp"

using namespace tdiff;
using testutil::rel_err;

namespace {

Mat mat2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

double mat_rel(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// scaled-and-squared Taylor series with 60 terms
Mat expm_series(const Mat& A, double t) {
    const Mat X = A * t;
    int s = 0;
    double n = X.norm();
    while (n > 0.5) {
        n /= 2.0;
        ++s;
    }
    const Mat Y = X / std::pow(2.0, s);
    Mat term = Mat::Identity(A.rows(), A.cols()), sum = term;
    for (int k = 1; k <= 60; ++k) {
        term = term * Y / k;
        sum += term;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

DiffusionModel wn1d(double alpha, double mu, double sigma) {
    return DiffusionModel(
        WnProcParams{Mat::Constant(1, 1, alpha), Vec::Constant(1, mu), Mat::Constant(1, 1, sigma * sigma), 1});
}

DiffusionModel wn2d() {
    return DiffusionModel(WnProcParams{validate_A_lemma(1.0, 1.0, 0.5, 0.0, 1.0, 1.0), vec2(0.5, -1.0),
                                       Mat::Identity(2, 2), 1});
}

}  // namespace

TEST_CASE("Euler pseudo-tpd") {
    const DiffusionModel vm(MvmProcParams{Mat::Constant(1, 1, 1.0), Vec::Constant(1, 0.3), 1.0});
    for (double th : {-3.0, 0.0, 2.0}) {
        CHECK(std::abs(euler_tpd(vm, Vec::Constant(1, th), Vec::Constant(1, 1.0), 1e4, true) - 1.0 / kTwoPi) < 1e-6);
    }
    const auto m2 = wn2d();
    CHECK(std::abs(euler_tpd(m2, vec2(1.0, 2.0), vec2(-1.0, 0.0), 1e4, true) - 1.0 / (kTwoPi * kTwoPi)) < 1e-6);

    // zero drift at mu: peak of the WN with variance sigma^2 delta
    const double d = 0.01;
    const double peak = euler_tpd(vm, Vec::Constant(1, 0.3), Vec::Constant(1, 0.3), d, true);
    CHECK(rel_err(peak, wn_density(Vec::Zero(1), {Vec::Zero(1), Mat::Constant(1, 1, d)})) < 1e-14);

    // sigma sqrt(delta) = 0.05: wrapped and unwrapped agree near phi
    const double delta = 0.0025;
    for (double off : {-0.1, -0.02, 0.0, 0.05, 0.1}) {
        const Vec phi = Vec::Constant(1, 0.8), th = Vec::Constant(1, 0.8 + off);
        CHECK(rel_err(euler_tpd(vm, th, phi, delta, true), euler_tpd(vm, th, phi, delta, false)) < 1e-10);
    }
}

TEST_CASE("Shoji-Ozaki moments for the one-dimensional OU drift are exact") {
    const double alpha = 1.7, mu = 0.4, s2 = 0.6;
    for (double delta : {0.01, 0.5, 3.0}) {
        for (double phi : {-2.0, 0.4, 1.5}) {
            const auto m = so_moments(Vec::Constant(1, phi), Vec::Constant(1, alpha * (mu - phi)),
                                      Mat::Constant(1, 1, -alpha), Mat::Constant(1, 1, s2), delta);
            CHECK(std::abs(m.mean[0] - (mu + (phi - mu) * std::exp(-alpha * delta))) < 1e-14);
            CHECK(rel_err(m.cov(0, 0), s2 * (1.0 - std::exp(-2.0 * alpha * delta)) / (2.0 * alpha)) < 1e-14);
        }
    }
    const DiffusionModel ou(OuProcParams{Mat::Constant(1, 1, alpha), Vec::Constant(1, mu), Mat::Constant(1, 1, s2)});
    const auto m = so_moments(ou, Vec::Constant(1, 2.0), 0.7);
    CHECK(std::abs(m.mean[0] - (mu + (2.0 - mu) * std::exp(-alpha * 0.7))) < 1e-14);
}

TEST_CASE("Shoji-Ozaki moments reduce to Euler as J vanishes") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const Vec phi = testutil::uniform_angles(rng, 2);
        const Vec b = vec2(u(rng), u(rng));
        const Mat V = mat2(1.0 + 0.5 * std::abs(u(rng)), 0.2, 0.2, 0.8);
        const Mat S = mat2(-1.0 + 0.3 * u(rng), 0.3 * u(rng), 0.0, -1.2);
        const Mat Ss = 0.5 * (S + S.transpose());
        const Mat J = 1e-8 * (V * Ss);
        const double delta = 0.3;
        const auto m = so_moments(phi, b, J, V, delta);
        CHECK(!m.euler_fallback);
        CHECK(mat_rel(m.mean, phi + b * delta) < 1e-6);
        CHECK(mat_rel(m.cov, V * delta) < 1e-6);
    }
    const auto f = so_moments(vec2(0, 0), vec2(1, 1), Mat::Zero(2, 2), Mat::Identity(2, 2), 0.5);
    CHECK(f.euler_fallback);
    CHECK(f.cov == Mat::Identity(2, 2) * 0.5);
}

TEST_CASE("closed-form Shoji-Ozaki covariance agrees with the Kronecker solve") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Mat I = Mat::Identity(2, 2);
    int tested = 0;
    for (int i = 0; i < 400; ++i) {
        const Mat L = mat2(1.0 + 0.5 * u(rng), 0.0, 0.6 * u(rng), 0.8 + 0.3 * u(rng));
        const Mat V = L * L.transpose();
        // J = V S with S symmetric makes V^-1 J symmetric
        Mat S = mat2(u(rng), u(rng), 0.0, u(rng)) * 2.0;
        S(1, 0) = S(0, 1);
        const Mat J = V * S;
        const Eigen::VectorXcd ev = J.eigenvalues();
        if (ev[0].real() * ev[1].real() < 0.0 || std::abs(ev[0].real() + ev[1].real()) < 1e-3) continue;
        const double delta = 0.05 + std::abs(u(rng));
        const auto m = so_moments(Vec::Zero(2), vec2(0.3, -0.2), J, V, delta);
        const Mat K = Eigen::kroneckerProduct(I, J) + Eigen::kroneckerProduct(J, I);
        const Mat eJ = expm_series(J, delta);
        const Mat rhs = eJ * V * eJ.transpose() - V;
        const Vec g = K.fullPivLu().solve(Eigen::Map<const Vec>(rhs.data(), 4));
        const Mat oracle = Eigen::Map<const Mat>(g.data(), 2, 2);
        CHECK(mat_rel(m.cov, oracle) < 1e-10);
        const Vec mean_oracle = J.fullPivLu().solve((eJ - I) * vec2(0.3, -0.2));
        CHECK(mat_rel(m.mean, mean_oracle) < 1e-10);
        ++tested;
    }
    CHECK(tested > 50);

    // non-symmetric V^-1 J goes through the general solve
    const Mat J = mat2(-1.0, 0.7, -0.1, -0.5);
    const auto m = so_moments(Vec::Zero(2), vec2(0.1, 0.1), J, Mat::Identity(2, 2), 0.4);
    const Mat eJ = expm_series(J, 0.4);
    const Mat expected_lhs = eJ * eJ.transpose() - I;
    CHECK(mat_rel(Mat(J * m.cov + m.cov * J.transpose()), expected_lhs) < 1e-10);

    // eigenvalues of opposite sign make the Lyapunov system singular
    CHECK_THROWS_AS(so_moments(Vec::Zero(2), vec2(0, 0), mat2(1.0, 0.5, 0.0, -1.0), Mat::Identity(2, 2), 0.4),
                    NumericalError);
}

TEST_CASE("Shoji-Ozaki pseudo-tpd") {
    const DiffusionModel vm(MvmProcParams{Mat::Constant(1, 1, 1.3), Vec::Constant(1, 0.5), 0.8});
    for (double delta : {0.1, 1.0, 10.0}) {
        const auto m = so_moments(vm, Vec::Constant(1, 0.5), delta);
        CHECK(m.mean[0] == 0.5);
    }
    // long-lag limit: WN(phi - J^-1 b, -J^-1 V / 2) for stable J
    const auto m2 = wn2d();
    const Vec phi = vec2(0.2, -0.7);
    const Mat J = m2.jacobian(phi);
    const Vec mean = phi - J.inverse() * m2.drift(phi);
    const Mat cov = -0.5 * J.inverse() * m2.diffusion();
    for (const Vec& th : {vec2(0.0, 0.0), vec2(2.0, -3.0), vec2(-1.0, 1.0)}) {
        const double limit = wn_density(th, {mean, cov});
        CHECK(rel_err(so_tpd(m2, th, phi, 1e3, true, false), limit) < 1e-8);
    }

    // von Mises matched variant
    const auto wm = wn1d(1.0, 0.0, 1.2);
    const Vec phi1 = Vec::Constant(1, 1.1);
    const auto mm = so_moments(wm, phi1, 0.5);
    for (double th : {-2.0, 0.0, 1.0}) {
        const double expected = vm_density(th, {cmod(mm.mean[0]), vm_moment_match(mm.cov(0, 0)).kappa});
        CHECK(rel_err(so_tpd(wm, Vec::Constant(1, th), phi1, 0.5, true, true), expected) < 1e-13);
        TpdApproximation approx(wm, TpdKind::SOvM, 0.5);
        CHECK(rel_err(approx.density(Vec::Constant(1, th), phi1), expected) < 1e-13);
        TpdApproximation evm(wm, TpdKind::EvM, 0.5);
        const double em = cmod(1.1 + wm.drift(phi1)[0] * 0.5);
        CHECK(rel_err(evm.density(Vec::Constant(1, th), phi1),
                      vm_density(th, {em, vm_moment_match(1.44 * 0.5).kappa})) < 1e-13);
    }
}

TEST_CASE("wrapped pseudo-tpds are periodic") {
    const auto m2 = wn2d();
    std::mt19937_64 rng(23);
    for (TpdKind k : {TpdKind::S, TpdKind::E, TpdKind::EvM, TpdKind::SO, TpdKind::SOvM, TpdKind::WOU}) {
        CAPTURE(to_string(k));
        TpdApproximation a(m2, k, 0.5);
        for (int i = 0; i < 20; ++i) {
            const Vec th = testutil::uniform_angles(rng, 2), phi = testutil::uniform_angles(rng, 2);
            const Vec shift = vec2(kTwoPi, -2.0 * kTwoPi);
            const double base = a.log_density(th, phi);
            CHECK(std::abs(a.log_density(Vec(th + shift), phi) - base) < 1e-10);
            CHECK(std::abs(a.log_density(th, Vec(phi - shift)) - base) < 1e-10);
        }
    }
    CHECK(tpd_kind_from_string("SOvM") == TpdKind::SOvM);
    CHECK_THROWS_AS(tpd_kind_from_string("XYZ"), InvalidArgument);
}

TEST_CASE("2x2 matrix exponential") {
    CHECK(expm2x2(Mat::Zero(2, 2), 1.0) == Mat::Identity(2, 2));
    const Mat D = expm2x2(mat2(0.7, 0.0, 0.0, -1.3), 1.5);
    CHECK(std::abs(D(0, 0) - std::exp(1.05)) < 1e-12);
    CHECK(std::abs(D(1, 1) - std::exp(-1.95)) < 1e-12);
    CHECK(std::abs(D(0, 1)) < 1e-12);
    CHECK(std::abs(D(1, 0)) < 1e-12);

    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const Mat A = mat2(u(rng), u(rng), u(rng), u(rng));
        for (double t : {0.1, 1.0}) worst = std::max(worst, mat_rel(expm2x2(A, t), expm_series(A, t)));
    }
    CHECK(worst < 1e-10);
    // repeated eigenvalue, defective
    const Mat J = mat2(-0.5, 1.0, 0.0, -0.5);
    CHECK(mat_rel(expm2x2(J, 2.0), expm_series(J, 2.0)) < 1e-12);
    const auto c = expm2x2_coeffs(J, 2.0);
    CHECK(rel_err(c.b, 2.0 * std::exp(-1.0)) < 1e-14);
    // complex eigenvalues
    const Mat R = mat2(-0.2, 2.0, -2.0, -0.2);
    CHECK(mat_rel(expm2x2(R, 1.3), expm_series(R, 1.3)) < 1e-12);
}

TEST_CASE("Gamma_t interpolates between zero and the stationary covariance") {
    const Mat A = validate_A_lemma(1.0, 1.0, 0.5, 0.0, 1.0, 1.0);
    const Mat S = Mat::Identity(2, 2);
    CHECK(gamma_t(A, S, 0.0).norm() == 0.0);
    CHECK(mat_rel(gamma_t(A, S, 1e3), wn_stationary_cov(A, S)) < 1e-10);

    const double t = 0.25;
    Mat quad(2, 2);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            quad(a, b) = testutil::simpson(
                [&](double s) {
                    const Mat E = expm_series(A, -s);
                    return (E * S * E.transpose())(a, b);
                },
                0.0, t, 10000);
        }
    }
    CHECK(mat_rel(gamma_t(A, S, t), quad) < 1e-8);

    const Mat A2 = validate_A_lemma(0.5, 1.5, -0.3, 0.5, 1.2, 0.7);
    const Mat S2 = lemma_sigma(1.2, 0.7, 0.5);
    const Mat small = gamma_t(A2, S2, 1e-6);
    CHECK(mat_rel(small / 1e-6, S2) < 1e-5);
    CHECK(rel_err(gamma_t(Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 0.5), 0.3)(0, 0),
                  0.5 * (1.0 - std::exp(-1.2)) / 4.0) < 1e-13);
}

TEST_CASE("wrapped OU transition density") {
    const Mat A = validate_A_lemma(1.0, 1.0, 0.5, 0.0, 1.0, 1.0);
    const WouParams p2(vec2(0.5, -1.0), A, Mat::Identity(2, 2));
    const WNParams stat{p2.mu, wn_stationary_cov(A, p2.sigma)};
    const Vec start = vec2(2.0, 1.0);
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            const Vec th = vec2(-kPi + 0.6 * i, -kPi + 0.6 * j);
            CHECK(std::abs(wou_tpd(p2, th, start, 1e3) - wn_density(th, stat)) < 1e-8);
        }
    }
    const WouParams p1(Vec::Constant(1, 0.3), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0));
    for (int i = 0; i < 100; ++i) {
        const Vec th = Vec::Constant(1, -kPi + kTwoPi * i / 100.0);
        const double stat1 = wn_density(th, {Vec::Constant(1, 0.3), Mat::Constant(1, 1, 0.5)});
        CHECK(std::abs(wou_tpd(p1, th, Vec::Constant(1, -2.0), 1e3) - stat1) < 1e-8);
    }
    const WouParams tight(Vec::Constant(1, 0.3), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 0.1));
    CHECK(wou_tpd(tight, Vec::Constant(1, 1.0), Vec::Constant(1, 1.0), 1e-6) > 1e3);

    // unit mass
    double s1 = 0.0;
    const int n1 = 500;
    for (int i = 0; i < n1; ++i) s1 += wou_tpd(p1, Vec::Constant(1, -kPi + kTwoPi * i / n1), Vec::Constant(1, 2.5), 0.4);
    CHECK(std::abs(s1 * kTwoPi / n1 - 1.0) < 1e-6);
    const int n2 = 150;
    WouTpd w2(p2, 0.6);
    double s2 = 0.0;
    for (int i = 0; i < n2; ++i)
        for (int j = 0; j < n2; ++j) s2 += w2.density(vec2(-kPi + kTwoPi * i / n2, -kPi + kTwoPi * j / n2), start);
    CHECK(std::abs(s2 * std::pow(kTwoPi / n2, 2) - 1.0) < 1e-6);
}

TEST_CASE("wrapped OU is time reversible") {
    std::mt19937_64 rng(25);
    const Mat A = validate_A_lemma(0.8, 1.4, 0.3, 0.4, 1.1, 0.9);
    const WouParams p(vec2(-0.5, 2.0), A, lemma_sigma(1.1, 0.9, 0.4));
    const WNParams stat{p.mu, wn_stationary_cov(A, p.sigma)};
    for (double t : {0.1, 0.5, 2.0}) {
        WouTpd w(p, t);
        for (int i = 0; i < 100; ++i) {
            const Vec a = testutil::uniform_angles(rng, 2), b = testutil::uniform_angles(rng, 2);
            const double lhs = w.density(a, b) * wn_density(b, stat);
            const double rhs = w.density(b, a) * wn_density(a, stat);
            CHECK(rel_err(lhs, rhs) < 1e-10);
        }
    }
    const WouParams p1(Vec::Constant(1, 1.0), Mat::Constant(1, 1, 0.7), Mat::Constant(1, 1, 2.0));
    for (int i = 0; i < 100; ++i) {
        const Vec a = testutil::uniform_angles(rng, 1), b = testutil::uniform_angles(rng, 1);
        const WNParams s1{p1.mu, Mat::Constant(1, 1, 2.0 / 1.4)};
        CHECK(rel_err(wou_tpd(p1, a, b, 0.3) * wn_density(b, s1), wou_tpd(p1, b, a, 0.3) * wn_density(a, s1)) < 1e-10);
    }
}

TEST_CASE("wrapped OU matches the PDE solution in the concentrated regime") {
    // alpha = 5, sigma = 0.5, t = 0.25; narrow initial condition on a fine grid
    const auto m = wn1d(5.0, 0.0, 0.5);
    const Grid1D g(3000);
    const double theta_s = 0.6, t = 0.25, sigma0 = 0.01;
    const auto ic = initial_condition(theta_s, sigma0, g);
    const Vec b = drift_nodes_1d(m, g);
    const Vec s2 = Vec::Constant(g.M, 0.25);
    const Eigen::Index steps = 2500;
    const auto sol = cn_solve_1d(b, s2, ic.u, t / steps, steps);
    const Vec& u = sol.u.back();
    const WouParams wp = WouParams::from_model(m);
    WouTpd w(wp, t);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < g.M; ++i) {
        const double q = w.density(Vec::Constant(1, g.x(i)), Vec::Constant(1, theta_s));
        if (u[i] > 1e-14) kl += u[i] * std::log(u[i] / q);
    }
    kl *= g.dx;
    CHECK(kl >= -1e-6);
    CHECK(kl < 1e-3);
}
