#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/kl.hpp"
#include "tdiff/nonparametric.hpp"
#include "tdiff/relative_efficiency.hpp"
#include "tdiff/simulate.hpp"

using namespace tdiff;

namespace {

DiffusionModel wn1d(double alpha, double mu, double sigma) {
    return DiffusionModel(
        WnProcParams{Mat::Constant(1, 1, alpha), Vec::Constant(1, mu), Mat::Constant(1, 1, sigma * sigma), 1});
}

DiffusionModel vm1d(double alpha, double mu, double sigma) {
    return DiffusionModel(MvmProcParams{Mat::Constant(1, 1, alpha), Vec::Constant(1, mu), sigma});
}

double at(const KlCurve& c, double t) {
    for (std::size_t i = 0; i < c.times.size(); ++i)
        if (c.times[i] == t) return c.divergences[i];
    FAIL("time not in curve");
    return 0.0;
}

}  // namespace

TEST_CASE("KL of the PDE solution against itself is zero") {
    KlOptions opt;
    opt.Mx = 300;
    opt.dt = 0.002;
    const auto curves = kl_curves(wn1d(1.0, 0.0, 1.0), {KlMethod{TpdKind::E, true}}, {0.05, 0.5, 2.0}, opt);
    REQUIRE(curves.size() == 1);
    CHECK(curves[0].method == "PDE");
    for (double d : curves[0].raw) CHECK(std::abs(d) < 1e-8);
    for (double d : curves[0].divergences) CHECK(d >= 0.0);
}

TEST_CASE("KL of the stationary approximation vanishes at long lags") {
    KlOptions opt;
    opt.Mx = 300;
    opt.dt = 0.01;
    const auto curves = kl_curves(wn1d(1.0, 0.0, 1.0), {KlMethod{TpdKind::S}}, {50.0}, opt);
    CHECK(curves[0].divergences[0] < 1e-4);
    CHECK(curves[0].raw[0] > -1e-9);
}

TEST_CASE("KL ordering and wrapped dominance for the WN process") {
    KlOptions opt;
    opt.Mx = 500;
    const std::vector<double> times{0.1, 0.2, 0.5, 1.0, 2.0};
    std::vector<KlMethod> methods;
    for (auto k : {TpdKind::E, TpdKind::UE, TpdKind::SO, TpdKind::USO, TpdKind::WOU}) methods.push_back({k, false});
    const auto c = kl_curves(wn1d(1.0, 0.0, 1.0), methods, times, opt);
    REQUIRE(c.size() == 5);
    const auto &E = c[0], &UE = c[1], &SO = c[2], &USO = c[3], &WOU = c[4];
    CHECK(WOU.method == "WOU");
    CHECK(at(WOU, 0.2) < at(SO, 0.2));
    CHECK(at(SO, 0.2) < at(E, 0.2));
    for (double t : {0.1, 0.5, 1.0, 2.0}) {
        CAPTURE(t);
        CHECK(at(E, t) <= at(UE, t));
        CHECK(at(SO, t) <= at(USO, t));
    }
    for (const auto& cv : c)
        for (std::size_t i = 0; i < cv.raw.size(); ++i) {
            CHECK(cv.divergences[i] >= 0.0);
            CHECK(cv.divergences[i] == std::max(cv.raw[i], 0.0));
        }

    std::stringstream ss;
    write_kl_csv(c, ss);
    std::string line;
    int rows = -1;
    while (std::getline(ss, line)) ++rows;
    CHECK(rows == 25);
    const auto j = to_json(c[0]);
    CHECK(j.contains("sigma0"));
    CHECK(j.contains("Mx"));
}

TEST_CASE("KL input validation") {
    const auto m = wn1d(1.0, 0.0, 1.0);
    CHECK_THROWS_AS(kl_curves(m, {KlMethod{}}, {0.5, 0.2}), InvalidArgument);
    CHECK_THROWS_AS(kl_curves(m, {KlMethod{}}, {0.0}), InvalidArgument);
    CHECK(KlMethod::parse("PDE").exact);
    CHECK(KlMethod::parse("WOU").kind == TpdKind::WOU);
}

TEST_CASE("relative efficiency from MSE") {
    Mat one(1, 3);
    one << 0.1, 2.0, 0.3;
    CHECK(component_re(one) == Mat::Ones(1, 3));

    Mat same(2, 2);
    same << 0.5, 0.2, 0.5, 0.2;
    CHECK(component_re(same) == Mat::Ones(2, 2));

    Mat mse(3, 2);
    mse << 1.0, 4.0, 2.0, 1.0, 4.0, 2.0;
    const Mat re = component_re(mse);
    CHECK(re(0, 0) == doctest::Approx(1.0));
    CHECK(re(1, 0) == doctest::Approx(0.5));
    CHECK(re(2, 0) == doctest::Approx(0.25));
    CHECK(re(1, 1) == doctest::Approx(1.0));
    CHECK(re(0, 1) == doctest::Approx(0.25));
    for (Eigen::Index c = 0; c < re.cols(); ++c) CHECK(re.col(c).maxCoeff() == 1.0);
    CHECK((re.array() > 0.0).all());
}

TEST_CASE("relative efficiency is invariant to rescaling a component") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z;
    const Vec truth = Vec::Constant(2, 0.7);
    const std::vector<bool> lin{false, false};
    Mat mse(3, 2), mse_scaled(3, 2);
    for (int m = 0; m < 3; ++m) {
        Mat est(50, 2);
        for (int r = 0; r < 50; ++r)
            for (int c = 0; c < 2; ++c) est(r, c) = truth[c] + (1.0 + m) * 0.1 * z(rng) + 0.05 * m;
        mse.row(m) = component_mse(est, truth, lin).transpose();
        Mat scaled = est;
        scaled.col(1) *= -3.5;
        Vec t2 = truth;
        t2[1] *= -3.5;
        mse_scaled.row(m) = component_mse(scaled, t2, lin).transpose();
    }
    const Mat a = component_re(mse), b = component_re(mse_scaled);
    for (int m = 0; m < 3; ++m)
        for (int c = 0; c < 2; ++c) CHECK(a(m, c) == doctest::Approx(b(m, c)).epsilon(1e-12));
}

TEST_CASE("angular MSE uses the wrapped difference") {
    Mat est(2, 1);
    est << kPi - 0.1, -kPi + 0.1;
    const Vec truth = Vec::Constant(1, kPi - 0.05);
    const Vec w = component_mse(est, truth, {true});
    CHECK(w[0] == doctest::Approx((0.05 * 0.05 + 0.15 * 0.15) / 2.0).epsilon(1e-10));
    const Vec u = component_mse(est, truth, {false});
    CHECK(u[0] > 10.0);
}

TEST_CASE("Monte Carlo RE with a single method") {
    auto sc = re_scenario("wn1d_a1_s1");
    sc.deltas = {0.5};
    sc.N = 100;
    ReOptions opt;
    opt.methods = {LikKind::E};
    opt.J = 4;
    opt.sim_dt = 0.01;
    const auto t = relative_efficiency({sc}, opt);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].re == 1.0);
    CHECK(t.rows[0].failures == 0);
    CHECK((t.rows[0].component_re.array() == 1.0).all());
    CHECK(t.J == 4);

    opt.methods = {LikKind::E, LikKind::E};
    const auto t2 = relative_efficiency({sc}, opt);
    REQUIRE(t2.rows.size() == 2);
    CHECK(t2.rows[0].re == 1.0);
    CHECK(t2.rows[1].re == 1.0);

    CHECK_THROWS_AS(re_scenario("nope"), InvalidArgument);
    opt.J = 1;
    CHECK_THROWS_AS(relative_efficiency({sc}, opt), InvalidArgument);
}

TEST_CASE("scenario catalogue") {
    const auto names = re_scenario_names();
    CHECK(names.size() == 8);
    const auto s = re_scenario("wn2d_a2_s2");
    const auto& w = std::get<WnProcParams>(s.truth);
    CHECK(w.A(0, 0) == 2.0);
    CHECK(w.A(1, 1) == 2.0);
    CHECK(w.sigma(0, 0) == 4.0);
    CHECK(w.mu[0] == doctest::Approx(kPi / 2));
    CHECK(w.mu[1] == doctest::Approx(-kPi / 2));
    const auto c = re_components(s.truth);
    CHECK(c.values.size() == static_cast<Eigen::Index>(c.names.size()));
    CHECK(c.angular.size() == c.names.size());
}

TEST_CASE("Nadaraya-Watson weights") {
    std::mt19937_64 rng(3);
    Mat X(200, 2);
    for (int i = 0; i < 200; ++i) X.row(i) = testutil::uniform_angles(rng, 2).transpose();
    for (double h : {0.05, 0.3, 1.0, 5.0}) {
        for (int k = 0; k < 10; ++k) {
            const Vec th = testutil::uniform_angles(rng, 2);
            const Vec w = np_weights(th, X, h);
            CHECK(std::abs(w.sum() - 1.0) < 1e-12);
            CHECK((w.array() >= 0.0).all());
        }
    }
    CHECK_THROWS_AS(np_weights(Vec::Zero(2), X, 0.0), InvalidArgument);
}

TEST_CASE("constant trajectory gives zero drift") {
    Trajectory tr;
    tr.points = Mat::Constant(50, 1, 1.3);
    tr.delta = 0.1;
    const auto est = np_drift(tr, Vec::Constant(1, 0.5), torus_grid(1, 32));
    CHECK(est.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Nadaraya-Watson estimates are periodic") {
    const auto m = wn1d(1.0, 0.5, 1.0);
    const auto tr = euler_maruyama(m, Vec::Zero(1), 20.0, 0.01, 4);
    Mat eval(6, 1), shifted(6, 1);
    eval << -3.0, -1.0, 0.0, 0.4, 2.0, 3.1;
    shifted = eval.array() + 2.0 * kTwoPi;
    const Vec h = Vec::Constant(1, 0.3);
    const auto a = np_drift(tr, h, eval), b = np_drift(tr, h, shifted);
    for (int i = 0; i < 6; ++i) CHECK(a.values(i, 0) == doctest::Approx(b.values(i, 0)).epsilon(1e-12));
    const auto c = np_diff(tr, h, eval), d = np_diff(tr, h, shifted);
    for (int i = 0; i < 6; ++i) CHECK(c.values(i, 0) == doctest::Approx(d.values(i, 0)).epsilon(1e-12));
    // the diffusion estimate is close to sigma
    CHECK(std::abs(c.values(3, 0) - 1.0) < 0.1);
}

TEST_CASE("smoothed parametric drift") {
    const auto m = vm1d(1.0, 0.0, 0.5);
    const auto tr = euler_maruyama(m, Vec::Zero(1), 20.0, 0.01, 17);
    const Mat X = tr.points.topRows(tr.size() - 1);

    SUBCASE("equals np_drift when responses are the model drift") {
        Trajectory fake;
        fake.delta = 0.1;
        fake.points.resize(60, 1);
        fake.points(0, 0) = 0.2;
        for (int i = 1; i < 60; ++i)
            fake.points(i, 0) = cmod(fake.points(i - 1, 0) + fake.delta * m.drift(fake.points.row(i - 1).transpose())[0]);
        // the wrapped increment equals delta * b exactly only up to rounding
        const Mat eval = torus_grid(1, 40);
        const Vec h = Vec::Constant(1, 0.4);
        const auto a = np_drift(fake, h, eval), b = smooth_parametric(fake, m, h, eval);
        CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("small bandwidth interpolates at data points") {
        Mat eval(5, 1);
        for (int k = 0; k < 5; ++k) eval(k, 0) = X(k * 300, 0);
        const auto s = smooth_parametric(tr, m, Vec::Constant(1, 0.001), eval);
        for (int k = 0; k < 5; ++k) CHECK(std::abs(s.values(k, 0) - m.drift(eval.row(k).transpose())[0]) < 1e-3);
    }
    SUBCASE("huge bandwidth gives a bounded weighted average") {
        const Mat eval = torus_grid(1, 20);
        const auto s = smooth_parametric(tr, m, Vec::Constant(1, 50.0), eval);
        double mean = 0.0, bmax = 0.0;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double b = m.drift(X.row(i).transpose())[0];
            mean += b;
            bmax = std::max(bmax, std::abs(b));
        }
        mean /= static_cast<double>(X.rows());
        CHECK(s.values.cwiseAbs().maxCoeff() <= bmax);
        for (int i = 0; i < 20; ++i) CHECK(std::abs(s.values(i, 0) - mean) < 1e-3);
    }
}

TEST_CASE("cross-validated bandwidths") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z;
    const int n = 400;
    Mat X(n, 1), noise(n, 1), smooth(n, 1);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = testutil::uniform_angles(rng, 1)[0];
        noise(i, 0) = z(rng);
        smooth(i, 0) = std::sin(3.0 * X(i, 0));
    }
    const auto wn = cv_bandwidth(X, noise);
    CHECK(wn.h[0] >= wn.grid[wn.grid.size() - 3]);
    const auto sm = cv_bandwidth(X, smooth);
    CHECK(sm.h[0] <= wn.grid[2]);
    for (const auto* r : {&wn, &sm}) {
        CHECK(r->grid.size() == 30);
        CHECK(r->grid[0] == doctest::Approx(0.05));
        CHECK(r->grid[29] == doctest::Approx(2.0));
        Eigen::Index g = 0;
        while (r->grid[g] != r->h[0]) ++g;
        if (g > 0) CHECK(r->scores(g, 0) <= r->scores(g - 1, 0));
        if (g < 29) CHECK(r->scores(g, 0) <= r->scores(g + 1, 0));
        CHECK_FALSE(r->degenerate[0]);
    }
    const auto flat = cv_bandwidth(X, Mat::Constant(n, 1, 2.0));
    CHECK(flat.degenerate[0]);
    CHECK(flat.h[0] == flat.grid[15]);
    CHECK_THROWS_AS(cv_bandwidth(X.topRows(10), noise.topRows(10)), InvalidArgument);
}

TEST_CASE("nonparametric vM drift tracks the smoothed parametric drift") {
    const auto m = vm1d(1.0, 0.0, 0.5);
    const auto tr = euler_maruyama(m, Vec::Zero(1), 100.0, 0.01, 2718);
    const auto cv = cv_bandwidth(tr, NpTarget::drift);
    const Mat eval = torus_grid(1, 200);
    const auto np = np_drift(tr, cv.h, eval);
    const auto sp = smooth_parametric(tr, m, cv.h, eval);
    double smax = 0.0;
    Vec dens(eval.rows());
    for (Eigen::Index i = 0; i < eval.rows(); ++i) {
        dens[i] = m.stationary_density(eval.row(i).transpose());
        smax = std::max(smax, dens[i]);
    }
    double gap = 0.0;
    for (Eigen::Index i = 0; i < eval.rows(); ++i)
        if (dens[i] >= 0.2 * smax) gap = std::max(gap, std::abs(np.values(i, 0) - sp.values(i, 0)));
    MESSAGE("h = " << cv.h[0] << ", gap = " << gap);
    CHECK(gap < 0.3);
}

TEST_CASE("kernel density estimate integrates to one") {
    std::mt19937_64 rng(21);
    Mat S(300, 1);
    for (int i = 0; i < 300; ++i) S(i, 0) = testutil::uniform_angles(rng, 1)[0];
    const Mat g = torus_grid(1, 400);
    const Vec f = np_kde(S, 0.3, g);
    CHECK(std::abs(f.sum() * kTwoPi / 400.0 - 1.0) < 1e-8);
    CHECK((f.array() >= 0.0).all());
}
