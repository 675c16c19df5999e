// Serial reference vs OpenMP timings for the PDE kernels and the KL driver.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tdiff/kl.hpp"
#include "tdiff/pde.hpp"

using namespace tdiff;

namespace {

double seconds(const std::function<void()>& f, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, double max_diff) {
    std::printf("%-28s serial %8.3f s  parallel %8.3f s  speedup %5.2f  max |diff| %.1e\n", name, serial, parallel,
                serial / parallel, max_diff);
}

}  // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 3;
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP\n");
#endif

    // Douglas ADI, 240 x 240, 200 steps
    {
        Mat A(2, 2), S(2, 2);
        A << 2.0, 1.0, 1.0, 2.0;
        S << 4.0, 0.0, 0.0, 4.0;
        Vec mu(2);
        mu << 1.5, -1.5;
        const DiffusionModel m(WnProcParams{A, mu, S, 1});
        const Grid2D g(240, 240);
        Vec bx, by;
        drift_nodes_2d(m, g, bx, by);
        const Eigen::Index n = g.size();
        const AdiSolver2D solver(g, bx, by, Vec::Constant(n, 4.0), Vec::Constant(n, 4.0), Vec::Zero(n), 0.005);
        Vec start(2);
        start << 0.0, 0.0;
        const Vec u0 = initial_condition(start, 0.2, g).u;
        Vec us = u0, up = u0;
        const double ts = seconds([&] { us = u0; for (int k = 0; k < 200; ++k) solver.step(us, false); }, reps);
        const double tp = seconds([&] { up = u0; for (int k = 0; k < 200; ++k) solver.step(up, true); }, reps);
        report("ADI 240^2 x 200 steps", ts, tp, (us - up).cwiseAbs().maxCoeff());
    }

    // 1D tpd matrix, Mx = 500, lag 0.5
    {
        const DiffusionModel m(WnProcParams{Mat::Constant(1, 1, 1.0), Vec::Zero(1), Mat::Constant(1, 1, 1.0), 1});
        const Grid1D g(500);
        PdeOptions o;
        o.symmetry = false;
        TpdMatrix ps, pp;
        o.parallel = false;
        const double ts = seconds([&] { ps = tpd_matrix(m, 0.5, g, o); }, reps);
        o.parallel = true;
        const double tp = seconds([&] { pp = tpd_matrix(m, 0.5, g, o); }, reps);
        double d = 0.0;
        for (Eigen::Index j = 0; j < g.M; ++j) d = std::max(d, (ps.cols[j] - pp.cols[j]).cwiseAbs().maxCoeff());
        report("tpd matrix 1D Mx=500", ts, tp, d);
    }

    // KL curves, Mx = 500, four methods
    {
        const DiffusionModel m(WnProcParams{Mat::Constant(1, 1, 1.0), Vec::Zero(1), Mat::Constant(1, 1, 1.0), 1});
        std::vector<KlMethod> methods{{TpdKind::E}, {TpdKind::SO}, {TpdKind::WOU}, {TpdKind::S}};
        KlOptions o;
        o.Mx = 500;
        std::vector<KlCurve> cs, cp;
        o.parallel = false;
        const double ts = seconds([&] { cs = kl_curves(m, methods, {0.1, 0.5}, o); }, 1);
        o.parallel = true;
        const double tp = seconds([&] { cp = kl_curves(m, methods, {0.1, 0.5}, o); }, 1);
        double d = 0.0;
        for (std::size_t k = 0; k < cs.size(); ++k)
            for (std::size_t i = 0; i < cs[k].raw.size(); ++i) d = std::max(d, std::abs(cs[k].raw[i] - cp[k].raw[i]));
        report("KL curves Mx=500", ts, tp, d);
    }
    return 0;
}
