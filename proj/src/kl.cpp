#include "tdiff/kl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>

#include "tdiff/errors.hpp"

namespace tdiff {

KlMethod KlMethod::parse(const std::string& name) {
    std::string l = name;
    for (auto& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l == "pde" || l == "exact") return {TpdKind::E, true};
    return {tpd_kind_from_string(name), false};
}

namespace {

constexpr double kNumeratorCut = 1e-14;
constexpr double kDensityFloor = 1e-300;

// Grid-agnostic description of the state space used by the KL driver.
struct Space {
    Eigen::Index size = 0;
    double cell = 0.0;
    std::vector<Vec> nodes;
    std::vector<Eigen::Index> sources;
};

}  // namespace

std::vector<KlCurve> kl_curves(const DiffusionModel& model, const std::vector<KlMethod>& methods,
                               const std::vector<double>& times, const KlOptions& opt) {
    const Eigen::Index p = model.dim();
    if (p > 2) throw InvalidArgument("kl_curves: dimension must be 1 or 2");
    if (methods.empty()) throw InvalidArgument("kl_curves: no methods");
    if (times.empty()) throw InvalidArgument("kl_curves: empty time grid");
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] > 0.0) || (k > 0 && !(times[k] > times[k - 1]))) {
            throw InvalidArgument("kl_curves: times must be positive and strictly increasing");
        }
    }
    if (!(opt.sigma0 > 0.0) || !(opt.dt > 0.0)) throw InvalidArgument("kl_curves: sigma0 and dt must be > 0");

    Space sp;
    // the grid of the other dimension is a minimal placeholder
    constexpr Eigen::Index kUnused = 8;
    const Grid1D g1(p == 1 ? opt.Mx : kUnused);
    const Grid2D g2(p == 2 ? opt.Mxy : kUnused, p == 2 ? opt.Mxy : kUnused);
    if (p == 1) {
        if (opt.sources_1d < 1 || opt.sources_1d > g1.M) throw InvalidArgument("kl_curves: bad source count");
        sp.size = g1.M;
        sp.cell = g1.dx;
        for (Eigen::Index i = 0; i < g1.M; ++i) sp.nodes.push_back(Vec::Constant(1, g1.x(i)));
        for (int k = 0; k < opt.sources_1d; ++k) {
            sp.sources.push_back((k * g1.M) / opt.sources_1d);
        }
    } else {
        if (opt.sources_2d < 1 || opt.sources_2d > g2.gx.M) throw InvalidArgument("kl_curves: bad source count");
        sp.size = g2.size();
        sp.cell = g2.cell_area();
        sp.nodes.resize(static_cast<std::size_t>(sp.size));
        for (Eigen::Index j = 0; j < g2.gy.M; ++j) {
            for (Eigen::Index i = 0; i < g2.gx.M; ++i) {
                Vec x(2);
                x << g2.gx.x(i), g2.gy.x(j);
                sp.nodes[static_cast<std::size_t>(g2.index(i, j))] = x;
            }
        }
        for (int a = 0; a < opt.sources_2d; ++a) {
            for (int b = 0; b < opt.sources_2d; ++b) {
                sp.sources.push_back(g2.index((a * g2.gx.M) / opt.sources_2d, (b * g2.gy.M) / opt.sources_2d));
            }
        }
    }
    const auto ns = static_cast<Eigen::Index>(sp.sources.size());
    Vec wsrc(ns);
    for (Eigen::Index s = 0; s < ns; ++s) {
        wsrc[s] = model.stationary_density(sp.nodes[static_cast<std::size_t>(sp.sources[static_cast<std::size_t>(s)])]);
    }
    if (!(wsrc.sum() > 0.0)) throw NumericalError("kl_curves: stationary weights vanish at the sources");
    wsrc /= wsrc.sum();

    // One stepper per time interval so that every requested time is hit exactly.
    const std::size_t nt = times.size();
    std::vector<Eigen::Index> steps(nt);
    std::vector<std::unique_ptr<CnSolver1D>> cn(nt);
    std::vector<std::unique_ptr<AdiSolver2D>> adi(nt);
    {
        Vec b1, bx, by;
        if (p == 1) {
            b1 = drift_nodes_1d(model, g1);
        } else {
            drift_nodes_2d(model, g2, bx, by);
        }
        const Mat& S = model.diffusion();
        for (std::size_t k = 0; k < nt; ++k) {
            const double span = times[k] - (k == 0 ? 0.0 : times[k - 1]);
            steps[k] = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(span / opt.dt - 1e-9)));
            const double dt = span / static_cast<double>(steps[k]);
            if (p == 1) {
                cn[k] = std::make_unique<CnSolver1D>(b1, Vec::Constant(g1.M, S(0, 0)), g1.dx, dt);
            } else {
                const Eigen::Index n = g2.size();
                adi[k] = std::make_unique<AdiSolver2D>(g2, bx, by, Vec::Constant(n, S(0, 0)), Vec::Constant(n, S(1, 1)),
                                                       Vec::Constant(n, S(0, 1)), dt);
            }
        }
    }

    // approximations[m][k]
    std::vector<std::vector<std::unique_ptr<TpdApproximation>>> approx(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
        approx[m].resize(nt);
        if (methods[m].exact) continue;
        for (std::size_t k = 0; k < nt; ++k) {
            approx[m][k] = std::make_unique<TpdApproximation>(model, methods[m].kind, times[k]);
        }
    }

    // contrib(s, m * nt + k)
    Mat contrib = Mat::Zero(ns, static_cast<Eigen::Index>(methods.size() * nt));
    bool failed = false;
    std::string err;
#pragma omp parallel for schedule(dynamic) if (opt.parallel)
    for (Eigen::Index s = 0; s < ns; ++s) {
        try {
            const Eigen::Index src = sp.sources[static_cast<std::size_t>(s)];
            const Vec ic = p == 1 ? initial_condition(g1.x(src), opt.sigma0, g1).u
                                  : initial_condition(sp.nodes[static_cast<std::size_t>(src)], opt.sigma0, g2).u;
            const double peak = ic.maxCoeff();
            std::vector<Eigen::Index> kern;
            for (Eigen::Index l = 0; l < sp.size; ++l) {
                if (ic[l] >= opt.kernel_cut * peak) kern.push_back(l);
            }
            Vec u = ic, scratch(sp.size);
            std::vector<Eigen::Index> targets;
            for (std::size_t k = 0; k < nt; ++k) {
                for (Eigen::Index n = 0; n < steps[k]; ++n) {
                    if (p == 1) {
                        cn[k]->step(u.data(), scratch.data());
                    } else {
                        adi[k]->step(u, false);
                    }
                }
                if (!u.allFinite() || u.minCoeff() < kUndershootError) {
                    throw NumericalError("kl_curves: PDE solution broke down at t = " + std::to_string(times[k]));
                }
                targets.clear();
                for (Eigen::Index i = 0; i < sp.size; ++i) {
                    if (u[i] >= kNumeratorCut) targets.push_back(i);
                }
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    if (methods[m].exact) continue;
                    const TpdApproximation& a = *approx[m][k];
                    double d = 0.0;
                    for (Eigen::Index i : targets) {
                        const Vec& th = sp.nodes[static_cast<std::size_t>(i)];
                        double q = 0.0;
                        for (Eigen::Index l : kern) {
                            q += ic[l] * a.density(th, sp.nodes[static_cast<std::size_t>(l)]);
                        }
                        q *= sp.cell;
                        d += u[i] * std::log(u[i] / std::max(q, kDensityFloor));
                    }
                    contrib(s, static_cast<Eigen::Index>(m * nt + k)) = d * sp.cell;
                }
            }
        } catch (const std::exception& e) {
#pragma omp critical
            {
                failed = true;
                err = e.what();
            }
        }
    }
    if (failed) throw NumericalError(err);

    std::vector<KlCurve> out;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        KlCurve c;
        c.method = methods[m].name();
        c.times = times;
        c.sigma0 = opt.sigma0;
        c.Mx = p == 1 ? g1.M : g2.gx.M;
        c.My = p == 1 ? 1 : g2.gy.M;
        c.sources = static_cast<int>(ns);
        for (std::size_t k = 0; k < nt; ++k) {
            const double raw = wsrc.dot(contrib.col(static_cast<Eigen::Index>(m * nt + k)));
            c.raw.push_back(raw);
            c.divergences.push_back(std::max(raw, 0.0));
        }
        out.push_back(std::move(c));
    }
    return out;
}

void write_kl_csv(const std::vector<KlCurve>& curves, std::ostream& out) {
    out << "method,t,divergence\n";
    char buf[96];
    for (const auto& c : curves) {
        for (std::size_t k = 0; k < c.times.size(); ++k) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", c.times[k], c.divergences[k]);
            out << c.method << buf;
        }
    }
}

nlohmann::json to_json(const KlCurve& c) {
    return {{"method", c.method},   {"times", c.times}, {"divergences", c.divergences}, {"raw", c.raw},
            {"sigma0", c.sigma0},   {"Mx", c.Mx},       {"My", c.My},                   {"sources", c.sources}};
}

}  // namespace tdiff
