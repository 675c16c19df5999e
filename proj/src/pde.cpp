#include "tdiff/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>

#include <omp.h>

#include "tdiff/errors.hpp"

namespace tdiff {

Grid1D::Grid1D(Eigen::Index m) : M(m), dx(kTwoPi / static_cast<double>(m)) {
    if (m < 8) throw InvalidArgument("grid needs at least 8 nodes");
}

Vec Grid1D::nodes() const {
    Vec x(M);
    for (Eigen::Index i = 0; i < M; ++i) x[i] = this->x(i);
    return x;
}

Eigen::Index Grid1D::cell(double theta) const noexcept {
    const double t = (theta + kPi) / dx;
    const double r = std::round(t);
    const auto g = std::abs(t - r) < 1e-9 ? static_cast<Eigen::Index>(r) : static_cast<Eigen::Index>(std::floor(t));
    return wrap(g);
}

InterpWeights interp_weights(double theta, const Grid1D& grid) {
    const double t = (theta + kPi) / grid.dx;
    const double r = std::round(t);
    if (std::abs(t - r) < 1e-9) return {grid.wrap(static_cast<Eigen::Index>(r)), 1.0};
    const double f = std::floor(t);
    return {grid.wrap(static_cast<Eigen::Index>(f)), 1.0 - (t - f)};
}

Eigen::Index pde_steps(double delta, double dt_target) {
    if (!(delta > 0.0) || !(dt_target > 0.0)) throw InvalidArgument("pde: lag and time step must be > 0");
    return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(delta / dt_target - 1e-9)));
}

// ---------------------------------------------------------------------------
// 1D Crank–Nicolson

CnSolver1D::CnSolver1D(const Vec& b, const Vec& s2, double dx, double dt) : dt_(dt) {
    const Eigen::Index M = b.size();
    if (M < 3 || s2.size() != M) throw InvalidArgument("cn: node fields must have equal size >= 3");
    if (!(dt > 0.0) || !(dx > 0.0)) throw InvalidArgument("cn: dt and dx must be > 0");
    const double r = dt / (4.0 * dx * dx);
    gam_.resize(static_cast<std::size_t>(M));
    beta2_.resize(static_cast<std::size_t>(M));
    alp_.resize(static_cast<std::size_t>(M));
    Vec lo(M), di(M), up(M);
    for (Eigen::Index i = 0; i < M; ++i) {
        const Eigen::Index ip = (i + 1) % M, im = (i + M - 1) % M;
        const double g = (-b[ip] * dx + s2[ip]) * r;
        const double be = s2[i] * r;
        const double a = (b[im] * dx + s2[im]) * r;
        gam_[static_cast<std::size_t>(i)] = g;
        beta2_[static_cast<std::size_t>(i)] = 2.0 * be;
        alp_[static_cast<std::size_t>(i)] = a;
        lo[i] = -a;
        di[i] = 1.0 + 2.0 * be;
        up[i] = -g;
    }
    lhs_ = CyclicTridiagonal(lo, di, up);
}

void CnSolver1D::step(double* u, double* rhs) const {
    const std::size_t M = gam_.size();
    rhs[0] = gam_[0] * u[1] + (1.0 - beta2_[0]) * u[0] + alp_[0] * u[M - 1];
    for (std::size_t i = 1; i + 1 < M; ++i) {
        rhs[i] = gam_[i] * u[i + 1] + (1.0 - beta2_[i]) * u[i] + alp_[i] * u[i - 1];
    }
    rhs[M - 1] = gam_[M - 1] * u[0] + (1.0 - beta2_[M - 1]) * u[M - 1] + alp_[M - 1] * u[M - 2];
    lhs_.solve(rhs);
    std::copy(rhs, rhs + M, u);
}

namespace {

void check_density(const Vec& u, double cell, const char* who) {
    if (!u.allFinite()) throw InvalidArgument(std::string(who) + ": initial condition is not finite");
    if (u.minCoeff() < kUndershootWarn) throw InvalidArgument(std::string(who) + ": initial condition is negative");
    const double mass = u.sum() * cell;
    if (std::abs(mass - 1.0) > 1e-6) throw InvalidArgument(std::string(who) + ": initial condition must have unit mass");
}

void track(PdeSolution& sol, const Vec& u, Eigen::Index step) {
    const double mn = u.minCoeff();
    if (!std::isfinite(mn) || !u.allFinite()) throw NumericalError("pde: non-finite solution", step);
    sol.min_value = std::min(sol.min_value, mn);
    if (mn < kUndershootError) throw NumericalError("pde: negative undershoot below -1e-6", step);
    if (mn < kUndershootWarn) sol.undershoot_warning = true;
}

}  // namespace

PdeSolution cn_solve_1d(const Vec& b, const Vec& s2, const Vec& u0, double dt, Eigen::Index Mt,
                        Eigen::Index keep_every) {
    const Eigen::Index M = u0.size();
    if (b.size() != M) throw InvalidArgument("cn_solve_1d: size mismatch");
    if (Mt < 0) throw InvalidArgument("cn_solve_1d: negative step count");
    const double dx = kTwoPi / static_cast<double>(M);
    check_density(u0, dx, "cn_solve_1d");
    const CnSolver1D solver(b, s2, dx, dt);
    PdeSolution sol;
    sol.dt = dt;
    sol.min_value = u0.minCoeff();
    Vec u = u0;
    Vec scratch(M);
    auto keep = [&](Eigen::Index n) {
        sol.times.push_back(static_cast<double>(n) * dt);
        sol.u.push_back(u);
        sol.mass.push_back(u.sum() * dx);
    };
    keep(0);
    for (Eigen::Index n = 1; n <= Mt; ++n) {
        solver.step(u.data(), scratch.data());
        track(sol, u, n);
        if ((keep_every > 0 && n % keep_every == 0) || (n == Mt && (keep_every <= 0 || n % keep_every != 0))) keep(n);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// 2D Douglas ADI

AdiSolver2D::AdiSolver2D(const Grid2D& grid, const Vec& b_x, const Vec& b_y, const Vec& s2x, const Vec& s2y,
                         const Vec& sxy, double dt)
    : grid_(grid), dt_(dt) {
    const Eigen::Index Mx = grid.gx.M, My = grid.gy.M, n = grid.size();
    if (b_x.size() != n || b_y.size() != n || s2x.size() != n || s2y.size() != n || sxy.size() != n) {
        throw InvalidArgument("adi: node fields must match the grid");
    }
    if (!(dt > 0.0)) throw InvalidArgument("adi: dt must be > 0");
    const double dx = grid.gx.dx, dy = grid.gy.dx;
    const double rx = dt / (4.0 * dx * dx), ry = dt / (4.0 * dy * dy);
    const double rxy = dt / (8.0 * dx * dy);
    gx_.resize(n), bx_.resize(n), ax_.resize(n), gy_.resize(n), by_.resize(n), ay_.resize(n), cxy_.resize(n);
    for (Eigen::Index j = 0; j < My; ++j) {
        for (Eigen::Index i = 0; i < Mx; ++i) {
            const Eigen::Index k = grid.index(i, j);
            const Eigen::Index xp = grid.index(grid.gx.wrap(i + 1), j), xm = grid.index(grid.gx.wrap(i - 1), j);
            const Eigen::Index yp = grid.index(i, grid.gy.wrap(j + 1)), ym = grid.index(i, grid.gy.wrap(j - 1));
            gx_[k] = (-b_x[xp] * dx + s2x[xp]) * rx;
            bx_[k] = 2.0 * s2x[k] * rx;
            ax_[k] = (b_x[xm] * dx + s2x[xm]) * rx;
            gy_[k] = (-b_y[yp] * dy + s2y[yp]) * ry;
            by_[k] = 2.0 * s2y[k] * ry;
            ay_[k] = (b_y[ym] * dy + s2y[ym]) * ry;
            cxy_[k] = 2.0 * rxy * sxy[k];
        }
    }
    xlines_.reserve(static_cast<std::size_t>(My));
    for (Eigen::Index j = 0; j < My; ++j) {
        Vec lo(Mx), di(Mx), up(Mx);
        for (Eigen::Index i = 0; i < Mx; ++i) {
            const Eigen::Index k = grid.index(i, j);
            lo[i] = -ax_[k];
            di[i] = 1.0 + bx_[k];
            up[i] = -gx_[k];
        }
        xlines_.emplace_back(lo, di, up);
    }
    ylines_.reserve(static_cast<std::size_t>(Mx));
    for (Eigen::Index i = 0; i < Mx; ++i) {
        Vec lo(My), di(My), up(My);
        for (Eigen::Index j = 0; j < My; ++j) {
            const Eigen::Index k = grid.index(i, j);
            lo[j] = -ay_[k];
            di[j] = 1.0 + by_[k];
            up[j] = -gy_[k];
        }
        ylines_.emplace_back(lo, di, up);
    }
}

void AdiSolver2D::explicit_parts(const Vec& u, Vec& hx, Vec& hy, Vec& hxy, bool parallel) const {
    const Eigen::Index Mx = grid_.gx.M, My = grid_.gy.M;
#pragma omp parallel for if (parallel) schedule(static)
    for (Eigen::Index j = 0; j < My; ++j) {
        const Eigen::Index jp = grid_.gy.wrap(j + 1), jm = grid_.gy.wrap(j - 1);
        for (Eigen::Index i = 0; i < Mx; ++i) {
            const Eigen::Index ip = grid_.gx.wrap(i + 1), im = grid_.gx.wrap(i - 1);
            const Eigen::Index k = i + Mx * j;
            hx[k] = gx_[k] * u[ip + Mx * j] - bx_[k] * u[k] + ax_[k] * u[im + Mx * j];
            hy[k] = gy_[k] * u[i + Mx * jp] - by_[k] * u[k] + ay_[k] * u[i + Mx * jm];
            const Eigen::Index pp = ip + Mx * jp, pm = ip + Mx * jm, mp = im + Mx * jp, mm = im + Mx * jm;
            hxy[k] = cxy_[pp] * u[pp] - cxy_[pm] * u[pm] - cxy_[mp] * u[mp] + cxy_[mm] * u[mm];
        }
    }
}

void AdiSolver2D::step(Vec& u, bool parallel) const {
    const Eigen::Index Mx = grid_.gx.M, My = grid_.gy.M, n = grid_.size();
    Vec hx(n), hy(n), hxy(n);
    explicit_parts(u, hx, hy, hxy, parallel);
    // Y0 = U + dt F(U); the x-sweep right-hand side is Y0 - dt/2 Lx U
    Vec y = u + hx + 2.0 * hy + hxy;
#pragma omp parallel for if (parallel) schedule(static)
    for (Eigen::Index j = 0; j < My; ++j) xlines_[static_cast<std::size_t>(j)].solve(y.data() + Mx * j);
    y -= hy;
#pragma omp parallel if (parallel)
    {
        std::vector<double> line(static_cast<std::size_t>(My));
#pragma omp for schedule(static)
        for (Eigen::Index i = 0; i < Mx; ++i) {
            for (Eigen::Index j = 0; j < My; ++j) line[static_cast<std::size_t>(j)] = y[i + Mx * j];
            ylines_[static_cast<std::size_t>(i)].solve(line.data());
            for (Eigen::Index j = 0; j < My; ++j) u[i + Mx * j] = line[static_cast<std::size_t>(j)];
        }
    }
}

PdeSolution adi_solve_2d(const Grid2D& grid, const Vec& b_x, const Vec& b_y, const Vec& s2x, const Vec& s2y,
                         const Vec& sxy, const Vec& u0, double dt, Eigen::Index Mt, Eigen::Index keep_every,
                         bool parallel) {
    if (u0.size() != grid.size()) throw InvalidArgument("adi_solve_2d: initial condition does not match the grid");
    if (Mt < 0) throw InvalidArgument("adi_solve_2d: negative step count");
    check_density(u0, grid.cell_area(), "adi_solve_2d");
    const AdiSolver2D solver(grid, b_x, b_y, s2x, s2y, sxy, dt);
    PdeSolution sol;
    sol.dt = dt;
    sol.min_value = u0.minCoeff();
    Vec u = u0;
    auto keep = [&](Eigen::Index n) {
        sol.times.push_back(static_cast<double>(n) * dt);
        sol.u.push_back(u);
        sol.mass.push_back(u.sum() * grid.cell_area());
    };
    keep(0);
    for (Eigen::Index n = 1; n <= Mt; ++n) {
        solver.step(u, parallel);
        track(sol, u, n);
        if ((keep_every > 0 && n % keep_every == 0) || (n == Mt && (keep_every <= 0 || n % keep_every != 0))) keep(n);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Initial conditions and model fields

namespace {

InitialCondition finish_ic(Vec u, double cell) {
    InitialCondition ic;
    const double mass = u.sum() * cell;
    ic.mass_error = mass - 1.0;
    if (!(std::abs(ic.mass_error) <= 1e-2)) {
        throw InvalidArgument("initial condition mass is off by " + std::to_string(ic.mass_error) +
                              "; use a larger sigma0 or a finer grid");
    }
    ic.warning = std::abs(ic.mass_error) > 1e-4;
    ic.u = u / mass;
    return ic;
}

}  // namespace

InitialCondition initial_condition(double theta0, double sigma0, const Grid1D& grid) {
    if (!(sigma0 > 0.0)) throw InvalidArgument("initial condition: sigma0 must be > 0");
    const Vec mu = Vec::Constant(1, cmod(theta0));
    const Mat cov = Mat::Constant(1, 1, sigma0 * sigma0);
    Vec u(grid.M), x(1);
    for (Eigen::Index i = 0; i < grid.M; ++i) {
        x[0] = grid.x(i);
        u[i] = std::exp(wn_logpdf(x, mu, cov));
    }
    return finish_ic(std::move(u), grid.dx);
}

InitialCondition initial_condition(const Vec& theta0, double sigma0, const Grid2D& grid) {
    if (theta0.size() != 2) throw InvalidArgument("initial condition: 2D grid needs a 2D point");
    if (!(sigma0 > 0.0)) throw InvalidArgument("initial condition: sigma0 must be > 0");
    // WN(theta0, sigma0^2 I) factorizes over the coordinates
    const InitialCondition ux = initial_condition(theta0[0], sigma0, grid.gx);
    const InitialCondition uy = initial_condition(theta0[1], sigma0, grid.gy);
    const double mx = (1.0 + ux.mass_error), my = (1.0 + uy.mass_error);
    Vec u(grid.size());
    for (Eigen::Index j = 0; j < grid.gy.M; ++j) {
        for (Eigen::Index i = 0; i < grid.gx.M; ++i) u[grid.index(i, j)] = ux.u[i] * mx * uy.u[j] * my;
    }
    return finish_ic(std::move(u), grid.cell_area());
}

Vec drift_nodes_1d(const DiffusionModel& model, const Grid1D& grid) {
    if (model.dim() != 1) throw InvalidArgument("pde: model dimension must be 1");
    if (!model.periodic()) throw InvalidArgument("pde: the model drift is not periodic");
    Vec b(grid.M), x(1);
    for (Eigen::Index i = 0; i < grid.M; ++i) {
        x[0] = grid.x(i);
        b[i] = model.drift(x)[0];
    }
    return b;
}

void drift_nodes_2d(const DiffusionModel& model, const Grid2D& grid, Vec& b_x, Vec& b_y) {
    if (model.dim() != 2) throw InvalidArgument("pde: model dimension must be 2");
    if (!model.periodic()) throw InvalidArgument("pde: the model drift is not periodic");
    b_x.resize(grid.size());
    b_y.resize(grid.size());
    Vec x(2);
    for (Eigen::Index j = 0; j < grid.gy.M; ++j) {
        for (Eigen::Index i = 0; i < grid.gx.M; ++i) {
            x << grid.gx.x(i), grid.gy.x(j);
            const Vec b = model.drift(x);
            b_x[grid.index(i, j)] = b[0];
            b_y[grid.index(i, j)] = b[1];
        }
    }
}

// ---------------------------------------------------------------------------
// tpd matrix

namespace {

// Reflection x -> 2 mu - x as a node map, when it maps nodes onto nodes.
std::optional<Eigen::Index> reflection_offset(double mu, const Grid1D& g) {
    const double c = 2.0 * (mu + kPi) / g.dx;
    const double r = std::round(c);
    if (std::abs(c - r) > 1e-9) return std::nullopt;
    return static_cast<Eigen::Index>(r);
}

// Columns to solve and the reflected columns to fill.
void plan_columns(Eigen::Index n, const std::vector<Eigen::Index>& wanted, const std::function<Eigen::Index(Eigen::Index)>* R,
                  std::vector<Eigen::Index>& solve, std::vector<std::pair<Eigen::Index, Eigen::Index>>& fill) {
    std::set<Eigen::Index> want;
    if (wanted.empty()) {
        for (Eigen::Index j = 0; j < n; ++j) want.insert(j);
    } else {
        for (Eigen::Index j : wanted) {
            if (j < 0 || j >= n) throw InvalidArgument("tpd_matrix: column index out of range");
            want.insert(j);
        }
    }
    std::set<Eigen::Index> s;
    for (Eigen::Index j : want) {
        if (R) {
            const Eigen::Index rj = (*R)(j);
            const Eigen::Index rep = std::min(j, rj);
            s.insert(rep);
            if (j != rep) fill.emplace_back(j, rep);
        } else {
            s.insert(j);
        }
    }
    solve.assign(s.begin(), s.end());
}

}  // namespace

TpdMatrix tpd_matrix(const DiffusionModel& model, double delta, const Grid1D& grid, const PdeOptions& opt,
                     const std::vector<Eigen::Index>& columns) {
    const Vec b = drift_nodes_1d(model, grid);
    const Vec s2 = Vec::Constant(grid.M, model.diffusion()(0, 0));
    const Eigen::Index Mt = pde_steps(delta, opt.dt_target);
    const CnSolver1D solver(b, s2, grid.dx, delta / static_cast<double>(Mt));
    // every initial condition is a rotation of the one at node 0
    const Vec base = initial_condition(grid.x(0), opt.sigma0, grid).u;

    TpdMatrix P;
    P.n = grid.M;
    P.sigma0 = opt.sigma0;
    P.delta = delta;
    P.cols.assign(static_cast<std::size_t>(grid.M), Vec());

    std::optional<Eigen::Index> off;
    if (opt.symmetry && model.antisymmetric()) off = reflection_offset(model.center()[0], grid);
    std::function<Eigen::Index(Eigen::Index)> R = [&](Eigen::Index i) { return grid.wrap(*off - i); };
    std::vector<Eigen::Index> todo;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> fill;
    plan_columns(grid.M, columns, off ? &R : nullptr, todo, fill);

    const auto ntodo = static_cast<Eigen::Index>(todo.size());
    bool failed = false;
    std::string err;
#pragma omp parallel if (opt.parallel)
    {
        Vec u(grid.M), scratch(grid.M);
#pragma omp for schedule(dynamic)
        for (Eigen::Index c = 0; c < ntodo; ++c) {
            const Eigen::Index j = todo[static_cast<std::size_t>(c)];
            for (Eigen::Index i = 0; i < grid.M; ++i) u[i] = base[grid.wrap(i - j)];
            try {
                for (Eigen::Index n = 1; n <= Mt; ++n) {
                    solver.step(u.data(), scratch.data());
                }
                if (u.minCoeff() < kUndershootError || !u.allFinite()) throw NumericalError("tpd_matrix: negative undershoot");
            } catch (const std::exception& e) {
#pragma omp critical
                {
                    failed = true;
                    err = e.what();
                }
            }
            P.cols[static_cast<std::size_t>(j)] = u;
        }
    }
    if (failed) throw NumericalError(err);
    for (const auto& [j, rep] : fill) {
        Vec col(grid.M);
        const Vec& src = P.cols[static_cast<std::size_t>(rep)];
        for (Eigen::Index i = 0; i < grid.M; ++i) col[i] = src[R(i)];
        P.cols[static_cast<std::size_t>(j)] = std::move(col);
    }
    return P;
}

TpdMatrix tpd_matrix(const DiffusionModel& model, double delta, const Grid2D& grid, const PdeOptions& opt,
                     const std::vector<Eigen::Index>& columns) {
    Vec bx, by;
    drift_nodes_2d(model, grid, bx, by);
    const Mat& V = model.diffusion();
    const Eigen::Index n = grid.size();
    const Eigen::Index Mt = pde_steps(delta, opt.dt_target);
    const AdiSolver2D solver(grid, bx, by, Vec::Constant(n, V(0, 0)), Vec::Constant(n, V(1, 1)),
                             Vec::Constant(n, V(0, 1)), delta / static_cast<double>(Mt));
    Vec origin(2);
    origin << grid.gx.x(0), grid.gy.x(0);
    const Vec base = initial_condition(origin, opt.sigma0, grid).u;

    TpdMatrix P;
    P.n = n;
    P.sigma0 = opt.sigma0;
    P.delta = delta;
    P.cols.assign(static_cast<std::size_t>(n), Vec());

    std::optional<Eigen::Index> ox, oy;
    if (opt.symmetry && model.antisymmetric()) {
        const Vec c = model.center();
        ox = reflection_offset(c[0], grid.gx);
        oy = reflection_offset(c[1], grid.gy);
    }
    const bool sym = ox && oy;
    std::function<Eigen::Index(Eigen::Index)> R = [&](Eigen::Index k) {
        const Eigen::Index i = k % grid.gx.M, j = k / grid.gx.M;
        return grid.index(grid.gx.wrap(*ox - i), grid.gy.wrap(*oy - j));
    };
    std::vector<Eigen::Index> todo;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> fill;
    plan_columns(n, columns, sym ? &R : nullptr, todo, fill);

    // columns run in sequence; each ADI step is parallel over lines
    Vec u(n);
    for (Eigen::Index c : todo) {
        const Eigen::Index a = c % grid.gx.M, bb = c / grid.gx.M;
        for (Eigen::Index j = 0; j < grid.gy.M; ++j) {
            for (Eigen::Index i = 0; i < grid.gx.M; ++i) {
                u[grid.index(i, j)] = base[grid.index(grid.gx.wrap(i - a), grid.gy.wrap(j - bb))];
            }
        }
        for (Eigen::Index s = 1; s <= Mt; ++s) solver.step(u, opt.parallel);
        if (u.minCoeff() < kUndershootError || !u.allFinite()) throw NumericalError("tpd_matrix: negative undershoot");
        P.cols[static_cast<std::size_t>(c)] = u;
    }
    for (const auto& [j, rep] : fill) {
        Vec col(n);
        const Vec& src = P.cols[static_cast<std::size_t>(rep)];
        for (Eigen::Index k = 0; k < n; ++k) col[k] = src[R(k)];
        P.cols[static_cast<std::size_t>(j)] = std::move(col);
    }
    return P;
}

// ---------------------------------------------------------------------------
// Likelihood

namespace {

constexpr double kDensityFloor = 1e-300;

struct Stencil {
    Eigen::Index idx[4];
    double w[4];
    int n;
};

Stencil stencil_1d(double theta, const Grid1D& g, Interpolation interp) {
    const InterpWeights iw = interp_weights(theta, g);
    Stencil s{};
    if (interp == Interpolation::constant) {
        s.n = 1;
        s.idx[0] = iw.w0 >= 0.5 ? iw.g : g.wrap(iw.g + 1);
        s.w[0] = 1.0;
        return s;
    }
    s.n = 2;
    s.idx[0] = iw.g;
    s.w[0] = iw.w0;
    s.idx[1] = g.wrap(iw.g + 1);
    s.w[1] = 1.0 - iw.w0;
    return s;
}

Stencil stencil_2d(const Vec& theta, const Grid2D& g, Interpolation interp) {
    const Stencil sx = stencil_1d(theta[0], g.gx, interp), sy = stencil_1d(theta[1], g.gy, interp);
    Stencil s{};
    s.n = 0;
    for (int b = 0; b < sy.n; ++b) {
        for (int a = 0; a < sx.n; ++a) {
            s.idx[s.n] = g.index(sx.idx[a], sy.idx[b]);
            s.w[s.n] = sx.w[a] * sy.w[b];
            ++s.n;
        }
    }
    return s;
}

}  // namespace

LoglikResult loglik_pde(const Trajectory& traj, const DiffusionModel& model, const LoglikOptions& opt) {
    traj.validate();
    const Eigen::Index p = traj.dim();
    if (p != model.dim()) throw InvalidArgument("loglik_pde: trajectory and model dimensions differ");
    if (p > 2) throw InvalidArgument("loglik_pde: only p <= 2 is supported");
    const Eigen::Index N = traj.size();

    std::vector<Stencil> st(static_cast<std::size_t>(N));
    std::optional<Grid1D> g1;
    std::optional<Grid2D> g2;
    if (p == 1) {
        g1.emplace(opt.Mx);
    } else {
        g2.emplace(opt.Mxy, opt.Mxy);
    }
    std::set<Eigen::Index> needed;
    for (Eigen::Index i = 0; i < N; ++i) {
        const Interpolation it = Interpolation::bilinear;
        st[static_cast<std::size_t>(i)] = p == 1 ? stencil_1d(traj.points(i, 0), *g1, it)
                                                 : stencil_2d(traj.point(i), *g2, it);
    }
    // conditioning points may use constant interpolation
    std::vector<Stencil> cond(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i + 1 < N; ++i) {
        cond[static_cast<std::size_t>(i)] = p == 1 ? stencil_1d(traj.points(i, 0), *g1, opt.interp)
                                                   : stencil_2d(traj.point(i), *g2, opt.interp);
        const Stencil& c = cond[static_cast<std::size_t>(i)];
        for (int k = 0; k < c.n; ++k) needed.insert(c.idx[k]);
    }
    const std::vector<Eigen::Index> cols(needed.begin(), needed.end());
    const TpdMatrix P = p == 1 ? tpd_matrix(model, traj.delta, *g1, opt.pde, cols)
                               : tpd_matrix(model, traj.delta, *g2, opt.pde, cols);

    LoglikResult res;
    std::string bad;
    for (Eigen::Index i = 1; i < N; ++i) {
        const Stencil& to = st[static_cast<std::size_t>(i)];
        const Stencil& from = cond[static_cast<std::size_t>(i - 1)];
        double d = 0.0;
        for (int b = 0; b < from.n; ++b) {
            for (int a = 0; a < to.n; ++a) d += from.w[b] * to.w[a] * P(to.idx[a], from.idx[b]);
        }
        if (!std::isfinite(d)) {
            if (bad.size() < 200) bad += " " + std::to_string(i);
            continue;
        }
        if (d < kDensityFloor) {
            d = kDensityFloor;
            ++res.floored;
        }
        res.value += std::log(d);
    }
    if (!bad.empty()) throw NumericalError("loglik_pde: non-finite transition densities at" + bad);
    if (opt.include_initial) res.value += model.stationary_log_density(traj.point(0));
    return res;
}

// ---------------------------------------------------------------------------
// Export

void write_pde_csv(const PdeSolution& sol, const Grid1D& grid, std::ostream& out) {
    out << "t,x,u\n";
    char buf[96];
    for (std::size_t s = 0; s < sol.u.size(); ++s) {
        for (Eigen::Index i = 0; i < grid.M; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", sol.times[s], grid.x(i), sol.u[s][i]);
            out << buf;
        }
    }
}

void write_pde_csv(const PdeSolution& sol, const Grid2D& grid, std::ostream& out) {
    out << "t,x,y,u\n";
    char buf[128];
    for (std::size_t s = 0; s < sol.u.size(); ++s) {
        for (Eigen::Index j = 0; j < grid.gy.M; ++j) {
            for (Eigen::Index i = 0; i < grid.gx.M; ++i) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", sol.times[s], grid.gx.x(i), grid.gy.x(j),
                              sol.u[s][grid.index(i, j)]);
                out << buf;
            }
        }
    }
}

void write_tpd_csv(const TpdMatrix& P, const Grid1D& grid, std::ostream& out) {
    char buf[32];
    out << "x";
    for (Eigen::Index j = 0; j < P.n; ++j) {
        if (!P.has(j)) continue;
        std::snprintf(buf, sizeof buf, ",%.17g", grid.x(j));
        out << buf;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < P.n; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", grid.x(i));
        out << buf;
        for (Eigen::Index j = 0; j < P.n; ++j) {
            if (!P.has(j)) continue;
            std::snprintf(buf, sizeof buf, ",%.17g", P(i, j));
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace tdiff
