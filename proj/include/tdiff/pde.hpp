#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tdiff/models.hpp"
#include "tdiff/simulate.hpp"
#include "tdiff/tridiagonal.hpp"

namespace tdiff {

/// Periodic grid x_i = -pi + i dx, i = 0..M-1, dx = 2pi / M.
struct Grid1D {
    Eigen::Index M = 0;
    double dx = 0.0;

    explicit Grid1D(Eigen::Index m = 500);
    double x(Eigen::Index i) const noexcept { return -kPi + static_cast<double>(i) * dx; }
    Vec nodes() const;
    Eigen::Index wrap(Eigen::Index i) const noexcept { return ((i % M) + M) % M; }
    /// floor((theta + pi) / dx) mod M; points within 1e-9 dx of a node snap to it.
    Eigen::Index cell(double theta) const noexcept;
};

/// Linear interpolation between nodes g and g + 1 (mod M): weight w0 on g, 1 - w0 on g + 1.
struct InterpWeights {
    Eigen::Index g = 0;
    double w0 = 1.0;
};
InterpWeights interp_weights(double theta, const Grid1D& grid);

/// Tensor grid; node (i, j) is stored at i + Mx j.
struct Grid2D {
    Grid1D gx, gy;

    Grid2D(Eigen::Index mx = 120, Eigen::Index my = 120) : gx(mx), gy(my) {}
    Eigen::Index size() const noexcept { return gx.M * gy.M; }
    Eigen::Index index(Eigen::Index i, Eigen::Index j) const noexcept { return i + gx.M * j; }
    double cell_area() const noexcept { return gx.dx * gy.dx; }
};

/// Snapshots of the grid density. Node values of a 2D solution follow Grid2D::index.
struct PdeSolution {
    std::vector<double> times;
    std::vector<Vec> u;
    double dt = 0.0;
    double min_value = 0.0;         ///< smallest node value seen over all steps
    bool undershoot_warning = false;  ///< some value fell below -1e-12
    std::vector<double> mass;       ///< mass of each stored snapshot
};

inline constexpr double kUndershootWarn = -1e-12;
inline constexpr double kUndershootError = -1e-6;

/// Crank–Nicolson stepper for u_t = -(b u)_x + (sigma2 u)_xx / 2 on a periodic grid.
/// The factorization is built once and shared read-only.
class CnSolver1D {
public:
    CnSolver1D(const Vec& b_nodes, const Vec& sigma2_nodes, double dx, double dt);
    /// One step in place; `scratch` must hold M doubles.
    void step(double* u, double* scratch) const;
    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(gam_.size()); }
    double dt() const noexcept { return dt_; }

private:
    double dt_;
    std::vector<double> gam_, beta2_, alp_;
    CyclicTridiagonal lhs_;
};

/// Advances u0 by Mt CN steps. keep_every = k stores every k-th step (0: initial and final only).
PdeSolution cn_solve_1d(const Vec& b_nodes, const Vec& sigma2_nodes, const Vec& u0, double dt, Eigen::Index Mt,
                        Eigen::Index keep_every = 0);

/// Douglas ADI stepper: explicit full step (including the mixed derivative) followed by
/// implicit CN corrections along x and then y.
class AdiSolver2D {
public:
    AdiSolver2D(const Grid2D& grid, const Vec& b_x, const Vec& b_y, const Vec& sigma2_x, const Vec& sigma2_y,
                const Vec& sigma_xy, double dt);
    /// One step in place. parallel = false runs the serial reference path.
    void step(Vec& u, bool parallel = true) const;
    const Grid2D& grid() const noexcept { return grid_; }
    double dt() const noexcept { return dt_; }

private:
    void explicit_parts(const Vec& u, Vec& lx, Vec& ly, Vec& lxy, bool parallel) const;

    Grid2D grid_;
    double dt_;
    Vec gx_, bx_, ax_;  // half-step x stencil: gx u(i+1) - bx u(i) + ax u(i-1), bx = 2 beta
    Vec gy_, by_, ay_;
    Vec cxy_;           // 2 r_xy sigma_xy at nodes
    std::vector<CyclicTridiagonal> xlines_;  // one per j
    std::vector<CyclicTridiagonal> ylines_;  // one per i
};

PdeSolution adi_solve_2d(const Grid2D& grid, const Vec& b_x, const Vec& b_y, const Vec& sigma2_x, const Vec& sigma2_y,
                         const Vec& sigma_xy, const Vec& u0, double dt, Eigen::Index Mt, Eigen::Index keep_every = 0,
                         bool parallel = true);

struct InitialCondition {
    Vec u;
    double mass_error = 0.0;  ///< trapezoid mass minus 1, before renormalization
    bool warning = false;     ///< |mass_error| > 1e-4
};

/// Discretized WN(theta0, sigma0^2 I) renormalized to unit trapezoid mass.
/// Mass deviation above 1e-2 is rejected.
InitialCondition initial_condition(double theta0, double sigma0, const Grid1D& grid);
InitialCondition initial_condition(const Vec& theta0, double sigma0, const Grid2D& grid);

/// Node fields of a model; throws for the non-periodic OU family.
Vec drift_nodes_1d(const DiffusionModel& model, const Grid1D& grid);
void drift_nodes_2d(const DiffusionModel& model, const Grid2D& grid, Vec& b_x, Vec& b_y);

/// Time step count for a lag: ceil(delta / dt_target).
Eigen::Index pde_steps(double delta, double dt_target);

/// Dense tpd matrix (1D) or a column subset (2D). Column j is the density at lag delta
/// started from WN(x_j, sigma0^2 I); entries are indexed like the grid.
struct TpdMatrix {
    Eigen::Index n = 0;
    double sigma0 = 0.1;
    double delta = 0.0;
    std::vector<Vec> cols;  ///< empty Vec when not computed

    bool has(Eigen::Index j) const { return cols[static_cast<std::size_t>(j)].size() > 0; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return cols[static_cast<std::size_t>(j)][i]; }
};

struct PdeOptions {
    double sigma0 = 0.1;
    double dt_target = 0.01;
    bool symmetry = true;
    bool parallel = true;
};

/// columns: indices to compute (empty = all). With symmetry on and a drift antisymmetric about mu
/// whose reflection x -> 2 mu - x maps nodes to nodes, half the columns are filled by
/// P(i, R(j)) = P(R(i), j).
TpdMatrix tpd_matrix(const DiffusionModel& model, double delta, const Grid1D& grid, const PdeOptions& opt,
                     const std::vector<Eigen::Index>& columns = {});
TpdMatrix tpd_matrix(const DiffusionModel& model, double delta, const Grid2D& grid, const PdeOptions& opt,
                     const std::vector<Eigen::Index>& columns);

enum class Interpolation { bilinear, constant };

struct LoglikOptions {
    PdeOptions pde;
    Interpolation interp = Interpolation::bilinear;
    bool include_initial = true;  ///< add log of the stationary density at the first point
    Eigen::Index Mx = 500;        ///< 1D grid size
    Eigen::Index Mxy = 120;       ///< 2D grid size per axis
};

struct LoglikResult {
    double value = 0.0;
    Eigen::Index floored = 0;  ///< transitions whose density was floored at 1e-300
};

LoglikResult loglik_pde(const Trajectory& traj, const DiffusionModel& model, const LoglikOptions& opt = {});

/// Rows (t, x[, y], u).
void write_pde_csv(const PdeSolution& sol, const Grid1D& grid, std::ostream& out);
void write_pde_csv(const PdeSolution& sol, const Grid2D& grid, std::ostream& out);
/// Header row of source nodes, one row per target node.
void write_tpd_csv(const TpdMatrix& P, const Grid1D& grid, std::ostream& out);

}  // namespace tdiff
