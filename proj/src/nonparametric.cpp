#include "tdiff/nonparametric.hpp"

#include <cmath>
#include <limits>

#include "tdiff/errors.hpp"
#include "tdiff/special.hpp"

namespace tdiff {

namespace {

void check_h(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("bandwidth must be positive and finite");
}

// Log kernel sums sum_c cos(theta_c - X_ic) for all rows i.
Vec cos_sums(const Vec& theta, const Mat& X) {
    Vec s = Vec::Zero(X.rows());
    for (Eigen::Index c = 0; c < X.cols(); ++c) s.array() += (theta[c] - X.col(c).array()).cos();
    return s;
}

Mat increments(const Trajectory& traj) {
    if (traj.size() < 2) throw InvalidArgument("need at least two observations");
    const Eigen::Index n = traj.size() - 1;
    Mat d(n, traj.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < traj.dim(); ++c) d(i, c) = cmod(traj.points(i + 1, c) - traj.points(i, c));
    }
    return d;
}

}  // namespace

Vec np_weights(const Vec& theta, const Mat& covariates, double h) {
    check_h(h);
    if (theta.size() != covariates.cols()) throw InvalidArgument("np_weights: dimension mismatch");
    if (covariates.rows() == 0) throw InvalidArgument("np_weights: no covariates");
    const Vec s = cos_sums(theta, covariates);
    Vec w = ((s.array() - s.maxCoeff()) / (h * h)).exp().matrix();
    return w / w.sum();
}

NpEstimate np_regress(const Mat& X, const Mat& Y, const Vec& h, const Mat& eval) {
    if (X.rows() != Y.rows()) throw InvalidArgument("np_regress: covariates and responses differ in length");
    if (h.size() != Y.cols()) throw InvalidArgument("np_regress: one bandwidth per response component");
    if (eval.cols() != X.cols()) throw InvalidArgument("np_regress: evaluation points have the wrong dimension");
    for (Eigen::Index c = 0; c < h.size(); ++c) check_h(h[c]);
    NpEstimate out;
    out.points = eval;
    out.h = h;
    out.values.resize(eval.rows(), Y.cols());
    for (Eigen::Index e = 0; e < eval.rows(); ++e) {
        const Vec s = cos_sums(eval.row(e).transpose(), X);
        const double smax = s.maxCoeff();
        bool bad = false;
        for (Eigen::Index c = 0; c < Y.cols(); ++c) {
            const Vec w = ((s.array() - smax) / (h[c] * h[c])).exp().matrix();
            const double tot = w.sum();
            const double v = tot > 0.0 ? w.dot(Y.col(c)) / tot : std::numeric_limits<double>::quiet_NaN();
            if (!std::isfinite(v)) bad = true;
            out.values(e, c) = std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
        }
        if (bad) ++out.nan_nodes;
    }
    return out;
}

NpEstimate np_drift(const Trajectory& traj, const Vec& h, const Mat& eval) {
    const Mat d = increments(traj);
    return np_regress(traj.points.topRows(d.rows()), d / traj.delta, h, eval);
}

NpEstimate np_diff(const Trajectory& traj, const Vec& h, const Mat& eval) {
    const Mat d = increments(traj);
    NpEstimate e = np_regress(traj.points.topRows(d.rows()), d.array().square().matrix() / traj.delta, h, eval);
    e.values = e.values.array().max(0.0).sqrt().matrix();
    return e;
}

NpEstimate smooth_parametric(const Trajectory& traj, const DiffusionModel& model, const Vec& h, const Mat& eval) {
    if (model.dim() != traj.dim()) throw InvalidArgument("smooth_parametric: dimension mismatch");
    const Eigen::Index n = traj.size() - 1;
    if (n < 1) throw InvalidArgument("need at least two observations");
    Mat Y(n, traj.dim());
    for (Eigen::Index i = 0; i < n; ++i) Y.row(i) = model.drift(traj.point(i)).transpose();
    return np_regress(traj.points.topRows(n), Y, h, eval);
}

Vec np_kde(const Mat& sample, double h, const Mat& eval) {
    check_h(h);
    if (sample.rows() == 0 || eval.cols() != sample.cols()) throw InvalidArgument("np_kde: bad shapes");
    const double kappa = 1.0 / (h * h);
    const double p = static_cast<double>(sample.cols());
    // log(2 pi I0(kappa)) with the scaled Bessel function
    const double log_norm = p * (std::log(kTwoPi * bessel_i0e(kappa)) + kappa);
    Vec out(eval.rows());
    for (Eigen::Index e = 0; e < eval.rows(); ++e) {
        const Vec s = cos_sums(eval.row(e).transpose(), sample);
        out[e] = (kappa * s.array() - log_norm).exp().mean();
    }
    return out;
}

CvResult cv_bandwidth(const Mat& X, const Mat& Y, int grid_size, double h_min, double h_max) {
    if (X.rows() != Y.rows()) throw InvalidArgument("cv_bandwidth: covariates and responses differ in length");
    if (X.rows() < 20) throw InvalidArgument("cv_bandwidth: need at least 20 observations");
    if (grid_size < 2 || !(h_min > 0.0) || !(h_max > h_min)) throw InvalidArgument("cv_bandwidth: bad grid");
    const Eigen::Index n = X.rows(), q = Y.cols();
    CvResult r;
    r.grid.resize(grid_size);
    for (int g = 0; g < grid_size; ++g) {
        r.grid[g] = h_min * std::pow(h_max / h_min, static_cast<double>(g) / (grid_size - 1));
    }
    r.scores = Mat::Zero(grid_size, q);
    // pairwise kernel exponents, one row at a time
    Vec s(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s = cos_sums(X.row(i).transpose(), X);
        s[i] = -std::numeric_limits<double>::infinity();
        const double smax = s.maxCoeff();
        for (int g = 0; g < grid_size; ++g) {
            const double h2 = r.grid[g] * r.grid[g];
            w = ((s.array() - smax) / h2).exp().matrix();
            const double tot = w.sum();
            for (Eigen::Index c = 0; c < q; ++c) {
                const double e = Y(i, c) - w.dot(Y.col(c)) / tot;
                r.scores(g, c) += e * e;
            }
        }
    }
    r.scores /= static_cast<double>(n);
    r.h.resize(q);
    r.degenerate.assign(static_cast<std::size_t>(q), false);
    for (Eigen::Index c = 0; c < q; ++c) {
        const auto col = r.scores.col(c);
        const double lo = col.minCoeff(), hi = col.maxCoeff();
        if (!col.allFinite() || hi - lo <= 1e-12 * std::max(std::abs(hi), 1e-300)) {
            r.h[c] = r.grid[grid_size / 2];
            r.degenerate[static_cast<std::size_t>(c)] = true;
            continue;
        }
        int best = grid_size - 1;
        for (int g = grid_size - 2; g >= 0; --g) {
            if (col[g] < col[best] - 1e-12 * std::abs(col[best])) best = g;
        }
        r.h[c] = r.grid[best];
    }
    return r;
}

CvResult cv_bandwidth(const Trajectory& traj, NpTarget target, int grid_size, double h_min, double h_max) {
    const Mat d = increments(traj);
    const Mat Y = target == NpTarget::drift ? Mat(d / traj.delta) : Mat(d.array().square().matrix() / traj.delta);
    return cv_bandwidth(traj.points.topRows(d.rows()), Y, grid_size, h_min, h_max);
}

Mat torus_grid(Eigen::Index p, Eigen::Index n) {
    if (p < 1 || p > 2 || n < 1) throw InvalidArgument("torus_grid: p must be 1 or 2 and n >= 1");
    const double dx = kTwoPi / static_cast<double>(n);
    if (p == 1) {
        Mat g(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) g(i, 0) = -kPi + static_cast<double>(i) * dx;
        return g;
    }
    Mat g(n * n, 2);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            g(i + n * j, 0) = -kPi + static_cast<double>(i) * dx;
            g(i + n * j, 1) = -kPi + static_cast<double>(j) * dx;
        }
    }
    return g;
}

}  // namespace tdiff
