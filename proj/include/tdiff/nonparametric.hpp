#pragma once

#include <vector>

#include "tdiff/models.hpp"
#include "tdiff/simulate.hpp"

namespace tdiff {

/// Nadaraya–Watson weights W_h(theta, Theta_i) proportional to exp(sum_c cos(theta_c - Theta_ic) / h^2)
/// over the rows of `covariates`; they sum to one.
Vec np_weights(const Vec& theta, const Mat& covariates, double h);

struct NpEstimate {
    Mat points;  ///< evaluation points, one per row
    Mat values;  ///< one column per response component
    Vec h;       ///< bandwidth used for each response component
    Eigen::Index nan_nodes = 0;  ///< evaluation points flagged NaN
};

/// Kernel regression of responses (n x q) on covariates (n x p). Column c uses bandwidth h[c].
NpEstimate np_regress(const Mat& covariates, const Mat& responses, const Vec& h, const Mat& eval);

/// Drift from Y_i = cmod(Theta_{i+1} - Theta_i) / delta.
NpEstimate np_drift(const Trajectory& traj, const Vec& h, const Mat& eval);
/// Square root of the regression of cmod(Theta_{i+1} - Theta_i)^2 / delta, per coordinate.
NpEstimate np_diff(const Trajectory& traj, const Vec& h, const Mat& eval);
/// The same smoother applied to Y_i = b(Theta_i) of a fitted model.
NpEstimate smooth_parametric(const Trajectory& traj, const DiffusionModel& model, const Vec& h, const Mat& eval);

/// Product von Mises kernel density estimate with concentration 1 / h^2.
Vec np_kde(const Mat& sample, double h, const Mat& eval);

enum class NpTarget { drift, diff };

struct CvResult {
    Vec h;                       ///< selected bandwidth per response component
    Vec grid;                    ///< candidate bandwidths
    Mat scores;                  ///< leave-one-out squared error, grid x component
    std::vector<bool> degenerate;  ///< flat or non-finite curve; the grid midpoint was returned
};

/// Leave-one-out CV over `grid_size` log-spaced bandwidths in [h_min, h_max]. Ties go to the larger h.
CvResult cv_bandwidth(const Trajectory& traj, NpTarget target, int grid_size = 30, double h_min = 0.05,
                      double h_max = 2.0);
/// The same selection for arbitrary covariates and responses.
CvResult cv_bandwidth(const Mat& covariates, const Mat& responses, int grid_size = 30, double h_min = 0.05,
                      double h_max = 2.0);

/// Regular evaluation grid on [-pi, pi)^p with n points per axis (first coordinate fastest).
Mat torus_grid(Eigen::Index p, Eigen::Index n);

}  // namespace tdiff
