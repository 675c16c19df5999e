#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>

#include "tdiff/models.hpp"

namespace tdiff {

/// Observations Theta_0, ..., Theta_N at spacing delta, stored one point per row.
struct Trajectory {
    Mat points;
    double delta = 1.0;
    std::optional<std::uint64_t> seed;

    Eigen::Index size() const noexcept { return points.rows(); }
    Eigen::Index dim() const noexcept { return points.cols(); }
    Vec point(Eigen::Index i) const { return points.row(i).transpose(); }
    /// Checks the invariants (wrapped points, delta > 0, at least two rows).
    void validate() const;
};

/// Standard normal variates by the Marsaglia polar method on a 64-bit Mersenne twister.
/// The output sequence depends only on the seed.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
    double next();
    void fill(Vec& z);

private:
    double uniform();
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Seed of replicate r in a Monte Carlo run with base seed `base`.
inline std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t r) { return base + r; }

using DriftFn = std::function<Vec(const Vec&)>;

/// Number of points produced for a horizon t_end with step dt.
Eigen::Index em_point_count(double t_end, double dt);

/// Wrapped Euler–Maruyama with constant diffusion factor `sigma_sqrt` (may be zero).
Trajectory euler_maruyama(const DriftFn& drift, const Mat& sigma_sqrt, const Vec& theta0, double t_end, double dt,
                          std::uint64_t seed);
Trajectory euler_maruyama(const DiffusionModel& model, const Vec& theta0, double t_end, double dt, std::uint64_t seed);

/// Keeps rows 0, stride, 2 stride, ...
Trajectory subsample(const Trajectory& traj, Eigen::Index stride);

/// CSV with header t,theta1[,theta2,...] at 17 significant digits.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
/// Reads a trajectory CSV; delta is taken from the first two time stamps.
Trajectory read_trajectory_csv(std::istream& in);
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace tdiff
