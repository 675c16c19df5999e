#pragma once

#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace tdiff {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps x into [-pi, pi) using a floor-based remainder.
double cmod(double x);
Vec cmod(const Vec& x);

/// floor((x + pi) / 2pi), so that x = cmod(x) + 2pi * winding(x).
int winding(double x);
IVec winding(const Vec& x);

/// A point on the flat torus T^p; every coordinate lies in [-pi, pi).
class TorusPoint {
public:
    TorusPoint() = default;
    /// Wraps the given coordinates.
    explicit TorusPoint(const Vec& raw) : coords_(cmod(raw)) {}
    explicit TorusPoint(double angle) : coords_(Vec::Constant(1, cmod(angle))) {}

    const Vec& coords() const noexcept { return coords_; }
    operator const Vec&() const noexcept { return coords_; }

    Eigen::Index dim() const noexcept { return coords_.size(); }
    double operator[](Eigen::Index i) const { return coords_[i]; }

private:
    Vec coords_;
};

struct LatticeBox {
    IVec lower;
    IVec upper;

    /// The symmetric box {-r..r}^p.
    static LatticeBox symmetric(int dim, int radius);

    Eigen::Index dim() const noexcept { return lower.size(); }
    /// Number of lattice points; throws InvalidArgument when lower > upper.
    std::size_t volume() const;
};

inline constexpr std::size_t kDefaultLatticeCap = 1'000'000;

/// All integer vectors in the box in row-major order (last coordinate fastest).
/// Throws ResourceError when the box holds more than `cap` points.
std::vector<IVec> lattice_enumerate(const LatticeBox& box, std::size_t cap = kDefaultLatticeCap);

struct CircularMean {
    TorusPoint mean;
    /// True when some coordinate had a zero resultant; that coordinate is reported as 0.
    bool degenerate = false;
};

/// Componentwise atan2 of summed sines and cosines.
CircularMean circular_mean(const std::vector<TorusPoint>& sample);
CircularMean circular_mean(const Mat& rows);

}  // namespace tdiff
