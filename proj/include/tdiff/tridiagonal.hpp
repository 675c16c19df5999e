#pragma once

#include <vector>

#include "tdiff/torus.hpp"

namespace tdiff {

/// Factorization of the cyclic tridiagonal system
///   lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = r[i]
/// with periodic wrap: lower[0] multiplies x[n-1] and upper[n-1] multiplies x[0].
/// Solved by Sherman–Morrison on top of a Thomas factorization computed once.
/// Immutable after construction; solve() may be called concurrently.
class CyclicTridiagonal {
public:
    CyclicTridiagonal() = default;
    CyclicTridiagonal(const Vec& lower, const Vec& diag, const Vec& upper);

    Eigen::Index size() const noexcept { return n_; }
    /// Solves in place.
    void solve(double* rhs) const;
    Vec solve(const Vec& rhs) const;

private:
    void thomas(double* x) const;  // solve the modified tridiagonal system in place

    Eigen::Index n_ = 0;
    double gamma_ = 0.0;
    double alpha_ = 0.0;  // lower[0]
    double beta_ = 0.0;   // upper[n-1]
    std::vector<double> sub_;   // subdiagonal of the modified matrix
    std::vector<double> inv_;   // 1 / pivot
    std::vector<double> cp_;    // modified superdiagonal c'_i
    std::vector<double> z_;     // solution of T z = u
    double fact_ = 0.0;         // 1 / (1 + v'z)
};

/// One-shot solve, with the corners given separately:
/// corner_lowleft multiplies x[0] in the last row, corner_upright multiplies x[n-1] in the first row.
Vec solve_periodic_tridiagonal(const Vec& diag, const Vec& upper, const Vec& lower, double corner_lowleft,
                               double corner_upright, const Vec& rhs);

}  // namespace tdiff
