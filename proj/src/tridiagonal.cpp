#include "tdiff/tridiagonal.hpp"

#include <cmath>

#include "tdiff/errors.hpp"

namespace tdiff {

// A = T + u v' with u = (gamma, 0, ..., 0, beta)', v = (1, 0, ..., 0, alpha/gamma)'.
CyclicTridiagonal::CyclicTridiagonal(const Vec& lower, const Vec& diag, const Vec& upper) : n_(diag.size()) {
    if (n_ < 3 || lower.size() != n_ || upper.size() != n_) {
        throw InvalidArgument("cyclic tridiagonal: need n >= 3 and matching band sizes");
    }
    alpha_ = lower[0];
    beta_ = upper[n_ - 1];
    gamma_ = -diag[0];
    if (gamma_ == 0.0) gamma_ = -1.0;
    const auto n = static_cast<std::size_t>(n_);
    std::vector<double> d(diag.data(), diag.data() + n_);
    d[0] -= gamma_;
    d[n - 1] -= alpha_ * beta_ / gamma_;

    sub_.assign(lower.data(), lower.data() + n_);
    inv_.resize(n);
    cp_.resize(n);
    double piv = d[0];
    for (std::size_t i = 0;; ++i) {
        if (piv == 0.0 || !std::isfinite(piv)) {
            throw NumericalError("cyclic tridiagonal: zero pivot", static_cast<std::ptrdiff_t>(i));
        }
        inv_[i] = 1.0 / piv;
        if (i + 1 == n) break;
        cp_[i] = upper[static_cast<Eigen::Index>(i)] * inv_[i];
        piv = d[i + 1] - sub_[i + 1] * cp_[i];
    }

    z_.assign(n, 0.0);
    z_[0] = gamma_;
    z_[n - 1] = beta_;
    thomas(z_.data());
    const double vz = z_[0] + alpha_ / gamma_ * z_[n - 1];
    if (1.0 + vz == 0.0) throw NumericalError("cyclic tridiagonal: singular rank-one update");
    fact_ = 1.0 / (1.0 + vz);
}

void CyclicTridiagonal::thomas(double* x) const {
    const auto n = static_cast<std::size_t>(n_);
    x[0] *= inv_[0];
    for (std::size_t i = 1; i < n; ++i) x[i] = (x[i] - sub_[i] * x[i - 1]) * inv_[i];
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= cp_[i] * x[i + 1];
}

void CyclicTridiagonal::solve(double* rhs) const {
    thomas(rhs);
    const auto n = static_cast<std::size_t>(n_);
    const double vy = rhs[0] + alpha_ / gamma_ * rhs[n - 1];
    const double f = vy * fact_;
    for (std::size_t i = 0; i < n; ++i) rhs[i] -= f * z_[i];
}

Vec CyclicTridiagonal::solve(const Vec& rhs) const {
    if (rhs.size() != n_) throw InvalidArgument("cyclic tridiagonal: rhs size mismatch");
    Vec x = rhs;
    solve(x.data());
    return x;
}

Vec solve_periodic_tridiagonal(const Vec& diag, const Vec& upper, const Vec& lower, double corner_lowleft,
                               double corner_upright, const Vec& rhs) {
    const Eigen::Index n = diag.size();
    if (upper.size() < n - 1 || lower.size() < n - 1) throw InvalidArgument("periodic tridiagonal: band too short");
    // bands given as length n-1 (upper[i] = A(i, i+1), lower[i] = A(i+1, i)) or length n
    Vec lo(n), up(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        up[i] = upper[i];
        lo[i + 1] = lower.size() == n ? lower[i + 1] : lower[i];
    }
    lo[0] = corner_upright;
    up[n - 1] = corner_lowleft;
    return CyclicTridiagonal(lo, diag, up).solve(rhs);
}

}  // namespace tdiff
