#pragma once

#include <cmath>
#include <random>

#include "tdiff/torus.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline tdiff::Vec uniform_angles(std::mt19937_64& rng, Eigen::Index p) {
    std::uniform_real_distribution<double> u(-tdiff::kPi, tdiff::kPi);
    tdiff::Vec v(p);
    for (Eigen::Index i = 0; i < p; ++i) v[i] = u(rng);
    return v;
}

inline double gauss_pdf(double x, double var) {
    return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * tdiff::kPi * var);
}

/// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace testutil
