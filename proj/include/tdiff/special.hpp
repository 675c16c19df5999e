#pragma once

namespace tdiff {

/// Power-series / asymptotic switchover point for the Bessel functions.
inline constexpr double kBesselSwitch = 15.0;

/// Modified Bessel functions of the first kind, orders 0 and 1, for x >= 0.
double bessel_i0(double x);
double bessel_i1(double x);

/// Exponentially scaled versions e^{-x} I_nu(x); finite for all x >= 0.
double bessel_i0e(double x);
double bessel_i1e(double x);

/// log I_0(x) without overflow.
double log_bessel_i0(double x);

/// Mean resultant length of a von Mises: A_1(k) = I_1(k) / I_0(k).
double a1_ratio(double kappa);

/// Derivative of A_1.
double a1_derivative(double kappa);

struct A1Inverse {
    double kappa = 0.0;
    /// Set when the target was so close to 1 that kappa was capped.
    bool capped = false;
};

inline constexpr double kKappaCap = 1e8;

/// Solves A_1(kappa) = rho for rho in [0, 1) by safeguarded Newton to 1e-10.
A1Inverse a1_inverse(double rho);

/// Standard normal cdf and upper-tail quantile helpers.
double normal_cdf(double x);
/// Inverse of the standard normal cdf (Wichura AS241).
double normal_quantile(double p);

}  // namespace tdiff
