#include "tdiff/special.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "tdiff/errors.hpp"
#include "tdiff/torus.hpp"

namespace tdiff {

namespace {

// sum_k (x/2)^{2k+nu} / (k! (k+nu)!), terms until negligible
double bessel_series(double x, int nu) {
    const double q = 0.25 * x * x;
    double term = nu == 0 ? 1.0 : 0.5 * x;
    double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * static_cast<double>(k + nu));
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

// e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(nu) / x^k
double bessel_asymptotic_scaled(double x, int nu) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0;
    double sum = 1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 60; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (k * 8.0 * x);
        if (std::abs(term) >= prev) break;  // divergent tail
        sum += term;
        prev = std::abs(term);
        if (prev < 1e-17 * std::abs(sum)) break;
    }
    return sum / std::sqrt(kTwoPi * x);
}

void check_arg(double x) {
    if (!(x >= 0.0) || std::isnan(x)) throw InvalidArgument("bessel: argument must be >= 0");
}

}  // namespace

double bessel_i0(double x) {
    check_arg(x);
    return x < kBesselSwitch ? bessel_series(x, 0) : std::exp(x) * bessel_asymptotic_scaled(x, 0);
}

double bessel_i1(double x) {
    check_arg(x);
    return x < kBesselSwitch ? bessel_series(x, 1) : std::exp(x) * bessel_asymptotic_scaled(x, 1);
}

double bessel_i0e(double x) {
    check_arg(x);
    return x < kBesselSwitch ? std::exp(-x) * bessel_series(x, 0) : bessel_asymptotic_scaled(x, 0);
}

double bessel_i1e(double x) {
    check_arg(x);
    return x < kBesselSwitch ? std::exp(-x) * bessel_series(x, 1) : bessel_asymptotic_scaled(x, 1);
}

double log_bessel_i0(double x) {
    check_arg(x);
    return x < kBesselSwitch ? std::log(bessel_series(x, 0))
                             : x + std::log(bessel_asymptotic_scaled(x, 0));
}

double a1_ratio(double kappa) {
    if (kappa == 0.0) return 0.0;
    return bessel_i1e(kappa) / bessel_i0e(kappa);
}

double a1_derivative(double kappa) {
    if (kappa == 0.0) return 0.5;
    const double a = a1_ratio(kappa);
    return 1.0 - a / kappa - a * a;
}

A1Inverse a1_inverse(double rho) {
    if (!(rho >= 0.0) || rho >= 1.0 || std::isnan(rho)) {
        if (rho >= 1.0) return {kKappaCap, true};
        throw InvalidArgument("a1_inverse: target must lie in [0, 1)");
    }
    if (rho == 0.0) return {0.0, false};
    if (a1_ratio(kKappaCap) <= rho) return {kKappaCap, true};

    // Bracket [lo, hi] and Newton steps that fall back to bisection.
    double lo = 0.0, hi = 1.0;
    while (a1_ratio(hi) < rho) {
        lo = hi;
        hi *= 2.0;
    }
    // Fisher's approximation as a starting point
    double k;
    if (rho < 0.53) {
        k = 2.0 * rho + rho * rho * rho + 5.0 * std::pow(rho, 5) / 6.0;
    } else if (rho < 0.85) {
        k = -0.4 + 1.39 * rho + 0.43 / (1.0 - rho);
    } else {
        k = 1.0 / (rho * rho * rho - 4.0 * rho * rho + 3.0 * rho);
    }
    if (!(k > lo && k < hi)) k = 0.5 * (lo + hi);

    for (int it = 0; it < 200; ++it) {
        const double f = a1_ratio(k) - rho;
        if (f > 0.0) hi = k; else lo = k;
        const double step = f / a1_derivative(k);
        double next = k - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - k) <= 1e-10 * std::max(1.0, k) || hi - lo <= 1e-12 * std::max(1.0, k)) {
            return {next, false};
        }
        k = next;
    }
    return {k, false};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must lie in (0, 1)");
    // Wichura (1988), Algorithm AS241 PPND16.
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

}  // namespace tdiff
