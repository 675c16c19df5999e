#pragma once

#include <memory>
#include <string>

#include "tdiff/models.hpp"

namespace tdiff {

/// Transition-density approximations.
/// S: stationary density; E/UE: wrapped/unwrapped Euler; EvM: Euler with von Mises matching;
/// SO/USO/SOvM: Shoji–Ozaki analogues; WOU: wrapped OU (WN family only).
enum class TpdKind { S, E, UE, EvM, SO, USO, SOvM, WOU };

std::string to_string(TpdKind k);
TpdKind tpd_kind_from_string(const std::string& name);

struct SoMoments {
    Vec mean;
    Mat cov;
    bool euler_fallback = false;  ///< J was singular or badly conditioned
};

/// Condition number above which the Shoji–Ozaki moments revert to Euler moments.
inline constexpr double kSoConditionCap = 1e12;

/// Moments of the local linearization dX = (b + J (X - phi)) dt + V^{1/2} dW started at phi.
SoMoments so_moments(const Vec& phi, const Vec& b, const Mat& J, const Mat& V, double delta);
SoMoments so_moments(const DiffusionModel& model, const Vec& phi, double delta);

/// Euler pseudo-tpd. wrapped = false gives the plain Gaussian density of theta - phi - b delta.
double euler_tpd(const DiffusionModel& model, const Vec& theta, const Vec& phi, double delta, bool wrapped);
double so_tpd(const DiffusionModel& model, const Vec& theta, const Vec& phi, double delta, bool wrapped,
              bool vm_matched);

/// Coefficients of exp(tA) = a I + b A for a 2x2 matrix A.
struct Expm2Coeffs {
    double a = 1.0;
    double b = 0.0;
};
Expm2Coeffs expm2x2_coeffs(const Mat& A, double t);
Mat expm2x2(const Mat& A, double t);
/// exp(tA) for any square A (closed form for p <= 2).
Mat expm(const Mat& A, double t);

/// Covariance of the OU process at time t started from a point:
/// integral_0^t exp(-sA) Sigma exp(-sA') ds.
Mat gamma_t(const Mat& A, const Mat& sigma, double t);

struct WouParams {
    Vec mu;
    Mat A;
    Mat sigma;
    LatticeBox weight_box;  ///< winding numbers of the starting point, default {-2..2}^p
    LatticeBox wrap_box;    ///< minimum wrapping window of each Gaussian term, default {-1,0,1}^p

    WouParams() = default;
    WouParams(Vec mu_, Mat A_, Mat sigma_);
    /// From a WN or OU process model.
    static WouParams from_model(const DiffusionModel& model);
};

/// WOU transition density at a fixed lag t, with the lag-dependent pieces cached.
class WouTpd {
public:
    WouTpd(const WouParams& params, double t);
    double density(const Vec& theta, const Vec& theta_s) const;
    double log_density(const Vec& theta, const Vec& theta_s) const;
    const Mat& gamma() const noexcept { return gamma_; }

private:
    WouParams params_;
    Eigen::Index p_;
    Mat stat_prec_;
    Mat decay_;  // exp(-tA)
    Mat gamma_;
    Mat gamma_prec_;
    double gamma_log_norm_ = 0.0;
    std::vector<Vec> weight_offsets_;
    std::vector<Vec> wrap_offsets_;
};

double wou_tpd(const WouParams& params, const Vec& theta, const Vec& theta_s, double t);

/// A pseudo-tpd bound to one model and lag.
class TpdApproximation {
public:
    TpdApproximation(const DiffusionModel& model, TpdKind kind, double delta);
    TpdKind kind() const noexcept { return kind_; }
    double log_density(const Vec& theta, const Vec& phi) const;
    double density(const Vec& theta, const Vec& phi) const { return std::exp(log_density(theta, phi)); }

private:
    const DiffusionModel& model_;
    TpdKind kind_;
    double delta_;
    Mat euler_cov_;
    Mat euler_prec_;
    double euler_log_norm_ = 0.0;
    std::vector<double> euler_kappa_;
    std::unique_ptr<WouTpd> wou_;
};

/// Gaussian log-density without wrapping.
double gaussian_logpdf(const Vec& x, const Vec& mean, const Mat& cov);

}  // namespace tdiff
