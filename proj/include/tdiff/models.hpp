#pragma once

#include <string>
#include <variant>

#include "tdiff/densities.hpp"
#include "tdiff/torus.hpp"

namespace tdiff {

enum class Family { vm, wn, jp, mivm, ou };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

/// Multivariate von Mises process: drift alpha o sin(mu - x) - (A* sin(mu - x)) o cos(mu - x)
/// with A* = diag(alpha) - A and isotropic diffusion sigma^2 I.
struct MvmProcParams {
    Mat A;  ///< positive definite; alpha = diag(A)
    Vec mu;
    double sigma = 1.0;
};

/// Wrapped normal process with WN(mu, A^{-1} Sigma / 2) stationary law.
struct WnProcParams {
    Mat A;
    Vec mu;
    Mat sigma;       ///< diffusion covariance Sigma
    int window = 1;  ///< radius of the winding-number window used by drift and Jacobian
};

struct JpProcParams {
    double mu = 0.0;
    double alpha = 1.0;
    double psi = 0.0;
    double sigma = 1.0;
};

struct MivmProcParams {
    Mat means;  ///< m x p
    Mat A;      ///< m x p drift strengths, nonnegative
    Vec weights;
    double sigma = 1.0;
};

/// Linear (non-periodic) OU drift A (mu - x); its wrapped stationary law is WN(mu, A^{-1} Sigma / 2).
struct OuProcParams {
    Mat A;
    Vec mu;
    Mat sigma;
};

using ProcessParams = std::variant<MvmProcParams, WnProcParams, JpProcParams, MivmProcParams, OuProcParams>;
using StationaryLaw = std::variant<MvMParams, WNParams, JPParams, MivMParams>;

/// A toroidal Langevin diffusion with constant diffusion matrix.
/// Immutable after construction; all evaluations are pure.
class DiffusionModel {
public:
    explicit DiffusionModel(ProcessParams params);

    Family family() const noexcept;
    Eigen::Index dim() const noexcept { return dim_; }
    const ProcessParams& params() const noexcept { return params_; }

    Vec drift(const Vec& theta) const;
    Mat jacobian(const Vec& theta) const;

    /// Diffusion matrix V = sigma sigma'.
    const Mat& diffusion() const noexcept { return diffusion_; }
    /// Lower Cholesky factor of V.
    const Mat& diffusion_sqrt() const noexcept { return diffusion_sqrt_; }

    StationaryLaw stationary_law() const;
    double stationary_density(const Vec& theta) const;
    double stationary_log_density(const Vec& theta) const;

    /// drift(center + d) = -drift(center - d) for every d.
    bool antisymmetric() const noexcept;
    /// Point of antisymmetry (the location mu for unimodal families).
    Vec center() const;
    /// The OU drift is not periodic.
    bool periodic() const noexcept { return family() != Family::ou; }

private:
    Vec wn_drift(const Vec& theta, Mat* jac) const;

    ProcessParams params_;
    Eigen::Index dim_ = 0;
    Mat diffusion_;
    Mat diffusion_sqrt_;
    // WN / OU caches
    Mat stationary_cov_;
    Mat stationary_prec_;
    std::vector<Vec> offsets_;
    std::vector<IVec> window_k_;
    std::variant<std::monostate, MultivariateVonMises, WrappedNormal, JonesPewsey, MixtureVonMises> sdi_;
};

/// Drift matrix of the two-dimensional WN process satisfying the symmetry lemma:
/// A^{-1} Sigma is a covariance iff alpha3^2 < rho^2 (alpha1 - alpha2)^2 / 4 + alpha1 alpha2.
Mat validate_A_lemma(double alpha1, double alpha2, double alpha3, double rho, double sigma1, double sigma2);

/// Sigma = [[s1^2, rho s1 s2], [rho s1 s2, s2^2]].
Mat lemma_sigma(double sigma1, double sigma2, double rho);

/// Stationary covariance A^{-1} Sigma / 2.
Mat wn_stationary_cov(const Mat& A, const Mat& sigma);

}  // namespace tdiff
