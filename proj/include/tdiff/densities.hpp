#pragma once

#include <cmath>
#include <vector>

#include "tdiff/special.hpp"
#include "tdiff/torus.hpp"

namespace tdiff {

// ---------------------------------------------------------------------------
// Wrapped normal

enum class WnEvalKind {
    high_concentration,  ///< nearest winding number only
    fixed_window,        ///< sum over {-r..r}^p around the wrapped residual
    vm_moment_match,     ///< product of moment-matched von Mises (diagonal Sigma only)
    adaptive             ///< Bonferroni window sized from the marginal variances
};

/// Coverage level used to widen the default window for diffuse laws.
inline constexpr double kWidenAlpha = 1e-12;
inline constexpr int kDualSwitchRadius = 64;

/// The default is the {-1,0,1}^p window around the wrapped residual, widened per coordinate to the
/// Bonferroni radius at level kWidenAlpha when a marginal standard deviation exceeds about 0.88.
/// For p >= 2 it is further widened per evaluation so that every lattice term within e^-37 of the
/// largest is included, which keeps the relative accuracy in the far tails of correlated laws.
/// When the widened window would exceed kDualSwitchRadius along some axis (very diffuse laws), the
/// density is summed in its Fourier form (2pi)^-p sum_k exp(-k'Sigma k / 2) cos(k'(theta - mu)) instead;
/// that form is accurate to about 1e-17 (2pi)^-p in absolute terms.
struct WnEvalStrategy {
    WnEvalKind kind = WnEvalKind::fixed_window;
    int window = 1;       ///< radius for fixed_window
    double alpha = 0.01;  ///< coverage level for adaptive, in (0, 1)
    bool widen = true;    ///< fixed_window only

    static WnEvalStrategy high_concentration() { return {WnEvalKind::high_concentration, 0, 0.01, false}; }
    /// Exactly {-radius..radius}^p, never widened.
    static WnEvalStrategy fixed(int radius) { return {WnEvalKind::fixed_window, radius, 0.01, false}; }
    static WnEvalStrategy vm_matched() { return {WnEvalKind::vm_moment_match, 1, 0.01, false}; }
    static WnEvalStrategy adaptive(double alpha) { return {WnEvalKind::adaptive, 1, alpha, false}; }
};

/// Bonferroni half-width 1 + floor(z_{1-alpha/(2p)} sqrt(var) / 2pi) for one coordinate.
int bonferroni_radius(double var, double alpha, Eigen::Index dim);

struct WNParams {
    Vec mu;
    Mat sigma;
};

/// WN(mu, Sigma) with its Cholesky factor and lattice offsets cached.
/// Every strategy evaluates the lattice sum around cmod(theta - mu), which makes
/// the density exactly 2pi-periodic in theta and mu.
class WrappedNormal {
public:
    WrappedNormal(const WNParams& params, WnEvalStrategy strategy = {});

    double density(const Vec& theta) const;
    double log_density(const Vec& theta) const;

    const WNParams& params() const noexcept { return params_; }
    Eigen::Index dim() const noexcept { return params_.mu.size(); }
    const Mat& precision() const noexcept { return precision_; }

private:
    double lattice_sum(const Vec& residual) const;
    /// Cached offsets, or a wider set when the tail guard needs one for this residual.
    const std::vector<Vec>& offsets_for(const Vec& residual, std::vector<Vec>& scratch) const;

    WNParams params_;
    WnEvalStrategy strategy_;
    Mat precision_;
    double log_norm_ = 0.0;             // -0.5 log det(2 pi Sigma)
    std::vector<Vec> offsets_;          // 2 pi k for k in the window
    IVec radius_;
    bool tail_guard_ = false;           // widened default in p >= 2
    std::vector<Vec> dual_k_;           // Fourier form: frequencies
    std::vector<double> dual_c_;        // and their coefficients
    std::vector<double> vm_kappa_;      // vm_moment_match only
};

double wn_density(const Vec& theta, const WNParams& params, WnEvalStrategy strategy = {});

/// Log-density with the default strategy; allocation-free for p <= 2.
double wn_logpdf(const Vec& theta, const Vec& mu, const Mat& sigma);

/// Posterior distribution of the winding number of X ~ N(mean, cov) given cmod(X) = theta,
/// restricted to a box of lattice vectors.
struct WindingWeights {
    std::vector<IVec> k;
    std::vector<double> w;
    bool fallback = false;  ///< all raw weights vanished; unit mass put on winding(mean - theta)
};

WindingWeights winding_weights(const Vec& theta, const Vec& mean, const Mat& cov, const LatticeBox& box);

// ---------------------------------------------------------------------------
// von Mises family

struct VMParams {
    double mu = 0.0;
    double kappa = 0.0;
};

double vm_density(double theta, const VMParams& params);
double vm_log_density(double theta, const VMParams& params);

struct MvMParams {
    Vec mu;
    Vec kappa;
    Mat lambda;  ///< symmetric, zero diagonal

    /// diag(kappa) - Lambda positive definite (sufficient for unimodality).
    bool unimodal() const;
};

inline constexpr int kMvmQuadratureNodes = 200;

/// Multivariate von Mises with sine interaction; the normalizing constant is
/// closed-form for Lambda = 0 and by 2D trapezoid otherwise (p = 2 only).
class MultivariateVonMises {
public:
    explicit MultivariateVonMises(const MvMParams& params, int quadrature_nodes = kMvmQuadratureNodes);

    double log_density(const Vec& theta) const { return unnormalized_log(theta) - log_norm_; }
    double density(const Vec& theta) const;
    double unnormalized_log(const Vec& theta) const;
    double log_normalizer() const noexcept { return log_norm_; }
    const MvMParams& params() const noexcept { return params_; }

private:
    MvMParams params_;
    double log_norm_ = 0.0;
};

double mvm_logdensity(const Vec& theta, const MvMParams& params, bool normalized = true);

struct JPParams {
    double mu = 0.0;
    double kappa = 0.0;
    double psi = 0.0;
};

inline constexpr double kJpVmLimit = 1e-4;

struct JpValue {
    double value = 0.0;
    bool clamped = false;  ///< base of the power was <= 0 (rounding); density set to 0
};

/// Jones–Pewsey density with the normalizing constant from adaptive trapezoidal quadrature.
class JonesPewsey {
public:
    explicit JonesPewsey(const JPParams& params);

    JpValue evaluate(double theta) const;
    double density(double theta) const { return evaluate(theta).value; }
    double log_density(double theta) const;
    double normalizer() const noexcept { return std::exp(log_norm_); }
    const JPParams& params() const noexcept { return params_; }

private:
    double log_kernel(double theta, bool* clamped) const;

    JPParams params_;
    bool vm_limit_ = false;
    double log_norm_ = 0.0;
};

double jp_density(double theta, const JPParams& params);

struct MivMParams {
    Mat means;         ///< m x p
    Mat kappa;         ///< m x p, nonnegative
    Vec weights;       ///< simplex of size m
};

class MixtureVonMises {
public:
    explicit MixtureVonMises(const MivMParams& params);

    double density(const Vec& theta) const { return std::exp(log_density(theta)); }
    double log_density(const Vec& theta) const;
    /// Log of p_j f_j(theta) for each component.
    Vec component_logs(const Vec& theta) const;
    const MivMParams& params() const noexcept { return params_; }

private:
    MivMParams params_;
    Mat log_norm_;  // log(2 pi I0(kappa_jc))
    Vec log_w_;
};

double mivm_density(const Vec& theta, const MivMParams& params);

/// kappa such that vM(mu, kappa) matches the first trigonometric moment of WN(mu, sigma2).
A1Inverse vm_moment_match(double sigma2);

}  // namespace tdiff
