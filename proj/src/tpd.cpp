#include "tdiff/tpd.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "tdiff/errors.hpp"

namespace tdiff {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double phi1(double x) {
    return x == 0.0 ? 1.0 : std::expm1(x) / x;
}

// phi1(X) = X^{-1}(exp(X) - I), from the exponential of [[X, I], [0, 0]].
Mat phi1(const Mat& X) {
    const Eigen::Index p = X.rows();
    Mat aug = Mat::Zero(2 * p, 2 * p);
    aug.topLeftCorner(p, p) = X;
    aug.topRightCorner(p, p) = Mat::Identity(p, p);
    const Mat e = aug.exp();
    return e.topRightCorner(p, p);
}

bool symmetric(const Mat& M, double rtol) {
    return (M - M.transpose()).cwiseAbs().maxCoeff() <= rtol * (M.cwiseAbs().maxCoeff() + 1e-300);
}

}  // namespace

std::string to_string(TpdKind k) {
    switch (k) {
        case TpdKind::S: return "S";
        case TpdKind::E: return "E";
        case TpdKind::UE: return "UE";
        case TpdKind::EvM: return "EvM";
        case TpdKind::SO: return "SO";
        case TpdKind::USO: return "USO";
        case TpdKind::SOvM: return "SOvM";
        case TpdKind::WOU: return "WOU";
    }
    return "?";
}

TpdKind tpd_kind_from_string(const std::string& name) {
    for (TpdKind k : {TpdKind::S, TpdKind::E, TpdKind::UE, TpdKind::EvM, TpdKind::SO, TpdKind::USO, TpdKind::SOvM,
                      TpdKind::WOU}) {
        std::string a = to_string(k), b = name;
        for (auto& c : a) c = static_cast<char>(std::tolower(c));
        for (auto& c : b) c = static_cast<char>(std::tolower(c));
        if (a == b) return k;
    }
    throw InvalidArgument("unknown approximation '" + name + "'");
}

double gaussian_logpdf(const Vec& x, const Vec& mean, const Mat& cov) {
    const Eigen::Index p = x.size();
    if (p == 1) {
        const double v = cov(0, 0);
        if (!(v > 0.0)) throw InvalidArgument("gaussian_logpdf: variance must be > 0");
        const double z = x[0] - mean[0];
        return -0.5 * (kLog2Pi + std::log(v) + z * z / v);
    }
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw InvalidArgument("gaussian_logpdf: covariance not positive definite");
    const Vec w = llt.matrixL().solve(Vec(x - mean));
    double ld = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) ld += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * (static_cast<double>(p) * kLog2Pi + ld + w.squaredNorm());
}

// ---------------------------------------------------------------------------
// Shoji–Ozaki moments

SoMoments so_moments(const Vec& phi, const Vec& b, const Mat& J, const Mat& V, double delta) {
    if (!(delta > 0.0)) throw InvalidArgument("so_moments: delta must be > 0");
    const Eigen::Index p = phi.size();
    SoMoments m;
    if (p == 1) {
        const double j = J(0, 0);
        if (j == 0.0 || !std::isfinite(j)) {
            m.mean = phi + b * delta;
            m.cov = V * delta;
            m.euler_fallback = true;
            return m;
        }
        m.mean = Vec::Constant(1, phi[0] + delta * phi1(j * delta) * b[0]);
        m.cov = Mat::Constant(1, 1, delta * phi1(2.0 * j * delta) * V(0, 0));
        return m;
    }
    Eigen::JacobiSVD<Mat> svd(J);
    const Vec sv = svd.singularValues();
    if (!(sv[p - 1] > 0.0) || sv[0] / sv[p - 1] > kSoConditionCap) {
        m.mean = phi + b * delta;
        m.cov = V * delta;
        m.euler_fallback = true;
        return m;
    }
    m.mean = phi + delta * phi1(Mat(J * delta)) * b;
    const Mat vinv_j = V.llt().solve(J);
    if (symmetric(vinv_j, 1e-10)) {
        m.cov = delta * phi1(Mat(2.0 * delta * J)) * V;
    } else {
        const Mat I = Mat::Identity(p, p);
        const Mat K = Eigen::kroneckerProduct(I, J) + Eigen::kroneckerProduct(J, I);
        const Mat eJ = expm(J, delta);
        const Mat rhs = eJ * V * eJ.transpose() - V;
        Eigen::FullPivLU<Mat> lu(K);
        if (!lu.isInvertible()) {
            throw NumericalError("so_moments: J has a pair of eigenvalues of opposite sign; Lyapunov system singular");
        }
        const Vec g = lu.solve(Eigen::Map<const Vec>(rhs.data(), p * p));
        m.cov = Eigen::Map<const Mat>(g.data(), p, p);
    }
    m.cov = 0.5 * (m.cov + m.cov.transpose());
    return m;
}

SoMoments so_moments(const DiffusionModel& model, const Vec& phi, double delta) {
    return so_moments(phi, model.drift(phi), model.jacobian(phi), model.diffusion(), delta);
}

double euler_tpd(const DiffusionModel& model, const Vec& theta, const Vec& phi, double delta, bool wrapped) {
    if (!(delta > 0.0)) throw InvalidArgument("euler_tpd: delta must be > 0");
    const Vec mean = phi + model.drift(phi) * delta;
    const Mat cov = model.diffusion() * delta;
    return std::exp(wrapped ? wn_logpdf(theta, mean, cov) : gaussian_logpdf(theta, mean, cov));
}

namespace {

double vm_matched_logpdf(const Vec& theta, const Vec& mean, const Mat& cov) {
    double l = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        l += vm_log_density(theta[j], {cmod(mean[j]), vm_moment_match(cov(j, j)).kappa});
    }
    return l;
}

}  // namespace

double so_tpd(const DiffusionModel& model, const Vec& theta, const Vec& phi, double delta, bool wrapped,
              bool vm_matched) {
    const SoMoments m = so_moments(model, phi, delta);
    if (vm_matched) return std::exp(vm_matched_logpdf(theta, m.mean, m.cov));
    return std::exp(wrapped ? wn_logpdf(theta, m.mean, m.cov) : gaussian_logpdf(theta, m.mean, m.cov));
}

// ---------------------------------------------------------------------------
// 2x2 exponential and OU covariance

Expm2Coeffs expm2x2_coeffs(const Mat& A, double t) {
    if (A.rows() != 2 || A.cols() != 2) throw InvalidArgument("expm2x2: matrix must be 2x2");
    if (!A.allFinite() || !std::isfinite(t)) throw InvalidArgument("expm2x2: non-finite input");
    const double s = 0.5 * (A(0, 0) + A(1, 1));
    const double h = 0.5 * (A(0, 0) - A(1, 1));
    const double d = -h * h - A(0, 1) * A(1, 0);  // det(A - sI)
    Expm2Coeffs c;
    if (d < 0.0) {
        const double q = std::sqrt(-d);
        const double x = q * t;
        if (std::abs(x) < 1.0) {
            const double est = std::exp(s * t);
            const double sh = std::sinh(x) / q;
            c.a = est * (std::cosh(x) - s * sh);
            c.b = est * sh;
        } else {
            // real eigenvalues s +- q; exponential form avoids cosh overflow
            const double e1 = std::exp((s + q) * t), e2 = std::exp((s - q) * t);
            c.a = ((q - s) * e1 + (q + s) * e2) / (2.0 * q);
            c.b = (e1 - e2) / (2.0 * q);
        }
    } else if (d > 0.0) {
        const double q = std::sqrt(d);
        const double x = q * t;
        const double est = std::exp(s * t);
        const double sn = std::abs(x) < 1e-8 ? t * (1.0 - x * x / 6.0) : std::sin(x) / q;
        c.a = est * (std::cos(x) - s * sn);
        c.b = est * sn;
    } else {
        const double est = std::exp(s * t);
        c.a = est * (1.0 - s * t);
        c.b = est * t;
    }
    return c;
}

Mat expm2x2(const Mat& A, double t) {
    const Expm2Coeffs c = expm2x2_coeffs(A, t);
    return c.a * Mat::Identity(2, 2) + c.b * A;
}

Mat expm(const Mat& A, double t) {
    if (A.rows() != A.cols()) throw InvalidArgument("expm: matrix must be square");
    if (A.rows() == 1) return Mat::Constant(1, 1, std::exp(t * A(0, 0)));
    if (A.rows() == 2) return expm2x2(A, t);
    return Mat(t * A).exp();
}

Mat gamma_t(const Mat& A, const Mat& sigma, double t) {
    if (t < 0.0) throw InvalidArgument("gamma_t: t must be >= 0");
    const Eigen::Index p = A.rows();
    const Mat S = wn_stationary_cov(A, sigma);
    if (p == 1) return S * (-std::expm1(-2.0 * A(0, 0) * t));
    Mat G;
    if (p == 2) {
        const Expm2Coeffs c = expm2x2_coeffs(A, -2.0 * t);
        G = (1.0 - c.a) * S - 0.5 * c.b * sigma;
    } else {
        // A S = Sigma / 2 is symmetric, so exp(-tA) S exp(-tA') = exp(-2tA) S
        G = S - expm(A, -2.0 * t) * S;
    }
    return 0.5 * (G + G.transpose());
}

// ---------------------------------------------------------------------------
// WOU

WouParams::WouParams(Vec mu_, Mat A_, Mat sigma_)
    : mu(std::move(mu_)), A(std::move(A_)), sigma(std::move(sigma_)) {
    const int p = static_cast<int>(mu.size());
    weight_box = LatticeBox::symmetric(p, 2);
    wrap_box = LatticeBox::symmetric(p, 1);
}

WouParams WouParams::from_model(const DiffusionModel& model) {
    if (const auto* w = std::get_if<WnProcParams>(&model.params())) return WouParams(w->mu, w->A, w->sigma);
    if (const auto* o = std::get_if<OuProcParams>(&model.params())) return WouParams(cmod(o->mu), o->A, o->sigma);
    throw InvalidArgument("WOU approximation requires the WN family");
}

WouTpd::WouTpd(const WouParams& params, double t) : params_(params), p_(params.mu.size()) {
    if (!(t > 0.0)) throw InvalidArgument("wou_tpd: t must be > 0");
    if (p_ < 1 || params.A.rows() != p_ || params.sigma.rows() != p_ || params.weight_box.dim() != p_ ||
        params.wrap_box.dim() != p_) {
        throw InvalidArgument("wou_tpd: dimension mismatch");
    }
    stat_prec_ = wn_stationary_cov(params.A, params.sigma).inverse();
    decay_ = expm(params.A, -t);
    gamma_ = gamma_t(params.A, params.sigma, t);
    Eigen::LLT<Mat> llt(gamma_);
    if (llt.info() != Eigen::Success) throw NumericalError("wou_tpd: Gamma_t is not positive definite");
    double ld = 0.0;
    for (Eigen::Index i = 0; i < p_; ++i) ld += 2.0 * std::log(llt.matrixL()(i, i));
    gamma_prec_ = llt.solve(Mat::Identity(p_, p_));
    gamma_log_norm_ = -0.5 * (static_cast<double>(p_) * kLog2Pi + ld);
    for (const IVec& m : lattice_enumerate(params.weight_box)) weight_offsets_.push_back(kTwoPi * m.cast<double>());
    LatticeBox wrap = params.wrap_box;
    for (Eigen::Index j = 0; j < p_; ++j) {
        const int r = bonferroni_radius(gamma_(j, j), kWidenAlpha, p_);
        wrap.upper[j] = std::max(wrap.upper[j], r);
        wrap.lower[j] = std::min(wrap.lower[j], -r);
    }
    for (const IVec& k : lattice_enumerate(wrap)) wrap_offsets_.push_back(kTwoPi * k.cast<double>());
}

double WouTpd::log_density(const Vec& theta, const Vec& theta_s) const {
    if (theta.size() != p_ || theta_s.size() != p_) throw InvalidArgument("wou_tpd: dimension mismatch");
    const Vec rs = cmod(Vec(theta_s - params_.mu));
    const Vec r = cmod(Vec(theta - params_.mu));
    const std::size_t nw = weight_offsets_.size();

    // log winding weights of the starting point
    double lw[256];
    std::vector<double> lw_heap;
    double* lwp = lw;
    if (nw > 256) {
        lw_heap.resize(nw);
        lwp = lw_heap.data();
    }
    double wmax = -std::numeric_limits<double>::infinity();
    Vec x(p_);
    for (std::size_t i = 0; i < nw; ++i) {
        x = rs + weight_offsets_[i];
        lwp[i] = -0.5 * x.dot(stat_prec_ * x);
        wmax = std::max(wmax, lwp[i]);
    }
    double wsum = 0.0;
    for (std::size_t i = 0; i < nw; ++i) wsum += std::exp(lwp[i] - wmax);
    const double lnorm = wmax + std::log(wsum);

    // online log-sum-exp over (m, k)
    double mx = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    Vec z(p_), c(p_);
    for (std::size_t i = 0; i < nw; ++i) {
        const double lwi = lwp[i] - lnorm;
        if (lwi < -745.0) continue;  // weight underflows
        c = decay_ * (rs + weight_offsets_[i]);
        const Vec base = cmod(Vec(r - c));
        for (const Vec& off : wrap_offsets_) {
            z = base + off;
            const double e = lwi - 0.5 * z.dot(gamma_prec_ * z);
            if (e > mx) {
                acc = acc * std::exp(mx - e) + 1.0;
                mx = e;
            } else {
                acc += std::exp(e - mx);
            }
        }
    }
    return gamma_log_norm_ + mx + std::log(acc);
}

double WouTpd::density(const Vec& theta, const Vec& theta_s) const {
    return std::exp(log_density(theta, theta_s));
}

double wou_tpd(const WouParams& params, const Vec& theta, const Vec& theta_s, double t) {
    return WouTpd(params, t).density(theta, theta_s);
}

// ---------------------------------------------------------------------------

TpdApproximation::TpdApproximation(const DiffusionModel& model, TpdKind kind, double delta)
    : model_(model), kind_(kind), delta_(delta) {
    if (!(delta > 0.0)) throw InvalidArgument("approximation lag must be > 0");
    euler_cov_ = model.diffusion() * delta;
    if (kind == TpdKind::EvM) {
        for (Eigen::Index j = 0; j < model.dim(); ++j) euler_kappa_.push_back(vm_moment_match(euler_cov_(j, j)).kappa);
    }
    if (kind == TpdKind::WOU) wou_ = std::make_unique<WouTpd>(WouParams::from_model(model), delta);
}

double TpdApproximation::log_density(const Vec& theta, const Vec& phi) const {
    switch (kind_) {
        case TpdKind::S:
            return model_.stationary_log_density(theta);
        case TpdKind::E:
            return wn_logpdf(theta, Vec(phi + model_.drift(phi) * delta_), euler_cov_);
        case TpdKind::UE:
            return gaussian_logpdf(theta, Vec(phi + model_.drift(phi) * delta_), euler_cov_);
        case TpdKind::EvM: {
            const Vec mean = phi + model_.drift(phi) * delta_;
            double l = 0.0;
            for (Eigen::Index j = 0; j < theta.size(); ++j) {
                l += vm_log_density(theta[j], {cmod(mean[j]), euler_kappa_[static_cast<std::size_t>(j)]});
            }
            return l;
        }
        case TpdKind::SO: {
            const SoMoments m = so_moments(model_, phi, delta_);
            return wn_logpdf(theta, m.mean, m.cov);
        }
        case TpdKind::USO: {
            const SoMoments m = so_moments(model_, phi, delta_);
            return gaussian_logpdf(theta, m.mean, m.cov);
        }
        case TpdKind::SOvM: {
            const SoMoments m = so_moments(model_, phi, delta_);
            return vm_matched_logpdf(theta, m.mean, m.cov);
        }
        case TpdKind::WOU:
            return wou_->log_density(theta, phi);
    }
    throw InvalidArgument("unreachable approximation kind");
}

}  // namespace tdiff
