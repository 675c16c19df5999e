#include "tdiff/models.hpp"

#include <cmath>
#include <limits>

#include "tdiff/errors.hpp"

namespace tdiff {

std::string to_string(Family f) {
    switch (f) {
        case Family::vm: return "vm";
        case Family::wn: return "wn";
        case Family::jp: return "jp";
        case Family::mivm: return "mivm";
        case Family::ou: return "ou";
    }
    return "?";
}

Family family_from_string(const std::string& name) {
    if (name == "vm" || name == "mvm") return Family::vm;
    if (name == "wn") return Family::wn;
    if (name == "jp") return Family::jp;
    if (name == "mivm") return Family::mivm;
    if (name == "ou") return Family::ou;
    throw InvalidArgument("unknown model family '" + name + "'");
}

Mat wn_stationary_cov(const Mat& A, const Mat& sigma) {
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible()) throw InvalidArgument("drift matrix A is singular");
    Mat S = 0.5 * lu.solve(sigma);
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + S.cwiseAbs().maxCoeff())) {
        throw InvalidArgument("A^{-1} Sigma is not symmetric");
    }
    S = 0.5 * (S + S.transpose());
    if (Eigen::LLT<Mat>(S).info() != Eigen::Success) {
        throw InvalidArgument("A^{-1} Sigma is not positive definite");
    }
    return S;
}

Mat lemma_sigma(double s1, double s2, double rho) {
    Mat S(2, 2);
    S << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;
    return S;
}

Mat validate_A_lemma(double a1, double a2, double a3, double rho, double s1, double s2) {
    if (!(a1 > 0.0)) throw InvalidArgument("lemma: alpha1 > 0 violated");
    if (!(a2 > 0.0)) throw InvalidArgument("lemma: alpha2 > 0 violated");
    if (!(std::abs(rho) < 1.0)) throw InvalidArgument("lemma: |rho| < 1 violated");
    if (!(s1 > 0.0) || !(s2 > 0.0)) throw InvalidArgument("lemma: sigma1, sigma2 > 0 violated");
    const double bound = 0.25 * rho * rho * (a1 - a2) * (a1 - a2) + a1 * a2;
    if (!(a3 * a3 < bound)) {
        throw InvalidArgument("lemma: alpha3^2 < rho^2 (alpha1 - alpha2)^2 / 4 + alpha1 alpha2 violated");
    }
    Mat A(2, 2);
    A << a1, (s1 / s2) * (a3 + 0.5 * rho * (a2 - a1)), (s2 / s1) * (a3 - 0.5 * rho * (a2 - a1)), a2;
    wn_stationary_cov(A, lemma_sigma(s1, s2, rho));  // numerical SPD check
    return A;
}

namespace {

Mat checked_cholesky(const Mat& V) {
    Eigen::LLT<Mat> llt(V);
    if (llt.info() != Eigen::Success) throw InvalidArgument("diffusion matrix is not positive definite");
    return llt.matrixL();
}

void require(bool ok, const char* what) {
    if (!ok) throw InvalidArgument(what);
}

}  // namespace

DiffusionModel::DiffusionModel(ProcessParams params) : params_(std::move(params)) {
    std::visit(
        [this](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MvmProcParams>) {
                dim_ = p.mu.size();
                require(dim_ > 0 && p.A.rows() == dim_ && p.A.cols() == dim_, "vm: dimension mismatch");
                require(p.sigma > 0.0, "vm: sigma must be > 0");
                require((p.A - p.A.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "vm: A must be symmetric");
                require(Eigen::LLT<Mat>(p.A).info() == Eigen::Success, "vm: A must be positive definite");
                diffusion_ = p.sigma * p.sigma * Mat::Identity(dim_, dim_);
                const auto law = std::get<MvMParams>(stationary_law());
                if (dim_ <= 2 || law.lambda.cwiseAbs().maxCoeff() == 0.0) sdi_.emplace<MultivariateVonMises>(law);
            } else if constexpr (std::is_same_v<T, WnProcParams> || std::is_same_v<T, OuProcParams>) {
                dim_ = p.mu.size();
                require(dim_ > 0 && p.A.rows() == dim_ && p.A.cols() == dim_ && p.sigma.rows() == dim_,
                        "wn: dimension mismatch");
                diffusion_ = p.sigma;
                stationary_cov_ = wn_stationary_cov(p.A, p.sigma);
                stationary_prec_ = stationary_cov_.inverse();
                int window = 1;
                if constexpr (std::is_same_v<T, WnProcParams>) window = p.window;
                require(window >= 0, "wn: window must be >= 0");
                window_k_ = lattice_enumerate(LatticeBox::symmetric(static_cast<int>(dim_), window));
                for (const auto& k : window_k_) offsets_.push_back(kTwoPi * k.cast<double>());
                sdi_.emplace<WrappedNormal>(WNParams{p.mu, stationary_cov_});
            } else if constexpr (std::is_same_v<T, JpProcParams>) {
                dim_ = 1;
                require(p.alpha > 0.0, "jp: alpha must be > 0");
                require(p.sigma > 0.0, "jp: sigma must be > 0");
                require(std::isfinite(p.psi), "jp: psi must be finite");
                diffusion_ = Mat::Constant(1, 1, p.sigma * p.sigma);
                sdi_.emplace<JonesPewsey>(std::get<JPParams>(stationary_law()));
            } else if constexpr (std::is_same_v<T, MivmProcParams>) {
                dim_ = p.means.cols();
                require(dim_ > 0 && p.A.rows() == p.means.rows() && p.A.cols() == dim_ &&
                            p.weights.size() == p.means.rows(),
                        "mivm: dimension mismatch");
                require(p.sigma > 0.0, "mivm: sigma must be > 0");
                require((p.A.array() >= 0.0).all(), "mivm: drift strengths must be >= 0");
                diffusion_ = p.sigma * p.sigma * Mat::Identity(dim_, dim_);
                sdi_.emplace<MixtureVonMises>(std::get<MivMParams>(stationary_law()));
            }
        },
        params_);
    diffusion_sqrt_ = checked_cholesky(diffusion_);
}

Family DiffusionModel::family() const noexcept {
    return static_cast<Family>(params_.index());
}

StationaryLaw DiffusionModel::stationary_law() const {
    return std::visit(
        [this](const auto& p) -> StationaryLaw {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MvmProcParams>) {
                const double s2 = p.sigma * p.sigma;
                const Vec alpha = p.A.diagonal();
                Mat astar = -p.A;
                astar.diagonal().setZero();
                return MvMParams{p.mu, 2.0 * alpha / s2, 2.0 * astar / s2};
            } else if constexpr (std::is_same_v<T, WnProcParams> || std::is_same_v<T, OuProcParams>) {
                return WNParams{p.mu, stationary_cov_};
            } else if constexpr (std::is_same_v<T, JpProcParams>) {
                const double s2 = p.sigma * p.sigma;
                return JPParams{p.mu, 2.0 * p.alpha / s2, p.psi * s2};
            } else {
                return MivMParams{p.means, 2.0 * p.A / (p.sigma * p.sigma), p.weights};
            }
        },
        params_);
}

double DiffusionModel::stationary_log_density(const Vec& theta) const {
    if (theta.size() != dim_) throw InvalidArgument("stationary_density: dimension mismatch");
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                throw InvalidArgument("stationary density unavailable for this parametrization");
            } else if constexpr (std::is_same_v<T, JonesPewsey>) {
                return d.log_density(theta[0]);
            } else {
                return d.log_density(theta);
            }
        },
        sdi_);
}

double DiffusionModel::stationary_density(const Vec& theta) const {
    return std::exp(stationary_log_density(theta));
}

bool DiffusionModel::antisymmetric() const noexcept {
    return family() != Family::mivm;
}

Vec DiffusionModel::center() const {
    return std::visit(
        [](const auto& p) -> Vec {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, JpProcParams>) {
                return Vec::Constant(1, p.mu);
            } else if constexpr (std::is_same_v<T, MivmProcParams>) {
                return p.means.row(0).transpose();
            } else {
                return p.mu;
            }
        },
        params_);
}

Vec DiffusionModel::wn_drift(const Vec& theta, Mat* jac) const {
    const Eigen::Index p = dim_;
    const auto& wp = std::get<WnProcParams>(params_);
    const Vec delta = cmod(Vec(theta - wp.mu));
    const std::size_t n = offsets_.size();

    if (p == 1 && n <= 64) {
        const double prec = stationary_prec_(0, 0);
        double logs[64];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double z = delta[0] + offsets_[i][0];
            logs[i] = -0.5 * prec * z * z;
            mx = std::max(mx, logs[i]);
        }
        double sw = 0.0, swz = 0.0, swk = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = std::exp(logs[i] - mx);
            sw += w;
            swz += w * (delta[0] + offsets_[i][0]);
            swk += w * window_k_[i][0];
        }
        const double a = wp.A(0, 0);
        if (jac) {
            // J = a (-1 + 2pi prec sum_k w_k (-z_k)(kbar - k))
            const double kbar = swk / sw;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double w = std::exp(logs[i] - mx) / sw;
                const double z = delta[0] + offsets_[i][0];
                acc += w * (-z) * (kbar - window_k_[i][0]);
            }
            jac->resize(1, 1);
            (*jac)(0, 0) = a * (-1.0 + kTwoPi * prec * acc);
        }
        return Vec::Constant(1, -a * swz / sw);
    }

    std::vector<double> logs(n);
    std::vector<Vec> zs(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        zs[i] = delta + offsets_[i];
        logs[i] = -0.5 * zs[i].dot(stationary_prec_ * zs[i]);
        mx = std::max(mx, logs[i]);
    }
    double sw = 0.0;
    for (auto& l : logs) sw += (l = std::exp(l - mx));
    Vec mean_z = Vec::Zero(p), kbar = Vec::Zero(p);
    for (std::size_t i = 0; i < n; ++i) {
        logs[i] /= sw;
        mean_z += logs[i] * zs[i];
        kbar += logs[i] * window_k_[i].cast<double>();
    }
    if (jac) {
        Mat acc = Mat::Zero(p, p);
        for (std::size_t i = 0; i < n; ++i) {
            acc += logs[i] * (-zs[i]) * (kbar - window_k_[i].cast<double>()).transpose();
        }
        *jac = wp.A * (-Mat::Identity(p, p) + kTwoPi * acc * stationary_prec_);
    }
    return -wp.A * mean_z;
}

Vec DiffusionModel::drift(const Vec& theta_in) const {
    if (theta_in.size() != dim_) throw InvalidArgument("drift: dimension mismatch");
    // wrapping first makes periodic drifts agree bit for bit on equivalent inputs
    const Vec theta = periodic() ? cmod(theta_in) : theta_in;
    return std::visit(
        [&](const auto& p) -> Vec {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MvmProcParams>) {
                const Vec d = p.mu - theta;
                const Vec s = d.array().sin().matrix();
                const Vec c = d.array().cos().matrix();
                Mat astar = -p.A;
                astar.diagonal().setZero();
                return (p.A.diagonal().array() * s.array() - (astar * s).array() * c.array()).matrix();
            } else if constexpr (std::is_same_v<T, WnProcParams>) {
                return wn_drift(theta, nullptr);
            } else if constexpr (std::is_same_v<T, JpProcParams>) {
                const double d = p.mu - theta[0];
                const double x = 2.0 * p.alpha * p.psi;
                const double coef = p.psi == 0.0 ? p.alpha : std::sinh(x) / (2.0 * p.psi);
                // cosh x + sinh x cos d written without cancellation near the antipode
                const double c2 = std::cos(0.5 * d), s2 = std::sin(0.5 * d);
                const double den = std::exp(x) * c2 * c2 + std::exp(-x) * s2 * s2;
                return Vec::Constant(1, coef * std::sin(d) / den);
            } else if constexpr (std::is_same_v<T, MivmProcParams>) {
                const auto& mix = std::get<MixtureVonMises>(sdi_);
                Vec v = mix.component_logs(theta);
                v = (v.array() - v.maxCoeff()).exp().matrix();
                v /= v.sum();
                Vec b = Vec::Zero(dim_);
                for (Eigen::Index j = 0; j < v.size(); ++j) {
                    b += v[j] * (p.A.row(j).transpose().array() *
                                 (p.means.row(j).transpose() - theta).array().sin()).matrix();
                }
                return b;
            } else {
                return p.A * (p.mu - theta);
            }
        },
        params_);
}

Mat DiffusionModel::jacobian(const Vec& theta_in) const {
    if (theta_in.size() != dim_) throw InvalidArgument("jacobian: dimension mismatch");
    const Vec theta = periodic() ? cmod(theta_in) : theta_in;
    return std::visit(
        [&](const auto& p) -> Mat {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MvmProcParams>) {
                const Vec d = p.mu - theta;
                const Vec s = d.array().sin().matrix();
                const Vec c = d.array().cos().matrix();
                Mat astar = -p.A;
                astar.diagonal().setZero();
                const Vec as = astar * s;
                Mat J(dim_, dim_);
                for (Eigen::Index i = 0; i < dim_; ++i) {
                    for (Eigen::Index j = 0; j < dim_; ++j) {
                        J(i, j) = astar(i, j) * c[j] * c[i];
                    }
                    J(i, i) += -p.A(i, i) * c[i] - as[i] * s[i];
                }
                return J;
            } else if constexpr (std::is_same_v<T, WnProcParams>) {
                Mat J;
                wn_drift(theta, &J);
                return J;
            } else if constexpr (std::is_same_v<T, JpProcParams>) {
                const double d = p.mu - theta[0];
                const double x = 2.0 * p.alpha * p.psi;
                const double coef = p.psi == 0.0 ? p.alpha : std::sinh(x) / (2.0 * p.psi);
                const double c2 = std::cos(0.5 * d), s2 = std::sin(0.5 * d);
                const double ep = std::exp(x) * c2 * c2, em = std::exp(-x) * s2 * s2;
                const double den = ep + em;
                return Mat::Constant(1, 1, -coef * (ep - em) / (den * den));
            } else if constexpr (std::is_same_v<T, MivmProcParams>) {
                const auto& mix = std::get<MixtureVonMises>(sdi_);
                const Mat kappa = 2.0 * p.A / (p.sigma * p.sigma);
                Vec v = mix.component_logs(theta);
                v = (v.array() - v.maxCoeff()).exp().matrix();
                v /= v.sum();
                const Eigen::Index m = v.size();
                std::vector<Vec> g(m), bj(m);
                Vec gbar = Vec::Zero(dim_);
                Mat J = Mat::Zero(dim_, dim_);
                for (Eigen::Index j = 0; j < m; ++j) {
                    const Vec d = p.means.row(j).transpose() - theta;
                    const Vec s = d.array().sin().matrix();
                    g[j] = (kappa.row(j).transpose().array() * s.array()).matrix();
                    bj[j] = (p.A.row(j).transpose().array() * s.array()).matrix();
                    gbar += v[j] * g[j];
                    J.diagonal() -= v[j] * (p.A.row(j).transpose().array() * d.array().cos()).matrix();
                }
                for (Eigen::Index j = 0; j < m; ++j) J += v[j] * bj[j] * (g[j] - gbar).transpose();
                return J;
            } else {
                return -p.A;
            }
        },
        params_);
}

}  // namespace tdiff
