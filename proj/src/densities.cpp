#include "tdiff/densities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tdiff/errors.hpp"

namespace tdiff {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Mat checked_cholesky_inverse(const Mat& sigma, double* log_det) {
    if (sigma.rows() != sigma.cols()) throw InvalidArgument("covariance must be square");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + sigma.cwiseAbs().maxCoeff())) {
        throw InvalidArgument("covariance must be symmetric");
    }
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success) throw InvalidArgument("covariance is not positive definite");
    const Mat& L = llt.matrixL();
    double ld = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        if (!(L(i, i) > 0.0)) throw InvalidArgument("covariance is singular");
        ld += 2.0 * std::log(L(i, i));
    }
    if (log_det) *log_det = ld;
    return llt.solve(Mat::Identity(sigma.rows(), sigma.cols()));
}

double quad_form(const Mat& prec, const Vec& z) {
    const Eigen::Index p = z.size();
    if (p == 1) return prec(0, 0) * z[0] * z[0];
    if (p == 2) {
        return prec(0, 0) * z[0] * z[0] + 2.0 * prec(0, 1) * z[0] * z[1] + prec(1, 1) * z[1] * z[1];
    }
    return z.dot(prec * z);
}

// Lattice terms with exponent within this margin of the largest are always summed.
constexpr double kTailMargin = 75.0;

// Radius along coordinate j that holds every z = r + 2 pi k with z' P z <= q0 + kTailMargin,
// where q0 is the k = 0 exponent (an upper bound on the smallest one).
int tail_radius(double q0, double var_j) {
    return static_cast<int>(std::floor((std::sqrt((q0 + kTailMargin) * var_j) + kPi) / kTwoPi));
}

// Fourier terms with exp(-k' Sigma k / 2) below e^-kDualMargin are dropped.
constexpr double kDualMargin = 40.0;

bool needs_dual(const Mat& sigma, double alpha) {
    const double z = normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(sigma.rows())));
    for (Eigen::Index j = 0; j < sigma.rows(); ++j) {
        if (z * std::sqrt(sigma(j, j)) / kTwoPi >= kDualSwitchRadius) return true;
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------

int bonferroni_radius(double var, double alpha, Eigen::Index dim) {
    static const double z_default = normal_quantile(1.0 - kWidenAlpha / 2.0);
    const double z = (alpha == kWidenAlpha && dim == 1) ? z_default
                                                        : normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(dim)));
    const double k = std::floor(z * std::sqrt(std::max(var, 0.0)) / kTwoPi);
    if (!(k < 1e6)) throw ResourceError("wrapped normal window too wide (variance " + std::to_string(var) + ")");
    return 1 + static_cast<int>(k);
}

double wn_logpdf(const Vec& theta, const Vec& mu, const Mat& sigma) {
    const Eigen::Index p = theta.size();
    if (mu.size() != p || sigma.rows() != p || sigma.cols() != p) throw InvalidArgument("wn_logpdf: dimension mismatch");
    if (p == 1) {
        const double v = sigma(0, 0);
        if (!(v > 0.0)) throw InvalidArgument("wn_logpdf: variance must be > 0");
        // first Fourier coefficient exp(-v/2) is below 1e-43: uniform to double precision
        if (v > 200.0) return -std::log(kTwoPi);
        const int K = bonferroni_radius(v, kWidenAlpha, 1);
        const double r = cmod(theta[0] - mu[0]);
        // the k = 0 term is the largest, so it anchors the log-sum-exp
        const double e0 = -0.5 * r * r / v;
        double s = 0.0;
        for (int k = -K; k <= K; ++k) {
            const double z = r + kTwoPi * k;
            s += std::exp(-0.5 * z * z / v - e0);
        }
        return -0.5 * (kLog2Pi + std::log(v)) + e0 + std::log(s);
    }
    if (p == 2) {
        const double a = sigma(0, 0), b = sigma(0, 1), d = sigma(1, 1);
        const double det = a * d - b * b;
        if (!(a > 0.0 && det > 0.0) || std::abs(b - sigma(1, 0)) > 1e-10 * (1.0 + std::abs(b))) {
            throw InvalidArgument("wn_logpdf: covariance is not symmetric positive definite");
        }
        const double lmin = 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + b * b);
        if (lmin > 200.0) return -2.0 * std::log(kTwoPi);
        if (needs_dual(sigma, kWidenAlpha)) return WrappedNormal(WNParams{mu, sigma}).log_density(theta);
        const double pa = d / det, pb = -b / det, pd = a / det;
        const double r1 = cmod(theta[0] - mu[0]), r2 = cmod(theta[1] - mu[1]);
        const double q0 = pa * r1 * r1 + 2.0 * pb * r1 * r2 + pd * r2 * r2;
        const int K1 = std::max(bonferroni_radius(a, kWidenAlpha, 2), tail_radius(q0, a));
        const int K2 = std::max(bonferroni_radius(d, kWidenAlpha, 2), tail_radius(q0, d));
        double mx = -std::numeric_limits<double>::infinity();
        for (int pass = 0; pass < 2; ++pass) {
            double s = 0.0;
            for (int k1 = -K1; k1 <= K1; ++k1) {
                const double z1 = r1 + kTwoPi * k1;
                for (int k2 = -K2; k2 <= K2; ++k2) {
                    const double z2 = r2 + kTwoPi * k2;
                    const double e = -0.5 * (pa * z1 * z1 + 2.0 * pb * z1 * z2 + pd * z2 * z2);
                    if (pass == 0) {
                        mx = std::max(mx, e);
                    } else {
                        s += std::exp(e - mx);
                    }
                }
            }
            if (pass == 1) return -0.5 * (2.0 * kLog2Pi + std::log(det)) + mx + std::log(s);
        }
    }
    return WrappedNormal(WNParams{mu, sigma}).log_density(theta);
}

WrappedNormal::WrappedNormal(const WNParams& params, WnEvalStrategy strategy)
    : params_(params), strategy_(strategy) {
    const Eigen::Index p = params.mu.size();
    if (p == 0 || params.sigma.rows() != p) throw InvalidArgument("WrappedNormal: dimension mismatch");
    double log_det = 0.0;
    precision_ = checked_cholesky_inverse(params.sigma, &log_det);
    log_norm_ = -0.5 * (static_cast<double>(p) * kLog2Pi + log_det);

    if ((strategy.kind == WnEvalKind::fixed_window && strategy.widen && needs_dual(params.sigma, kWidenAlpha)) ||
        (strategy.kind == WnEvalKind::adaptive && needs_dual(params.sigma, strategy.alpha))) {
        LatticeBox fb;
        fb.lower.resize(p);
        fb.upper.resize(p);
        for (Eigen::Index j = 0; j < p; ++j) {
            fb.upper[j] = static_cast<int>(std::floor(std::sqrt(2.0 * kDualMargin * precision_(j, j))));
            fb.lower[j] = -fb.upper[j];
        }
        for (const IVec& k : lattice_enumerate(fb)) {
            const Vec kd = k.cast<double>();
            const double e = 0.5 * kd.dot(params.sigma * kd);
            if (e > kDualMargin) continue;
            dual_k_.push_back(kd);
            dual_c_.push_back(std::exp(-e));
        }
        return;
    }

    LatticeBox box;
    switch (strategy.kind) {
        case WnEvalKind::high_concentration:
            box = LatticeBox::symmetric(static_cast<int>(p), 0);
            break;
        case WnEvalKind::fixed_window:
            if (strategy.window < 0) throw InvalidArgument("WrappedNormal: negative window");
            box = LatticeBox::symmetric(static_cast<int>(p), strategy.window);
            if (strategy.widen) {
                tail_guard_ = p >= 2;
                for (Eigen::Index j = 0; j < p; ++j) {
                    const int r = bonferroni_radius(params.sigma(j, j), kWidenAlpha, p);
                    box.upper[j] = std::max(box.upper[j], r);
                    box.lower[j] = -box.upper[j];
                }
            }
            break;
        case WnEvalKind::adaptive: {
            if (!(strategy.alpha > 0.0 && strategy.alpha < 1.0)) {
                throw InvalidArgument("WrappedNormal: adaptive alpha must lie in (0, 1)");
            }
            box.lower.resize(p);
            box.upper.resize(p);
            for (Eigen::Index j = 0; j < p; ++j) {
                const int ku = bonferroni_radius(params.sigma(j, j), strategy.alpha, p);
                box.upper[j] = ku;
                box.lower[j] = -ku;
            }
            break;
        }
        case WnEvalKind::vm_moment_match: {
            Mat off = params.sigma;
            off.diagonal().setZero();
            if (off.cwiseAbs().maxCoeff() > 0.0) {
                throw InvalidArgument("WrappedNormal: von Mises matching needs a diagonal covariance");
            }
            for (Eigen::Index j = 0; j < p; ++j) vm_kappa_.push_back(vm_moment_match(params.sigma(j, j)).kappa);
            return;
        }
    }
    radius_ = box.upper;
    for (const IVec& k : lattice_enumerate(box)) offsets_.push_back(kTwoPi * k.cast<double>());
}

const std::vector<Vec>& WrappedNormal::offsets_for(const Vec& r, std::vector<Vec>& scratch) const {
    if (!tail_guard_) return offsets_;
    const double q0 = quad_form(precision_, r);
    LatticeBox box{-radius_, radius_};
    bool grow = false;
    for (Eigen::Index j = 0; j < r.size(); ++j) {
        const int t = tail_radius(q0, params_.sigma(j, j));
        if (t > box.upper[j]) {
            box.upper[j] = t;
            box.lower[j] = -t;
            grow = true;
        }
    }
    if (!grow) return offsets_;
    scratch.clear();
    for (const IVec& k : lattice_enumerate(box)) scratch.push_back(kTwoPi * k.cast<double>());
    return scratch;
}

double WrappedNormal::lattice_sum(const Vec& r) const {
    double sum = 0.0;
    Vec z(r.size());
    std::vector<Vec> scratch;
    for (const Vec& off : offsets_for(r, scratch)) {
        z = r + off;
        sum += std::exp(-0.5 * quad_form(precision_, z));
    }
    return sum;
}

double WrappedNormal::density(const Vec& theta) const {
    if (theta.size() != dim()) throw InvalidArgument("WrappedNormal: dimension mismatch");
    const Vec r = cmod(Vec(theta - params_.mu));
    if (!dual_k_.empty()) {
        double s = 0.0;
        for (std::size_t i = 0; i < dual_k_.size(); ++i) s += dual_c_[i] * std::cos(dual_k_[i].dot(r));
        // rounding can only push a vanishing tail below zero
        return std::max(s, std::numeric_limits<double>::min()) / std::pow(kTwoPi, static_cast<double>(r.size()));
    }
    if (!vm_kappa_.empty()) {
        double d = 1.0;
        for (Eigen::Index j = 0; j < r.size(); ++j) d *= vm_density(r[j], {0.0, vm_kappa_[j]});
        return d;
    }
    return std::exp(log_norm_) * lattice_sum(r);
}

double WrappedNormal::log_density(const Vec& theta) const {
    if (theta.size() != dim()) throw InvalidArgument("WrappedNormal: dimension mismatch");
    if (!dual_k_.empty()) return std::log(density(theta));
    const Vec r = cmod(Vec(theta - params_.mu));
    if (!vm_kappa_.empty()) {
        double d = 0.0;
        for (Eigen::Index j = 0; j < r.size(); ++j) d += vm_log_density(r[j], {0.0, vm_kappa_[j]});
        return d;
    }
    // log-sum-exp so that sharply concentrated laws do not underflow
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<Vec> scratch;
    const std::vector<Vec>& offs = offsets_for(r, scratch);
    std::vector<double> e;
    e.reserve(offs.size());
    Vec z(r.size());
    for (const Vec& off : offs) {
        z = r + off;
        e.push_back(-0.5 * quad_form(precision_, z));
        mx = std::max(mx, e.back());
    }
    double s = 0.0;
    for (double v : e) s += std::exp(v - mx);
    return log_norm_ + mx + std::log(s);
}

double wn_density(const Vec& theta, const WNParams& params, WnEvalStrategy strategy) {
    return WrappedNormal(params, strategy).density(theta);
}

WindingWeights winding_weights(const Vec& theta, const Vec& mean, const Mat& cov, const LatticeBox& box) {
    const Eigen::Index p = theta.size();
    if (mean.size() != p || cov.rows() != p || box.dim() != p) {
        throw InvalidArgument("winding_weights: dimension mismatch");
    }
    const Mat prec = checked_cholesky_inverse(cov, nullptr);
    WindingWeights out;
    out.k = lattice_enumerate(box);
    std::vector<double> logs(out.k.size());
    double mx = -std::numeric_limits<double>::infinity();
    const Vec d = theta - mean;
    for (std::size_t i = 0; i < out.k.size(); ++i) {
        const Vec z = d + kTwoPi * out.k[i].cast<double>();
        logs[i] = -0.5 * quad_form(prec, z);
        mx = std::max(mx, logs[i]);
    }
    out.w.resize(out.k.size());
    double sum = 0.0;
    if (std::isfinite(mx)) {
        for (std::size_t i = 0; i < logs.size(); ++i) sum += (out.w[i] = std::exp(logs[i] - mx));
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        const IVec target = winding(Vec(mean - theta));
        std::fill(out.w.begin(), out.w.end(), 0.0);
        out.fallback = true;
        for (std::size_t i = 0; i < out.k.size(); ++i) {
            if (out.k[i] == target) {
                out.w[i] = 1.0;
                return out;
            }
        }
        throw NumericalError("winding_weights: fallback winding number outside the box");
    }
    for (double& w : out.w) w /= sum;
    return out;
}

// ---------------------------------------------------------------------------

double vm_log_density(double theta, const VMParams& params) {
    if (!(params.kappa >= 0.0)) throw InvalidArgument("von Mises: kappa must be >= 0");
    // kappa cos - log(2 pi I0) written with the scaled Bessel function
    return params.kappa * (std::cos(theta - params.mu) - 1.0) - std::log(kTwoPi * bessel_i0e(params.kappa));
}

double vm_density(double theta, const VMParams& params) { return std::exp(vm_log_density(theta, params)); }

bool MvMParams::unimodal() const {
    Mat P = -lambda;
    P.diagonal() = kappa;
    Eigen::LLT<Mat> llt(P);
    return llt.info() == Eigen::Success;
}

MultivariateVonMises::MultivariateVonMises(const MvMParams& params, int nodes) : params_(params) {
    const Eigen::Index p = params.mu.size();
    if (params.kappa.size() != p || params.lambda.rows() != p || params.lambda.cols() != p) {
        throw InvalidArgument("MvM: dimension mismatch");
    }
    if ((params.kappa.array() < 0.0).any()) throw InvalidArgument("MvM: kappa must be >= 0");
    if ((params.lambda - params.lambda.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
        params.lambda.diagonal().cwiseAbs().maxCoeff() > 0.0) {
        throw InvalidArgument("MvM: Lambda must be symmetric with zero diagonal");
    }
    if (params.lambda.cwiseAbs().maxCoeff() == 0.0) {
        log_norm_ = static_cast<double>(p) * std::log(kTwoPi);
        for (Eigen::Index j = 0; j < p; ++j) log_norm_ += log_bessel_i0(params.kappa[j]);
        return;
    }
    if (p != 2) throw InvalidArgument("MvM: normalizing constant with interaction only for p = 2");
    // Periodic trapezoid; the integrand is analytic so the rule converges geometrically.
    const double h = kTwoPi / nodes;
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> vals(static_cast<std::size_t>(nodes) * nodes);
    Vec t(2);
    for (int i = 0; i < nodes; ++i) {
        for (int j = 0; j < nodes; ++j) {
            t << -kPi + i * h, -kPi + j * h;
            const double v = unnormalized_log(t);
            vals[static_cast<std::size_t>(i) * nodes + j] = v;
            mx = std::max(mx, v);
        }
    }
    double s = 0.0;
    for (double v : vals) s += std::exp(v - mx);
    log_norm_ = mx + std::log(s * h * h);
}

double MultivariateVonMises::unnormalized_log(const Vec& theta) const {
    const Vec d = theta - params_.mu;
    const Vec s = d.array().sin().matrix();
    return params_.kappa.dot(d.array().cos().matrix()) + 0.5 * s.dot(params_.lambda * s);
}

double MultivariateVonMises::density(const Vec& theta) const { return std::exp(log_density(theta)); }

double mvm_logdensity(const Vec& theta, const MvMParams& params, bool normalized) {
    if (!normalized) {
        const Vec d = theta - params.mu;
        const Vec s = d.array().sin().matrix();
        return params.kappa.dot(d.array().cos().matrix()) + 0.5 * s.dot(params.lambda * s);
    }
    return MultivariateVonMises(params).log_density(theta);
}

// ---------------------------------------------------------------------------

JonesPewsey::JonesPewsey(const JPParams& params) : params_(params) {
    if (!(params.kappa >= 0.0)) throw InvalidArgument("Jones-Pewsey: kappa must be >= 0");
    if (!std::isfinite(params.psi)) throw InvalidArgument("Jones-Pewsey: psi must be finite");
    vm_limit_ = std::abs(params.psi) < kJpVmLimit;
    if (vm_limit_) {
        log_norm_ = std::log(kTwoPi * bessel_i0e(params.kappa)) + params.kappa;
        return;
    }
    // Adaptive periodic trapezoid: double the node count until the estimate settles.
    auto estimate = [&](int n) {
        const double h = kTwoPi / n;
        std::vector<double> v(static_cast<std::size_t>(n));
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            v[static_cast<std::size_t>(i)] = log_kernel(-kPi + i * h, nullptr);
            mx = std::max(mx, v[static_cast<std::size_t>(i)]);
        }
        double s = 0.0;
        for (double x : v) s += std::exp(x - mx);
        return mx + std::log(s * h);
    };
    double prev = estimate(64);
    for (int n = 128; n <= (1 << 22); n *= 2) {
        const double cur = estimate(n);
        if (std::abs(cur - prev) < 1e-12) {
            log_norm_ = cur;
            return;
        }
        prev = cur;
    }
    log_norm_ = prev;
}

double JonesPewsey::log_kernel(double theta, bool* clamped) const {
    const double c = std::cos(theta - params_.mu);
    if (vm_limit_) return params_.kappa * c;
    const double kp = params_.kappa * params_.psi;
    const double h = 0.5 * (theta - params_.mu);
    const double c2 = std::cos(h), s2 = std::sin(h);
    const double base = std::exp(kp) * c2 * c2 + std::exp(-kp) * s2 * s2;  // cosh + sinh cos
    if (!(base > 0.0)) {
        if (clamped) *clamped = true;
        return -std::numeric_limits<double>::infinity();
    }
    return std::log(base) / params_.psi;
}

JpValue JonesPewsey::evaluate(double theta) const {
    JpValue out;
    const double lk = log_kernel(theta, &out.clamped);
    out.value = out.clamped ? 0.0 : std::exp(lk - log_norm_);
    return out;
}

double JonesPewsey::log_density(double theta) const { return log_kernel(theta, nullptr) - log_norm_; }

double jp_density(double theta, const JPParams& params) { return JonesPewsey(params).density(theta); }

// ---------------------------------------------------------------------------

MixtureVonMises::MixtureVonMises(const MivMParams& params) : params_(params) {
    const Eigen::Index m = params.weights.size();
    if (m == 0 || params.means.rows() != m || params.kappa.rows() != m ||
        params.means.cols() != params.kappa.cols()) {
        throw InvalidArgument("mivM: dimension mismatch");
    }
    if ((params.weights.array() < 0.0).any() || std::abs(params.weights.sum() - 1.0) > 1e-12) {
        throw InvalidArgument("mivM: weights must lie on the simplex");
    }
    if ((params.kappa.array() < 0.0).any()) throw InvalidArgument("mivM: concentrations must be >= 0");
    log_norm_.resize(params.kappa.rows(), params.kappa.cols());
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index c = 0; c < params.kappa.cols(); ++c) {
            log_norm_(j, c) = std::log(kTwoPi) + log_bessel_i0(params.kappa(j, c));
        }
    }
    log_w_ = params.weights.array().log().matrix();
}

Vec MixtureVonMises::component_logs(const Vec& theta) const {
    const Eigen::Index m = params_.weights.size();
    Vec out(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double l = log_w_[j];
        for (Eigen::Index c = 0; c < theta.size(); ++c) {
            l += params_.kappa(j, c) * std::cos(theta[c] - params_.means(j, c)) - log_norm_(j, c);
        }
        out[j] = l;
    }
    return out;
}

double MixtureVonMises::log_density(const Vec& theta) const {
    if (theta.size() != params_.means.cols()) throw InvalidArgument("mivM: dimension mismatch");
    const Vec l = component_logs(theta);
    const double mx = l.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((l.array() - mx).exp().sum());
}

double mivm_density(const Vec& theta, const MivMParams& params) { return MixtureVonMises(params).density(theta); }

A1Inverse vm_moment_match(double sigma2) {
    if (!(sigma2 >= 0.0)) throw InvalidArgument("vm_moment_match: variance must be >= 0");
    return a1_inverse(std::exp(-0.5 * sigma2));
}

}  // namespace tdiff
