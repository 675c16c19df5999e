#include "tdiff/estimation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "tdiff/errors.hpp"
#include "tdiff/model_io.hpp"

namespace tdiff {

namespace {

constexpr double kLogFloor = -690.77552789821368;  // log(1e-300)

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

std::string to_string(LikKind k) {
    if (k == LikKind::PDE) return "PDE";
    return to_string(static_cast<TpdKind>(static_cast<int>(k)));
}

LikKind lik_kind_from_string(const std::string& name) {
    if (lower(name) == "pde") return LikKind::PDE;
    try {
        return static_cast<LikKind>(static_cast<int>(tpd_kind_from_string(name)));
    } catch (const InvalidArgument&) {
        throw InvalidArgument("unknown likelihood kind '" + name + "'");
    }
}

// ---------------------------------------------------------------------------
// High-frequency diffusion estimate

Mat sigma_hf(const Trajectory& traj) {
    if (traj.size() < 2) throw InvalidArgument("sigma_hf: need at least one increment");
    if (!(traj.delta > 0.0)) throw InvalidArgument("sigma_hf: delta must be > 0");
    const Eigen::Index p = traj.dim(), N = traj.size() - 1;
    Mat S = Mat::Zero(p, p);
    Vec d(p);
    for (Eigen::Index i = 1; i <= N; ++i) {
        for (Eigen::Index c = 0; c < p; ++c) d[c] = cmod(traj.points(i, c) - traj.points(i - 1, c));
        S.noalias() += d * d.transpose();
    }
    return S / (static_cast<double>(N) * traj.delta);
}

double sigma_hf_iso(const Trajectory& traj) {
    const Mat S = sigma_hf(traj);
    return S.trace() / static_cast<double>(S.rows());
}

// ---------------------------------------------------------------------------
// Circular k-means

namespace {

double circ_dist(const Mat& rows, Eigen::Index i, const Mat& centers, Eigen::Index k) {
    double d = 0.0;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) d += 1.0 - std::cos(rows(i, c) - centers(k, c));
    return d;
}

}  // namespace

KMeansResult circular_kmeans(const Mat& rows, int m, std::uint64_t seed) {
    const Eigen::Index N = rows.rows(), p = rows.cols();
    if (m < 1 || N < m) throw InvalidArgument("circular_kmeans: need 1 <= m <= number of points");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    KMeansResult res;
    res.centers.resize(m, p);
    res.centers.row(0) = rows.row(static_cast<Eigen::Index>(unif(rng) * static_cast<double>(N)) % N);
    Vec dmin = Vec::Constant(N, std::numeric_limits<double>::infinity());
    for (int k = 1; k < m; ++k) {
        for (Eigen::Index i = 0; i < N; ++i) dmin[i] = std::min(dmin[i], circ_dist(rows, i, res.centers, k - 1));
        const double total = dmin.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = unif(rng) * total;
            for (pick = 0; pick + 1 < N && u > dmin[pick]; ++pick) u -= dmin[pick];
        }
        res.centers.row(k) = rows.row(pick);
    }
    res.labels.assign(static_cast<std::size_t>(N), -1);
    for (int it = 0; it < 100; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < N; ++i) {
            int best = 0;
            double bd = circ_dist(rows, i, res.centers, 0);
            for (int k = 1; k < m; ++k) {
                const double d = circ_dist(rows, i, res.centers, k);
                if (d < bd) {
                    bd = d;
                    best = k;
                }
            }
            if (res.labels[static_cast<std::size_t>(i)] != best) {
                res.labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        Mat s = Mat::Zero(m, p), c = Mat::Zero(m, p);
        std::vector<int> count(static_cast<std::size_t>(m), 0);
        for (Eigen::Index i = 0; i < N; ++i) {
            const int k = res.labels[static_cast<std::size_t>(i)];
            ++count[static_cast<std::size_t>(k)];
            for (Eigen::Index d = 0; d < p; ++d) {
                s(k, d) += std::sin(rows(i, d));
                c(k, d) += std::cos(rows(i, d));
            }
        }
        for (int k = 0; k < m; ++k) {
            if (count[static_cast<std::size_t>(k)] == 0) continue;
            for (Eigen::Index d = 0; d < p; ++d) res.centers(k, d) = cmod(std::atan2(s(k, d), c(k, d)));
        }
        if (!changed) break;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Stationary MLE

namespace {

// Cholesky coordinates of an SPD matrix: log diagonal, then strict lower triangle by rows.
Vec encode_spd(const Mat& S) {
    const Eigen::Index p = S.rows();
    const Mat L = S.llt().matrixL();
    Vec z(p * (p + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < p; ++i) z[k++] = std::log(L(i, i));
    for (Eigen::Index i = 1; i < p; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) z[k++] = L(i, j);
    }
    return z;
}

Mat decode_spd(const Vec& z, Eigen::Index off, Eigen::Index p) {
    Mat L = Mat::Zero(p, p);
    Eigen::Index k = off;
    for (Eigen::Index i = 0; i < p; ++i) L(i, i) = std::exp(z[k++]);
    for (Eigen::Index i = 1; i < p; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) L(i, j) = z[k++];
    }
    return L * L.transpose();
}

double iid_loglik(const Trajectory& traj, const std::function<double(const Vec&)>& logf) {
    double l = 0.0;
    Vec x(traj.dim());
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        x = traj.points.row(i).transpose();
        l += std::max(logf(x), kLogFloor);
    }
    return l;
}

Vec mean_resultant(const Mat& rows, const Vec& mu) {
    Vec r(rows.cols());
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        r[c] = (rows.col(c).array() - mu[c]).cos().mean();
    }
    return r;
}

}  // namespace

SmleResult smle(const Trajectory& traj, Family family, const SmleOptions& opt) {
    if (traj.size() < 10) throw InvalidArgument("smle: need at least 10 observations");
    const Eigen::Index p = traj.dim();
    const Vec mu0 = circular_mean(traj.points).mean.coords();
    SmleResult res;
    OptimResult o;
    switch (family) {
        case Family::wn:
        case Family::ou: {
            Mat resid(traj.size(), p);
            for (Eigen::Index i = 0; i < traj.size(); ++i) {
                for (Eigen::Index c = 0; c < p; ++c) resid(i, c) = cmod(traj.points(i, c) - mu0[c]);
            }
            const Mat centered = resid.rowwise() - resid.colwise().mean();
            Mat S0 = centered.transpose() * centered / static_cast<double>(traj.size());
            S0 += 1e-8 * Mat::Identity(p, p);
            Vec z0(p + p * (p + 1) / 2);
            z0 << mu0, encode_spd(S0);
            auto decode = [p](const Vec& z) { return WNParams{cmod(Vec(z.head(p))), decode_spd(z, p, p)}; };
            o = nelder_mead(
                [&](const Vec& z) {
                    const WNParams w = decode(z);
                    return -iid_loglik(traj, [&](const Vec& x) { return wn_logpdf(x, w.mu, w.sigma); });
                },
                z0, opt.optimizer);
            res.law = decode(o.x);
            break;
        }
        case Family::vm: {
            const Vec R = mean_resultant(traj.points, mu0);
            Vec k0(p);
            for (Eigen::Index c = 0; c < p; ++c) k0[c] = std::max(a1_inverse(std::max(R[c], 0.0)).kappa, 1e-3);
            const bool inter = p == 2 && opt.mvm_interaction;
            Vec z0(2 * p + (inter ? 1 : 0));
            z0.head(p) = mu0;
            z0.segment(p, p) = k0.array().log().matrix();
            if (inter) z0[2 * p] = 0.0;
            auto decode = [p, inter](const Vec& z) {
                MvMParams m{cmod(Vec(z.head(p))), z.segment(p, p).array().exp().matrix(), Mat::Zero(p, p)};
                if (inter) m.lambda(0, 1) = m.lambda(1, 0) = z[2 * p];
                return m;
            };
            o = nelder_mead(
                [&](const Vec& z) {
                    const MultivariateVonMises d(decode(z));
                    return -iid_loglik(traj, [&](const Vec& x) { return d.log_density(x); });
                },
                z0, opt.optimizer);
            res.law = decode(o.x);
            break;
        }
        case Family::jp: {
            if (p != 1) throw InvalidArgument("smle: the JP family is one-dimensional");
            const double R = mean_resultant(traj.points, mu0)[0];
            Vec z0(3);
            z0 << mu0[0], std::log(std::max(a1_inverse(std::max(R, 0.0)).kappa, 1e-3)), 0.0;
            auto decode = [](const Vec& z) { return JPParams{cmod(z[0]), std::exp(z[1]), z[2]}; };
            o = nelder_mead(
                [&](const Vec& z) {
                    const JonesPewsey d(decode(z));
                    return -iid_loglik(traj, [&](const Vec& x) { return d.log_density(x[0]); });
                },
                z0, opt.optimizer);
            res.law = decode(o.x);
            break;
        }
        case Family::mivm: {
            const int m = opt.components;
            if (m < 1) throw InvalidArgument("smle: mixture needs at least one component");
            const KMeansResult km = circular_kmeans(traj.points, m);
            Mat K0(m, p);
            Vec w0(m);
            for (int k = 0; k < m; ++k) {
                std::vector<Eigen::Index> idx;
                for (Eigen::Index i = 0; i < traj.size(); ++i) {
                    if (km.labels[static_cast<std::size_t>(i)] == k) idx.push_back(i);
                }
                w0[k] = std::max<double>(static_cast<double>(idx.size()), 1.0);
                for (Eigen::Index c = 0; c < p; ++c) {
                    double r = 0.0;
                    for (Eigen::Index i : idx) r += std::cos(traj.points(i, c) - km.centers(k, c));
                    r = idx.empty() ? 0.0 : r / static_cast<double>(idx.size());
                    K0(k, c) = std::max(a1_inverse(std::max(r, 0.0)).kappa, 1e-2);
                }
            }
            w0 /= w0.sum();
            Vec z0(2 * m * p + m - 1);
            Eigen::Index q = 0;
            for (int k = 0; k < m; ++k) {
                for (Eigen::Index c = 0; c < p; ++c) z0[q++] = km.centers(k, c);
            }
            for (int k = 0; k < m; ++k) {
                for (Eigen::Index c = 0; c < p; ++c) z0[q++] = std::log(K0(k, c));
            }
            for (int k = 0; k + 1 < m; ++k) z0[q++] = std::log(w0[k] / w0[m - 1]);
            auto decode = [m, p](const Vec& z) {
                MivMParams mp{Mat(m, p), Mat(m, p), Vec(m)};
                Eigen::Index r = 0;
                for (int k = 0; k < m; ++k) {
                    for (Eigen::Index c = 0; c < p; ++c) mp.means(k, c) = cmod(z[r++]);
                }
                for (int k = 0; k < m; ++k) {
                    for (Eigen::Index c = 0; c < p; ++c) mp.kappa(k, c) = std::exp(z[r++]);
                }
                for (int k = 0; k + 1 < m; ++k) mp.weights[k] = z[r++];
                mp.weights[m - 1] = 0.0;
                mp.weights = (mp.weights.array() - mp.weights.maxCoeff()).exp().matrix();
                mp.weights /= mp.weights.sum();
                return mp;
            };
            o = nelder_mead(
                [&](const Vec& z) {
                    const MixtureVonMises d(decode(z));
                    return -iid_loglik(traj, [&](const Vec& x) { return d.log_density(x); });
                },
                z0, opt.optimizer);
            res.law = decode(o.x);
            break;
        }
    }
    res.loglik = -o.f;
    res.converged = o.converged;
    res.evals = o.evals;
    return res;
}

// ---------------------------------------------------------------------------
// Starting values

WnProcParams assemble_wn_start(const WNParams& st, const Mat& sigma_hat, bool full_sigma) {
    const Eigen::Index p = st.mu.size();
    Eigen::LLT<Mat> llt(st.sigma);
    if (llt.info() != Eigen::Success) throw InvalidArgument("assemble_wn_start: stationary covariance is singular");
    WnProcParams w;
    w.mu = cmod(st.mu);
    w.sigma = sigma_hat;
    if (p == 2 && !full_sigma) {
        w.sigma(0, 1) = w.sigma(1, 0) = 0.0;
    }
    if (p != 2) {
        w.A = 0.5 * w.sigma * llt.solve(Mat::Identity(p, p));
        return w;
    }
    const double s1 = std::sqrt(w.sigma(0, 0)), s2 = std::sqrt(w.sigma(1, 1));
    const double rho = w.sigma(0, 1) / (s1 * s2);
    const Mat A = 0.5 * w.sigma * llt.solve(Mat::Identity(2, 2));
    const double a1 = A(0, 0), a2 = A(1, 1);
    double a3 = A(0, 1) * s2 / s1 - 0.5 * rho * (a2 - a1);
    for (int it = 0; it < 2000; ++it) {
        try {
            w.A = validate_A_lemma(a1, a2, a3, rho, s1, s2);
            return w;
        } catch (const InvalidArgument&) {
            a3 *= 0.9;
        }
    }
    throw InvalidArgument("assemble_wn_start: no feasible drift matrix");
}

WnProcParams assemble_wn_start(const Trajectory& traj, bool full_sigma) {
    const SmleResult s = smle(traj, Family::wn);
    return assemble_wn_start(std::get<WNParams>(s.law), sigma_hf(traj), full_sigma);
}

ProcessParams assemble_start(const Trajectory& traj, Family family, const SmleOptions& opt) {
    const SmleResult s = smle(traj, family, opt);
    switch (family) {
        case Family::wn:
            return assemble_wn_start(std::get<WNParams>(s.law), sigma_hf(traj));
        case Family::ou: {
            const WnProcParams w = assemble_wn_start(std::get<WNParams>(s.law), sigma_hf(traj));
            return OuProcParams{w.A, w.mu, w.sigma};
        }
        case Family::vm: {
            const auto& m = std::get<MvMParams>(s.law);
            const double s2 = sigma_hf_iso(traj);
            MvmProcParams v;
            v.mu = m.mu;
            v.sigma = std::sqrt(s2);
            v.A = Mat(m.kappa.asDiagonal()) * (0.5 * s2) - 0.5 * s2 * m.lambda;
            while (Eigen::LLT<Mat>(v.A).info() != Eigen::Success) {
                const Vec d = v.A.diagonal();
                v.A *= 0.9;
                v.A.diagonal() = d;
            }
            return v;
        }
        case Family::jp: {
            const auto& j = std::get<JPParams>(s.law);
            const double s2 = sigma_hf_iso(traj);
            return JpProcParams{j.mu, 0.5 * j.kappa * s2, j.psi / s2, std::sqrt(s2)};
        }
        case Family::mivm: {
            const auto& m = std::get<MivMParams>(s.law);
            const double s2 = sigma_hf_iso(traj);
            return MivmProcParams{m.means, 0.5 * s2 * m.kappa, m.weights, std::sqrt(s2)};
        }
    }
    throw InvalidArgument("unreachable family");
}

// ---------------------------------------------------------------------------
// Likelihoods

LoglikValue approx_loglik(const Trajectory& traj, const DiffusionModel& model, LikKind kind, const LikOptions& opt) {
    if (traj.dim() != model.dim()) throw InvalidArgument("loglik: trajectory and model dimensions differ");
    LoglikValue v;
    auto add = [&v](double l) {
        if (std::isnan(l)) throw NumericalError("loglik: NaN transition density");
        if (l < kLogFloor) {
            l = kLogFloor;
            ++v.floored;
        }
        v.value += l;
    };
    if (kind == LikKind::S) {
        for (Eigen::Index i = 0; i < traj.size(); ++i) add(model.stationary_log_density(traj.point(i)));
        return v;
    }
    if (kind == LikKind::PDE) {
        LoglikOptions lo = opt.pde;
        lo.include_initial = opt.include_initial;
        const LoglikResult r = loglik_pde(traj, model, lo);
        v.value = r.value;
        v.floored = r.floored;
        return v;
    }
    const TpdApproximation approx(model, static_cast<TpdKind>(static_cast<int>(kind)), traj.delta);
    Vec prev = traj.point(0), cur(traj.dim());
    for (Eigen::Index i = 1; i < traj.size(); ++i) {
        cur = traj.points.row(i).transpose();
        add(approx.log_density(cur, prev));
        prev.swap(cur);
    }
    if (opt.include_initial) add(model.stationary_log_density(traj.point(0)));
    return v;
}

// ---------------------------------------------------------------------------
// Parameter transforms

namespace {

double safe_log(double x) { return std::log(std::max(x, 1e-12)); }

double clamp_ratio(double r) {
    const double lim = 1.0 - 1e-12;
    return std::max(-lim, std::min(lim, r));
}

}  // namespace

ParamCodec make_codec(Family family, const ProcessParams& shape, bool full_sigma) {
    ParamCodec c;
    switch (family) {
        case Family::wn:
        case Family::ou: {
            const bool ou = family == Family::ou;
            const Mat& A0 = ou ? std::get<OuProcParams>(shape).A : std::get<WnProcParams>(shape).A;
            const Eigen::Index p = A0.rows();
            const int window = ou ? 1 : std::get<WnProcParams>(shape).window;
            auto pack = [ou, window](Mat A, Vec mu, Mat S) -> ProcessParams {
                if (ou) return OuProcParams{std::move(A), std::move(mu), std::move(S)};
                return WnProcParams{std::move(A), cmod(mu), std::move(S), window};
            };
            auto unpack = [ou](const ProcessParams& pp, Mat& A, Vec& mu, Mat& S) {
                if (ou) {
                    const auto& o = std::get<OuProcParams>(pp);
                    A = o.A, mu = o.mu, S = o.sigma;
                } else {
                    const auto& w = std::get<WnProcParams>(pp);
                    A = w.A, mu = w.mu, S = w.sigma;
                }
            };
            if (p == 1) {
                c.groups = {"mu", "alpha", "sigma"};
                c.encode = [unpack](const ProcessParams& pp) {
                    Mat A, S;
                    Vec mu;
                    unpack(pp, A, mu, S);
                    Vec z(3);
                    z << mu[0], safe_log(A(0, 0)), 0.5 * safe_log(S(0, 0));
                    return z;
                };
                c.decode = [pack](const Vec& z) {
                    const double s = std::exp(z[2]);
                    return pack(Mat::Constant(1, 1, std::exp(z[1])), Vec::Constant(1, z[0]),
                                Mat::Constant(1, 1, s * s));
                };
            } else if (p == 2) {
                c.groups = {"mu", "mu", "alpha", "alpha", "alpha3", "sigma", "sigma"};
                if (full_sigma) c.groups.push_back("rho");
                c.encode = [unpack, full_sigma](const ProcessParams& pp) {
                    Mat A, S;
                    Vec mu;
                    unpack(pp, A, mu, S);
                    const double s1 = std::sqrt(S(0, 0)), s2 = std::sqrt(S(1, 1));
                    const double rho = full_sigma ? S(0, 1) / (s1 * s2) : 0.0;
                    const double a1 = A(0, 0), a2 = A(1, 1);
                    const double a3 = A(0, 1) * s2 / s1 - 0.5 * rho * (a2 - a1);
                    const double bound = 0.25 * rho * rho * (a1 - a2) * (a1 - a2) + a1 * a2;
                    Vec z(8);
                    z << mu[0], mu[1], safe_log(a1), safe_log(a2), std::atanh(clamp_ratio(a3 / std::sqrt(bound))),
                        std::log(s1), std::log(s2), (full_sigma ? std::atanh(clamp_ratio(rho)) : 0.0);
                    return Vec(z.head(full_sigma ? 8 : 7));
                };
                c.decode = [pack, full_sigma](const Vec& z) {
                    const double a1 = std::exp(z[2]), a2 = std::exp(z[3]);
                    const double s1 = std::exp(z[5]), s2 = std::exp(z[6]);
                    const double rho = full_sigma ? std::tanh(z[7]) : 0.0;
                    const double bound = 0.25 * rho * rho * (a1 - a2) * (a1 - a2) + a1 * a2;
                    const double a3 = std::sqrt(bound) * std::tanh(z[4]);
                    Vec mu(2);
                    mu << z[0], z[1];
                    return pack(validate_A_lemma(a1, a2, a3, rho, s1, s2), mu, lemma_sigma(s1, s2, rho));
                };
            } else {
                throw InvalidArgument("fit: the WN family is supported for p <= 2");
            }
            break;
        }
        case Family::vm: {
            const Eigen::Index p = std::get<MvmProcParams>(shape).mu.size();
            if (p > 2) throw InvalidArgument("fit: the vM family is supported for p <= 2");
            if (p == 1) {
                c.groups = {"mu", "alpha", "sigma"};
            } else {
                c.groups = {"mu", "mu", "alpha", "alpha", "alpha3", "sigma"};
            }
            c.encode = [p](const ProcessParams& pp) {
                const auto& v = std::get<MvmProcParams>(pp);
                Vec z(p == 1 ? 3 : 6);
                if (p == 1) {
                    z << v.mu[0], safe_log(v.A(0, 0)), std::log(v.sigma);
                } else {
                    const double r = v.A(0, 1) / std::sqrt(v.A(0, 0) * v.A(1, 1));
                    z << v.mu[0], v.mu[1], safe_log(v.A(0, 0)), safe_log(v.A(1, 1)), std::atanh(clamp_ratio(r)),
                        std::log(v.sigma);
                }
                return z;
            };
            c.decode = [p](const Vec& z) -> ProcessParams {
                MvmProcParams v;
                if (p == 1) {
                    v.mu = Vec::Constant(1, cmod(z[0]));
                    v.A = Mat::Constant(1, 1, std::exp(z[1]));
                    v.sigma = std::exp(z[2]);
                } else {
                    v.mu = cmod(Vec(z.head(2)));
                    const double a1 = std::exp(z[2]), a2 = std::exp(z[3]);
                    v.A.resize(2, 2);
                    v.A << a1, 0.0, 0.0, a2;
                    v.A(0, 1) = v.A(1, 0) = std::sqrt(a1 * a2) * std::tanh(z[4]);
                    v.sigma = std::exp(z[5]);
                }
                return v;
            };
            break;
        }
        case Family::jp: {
            c.groups = {"mu", "alpha", "psi", "sigma"};
            c.encode = [](const ProcessParams& pp) {
                const auto& j = std::get<JpProcParams>(pp);
                Vec z(4);
                z << j.mu, safe_log(j.alpha), j.psi, std::log(j.sigma);
                return z;
            };
            c.decode = [](const Vec& z) -> ProcessParams {
                return JpProcParams{cmod(z[0]), std::exp(z[1]), z[2], std::exp(z[3])};
            };
            break;
        }
        case Family::mivm: {
            const auto& s = std::get<MivmProcParams>(shape);
            const Eigen::Index m = s.means.rows(), p = s.means.cols();
            for (Eigen::Index i = 0; i < m * p; ++i) c.groups.push_back("mu");
            for (Eigen::Index i = 0; i < m * p; ++i) c.groups.push_back("alpha");
            for (Eigen::Index i = 0; i + 1 < m; ++i) c.groups.push_back("weights");
            c.groups.push_back("sigma");
            c.encode = [m, p](const ProcessParams& pp) {
                const auto& v = std::get<MivmProcParams>(pp);
                Vec z(2 * m * p + m);
                Eigen::Index q = 0;
                for (Eigen::Index k = 0; k < m; ++k) {
                    for (Eigen::Index d = 0; d < p; ++d) z[q++] = v.means(k, d);
                }
                for (Eigen::Index k = 0; k < m; ++k) {
                    for (Eigen::Index d = 0; d < p; ++d) z[q++] = safe_log(v.A(k, d));
                }
                for (Eigen::Index k = 0; k + 1 < m; ++k) {
                    z[q++] = safe_log(v.weights[k]) - safe_log(v.weights[m - 1]);
                }
                z[q] = std::log(v.sigma);
                return z;
            };
            c.decode = [m, p](const Vec& z) -> ProcessParams {
                MivmProcParams v{Mat(m, p), Mat(m, p), Vec(m), 1.0};
                Eigen::Index q = 0;
                for (Eigen::Index k = 0; k < m; ++k) {
                    for (Eigen::Index d = 0; d < p; ++d) v.means(k, d) = cmod(z[q++]);
                }
                for (Eigen::Index k = 0; k < m; ++k) {
                    for (Eigen::Index d = 0; d < p; ++d) v.A(k, d) = std::exp(z[q++]);
                }
                for (Eigen::Index k = 0; k + 1 < m; ++k) v.weights[k] = z[q++];
                v.weights[m - 1] = 0.0;
                v.weights = (v.weights.array() - v.weights.maxCoeff()).exp().matrix();
                v.weights /= v.weights.sum();
                v.sigma = std::exp(z[q]);
                return v;
            };
            break;
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Fit

EstimationResult fit(const Trajectory& traj, Family family, LikKind kind, const FitOptions& opt,
                     const std::optional<ProcessParams>& start) {
    const auto t0 = std::chrono::steady_clock::now();
    traj.validate();
    static const std::set<std::string> known = {"alpha", "alpha3", "mu", "sigma", "rho", "psi", "weights"};
    for (const auto& g : opt.fixed) {
        if (!known.count(g)) throw InvalidArgument("fit: unknown parameter group '" + g + "'");
    }
    if (kind == LikKind::WOU && family != Family::wn && family != Family::ou) {
        throw InvalidArgument("fit: the WOU likelihood needs the WN family");
    }
    if ((kind == LikKind::WOU || kind == LikKind::PDE) && traj.dim() > 2) {
        throw InvalidArgument("fit: WOU and PDE likelihoods need p <= 2");
    }
    const ProcessParams st = start ? *start : assemble_start(traj, family, opt.smle);
    const DiffusionModel st_model(st);
    if (st_model.family() != family) throw InvalidArgument("fit: starting values belong to another family");
    if (st_model.dim() != traj.dim()) throw InvalidArgument("fit: trajectory dimension does not match the family");

    const ParamCodec codec = make_codec(family, st, opt.wn_full_sigma);
    const Vec z0 = codec.encode(st);
    std::vector<Eigen::Index> free_idx;
    for (std::size_t i = 0; i < codec.groups.size(); ++i) {
        if (!opt.fixed.count(codec.groups[i])) free_idx.push_back(static_cast<Eigen::Index>(i));
    }
    auto expand = [&](const Vec& zf) {
        Vec z = z0;
        for (std::size_t i = 0; i < free_idx.size(); ++i) z[free_idx[i]] = zf[static_cast<Eigen::Index>(i)];
        return z;
    };
    auto objective = [&](const Vec& zf) {
        const DiffusionModel m(codec.decode(expand(zf)));
        return -approx_loglik(traj, m, kind, opt.lik).value;
    };
    Vec zf0(static_cast<Eigen::Index>(free_idx.size()));
    for (std::size_t i = 0; i < free_idx.size(); ++i) zf0[static_cast<Eigen::Index>(i)] = z0[free_idx[i]];

    const double f_start = objective(zf0);
    const OptimResult o = nelder_mead(objective, zf0, opt.optimizer);

    EstimationResult r;
    r.start = st;
    r.params = codec.decode(expand(o.x));
    const LoglikValue best = approx_loglik(traj, DiffusionModel(r.params), kind, opt.lik);
    r.loglik = best.value;
    r.floored = best.floored;
    r.iterations = o.iterations;
    r.evals = o.evals + 1;
    r.converged = o.converged && std::isfinite(r.loglik) && -r.loglik <= f_start;
    r.kind = kind;
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

nlohmann::json to_json(const EstimationResult& r) {
    nlohmann::json j;
    j["params"] = model_to_json(DiffusionModel(r.params));
    j["start"] = model_to_json(DiffusionModel(r.start));
    j["loglik"] = r.loglik;
    j["iterations"] = r.iterations;
    j["evals"] = r.evals;
    j["converged"] = r.converged;
    j["likelihood_kind"] = to_string(r.kind);
    j["wall_time"] = r.wall_time;
    j["floored_terms"] = r.floored;
    return j;
}

}  // namespace tdiff
