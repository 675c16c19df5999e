#include "tdiff/relative_efficiency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <regex>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tdiff/errors.hpp"

namespace tdiff {

namespace {

double parse_code(const std::string& s) {
    // "05" -> 0.5, "1" -> 1, "2" -> 2
    if (s.size() > 1 && s[0] == '0') return std::stod("0." + s.substr(1));
    return std::stod(s);
}

}  // namespace

ReScenario re_scenario(const std::string& name) {
    static const std::regex re(R"(wn([12])d_a(\d+)_s(\d+))");
    std::smatch m;
    if (!std::regex_match(name, m, re)) throw InvalidArgument("unknown scenario '" + name + "'");
    const int p = std::stoi(m[1]);
    const double a = parse_code(m[2]), s = parse_code(m[3]);
    if (!(a > 0.0) || !(s > 0.0)) throw InvalidArgument("scenario '" + name + "' needs positive alpha and sigma");
    ReScenario sc;
    sc.name = name;
    if (p == 1) {
        sc.truth = WnProcParams{Mat::Constant(1, 1, a), Vec::Constant(1, kPi / 2), Mat::Constant(1, 1, s * s), 1};
    } else {
        Vec mu(2);
        mu << kPi / 2, -kPi / 2;
        sc.truth = WnProcParams{validate_A_lemma(a, a, a / 2, 0.0, s, s), mu, s * s * Mat::Identity(2, 2), 1};
    }
    return sc;
}

std::vector<std::string> re_scenario_names() {
    return {"wn1d_a05_s1", "wn1d_a1_s1", "wn1d_a05_s2", "wn1d_a1_s2",
            "wn2d_a1_s1",  "wn2d_a2_s1", "wn2d_a1_s2",  "wn2d_a2_s2"};
}

ReComponents re_components(const ProcessParams& params) {
    ReComponents c;
    auto push = [&c](double v, std::string n, bool ang) {
        c.values.conservativeResize(c.values.size() + 1);
        c.values[c.values.size() - 1] = v;
        c.names.push_back(std::move(n));
        c.angular.push_back(ang);
    };
    std::visit(
        [&](const auto& pp) {
            using T = std::decay_t<decltype(pp)>;
            if constexpr (std::is_same_v<T, WnProcParams> || std::is_same_v<T, OuProcParams>) {
                const Eigen::Index p = pp.mu.size();
                if (p == 1) {
                    push(pp.A(0, 0), "alpha", false);
                } else if (p == 2) {
                    const double s1 = std::sqrt(pp.sigma(0, 0)), s2 = std::sqrt(pp.sigma(1, 1));
                    const double rho = pp.sigma(0, 1) / (s1 * s2);
                    push(pp.A(0, 0), "alpha1", false);
                    push(pp.A(1, 1), "alpha2", false);
                    push(pp.A(0, 1) * s2 / s1 - 0.5 * rho * (pp.A(1, 1) - pp.A(0, 0)), "alpha3", false);
                } else {
                    for (Eigen::Index i = 0; i < p; ++i) {
                        for (Eigen::Index j = 0; j < p; ++j) push(pp.A(i, j), "A" + std::to_string(i + 1) + std::to_string(j + 1), false);
                    }
                }
                for (Eigen::Index i = 0; i < p; ++i) push(pp.mu[i], p == 1 ? "mu" : "mu" + std::to_string(i + 1), true);
            } else if constexpr (std::is_same_v<T, MvmProcParams>) {
                const Eigen::Index p = pp.mu.size();
                for (Eigen::Index i = 0; i < p; ++i) {
                    for (Eigen::Index j = i; j < p; ++j) push(pp.A(i, j), "A" + std::to_string(i + 1) + std::to_string(j + 1), false);
                }
                for (Eigen::Index i = 0; i < p; ++i) push(pp.mu[i], "mu" + std::to_string(i + 1), true);
            } else if constexpr (std::is_same_v<T, JpProcParams>) {
                push(pp.alpha, "alpha", false);
                push(pp.psi, "psi", false);
                push(pp.mu, "mu", true);
            } else {
                for (Eigen::Index k = 0; k < pp.A.rows(); ++k) {
                    for (Eigen::Index d = 0; d < pp.A.cols(); ++d) {
                        push(pp.A(k, d), "alpha" + std::to_string(k + 1) + std::to_string(d + 1), false);
                    }
                }
                for (Eigen::Index k = 0; k < pp.means.rows(); ++k) {
                    for (Eigen::Index d = 0; d < pp.means.cols(); ++d) {
                        push(pp.means(k, d), "mu" + std::to_string(k + 1) + std::to_string(d + 1), true);
                    }
                }
            }
        },
        params);
    return c;
}

Vec component_mse(const Mat& est, const Vec& truth, const std::vector<bool>& angular) {
    if (est.cols() != truth.size() || static_cast<std::size_t>(truth.size()) != angular.size()) {
        throw InvalidArgument("component_mse: shape mismatch");
    }
    if (est.rows() == 0) throw InvalidArgument("component_mse: no estimates");
    Vec mse = Vec::Zero(truth.size());
    for (Eigen::Index r = 0; r < est.rows(); ++r) {
        for (Eigen::Index k = 0; k < truth.size(); ++k) {
            double e = est(r, k) - truth[k];
            if (angular[static_cast<std::size_t>(k)]) e = cmod(e);
            mse[k] += e * e;
        }
    }
    return mse / static_cast<double>(est.rows());
}

Mat component_re(const Mat& mse) {
    Mat re(mse.rows(), mse.cols());
    for (Eigen::Index k = 0; k < mse.cols(); ++k) {
        const double best = mse.col(k).minCoeff();
        for (Eigen::Index j = 0; j < mse.rows(); ++j) {
            // a component estimated exactly by every method counts as a tie
            re(j, k) = mse(j, k) == best ? 1.0 : best / mse(j, k);
        }
    }
    return re;
}

namespace {

Vec stationary_start(const DiffusionModel& model, std::uint64_t seed, double dt) {
    NormalStream ns(seed ^ 0x9e3779b97f4a7c15ULL);
    const Eigen::Index p = model.dim();
    if (model.family() == Family::wn) {
        const auto& w = std::get<WnProcParams>(model.params());
        const Mat S = wn_stationary_cov(w.A, w.sigma);
        Vec z(p);
        ns.fill(z);
        return cmod(Vec(w.mu + Eigen::LLT<Mat>(S).matrixL() * z));
    }
    // burn-in from the center
    const Trajectory b = euler_maruyama(model, cmod(model.center()), 20.0, dt, seed ^ 0x632be59bd9b4e019ULL);
    return b.point(b.size() - 1);
}

ProcessParams known_sigma_start(const Trajectory& traj, const ProcessParams& truth, Family fam,
                                const SmleOptions& sopt) {
    if (fam == Family::wn) {
        const auto& w = std::get<WnProcParams>(truth);
        const SmleResult s = smle(traj, Family::wn, sopt);
        const bool full = w.sigma.rows() == 2 && w.sigma(0, 1) != 0.0;
        WnProcParams st = assemble_wn_start(std::get<WNParams>(s.law), w.sigma, full);
        st.window = w.window;
        return st;
    }
    ProcessParams st = assemble_start(traj, fam, sopt);
    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            s.sigma = std::get<T>(truth).sigma;
        },
        st);
    return st;
}

}  // namespace

ReTable relative_efficiency(const std::vector<ReScenario>& scenarios, const ReOptions& opt) {
    if (opt.J < 2) throw InvalidArgument("relative_efficiency: J must be >= 2");
    if (opt.methods.empty()) throw InvalidArgument("relative_efficiency: no methods");
    if (!(opt.sim_dt > 0.0)) throw InvalidArgument("relative_efficiency: sim_dt must be > 0");
    FitOptions fopt = opt.fit;
    if (fopt.fixed.empty()) fopt.fixed = {"sigma"};

    ReTable table;
    table.J = opt.J;
    table.seed = opt.seed;
    table.sim_dt = opt.sim_dt;
    const std::size_t nm = opt.methods.size();

    for (const auto& sc : scenarios) {
        const DiffusionModel truth(sc.truth);
        const Family fam = truth.family();
        const ReComponents tc = re_components(sc.truth);
        table.component_names = tc.names;
        const Eigen::Index K = tc.values.size();
        if (sc.deltas.empty() || sc.N < 10) throw InvalidArgument("relative_efficiency: bad scenario " + sc.name);
        std::vector<Eigen::Index> strides;
        for (double d : sc.deltas) {
            const double s = d / opt.sim_dt;
            const double r = std::round(s);
            if (!(d > 0.0) || std::abs(s - r) > 1e-6 * std::max(1.0, s)) {
                throw InvalidArgument("relative_efficiency: delta must be a multiple of sim_dt");
            }
            strides.push_back(static_cast<Eigen::Index>(r));
        }
        const Eigen::Index max_stride = *std::max_element(strides.begin(), strides.end());
        const double t_end = static_cast<double>(sc.N * max_stride) * opt.sim_dt;
        const std::size_t nd = sc.deltas.size();

        // est[d][m] is J x K; ok[d][r] marks replicates where every method succeeded
        std::vector<std::vector<Mat>> est(nd, std::vector<Mat>(nm, Mat::Zero(opt.J, K)));
        std::vector<std::vector<char>> ok(nd, std::vector<char>(static_cast<std::size_t>(opt.J), 1));
        std::vector<std::vector<char>> conv(nd * nm, std::vector<char>(static_cast<std::size_t>(opt.J), 1));
        int nthreads = 1;
#ifdef _OPENMP
        nthreads = opt.threads > 0 ? opt.threads : omp_get_max_threads();
#endif
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
        for (int r = 0; r < opt.J; ++r) {
            const std::uint64_t seed = replicate_seed(opt.seed, static_cast<std::uint64_t>(r));
            Trajectory path;
            try {
                path = euler_maruyama(truth, stationary_start(truth, seed, opt.sim_dt), t_end, opt.sim_dt, seed);
            } catch (const std::exception&) {
                for (std::size_t d = 0; d < nd; ++d) ok[d][static_cast<std::size_t>(r)] = 0;
                continue;
            }
            for (std::size_t d = 0; d < nd; ++d) {
                Trajectory tr = subsample(path, strides[d]);
                tr.points.conservativeResize(sc.N + 1, Eigen::NoChange);
                try {
                    const ProcessParams start = known_sigma_start(tr, sc.truth, fam, fopt.smle);
                    for (std::size_t m = 0; m < nm; ++m) {
                        const EstimationResult res = fit(tr, fam, opt.methods[m], fopt, start);
                        if (!std::isfinite(res.loglik)) throw NumericalError("non-finite likelihood");
                        est[d][m].row(r) = re_components(res.params).values.transpose();
                        conv[d * nm + m][static_cast<std::size_t>(r)] = res.converged ? 1 : 0;
                    }
                } catch (const std::exception&) {
                    ok[d][static_cast<std::size_t>(r)] = 0;
                }
            }
        }

        for (std::size_t d = 0; d < nd; ++d) {
            std::vector<Eigen::Index> keep;
            for (int r = 0; r < opt.J; ++r) {
                if (ok[d][static_cast<std::size_t>(r)]) keep.push_back(r);
            }
            const int failures = opt.J - static_cast<int>(keep.size());
            if (keep.size() < 2) throw NumericalError("relative_efficiency: fewer than two successful replicates");
            Mat mse(static_cast<Eigen::Index>(nm), K);
            for (std::size_t m = 0; m < nm; ++m) {
                mse.row(static_cast<Eigen::Index>(m)) =
                    component_mse(est[d][m](keep, Eigen::all), tc.values, tc.angular).transpose();
            }
            const Mat re = component_re(mse);
            for (std::size_t m = 0; m < nm; ++m) {
                ReRow row;
                row.scenario = sc.name;
                row.delta = sc.deltas[d];
                row.method = to_string(opt.methods[m]);
                row.component_re = re.row(static_cast<Eigen::Index>(m)).transpose();
                row.component_mse = mse.row(static_cast<Eigen::Index>(m)).transpose();
                row.re = row.component_re.mean();
                row.failures = failures;
                for (Eigen::Index r : keep) {
                    if (!conv[d * nm + m][static_cast<std::size_t>(r)]) ++row.nonconverged;
                }
                table.rows.push_back(std::move(row));
            }
        }
    }
    return table;
}

void write_re_csv(const ReTable& t, std::ostream& out) {
    out << "scenario,delta,method,value\n";
    char buf[64];
    for (const auto& r : t.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.delta);
        out << r.scenario << ',' << buf << ',' << r.method << ',';
        std::snprintf(buf, sizeof buf, "%.17g", r.re);
        out << buf << '\n';
    }
}

nlohmann::json to_json(const ReTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        rows.push_back({{"scenario", r.scenario},
                        {"delta", r.delta},
                        {"method", r.method},
                        {"re", r.re},
                        {"component_re", std::vector<double>(r.component_re.begin(), r.component_re.end())},
                        {"component_mse", std::vector<double>(r.component_mse.begin(), r.component_mse.end())},
                        {"failures", r.failures},
                        {"nonconverged", r.nonconverged}});
    }
    return {{"rows", rows},
            {"components", t.component_names},
            {"J", t.J},
            {"seed", t.seed},
            {"sim_dt", t.sim_dt},
            {"angular_mse", "squared wrapped difference"}};
}

}  // namespace tdiff
