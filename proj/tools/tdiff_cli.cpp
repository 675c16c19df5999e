#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tdiff/errors.hpp"
#include "tdiff/estimation.hpp"
#include "tdiff/kl.hpp"
#include "tdiff/model_io.hpp"
#include "tdiff/nonparametric.hpp"
#include "tdiff/pde.hpp"
#include "tdiff/relative_efficiency.hpp"
#include "tdiff/simulate.hpp"
#include "tdiff/tpd.hpp"

namespace fs = std::filesystem;
using namespace tdiff;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string out_dir;
    bool force = false;
    int threads = 0;
    std::vector<std::string> argv;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw UsageError("not a number: '" + s + "'");
    }
    if (pos != s.size()) throw UsageError("not a number: '" + s + "'");
    return v;
}

/// "a:b:n" gives n equally spaced values from a to b; otherwise a comma list.
std::vector<double> parse_times(const std::string& s) {
    const auto parts = split(s, ':');
    if (parts.size() == 3) {
        const double a = parse_double(parts[0]), b = parse_double(parts[1]);
        const int n = static_cast<int>(parse_double(parts[2]));
        if (n < 1) throw UsageError("time grid needs at least one point");
        std::vector<double> t;
        for (int i = 0; i < n; ++i) t.push_back(n == 1 ? b : a + (b - a) * i / (n - 1));
        return t;
    }
    std::vector<double> t;
    for (const auto& x : split(s, ',')) t.push_back(parse_double(x));
    if (t.empty()) throw UsageError("empty list: '" + s + "'");
    return t;
}

Vec parse_vec(const std::string& s) {
    const auto parts = split(s, ',');
    Vec v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(parts[i]);
    return v;
}

fs::path output_path(const Common& c, const std::string& name) {
    fs::path dir = c.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("TDIFF_OUTPUT_DIR");
        dir = env && *env ? env : ".";
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create output directory '" + dir.string() + "'");
    const fs::path p = dir / name;
    if (fs::exists(p) && !c.force) throw UsageError("refusing to overwrite '" + p.string() + "' (use --force)");
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw UsageError("cannot write '" + p.string() + "'");
    return out;
}

void write_json(const Common& c, const std::string& name, const json& j) {
    auto out = open_out(output_path(c, name));
    out << j.dump(2) << '\n';
}

json meta(const Common& c, const std::string& command, json config) {
    config["threads"] = c.threads;
    return {{"command", command}, {"version", kVersion}, {"argv", c.argv}, {"config", std::move(config)}};
}

DiffusionModel load(const std::string& path) {
    if (path.empty()) throw UsageError("--model is required");
    return load_model(path);
}

Trajectory load_traj(const std::string& path) {
    if (path.empty()) throw UsageError("--data is required");
    if (!fs::exists(path)) throw UsageError("cannot open trajectory file '" + path + "'");
    return read_trajectory_csv(path);
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string model, output = "trajectory.csv", theta0;
    double t_end = 10.0, dt = 0.001, delta = 0.0;
    std::uint64_t seed = 1;
};

int cmd_simulate(const Common& c, const SimulateArgs& a) {
    const DiffusionModel m = load(a.model);
    const Vec th0 = a.theta0.empty() ? cmod(m.center()) : cmod(parse_vec(a.theta0));
    Trajectory tr = euler_maruyama(m, th0, a.t_end, a.dt, a.seed);
    if (a.delta > 0.0) {
        const double s = a.delta / a.dt;
        if (std::abs(s - std::round(s)) > 1e-9 * s) throw UsageError("--delta must be a multiple of --dt");
        tr = subsample(tr, static_cast<Eigen::Index>(std::round(s)));
    }
    const fs::path p = output_path(c, a.output);
    const fs::path mp = output_path(c, a.output + ".meta.json");
    write_trajectory_csv(tr, p.string());
    auto out = open_out(mp);
    out << meta(c, "simulate",
                {{"model", model_to_json(m)}, {"t_end", a.t_end}, {"dt", a.dt}, {"delta", a.delta}, {"seed", a.seed},
                 {"theta0", to_json(th0)}, {"rows", tr.size()}})
               .dump(2)
        << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
    std::string data, family, likelihood = "wou", output = "fit.json", start;
    std::vector<std::string> fix;
    int components = 2;
    bool full_sigma = false, no_initial = false;
    int max_evals = 2000, restarts = 1;
    Eigen::Index Mx = 500, Mxy = 120;
    double sigma0 = 0.1;
};

int cmd_fit(const Common& c, const FitArgs& a) {
    const Trajectory tr = load_traj(a.data);
    if (a.family.empty()) throw UsageError("--family is required");
    Family fam;
    LikKind kind;
    try {
        fam = family_from_string(a.family);
        kind = lik_kind_from_string(a.likelihood);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    FitOptions fo;
    for (const auto& f : a.fix) {
        const auto eq = f.find('=');
        const std::string group = f.substr(0, eq);
        if (eq != std::string::npos) {
            const std::string how = f.substr(eq + 1);
            if (how != "smle" && how != "start") throw UsageError("--fix " + f + ": only GROUP, GROUP=smle, GROUP=start");
        }
        fo.fixed.insert(group);
    }
    fo.wn_full_sigma = a.full_sigma;
    fo.smle.components = a.components;
    fo.optimizer.max_evals = a.max_evals;
    fo.optimizer.restarts = a.restarts;
    fo.lik.include_initial = !a.no_initial;
    fo.lik.pde.Mx = a.Mx;
    fo.lik.pde.Mxy = a.Mxy;
    fo.lik.pde.pde.sigma0 = a.sigma0;
    std::optional<ProcessParams> start;
    if (!a.start.empty()) start = load(a.start).params();
    const EstimationResult r = fit(tr, fam, kind, fo, start);
    json j = to_json(r);
    std::cerr << "wall time " << r.wall_time << " s\n";
    j.erase("wall_time");  // kept off disk so reruns are byte-identical
    std::vector<std::string> fixed(fo.fixed.begin(), fo.fixed.end());
    j["meta"] = meta(c, "fit",
                     {{"data", a.data}, {"family", to_string(fam)}, {"likelihood", to_string(kind)}, {"fixed", fixed},
                      {"components", a.components}, {"full_sigma", a.full_sigma},
                      {"include_initial", !a.no_initial}, {"max_evals", a.max_evals}, {"restarts", a.restarts},
                      {"Mx", a.Mx}, {"Mxy", a.Mxy}, {"sigma0", a.sigma0},
                      {"seed", tr.seed ? json(*tr.seed) : json(nullptr)}});
    write_json(c, a.output, j);
    return r.converged ? 0 : 3;
}

// ---------------------------------------------------------------------------

struct TpdArgs {
    std::string model, method = "WOU", theta_s, output = "tpd.csv";
    double delta = 0.5, sigma0 = 0.1, dt = 0.01;
    Eigen::Index M = 500;
};

int cmd_tpd(const Common& c, const TpdArgs& a) {
    const DiffusionModel m = load(a.model);
    const Eigen::Index p = m.dim();
    if (p > 2) throw UsageError("tpd: grids are available for p <= 2");
    const fs::path path = output_path(c, a.output);
    const bool pde = a.method == "PDE" || a.method == "pde";
    if (pde && p == 1) {
        PdeOptions po;
        po.sigma0 = a.sigma0;
        po.dt_target = a.dt;
        const Grid1D g(a.M);
        auto out = open_out(path);
        write_tpd_csv(tpd_matrix(m, a.delta, g, po), g, out);
    } else {
        if (pde) throw UsageError("tpd: the PDE matrix is written for p = 1; use `pde` for 2D solutions");
        TpdKind kind;
        try {
            kind = tpd_kind_from_string(a.method);
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
        const Vec src = a.theta_s.empty() ? cmod(m.center()) : cmod(parse_vec(a.theta_s));
        if (src.size() != p) throw UsageError("--theta-s has the wrong dimension");
        const TpdApproximation ap(m, kind, a.delta);
        const Mat grid = torus_grid(p, a.M);
        auto out = open_out(path);
        out << (p == 1 ? "theta,density\n" : "theta1,theta2,density\n");
        for (Eigen::Index i = 0; i < grid.rows(); ++i) {
            for (Eigen::Index d = 0; d < p; ++d) out << fmt(grid(i, d)) << ',';
            out << fmt(ap.density(grid.row(i).transpose(), src)) << '\n';
        }
    }
    write_json(c, a.output + ".meta.json",
               meta(c, "tpd",
                    {{"model", model_to_json(m)}, {"method", a.method}, {"delta", a.delta}, {"M", a.M},
                     {"sigma0", a.sigma0}, {"dt", a.dt}, {"theta_s", a.theta_s}}));
    return 0;
}

// ---------------------------------------------------------------------------

struct PdeArgs {
    std::string model, t = "1", theta0, output = "pde.csv";
    Eigen::Index Mx = 500, My = 0;
    double sigma0 = 0.1, dt = 0.01;
};

int cmd_pde(const Common& c, const PdeArgs& a) {
    const DiffusionModel m = load(a.model);
    const std::vector<double> times = parse_times(a.t);
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] > 0.0) || (k > 0 && !(times[k] > times[k - 1]))) {
            throw UsageError("--t must be positive and increasing");
        }
    }
    const Vec th0 = a.theta0.empty() ? cmod(m.center()) : cmod(parse_vec(a.theta0));
    if (th0.size() != m.dim()) throw UsageError("--theta0 has the wrong dimension");
    const fs::path path = output_path(c, a.output);
    PdeSolution all;
    const double tmax = times.back();
    const Eigen::Index Mt = pde_steps(tmax, a.dt);
    const double dt = tmax / static_cast<double>(Mt);
    // snapshots at the steps closest to the requested times
    std::vector<Eigen::Index> want;
    for (double t : times) want.push_back(std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(t / dt))));
    auto out = open_out(path);
    if (m.dim() == 1) {
        const Grid1D g(a.Mx);
        const Vec b = drift_nodes_1d(m, g);
        const Vec s2 = Vec::Constant(g.M, m.diffusion()(0, 0));
        const CnSolver1D solver(b, s2, g.dx, dt);
        Vec u = initial_condition(th0[0], a.sigma0, g).u, scratch(g.M);
        std::size_t next = 0;
        for (Eigen::Index n = 1; n <= Mt && next < want.size(); ++n) {
            solver.step(u.data(), scratch.data());
            while (next < want.size() && want[next] == n) {
                all.times.push_back(static_cast<double>(n) * dt);
                all.u.push_back(u);
                ++next;
            }
        }
        write_pde_csv(all, g, out);
    } else if (m.dim() == 2) {
        const Grid2D g(a.Mx, a.My > 0 ? a.My : a.Mx);
        Vec bx, by;
        drift_nodes_2d(m, g, bx, by);
        const Mat& S = m.diffusion();
        const Eigen::Index n2 = g.size();
        const AdiSolver2D solver(g, bx, by, Vec::Constant(n2, S(0, 0)), Vec::Constant(n2, S(1, 1)),
                                 Vec::Constant(n2, S(0, 1)), dt);
        Vec u = initial_condition(th0, a.sigma0, g).u;
        std::size_t next = 0;
        for (Eigen::Index n = 1; n <= Mt && next < want.size(); ++n) {
            solver.step(u);
            while (next < want.size() && want[next] == n) {
                all.times.push_back(static_cast<double>(n) * dt);
                all.u.push_back(u);
                ++next;
            }
        }
        write_pde_csv(all, g, out);
    } else {
        throw UsageError("pde: dimension must be 1 or 2");
    }
    write_json(c, a.output + ".meta.json",
               meta(c, "pde",
                    {{"model", model_to_json(m)}, {"t", times}, {"Mx", a.Mx}, {"My", a.My > 0 ? a.My : a.Mx},
                     {"sigma0", a.sigma0}, {"dt", dt}, {"theta0", to_json(th0)}}));
    return 0;
}

// ---------------------------------------------------------------------------

struct KlArgs {
    std::string model, methods = "S,E,SO,WOU", t = "0.05,0.2,0.5,1", output = "kl";
    KlOptions opt;
};

int cmd_kl(const Common& c, KlArgs a) {
    const DiffusionModel m = load(a.model);
    std::vector<KlMethod> methods;
    for (const auto& s : split(a.methods, ',')) {
        try {
            methods.push_back(KlMethod::parse(s));
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
    }
    const std::vector<double> times = parse_times(a.t);
    const fs::path csv = output_path(c, a.output + ".csv");
    const fs::path js = output_path(c, a.output + ".json");
    a.opt.parallel = true;
    const auto curves = kl_curves(m, methods, times, a.opt);
    {
        auto out = open_out(csv);
        write_kl_csv(curves, out);
    }
    json arr = json::array();
    for (const auto& k : curves) arr.push_back(to_json(k));
    auto out = open_out(js);
    out << json{{"curves", arr},
                {"meta", meta(c, "kl",
                              {{"model", model_to_json(m)}, {"methods", a.methods}, {"t", times},
                               {"sigma0", a.opt.sigma0}, {"Mx", a.opt.Mx}, {"Mxy", a.opt.Mxy},
                               {"sources_1d", a.opt.sources_1d}, {"sources_2d", a.opt.sources_2d}, {"dt", a.opt.dt}})}}
               .dump(2)
        << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct ReArgs {
    std::string scenarios = "wn1d_a05_s2", deltas = "0.05,0.2,0.5,1.0", methods = "E,SO,WOU", output = "re";
    int J = 200, N = 250;
    std::uint64_t seed = 1;
    double sim_dt = 0.001;
};

int cmd_re(const Common& c, const ReArgs& a) {
    ReOptions o;
    o.J = a.J;
    o.seed = a.seed;
    o.sim_dt = a.sim_dt;
    o.threads = c.threads;
    o.methods.clear();
    std::vector<ReScenario> sc;
    try {
        for (const auto& s : split(a.methods, ',')) o.methods.push_back(lik_kind_from_string(s));
        for (const auto& s : split(a.scenarios, ',')) {
            ReScenario r = re_scenario(s);
            r.deltas = parse_times(a.deltas);
            r.N = a.N;
            sc.push_back(std::move(r));
        }
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const fs::path csv = output_path(c, a.output + ".csv");
    const fs::path js = output_path(c, a.output + ".json");
    const ReTable t = relative_efficiency(sc, o);
    {
        auto out = open_out(csv);
        write_re_csv(t, out);
    }
    json j = to_json(t);
    j["meta"] = meta(c, "re",
                     {{"scenarios", a.scenarios}, {"deltas", a.deltas}, {"methods", a.methods}, {"J", a.J},
                      {"N", a.N}, {"seed", a.seed}, {"sim_dt", a.sim_dt}});
    auto out = open_out(js);
    out << j.dump(2) << '\n';
    // table layout: one line per delta, one column per method
    std::cout << "scenario,delta";
    for (auto k : o.methods) std::cout << ',' << to_string(k);
    std::cout << '\n';
    for (std::size_t i = 0; i < t.rows.size(); i += o.methods.size()) {
        std::printf("%s,%.2f", t.rows[i].scenario.c_str(), t.rows[i].delta);
        for (std::size_t m = 0; m < o.methods.size(); ++m) std::printf(",%.4f", t.rows[i + m].re);
        std::printf("\n");
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct NpArgs {
    std::string data, model, output = "np.csv";
    Eigen::Index n = 100;
    double h = 0.0, h_kde = 0.3;
};

int cmd_np(const Common& c, const NpArgs& a) {
    const Trajectory tr = load_traj(a.data);
    const Eigen::Index p = tr.dim();
    if (p > 2) throw UsageError("np: dimension must be 1 or 2");
    const fs::path path = output_path(c, a.output);
    const Mat grid = torus_grid(p, a.n);
    Vec hd, hs;
    json cvinfo;
    if (a.h > 0.0) {
        hd = hs = Vec::Constant(p, a.h);
    } else {
        const CvResult cd = cv_bandwidth(tr, NpTarget::drift);
        const CvResult cs = cv_bandwidth(tr, NpTarget::diff);
        hd = cd.h;
        hs = cs.h;
        cvinfo = {{"h_drift", std::vector<double>(hd.begin(), hd.end())},
                  {"h_diff", std::vector<double>(hs.begin(), hs.end())},
                  {"degenerate_drift", cd.degenerate},
                  {"degenerate_diff", cs.degenerate}};
    }
    const NpEstimate dr = np_drift(tr, hd, grid);
    const NpEstimate df = np_diff(tr, hs, grid);
    std::optional<NpEstimate> sp;
    std::optional<DiffusionModel> mod;
    if (!a.model.empty()) {
        mod.emplace(load(a.model));
        sp = smooth_parametric(tr, *mod, hd, grid);
    }
    const Vec kde = np_kde(tr.points, a.h_kde, grid);
    auto out = open_out(path);
    for (Eigen::Index d = 0; d < p; ++d) out << "theta" << d + 1 << ',';
    for (Eigen::Index d = 0; d < p; ++d) out << "drift" << d + 1 << ',';
    for (Eigen::Index d = 0; d < p; ++d) out << "diff" << d + 1 << ',';
    if (sp) {
        for (Eigen::Index d = 0; d < p; ++d) out << "drift_param_smoothed" << d + 1 << ',';
        for (Eigen::Index d = 0; d < p; ++d) out << "diff_param" << d + 1 << ',';
    }
    out << "kde\n";
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        for (Eigen::Index d = 0; d < p; ++d) out << fmt(grid(i, d)) << ',';
        for (Eigen::Index d = 0; d < p; ++d) out << fmt(dr.values(i, d)) << ',';
        for (Eigen::Index d = 0; d < p; ++d) out << fmt(df.values(i, d)) << ',';
        if (sp) {
            for (Eigen::Index d = 0; d < p; ++d) out << fmt(sp->values(i, d)) << ',';
            for (Eigen::Index d = 0; d < p; ++d) out << fmt(std::sqrt(mod->diffusion()(d, d))) << ',';
        }
        out << fmt(kde[i]) << '\n';
    }
    write_json(c, a.output + ".meta.json",
               meta(c, "np",
                    {{"data", a.data}, {"model", a.model}, {"n", a.n}, {"h", a.h}, {"h_kde", a.h_kde},
                     {"cv", cvinfo}, {"nan_nodes", dr.nan_nodes + df.nan_nodes}}));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Toroidal diffusion toolkit: simulation, transition densities, PDEs, estimation, diagnostics"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Common common;
    for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);
    app.add_option("--out", common.out_dir, "Output directory (default: $TDIFF_OUTPUT_DIR or .)");
    app.add_flag("--force", common.force, "Overwrite existing outputs");
    app.add_option("--threads", common.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Euler–Maruyama trajectory to CSV");
    sim->add_option("--model", sa.model, "Model JSON")->required();
    sim->add_option("--t-end", sa.t_end, "Horizon");
    sim->add_option("--dt", sa.dt, "Step");
    sim->add_option("--delta", sa.delta, "Subsampling lag (multiple of dt)");
    sim->add_option("--seed", sa.seed, "RNG seed");
    sim->add_option("--theta0", sa.theta0, "Start point, comma separated (default: model center)");
    sim->add_option("-o,--output", sa.output, "Output file name");

    FitArgs fa;
    auto* fitc = app.add_subcommand("fit", "Maximum (pseudo-)likelihood fit");
    fitc->add_option("--data", fa.data, "Trajectory CSV")->required();
    fitc->add_option("--family", fa.family, "vm | wn | jp | mivm | ou")->required();
    fitc->add_option("--likelihood", fa.likelihood, "S, E, UE, EvM, SO, USO, SOvM, WOU or PDE");
    fitc->add_option("--fix", fa.fix, "Parameter group held at its start value (e.g. sigma, weights=smle)");
    fitc->add_option("--components", fa.components, "Mixture components for mivm");
    fitc->add_flag("--full-sigma", fa.full_sigma, "Free correlation in the 2D WN diffusion matrix");
    fitc->add_flag("--no-initial", fa.no_initial, "Drop the stationary term of the first observation");
    fitc->add_option("--max-evals", fa.max_evals, "Objective evaluations per simplex run");
    fitc->add_option("--restarts", fa.restarts, "Simplex restarts");
    fitc->add_option("--Mx", fa.Mx, "PDE grid size (1D)");
    fitc->add_option("--Mxy", fa.Mxy, "PDE grid size per axis (2D)");
    fitc->add_option("--sigma0", fa.sigma0, "PDE initial-condition spread");
    fitc->add_option("--start", fa.start, "Model JSON with starting values");
    fitc->add_option("-o,--output", fa.output, "Output file name");

    TpdArgs ta;
    auto* tpdc = app.add_subcommand("tpd", "Transition density on a grid");
    tpdc->add_option("--model", ta.model, "Model JSON")->required();
    tpdc->add_option("--method", ta.method, "S, E, UE, EvM, SO, USO, SOvM, WOU or PDE");
    tpdc->add_option("--delta", ta.delta, "Lag");
    tpdc->add_option("--theta-s", ta.theta_s, "Conditioning point");
    tpdc->add_option("--M", ta.M, "Grid points per axis");
    tpdc->add_option("--sigma0", ta.sigma0, "PDE initial-condition spread");
    tpdc->add_option("--dt", ta.dt, "PDE time step");
    tpdc->add_option("-o,--output", ta.output, "Output file name");

    PdeArgs pa;
    auto* pdec = app.add_subcommand("pde", "Fokker–Planck solution from a concentrated start");
    pdec->add_option("--model", pa.model, "Model JSON")->required();
    pdec->add_option("--t", pa.t, "Times: list or a:b:n");
    pdec->add_option("--Mx", pa.Mx, "Grid size along x");
    pdec->add_option("--My", pa.My, "Grid size along y (default Mx)");
    pdec->add_option("--theta0", pa.theta0, "Start point");
    pdec->add_option("--sigma0", pa.sigma0, "Initial spread");
    pdec->add_option("--dt", pa.dt, "Time step");
    pdec->add_option("-o,--output", pa.output, "Output file name");

    KlArgs ka;
    auto* klc = app.add_subcommand("kl", "Smoothed weighted KL divergence curves");
    klc->add_option("--model", ka.model, "Model JSON")->required();
    klc->add_option("--methods", ka.methods, "Comma-separated approximations (PDE: exact)");
    klc->add_option("--t", ka.t, "Times: list or a:b:n");
    klc->add_option("--sigma0", ka.opt.sigma0, "Smoothing spread");
    klc->add_option("--Mx", ka.opt.Mx, "1D grid size");
    klc->add_option("--Mxy", ka.opt.Mxy, "2D grid size per axis");
    klc->add_option("--sources", ka.opt.sources_1d, "Conditioning points in 1D");
    klc->add_option("--sources-2d", ka.opt.sources_2d, "Conditioning points per axis in 2D");
    klc->add_option("--dt", ka.opt.dt, "PDE time step");
    klc->add_option("-o,--output", ka.output, "Output base name");

    ReArgs ra;
    auto* rec = app.add_subcommand("re", "Relative-efficiency Monte Carlo table");
    rec->add_option("--scenario", ra.scenarios, "Comma-separated scenario names");
    rec->add_option("--deltas", ra.deltas, "Lags");
    rec->add_option("--methods", ra.methods, "Likelihoods");
    rec->add_option("--J", ra.J, "Replicates");
    rec->add_option("--N", ra.N, "Observations per trajectory");
    rec->add_option("--seed", ra.seed, "Base seed");
    rec->add_option("--sim-dt", ra.sim_dt, "Simulation step");
    rec->add_option("-o,--output", ra.output, "Output base name");

    NpArgs na;
    auto* npc = app.add_subcommand("np", "Nonparametric drift and diffusion with smoothed parametric fit");
    npc->add_option("--data", na.data, "Trajectory CSV")->required();
    npc->add_option("--model", na.model, "Fitted model JSON");
    npc->add_option("--n", na.n, "Grid points per axis");
    npc->add_option("--bandwidth", na.h, "Bandwidth (default: cross-validation)");
    npc->add_option("--h-kde", na.h_kde, "KDE bandwidth");
    npc->add_option("-o,--output", na.output, "Output file name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
#ifdef _OPENMP
    if (common.threads > 0) omp_set_num_threads(common.threads);
#endif
    try {
        if (*sim) return cmd_simulate(common, sa);
        if (*fitc) return cmd_fit(common, fa);
        if (*tpdc) return cmd_tpd(common, ta);
        if (*pdec) return cmd_pde(common, pa);
        if (*klc) return cmd_kl(common, ka);
        if (*rec) return cmd_re(common, ra);
        if (*npc) return cmd_np(common, na);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ResourceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
