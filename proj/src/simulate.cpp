#include "tdiff/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tdiff/errors.hpp"

namespace tdiff {

void Trajectory::validate() const {
    if (!(delta > 0.0)) throw InvalidArgument("trajectory: delta must be > 0");
    if (points.rows() < 2) throw InvalidArgument("trajectory: need at least two observations");
    if (points.cols() < 1) throw InvalidArgument("trajectory: dimension must be >= 1");
    if (!((points.array() >= -kPi) && (points.array() < kPi)).all()) {
        throw InvalidArgument("trajectory: points must lie in [-pi, pi)");
    }
}

double NormalStream::uniform() {
    // 53 random bits mapped to [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalStream::next() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    has_cached_ = true;
    return u * f;
}

void NormalStream::fill(Vec& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = next();
}

Eigen::Index em_point_count(double t_end, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("dt must be > 0");
    if (!(t_end >= dt * (1.0 - 1e-12))) throw InvalidArgument("t_end must be >= dt");
    return static_cast<Eigen::Index>(std::floor(t_end / dt * (1.0 + 1e-12))) + 1;
}

Trajectory euler_maruyama(const DriftFn& drift, const Mat& sigma_sqrt, const Vec& theta0, double t_end, double dt,
                          std::uint64_t seed) {
    const Eigen::Index p = theta0.size();
    if (sigma_sqrt.rows() != p || sigma_sqrt.cols() != p) throw InvalidArgument("euler_maruyama: dimension mismatch");
    const Eigen::Index n = em_point_count(t_end, dt);
    Trajectory traj;
    traj.delta = dt;
    traj.seed = seed;
    traj.points.resize(n, p);
    NormalStream rng(seed);
    const Mat scaled = std::sqrt(dt) * sigma_sqrt;
    Vec x = cmod(theta0);
    Vec z(p);
    traj.points.row(0) = x.transpose();
    for (Eigen::Index i = 1; i < n; ++i) {
        const Vec b = drift(x);
        if (!b.allFinite()) throw SimulationDiverged("euler_maruyama: non-finite drift", i);
        rng.fill(z);
        x = cmod(Vec(x + b * dt + scaled * z));
        traj.points.row(i) = x.transpose();
    }
    return traj;
}

Trajectory euler_maruyama(const DiffusionModel& model, const Vec& theta0, double t_end, double dt,
                          std::uint64_t seed) {
    if (theta0.size() != model.dim()) throw InvalidArgument("euler_maruyama: theta0 dimension mismatch");
    return euler_maruyama([&model](const Vec& x) { return model.drift(x); }, model.diffusion_sqrt(), theta0, t_end,
                          dt, seed);
}

Trajectory subsample(const Trajectory& traj, Eigen::Index stride) {
    if (stride < 1) throw InvalidArgument("subsample: stride must be >= 1");
    const Eigen::Index n = (traj.size() - 1) / stride + 1;
    Trajectory out;
    out.delta = traj.delta * static_cast<double>(stride);
    out.seed = traj.seed;
    out.points.resize(n, traj.dim());
    for (Eigen::Index i = 0; i < n; ++i) out.points.row(i) = traj.points.row(i * stride);
    return out;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
    out << "t";
    for (Eigen::Index c = 0; c < traj.dim(); ++c) out << ",theta" << (c + 1);
    out << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(i) * traj.delta);
        out << buf;
        for (Eigen::Index c = 0; c < traj.dim(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", traj.points(i, c));
            out << ',' << buf;
        }
        out << '\n';
    }
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write '" + path + "'");
    write_trajectory_csv(traj, out);
}

Trajectory read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("trajectory CSV: empty input");
    Eigen::Index p = 0;
    {
        std::stringstream hs(line);
        std::string cell;
        std::getline(hs, cell, ',');
        if (cell != "t") throw InvalidArgument("trajectory CSV: header must start with 't'");
        while (std::getline(hs, cell, ',')) {
            if (cell.rfind("theta", 0) != 0) throw InvalidArgument("trajectory CSV: bad column '" + cell + "'");
            ++p;
        }
    }
    if (p == 0) throw InvalidArgument("trajectory CSV: no angle columns");
    std::vector<double> times;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        Eigen::Index c = 0;
        while (std::getline(ls, cell, ',')) {
            double v;
            try {
                v = std::stod(cell);
            } catch (const std::exception&) {
                throw InvalidArgument("trajectory CSV: bad number '" + cell + "'");
            }
            if (c == 0) {
                times.push_back(v);
            } else {
                values.push_back(v);
            }
            ++c;
        }
        if (c != p + 1) throw InvalidArgument("trajectory CSV: wrong column count");
    }
    if (times.size() < 2) throw InvalidArgument("trajectory CSV: need at least two rows");
    Trajectory traj;
    traj.delta = times[1] - times[0];
    traj.points = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(times.size()), p);
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        for (Eigen::Index c = 0; c < p; ++c) traj.points(i, c) = cmod(traj.points(i, c));
    }
    traj.validate();
    return traj;
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open trajectory file '" + path + "'");
    return read_trajectory_csv(in);
}

}  // namespace tdiff
