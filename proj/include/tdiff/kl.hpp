#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdiff/models.hpp"
#include "tdiff/pde.hpp"
#include "tdiff/tpd.hpp"

namespace tdiff {

/// A tpd approximation scored by kl_curves; `exact` scores the PDE solution against itself.
struct KlMethod {
    TpdKind kind = TpdKind::E;
    bool exact = false;

    std::string name() const { return exact ? "PDE" : to_string(kind); }
    static KlMethod parse(const std::string& name);
};

struct KlOptions {
    double sigma0 = 0.1;
    Eigen::Index Mx = 1000;   ///< 1D grid size
    Eigen::Index Mxy = 60;    ///< 2D grid size per axis
    int sources_1d = 20;      ///< theta_s nodes in 1D
    int sources_2d = 8;       ///< theta_s nodes per axis in 2D
    double dt = 1.0 / 1500.0; ///< PDE time step (upper bound)
    /// Kernel nodes with weight below this fraction of the peak are dropped from the smoothing sum.
    double kernel_cut = 1e-16;
    bool parallel = true;
};

struct KlCurve {
    std::string method;
    std::vector<double> times;
    std::vector<double> divergences;  ///< clipped at 0
    std::vector<double> raw;          ///< before clipping
    double sigma0 = 0.0;
    Eigen::Index Mx = 0, My = 0;
    int sources = 0;
};

/// Smoothed, stationary-weighted KL divergence between the PDE tpd started at WN(theta_s, sigma0^2 I)
/// and each approximation convolved with the same grid kernel. One curve per method.
/// Times must be positive and strictly increasing. Cells where the PDE density is below 1e-14
/// contribute nothing.
std::vector<KlCurve> kl_curves(const DiffusionModel& model, const std::vector<KlMethod>& methods,
                               const std::vector<double>& times, const KlOptions& opt = {});

/// Long format: method,t,divergence.
void write_kl_csv(const std::vector<KlCurve>& curves, std::ostream& out);
nlohmann::json to_json(const KlCurve& c);

}  // namespace tdiff
