#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "tdiff/models.hpp"
#include "tdiff/optimizer.hpp"
#include "tdiff/pde.hpp"
#include "tdiff/simulate.hpp"
#include "tdiff/tpd.hpp"

namespace tdiff {

/// Likelihood used by fit(): a closed-form approximation or the PDE-based tpd.
enum class LikKind { S, E, UE, EvM, SO, USO, SOvM, WOU, PDE };

std::string to_string(LikKind k);
LikKind lik_kind_from_string(const std::string& name);

/// Average outer product of wrapped increments divided by delta.
Mat sigma_hf(const Trajectory& traj);
/// tr(sigma_hf) / p.
double sigma_hf_iso(const Trajectory& traj);

struct SmleOptions {
    int components = 2;          ///< mixture size for mivM
    bool mvm_interaction = true; ///< estimate the sine interaction for p = 2 vM
    OptimizerConfig optimizer;
};

struct SmleResult {
    StationaryLaw law;
    double loglik = 0.0;
    bool converged = false;
    int evals = 0;
};

/// Maximizes sum_{i=0}^{N} log nu(Theta_i) over the stationary law of the family.
SmleResult smle(const Trajectory& traj, Family family, const SmleOptions& opt = {});

/// Componentwise circular k-means; returns m x p centers and a label per row.
struct KMeansResult {
    Mat centers;
    std::vector<int> labels;
};
KMeansResult circular_kmeans(const Mat& rows, int m, std::uint64_t seed = 0);

/// A = Sigma_HF S_SMLE^{-1} / 2 with mu from the SMLE. For p = 2 with diagonal Sigma the result
/// satisfies the symmetry lemma with rho = 0; violating alpha3 values are shrunk by factors of 0.9.
WnProcParams assemble_wn_start(const Trajectory& traj, bool full_sigma = false);
WnProcParams assemble_wn_start(const WNParams& stationary, const Mat& sigma_hat, bool full_sigma = false);

/// Starting process parameters for any family (SMLE plus high-frequency diffusion estimate).
ProcessParams assemble_start(const Trajectory& traj, Family family, const SmleOptions& opt = {});

struct LikOptions {
    bool include_initial = true;  ///< add log nu(Theta_0) for kinds other than S
    LoglikOptions pde;
};

struct LoglikValue {
    double value = 0.0;
    Eigen::Index floored = 0;  ///< terms floored at log(1e-300)
};

/// Objective of fit(): sum of log transition densities plus the optional initial term.
/// For S it is sum_{i=0}^{N} log nu(Theta_i).
LoglikValue approx_loglik(const Trajectory& traj, const DiffusionModel& model, LikKind kind,
                          const LikOptions& opt = {});

/// Groups that can be held fixed: alpha, alpha3, mu, sigma, rho, psi, weights.
struct FitOptions {
    std::set<std::string> fixed;
    bool wn_full_sigma = false;  ///< free rho in the 2D WN parametrization
    SmleOptions smle;
    LikOptions lik;
    OptimizerConfig optimizer;
};

struct EstimationResult {
    ProcessParams params;
    double loglik = 0.0;
    int iterations = 0;
    int evals = 0;
    bool converged = false;
    LikKind kind = LikKind::S;
    double wall_time = 0.0;
    Eigen::Index floored = 0;
    ProcessParams start;
};

/// Maximizes the chosen likelihood by a simplex search over transformed parameters.
/// `start` defaults to assemble_start().
EstimationResult fit(const Trajectory& traj, Family family, LikKind kind, const FitOptions& opt = {},
                     const std::optional<ProcessParams>& start = std::nullopt);

/// Transformed coordinates used by fit(): angles raw (wrapped on decode), positives on log scale,
/// constrained interactions through tanh, mixture weights as logits against the last component.
struct ParamCodec {
    std::vector<std::string> groups;  ///< group of each coordinate
    std::function<Vec(const ProcessParams&)> encode;
    std::function<ProcessParams(const Vec&)> decode;
};
ParamCodec make_codec(Family family, const ProcessParams& shape, bool wn_full_sigma = false);

nlohmann::json to_json(const EstimationResult& r);

}  // namespace tdiff
