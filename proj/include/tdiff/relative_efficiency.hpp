#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdiff/estimation.hpp"

namespace tdiff {

struct ReScenario {
    std::string name;
    ProcessParams truth;
    std::vector<double> deltas{0.05, 0.2, 0.5, 1.0};
    int N = 250;
};

/// Named scenarios: wn1d_a{05,1}_s{1,2} (mu = pi/2) and wn2d_a{1,2}_s{1,2}
/// (mu = (pi/2, -pi/2), alpha1 = alpha2 = a, alpha3 = a/2, Sigma = s^2 I).
ReScenario re_scenario(const std::string& name);
std::vector<std::string> re_scenario_names();

/// Parameters compared in the efficiency table. Angular components are flagged so that
/// their error is measured by the wrapped difference.
struct ReComponents {
    Vec values;
    std::vector<std::string> names;
    std::vector<bool> angular;
};
ReComponents re_components(const ProcessParams& params);

/// Mean squared error per component over the rows of `estimates`; angular errors use cmod.
Vec component_mse(const Mat& estimates, const Vec& truth, const std::vector<bool>& angular);

/// Relative efficiency per method (rows of `mse`) and component: min over methods / own MSE.
Mat component_re(const Mat& mse);

struct ReOptions {
    std::vector<LikKind> methods{LikKind::E, LikKind::SO, LikKind::WOU};
    int J = 200;
    std::uint64_t seed = 1;
    double sim_dt = 0.001;
    int threads = 0;  ///< 0: OpenMP default
    FitOptions fit;   ///< `fixed` defaults to {"sigma"} when left empty
};

struct ReRow {
    std::string scenario;
    double delta = 0.0;
    std::string method;
    double re = 0.0;
    Vec component_re;
    Vec component_mse;
    int failures = 0;       ///< replicates excluded for this (scenario, delta)
    int nonconverged = 0;   ///< fits kept but flagged by the optimizer
};

struct ReTable {
    std::vector<ReRow> rows;
    std::vector<std::string> component_names;  ///< of the last scenario
    int J = 0;
    std::uint64_t seed = 0;
    double sim_dt = 0.0;
};

/// Monte Carlo relative efficiencies. Replicate r of every scenario uses seed replicate_seed(seed, r);
/// the trajectory starts at a stationary draw (exact for WN) and every method is fitted on the same data.
/// Replicates where any method fails are excluded from that (scenario, delta) row for every method.
ReTable relative_efficiency(const std::vector<ReScenario>& scenarios, const ReOptions& opt);

/// Long format: scenario,delta,method,value.
void write_re_csv(const ReTable& t, std::ostream& out);
nlohmann::json to_json(const ReTable& t);

}  // namespace tdiff
