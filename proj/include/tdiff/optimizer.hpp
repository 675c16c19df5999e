#pragma once

#include <functional>

#include "tdiff/torus.hpp"

namespace tdiff {

struct OptimizerConfig {
    int max_evals = 2000;
    double ftol = 1e-8;          ///< relative objective stall tolerance
    double xtol = 1e-6;          ///< simplex size tolerance
    int restarts = 1;            ///< fresh simplices started from the best point after convergence
    double initial_step = 0.25;  ///< initial simplex edge in transformed coordinates

    void validate() const;
};

struct OptimResult {
    Vec x;
    double f = 0.0;
    int evals = 0;
    int iterations = 0;
    bool converged = false;
};

/// Derivative-free Nelder–Mead minimization. Non-finite objective values are treated as +1e300.
OptimResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0, const OptimizerConfig& cfg = {});

}  // namespace tdiff
