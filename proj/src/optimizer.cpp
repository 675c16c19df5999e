#include "tdiff/optimizer.hpp"

#include <cmath>
#include <limits>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "tdiff/errors.hpp"

namespace tdiff {

void OptimizerConfig::validate() const {
    if (max_evals < 1) throw InvalidArgument("optimizer: max_evals must be >= 1");
    if (!(ftol > 0.0) || !(xtol > 0.0)) throw InvalidArgument("optimizer: tolerances must be > 0");
    if (restarts < 0) throw InvalidArgument("optimizer: restarts must be >= 0");
    if (!(initial_step > 0.0)) throw InvalidArgument("optimizer: initial_step must be > 0");
}

namespace {

constexpr double kBig = 1e300;

struct Ctx {
    const std::function<double(const Vec&)>* f;
    Vec buf;
    int evals = 0;
    double best = std::numeric_limits<double>::infinity();
    Vec best_x;
};

double trampoline(const gsl_vector* v, void* params) {
    auto* c = static_cast<Ctx*>(params);
    for (Eigen::Index i = 0; i < c->buf.size(); ++i) c->buf[i] = gsl_vector_get(v, static_cast<std::size_t>(i));
    ++c->evals;
    double y;
    try {
        y = (*c->f)(c->buf);
    } catch (const NumericalError&) {
        y = kBig;
    } catch (const InvalidArgument&) {
        y = kBig;
    }
    if (!std::isfinite(y)) y = kBig;
    if (y < c->best) {
        c->best = y;
        c->best_x = c->buf;
    }
    return y;
}

// One simplex run from x0; returns true on convergence.
bool run(Ctx& ctx, const Vec& x0, const OptimizerConfig& cfg, int& iterations) {
    const auto n = static_cast<std::size_t>(x0.size());
    gsl_multimin_function fn{&trampoline, n, &ctx};
    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* step = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, x0[static_cast<Eigen::Index>(i)]);
    gsl_vector_set_all(step, cfg.initial_step);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, x, step);

    bool converged = false;
    const int window = 20 * static_cast<int>(n) + 20;
    double ref = s->fval;
    int since = 0;
    while (ctx.evals < cfg.max_evals) {
        ++iterations;
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_fminimizer_size(s) < cfg.xtol) {
            converged = true;
            break;
        }
        if (++since >= window) {
            if (std::abs(ref - s->fval) <= cfg.ftol * (std::abs(s->fval) + cfg.ftol)) {
                converged = true;
                break;
            }
            ref = s->fval;
            since = 0;
        }
    }
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return converged;
}

}  // namespace

OptimResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0, const OptimizerConfig& cfg) {
    cfg.validate();
    if (x0.size() == 0) {
        OptimResult r;
        r.x = x0;
        r.f = f(x0);
        r.evals = 1;
        r.converged = true;
        return r;
    }
    gsl_error_handler_t* old = gsl_set_error_handler_off();
    Ctx ctx;
    ctx.f = &f;
    ctx.buf.resize(x0.size());
    OptimResult res;
    bool conv = run(ctx, x0, cfg, res.iterations);
    for (int r = 0; r < cfg.restarts && conv && ctx.evals < cfg.max_evals; ++r) {
        const double before = ctx.best;
        conv = run(ctx, ctx.best_x, cfg, res.iterations);
        if (before - ctx.best <= cfg.ftol * (std::abs(ctx.best) + cfg.ftol)) break;
    }
    gsl_set_error_handler(old);
    res.x = ctx.best_x.size() ? ctx.best_x : x0;
    res.f = ctx.best;
    res.evals = ctx.evals;
    res.converged = conv && ctx.best < kBig;
    return res;
}

}  // namespace tdiff
