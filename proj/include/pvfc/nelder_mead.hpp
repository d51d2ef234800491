#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pvfc/errors.hpp"

namespace pvfc {

struct NmOptions {
    int max_iter = 6000;
    double ftol = 1e-12;        // relative spread of simplex values
    double xtol = 1e-11;        // relative simplex diameter
    double stop_below = -1e300; // early exit once f_best drops under this
};

struct NmResult {
    std::vector<double> x;
    double f = 0.0;
    int iters = 0;
};

// Classic Nelder–Mead downhill simplex (reflect 1, expand 2, contract 0.5,
// shrink 0.5). `scale` sets the per-coordinate extent of the initial simplex;
// it is how badly conditioned variable sets (gains ~1e2 next to entries ~1e-4)
// stay searchable.
template <class F>
NmResult nelder_mead(F&& f, const std::vector<double>& x0,
                     const std::vector<double>& scale, const NmOptions& opt = {}) {
    const std::size_t n = x0.size();
    if (n == 0 || scale.size() != n)
        throw InvalidInput("nelder_mead: empty start or scale size mismatch");
    for (double s : scale)
        if (!(s > 0.0) || !std::isfinite(s))
            throw InvalidInput("nelder_mead: scales must be positive and finite");

    auto safe_eval = [&](const std::vector<double>& x) {
        const double v = f(x);
        return std::isfinite(v) ? v : 1e300;
    };

    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> val(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += scale[i];
    for (std::size_t i = 0; i <= n; ++i) val[i] = safe_eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    NmResult res;
    for (res.iters = 0; res.iters < opt.max_iter; ++res.iters) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];

        if (val[best] <= opt.stop_below) break;

        // Convergence: value spread and simplex size both small.
        double xnorm = 1.0, diam = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            xnorm = std::max(xnorm, std::fabs(pts[best][j]) / scale[j]);
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                diam = std::max(diam, std::fabs(pts[i][j] - pts[best][j]) / scale[j]);
        const double fspread = val[worst] - val[best];
        if (fspread <= opt.ftol * (1.0 + std::fabs(val[best])) && diam <= opt.xtol * xnorm)
            break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = centroid[j] + t * (pts[worst][j] - centroid[j]);
            return p;
        };

        std::vector<double> refl = blend(-1.0);
        const double f_refl = safe_eval(refl);

        if (f_refl < val[best]) {
            std::vector<double> exp_p = blend(-2.0);
            const double f_exp = safe_eval(exp_p);
            if (f_exp < f_refl) {
                pts[worst] = std::move(exp_p);
                val[worst] = f_exp;
            } else {
                pts[worst] = std::move(refl);
                val[worst] = f_refl;
            }
            continue;
        }
        if (f_refl < val[second]) {
            pts[worst] = std::move(refl);
            val[worst] = f_refl;
            continue;
        }

        const bool outside = f_refl < val[worst];
        std::vector<double> contr = blend(outside ? -0.5 : 0.5);
        const double f_contr = safe_eval(contr);
        if (f_contr < std::min(f_refl, val[worst])) {
            pts[worst] = std::move(contr);
            val[worst] = f_contr;
            continue;
        }

        for (std::size_t i = 0; i <= n; ++i) { // shrink toward best
            if (i == best) continue;
            for (std::size_t j = 0; j < n; ++j)
                pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
            val[i] = safe_eval(pts[i]);
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (val[i] < val[best]) best = i;
    res.x = pts[best];
    res.f = val[best];
    return res;
}

// Deterministic multi-start wrapper: restart r perturbs the seed by up to
// (1 + r/2) times the per-variable scale using a fixed-seed generator.
template <class F>
NmResult multi_start(F&& f, const std::vector<double>& seed,
                     const std::vector<double>& scale, int restarts,
                     unsigned rng_seed, const NmOptions& opt = {}) {
    NmResult best = nelder_mead(f, seed, scale, opt);
    std::mt19937 rng(rng_seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int r = 1; r <= restarts && best.f > opt.stop_below; ++r) {
        std::vector<double> x0 = seed;
        const double spread = 1.0 + 0.5 * static_cast<double>(r);
        for (std::size_t j = 0; j < x0.size(); ++j) x0[j] += spread * scale[j] * u(rng);
        NmResult cand = nelder_mead(f, x0, scale, opt);
        if (cand.f < best.f) best = std::move(cand);
    }
    return best;
}

} // namespace pvfc
