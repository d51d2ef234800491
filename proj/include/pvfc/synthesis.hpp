#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pvfc/errors.hpp"
#include "pvfc/lmi.hpp"
#include "pvfc/matrix.hpp"
#include "pvfc/nelder_mead.hpp"

namespace pvfc {

// ---------------------------------------------------------------------------
// Small dense solves used by the gain synthesis.
// ---------------------------------------------------------------------------

// Gaussian elimination with partial pivoting; A square, B matching rows.
inline Mat solve_linear(Mat a, Mat b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n)
        throw InvalidInput("solve_linear: shape mismatch");
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::fabs(a(i, k)) > std::fabs(a(piv, k))) piv = i;
        if (std::fabs(a(piv, k)) < 1e-300)
            throw InvalidInput("solve_linear: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(piv, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
        }
    }
    Mat x(n, b.cols());
    for (std::size_t col = 0; col < b.cols(); ++col)
        for (std::size_t ii = n; ii-- > 0;) {
            double s = b(ii, col);
            for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x(j, col);
            x(ii, col) = s / a(ii, ii);
        }
    return x;
}

inline Mat inverse(const Mat& a) {
    return solve_linear(a, Mat::identity(a.rows()));
}

// Solves M'K + K M = -Q for symmetric K (2x2 only; that is all we need).
inline SymMatrix lyapunov2(const Mat& m, const SymMatrix& q) {
    if (m.rows() != 2 || m.cols() != 2)
        throw InvalidInput("lyapunov2: expects a 2x2 matrix");
    // Unknowns (k11, k12, k22); three independent equations.
    Mat a(3, 3), b(3, 1);
    a(0, 0) = 2.0 * m(0, 0);
    a(0, 1) = 2.0 * m(1, 0);
    a(0, 2) = 0.0;
    a(1, 0) = m(0, 1);
    a(1, 1) = m(0, 0) + m(1, 1);
    a(1, 2) = m(1, 0);
    a(2, 0) = 0.0;
    a(2, 1) = 2.0 * m(0, 1);
    a(2, 2) = 2.0 * m(1, 1);
    b(0, 0) = -q(0, 0);
    b(1, 0) = -q(0, 1);
    b(2, 0) = -q(1, 1);
    const Mat k = solve_linear(a, b);
    Mat out(2, 2);
    out(0, 0) = k(0, 0);
    out(0, 1) = out(1, 0) = k(1, 0);
    out(1, 1) = k(2, 0);
    return SymMatrix(out);
}

// Eigenvalues of a general (possibly non-symmetric) 2x2 matrix.
inline std::array<std::complex<double>, 2> eig2(const Mat& m) {
    if (m.rows() != 2 || m.cols() != 2)
        throw InvalidInput("eig2: expects a 2x2 matrix");
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = tr * tr - 4.0 * det;
    if (disc >= 0.0) {
        const double r = std::sqrt(disc);
        return {std::complex<double>(0.5 * (tr - r), 0.0),
                std::complex<double>(0.5 * (tr + r), 0.0)};
    }
    const double im = 0.5 * std::sqrt(-disc);
    return {std::complex<double>(0.5 * tr, -im), std::complex<double>(0.5 * tr, im)};
}

// ---------------------------------------------------------------------------
// Generic solver: strict feasibility of a system of affine LMIs, or
// minimization of one decision variable that enters every LMI through
// negative-semidefinite coefficient blocks (so feasibility is monotone in it
// and bisection applies).
// ---------------------------------------------------------------------------

struct LmiObjective {
    enum class Kind { Feasibility, MinimizeVar };
    Kind kind = Kind::Feasibility;
    int var = -1;

    static LmiObjective feasibility() { return {}; }
    static LmiObjective minimize(int variable) {
        return {Kind::MinimizeVar, variable};
    }
};

struct SolveOptions {
    std::vector<double> seed;  // full assignment start point (required)
    std::vector<double> scale; // per-variable search extent; derived if empty

    std::vector<SymVar> pd_vars; // matrix variables required positive definite
    // Extra scalar constraint: must return <= 0 when acceptable. Any scale.
    std::function<double(std::span<const double>)> shaping;

    double margin_target = 1e-6;          // each LMI must reach <= -target
    std::vector<double> per_lmi_target;   // optional per-LMI override
    int restarts = 6;
    int max_iter = 6000;
    unsigned rng_seed = 0x2c9d1u;
    double bisect_rel_tol = 2e-3;
    int bisect_max_steps = 60;
};

struct LmiSolution {
    std::vector<double> x;
    double margin = 0.0;    // worst LMI eigenvalue at x (targets not included)
    double objective = 0.0; // value of the minimized variable, if any
};

namespace detail {

inline std::vector<double> derive_scales(const std::vector<double>& seed) {
    double biggest = 0.0;
    for (double v : seed) biggest = std::max(biggest, std::fabs(v));
    if (biggest == 0.0) biggest = 1.0;
    std::vector<double> s(seed.size());
    for (std::size_t i = 0; i < seed.size(); ++i)
        s[i] = std::max(0.25 * std::fabs(seed[i]), 1e-6 * biggest);
    return s;
}

// Shifted violation: <= 0 iff every LMI clears its target, every pd variable
// clears its floor, and the shaping constraint holds.
struct SystemViolation {
    const std::vector<AffineLmi>* lmis;
    const SolveOptions* opt;
    std::vector<double> targets;

    double operator()(const std::vector<double>& x) const {
        std::span<const double> xs(x);
        double worst = -1e300;
        for (std::size_t i = 0; i < lmis->size(); ++i)
            worst = std::max(worst, (*lmis)[i].margin(xs) + targets[i]);
        for (const auto& pd : opt->pd_vars) {
            const SymMatrix v(pd.value(xs));
            const auto ee = sym_eig_extremes(v);
            const double floor = 1e-9 * std::max(1.0, std::fabs(v.mat().trace()));
            worst = std::max(worst, floor - ee.min);
        }
        if (opt->shaping) worst = std::max(worst, opt->shaping(xs));
        return worst;
    }
};

inline double raw_margin(const std::vector<AffineLmi>& lmis,
                         const std::vector<double>& x) {
    double m = -1e300;
    for (const auto& l : lmis) m = std::max(m, l.margin(x));
    return m;
}

} // namespace detail

inline LmiSolution solve_lmi_system(const std::vector<AffineLmi>& lmis,
                                    const LmiObjective& obj,
                                    const SolveOptions& opt) {
    if (lmis.empty()) throw InvalidInput("solve_lmi_system: no constraints");
    if (opt.seed.empty()) throw InvalidInput("solve_lmi_system: seed required");
    if (!opt.per_lmi_target.empty() && opt.per_lmi_target.size() != lmis.size())
        throw InvalidInput("solve_lmi_system: per-LMI target count mismatch");

    detail::SystemViolation phi{&lmis, &opt, {}};
    phi.targets = opt.per_lmi_target.empty()
                      ? std::vector<double>(lmis.size(), opt.margin_target)
                      : opt.per_lmi_target;
    double tiniest_target = phi.targets.front();
    for (double t : phi.targets) tiniest_target = std::min(tiniest_target, t);

    const std::vector<double> scales =
        opt.scale.empty() ? detail::derive_scales(opt.seed) : opt.scale;
    if (scales.size() != opt.seed.size())
        throw InvalidInput("solve_lmi_system: scale size mismatch");

    NmOptions nm;
    nm.max_iter = opt.max_iter;
    nm.stop_below = -0.05 * std::max(tiniest_target, 1e-12);

    if (obj.kind == LmiObjective::Kind::Feasibility) {
        NmResult r = multi_start(phi, opt.seed, scales, opt.restarts, opt.rng_seed, nm);
        if (r.f > 0.0)
            throw SynthesisFailure("no strictly feasible point found", r.f);
        LmiSolution sol;
        sol.x = std::move(r.x);
        sol.margin = detail::raw_margin(lmis, sol.x);
        return sol;
    }

    // --- MinimizeVar: bisection over the objective variable ---
    const int var = obj.var;
    if (var < 0 || static_cast<std::size_t>(var) >= opt.seed.size())
        throw InvalidInput("solve_lmi_system: objective variable out of range");
    for (const auto& l : lmis) {
        auto it = l.coefficients().find(var);
        if (it == l.coefficients().end()) continue;
        const double top = sym_eig_extremes(SymMatrix(it->second)).max;
        if (top > 1e-12 * std::max(1.0, it->second.max_abs()))
            throw InvalidInput(
                "solve_lmi_system: objective variable is not monotone "
                "(needs negative-semidefinite coefficient blocks)");
    }

    std::vector<std::size_t> free_ids;
    for (std::size_t i = 0; i < opt.seed.size(); ++i)
        if (static_cast<int>(i) != var) free_ids.push_back(i);

    double best_infeasible_phi = 1e300;
    auto solve_at = [&](double t, const std::vector<double>& warm, int restarts,
                        int iters) -> std::optional<std::vector<double>> {
        std::vector<double> base = warm;
        base[static_cast<std::size_t>(var)] = t;
        if (free_ids.empty()) { // objective is the only variable
            const double v = phi(base);
            if (v > 0.0) {
                best_infeasible_phi = std::min(best_infeasible_phi, v);
                return std::nullopt;
            }
            return base;
        }
        std::vector<double> rseed(free_ids.size()), rscale(free_ids.size());
        for (std::size_t i = 0; i < free_ids.size(); ++i) {
            rseed[i] = base[free_ids[i]];
            rscale[i] = scales[free_ids[i]];
        }
        auto reduced = [&](const std::vector<double>& xr) {
            std::vector<double> full = base;
            for (std::size_t i = 0; i < free_ids.size(); ++i) full[free_ids[i]] = xr[i];
            return phi(full);
        };
        NmOptions inner = nm;
        inner.max_iter = iters;
        NmResult r = multi_start(reduced, rseed, rscale, restarts, opt.rng_seed, inner);
        if (r.f > 0.0) {
            best_infeasible_phi = std::min(best_infeasible_phi, r.f);
            return std::nullopt;
        }
        std::vector<double> full = base;
        for (std::size_t i = 0; i < free_ids.size(); ++i) full[free_ids[i]] = r.x[i];
        return full;
    };

    const double t0 = opt.seed[static_cast<std::size_t>(var)];
    std::vector<double> warm = opt.seed;
    double t_hi = 0.0, t_lo = 0.0;
    bool bracketed = false;

    if (auto s0 = solve_at(t0, warm, opt.restarts, opt.max_iter)) {
        warm = std::move(*s0);
        t_hi = t0;
        const double floor_t = std::max(1e-12, 1e-9 * std::fabs(t0));
        double cand = t0;
        for (int k = 0; k < 24; ++k) {
            cand *= 0.25;
            if (std::fabs(cand) < floor_t) {
                t_lo = cand; // effectively zero: treat as converged
                bracketed = false;
                break;
            }
            if (auto s = solve_at(cand, warm, 2, opt.max_iter / 2)) {
                warm = std::move(*s);
                t_hi = cand;
            } else {
                t_lo = cand;
                bracketed = true;
                break;
            }
        }
    } else {
        const double base = std::max(std::fabs(t0), 1.0);
        double prev = t0;
        bool found = false;
        for (int k = 1; k <= 12; ++k) {
            const double cand = base * std::pow(4.0, k);
            if (auto s = solve_at(cand, warm, opt.restarts, opt.max_iter)) {
                warm = std::move(*s);
                t_hi = cand;
                t_lo = prev;
                bracketed = true;
                found = true;
                break;
            }
            prev = cand;
        }
        if (!found)
            throw SynthesisFailure("objective bracketing failed: infeasible system",
                                   best_infeasible_phi);
    }

    if (bracketed) {
        for (int step = 0; step < opt.bisect_max_steps; ++step) {
            if (t_hi - t_lo <= opt.bisect_rel_tol * std::max(std::fabs(t_hi), 1e-12))
                break;
            const double mid = 0.5 * (t_hi + t_lo);
            if (auto s = solve_at(mid, warm, 2, opt.max_iter / 2)) {
                warm = std::move(*s);
                t_hi = mid;
            } else {
                t_lo = mid;
            }
        }
    }

    LmiSolution sol;
    sol.x = std::move(warm);
    sol.margin = detail::raw_margin(lmis, sol.x);
    sol.objective = sol.x[static_cast<std::size_t>(var)];
    return sol;
}

inline LmiSolution solve_lmi(const AffineLmi& lmi, const LmiObjective& obj,
                             const SolveOptions& opt) {
    return solve_lmi_system(std::vector<AffineLmi>{lmi}, obj, opt);
}

// ---------------------------------------------------------------------------
// DC-link disturbance observer synthesis.
//
// Error dynamics: e' = (A - Lambda C) e + B_xi d, with the regulated output
// e1 = C e. The LMI below certifies, for K > 0 and L = K Lambda:
//   * decay of the error envelope at rate alpha, and
//   * an H-infinity bound sqrt(nu) from the disturbance rate to e1 for the
//     alpha-shifted system.
// Minimizing nu alone is unbounded (faster poles shrink it forever), so the
// search is regularized by keeping the observer poles in a band just beyond
// -alpha; that is also what keeps the gains implementable.
// ---------------------------------------------------------------------------

struct DcLinkObserverModel {
    Mat A{{0.0, 1.0}, {0.0, 0.0}};
    Mat B_xi{{0.0}, {1.0}};
    Mat C{{1.0, 0.0}};
};

struct ObserverLmiVars {
    SymVar K;
    RectVar L;
    int nu = -1;
};

// Assembles [[A'K+KA-C'L'-LC+C'C+2aK, K B_xi], [B_xi'K, -nu]] < 0.
inline AffineLmi bounded_estimation_lmi(const DcLinkObserverModel& model,
                                        double alpha, VarPool& pool,
                                        ObserverLmiVars& vars) {
    const std::size_t n = model.A.rows();
    if (model.A.cols() != n || model.B_xi.rows() != n || model.B_xi.cols() != 1 ||
        model.C.rows() != 1 || model.C.cols() != n)
        throw InvalidInput("bounded_estimation_lmi: model shape mismatch");
    if (!(alpha > 0.0)) throw InvalidInput("bounded_estimation_lmi: alpha must be > 0");

    vars.K = SymVar::make(pool, n);
    vars.L = RectVar::make(pool, n, 1);
    vars.nu = pool.scalar();

    const std::size_t dim = n + 1;
    AffineLmi lmi(dim);
    const Mat e0 = AffineLmi::embed_rows(dim, n, 0);
    const Mat e1 = AffineLmi::embed_rows(dim, 1, n);

    lmi.add_sym_pair(vars.K, e0 * (model.A.transposed() + Mat::identity(n) * alpha),
                     e0.transposed());
    lmi.add_rect_pair(vars.L, e0 * -1.0, model.C * e0.transposed());
    lmi.add_constant(e0 * (model.C.transposed() * model.C) * e0.transposed());
    lmi.add_sym_pair(vars.K, e0, model.B_xi * e1.transposed());
    lmi.add_scalar_term(vars.nu, e1 * e1.transposed() * -1.0);
    return lmi;
}

struct ObserverSynthOptions {
    double pole_shift_min = 0.05; // observer poles in [-(alpha+max), -(alpha+min)]
    double pole_shift_max = 1.3;
    double alpha_cushion = 1e-3;  // synthesize at alpha*(1+cushion)
    double strictness_dig = 0.05; // extra decay used only to seed strictly inside
    double seed_headroom = 1.25;  // seed level above the analytic optimum
    double margin_target = 1e-6;
    int restarts = 6;
    int max_iter = 6000;
    unsigned rng_seed = 0x0b5e3u;
};

// Equality-case certificate for the shifted error system: given M with
// M(0,1) = 1 and characteristic polynomial s^2 + u s + v, returns the K
// solving M'K + KM + C'C + K B B' K / nu = 0 (C = [1 0], B = [0;1]) via
// spectral factorization. Requires nu > 1/v^2 (the exact gain-squared floor
// for real poles). Near that floor K approaches singularity, so callers
// should leave headroom.
inline Mat central_observer_certificate(const Mat& m, double u, double v, double nu) {
    if (m.rows() != 2 || m.cols() != 2 || std::fabs(m(0, 1) - 1.0) > 1e-9)
        throw InvalidInput("central_observer_certificate: expects companion-like M");
    if (!(v > 0.0) || !(nu * v * v > 1.0))
        throw InvalidInput("central_observer_certificate: nu below the gain floor");
    const double v_f = std::sqrt(v * v - 1.0 / nu);
    const double u_f = std::sqrt(u * u - 2.0 * v + 2.0 * v_f);
    const double k22 = nu * (u - u_f);
    const double k12 = nu * (v - v_f) + m(0, 0) * k22;
    if (std::fabs(m(0, 0)) < 1e-300)
        throw InvalidInput("central_observer_certificate: degenerate M");
    const double k11 = -(1.0 + k12 * k12 / nu + 2.0 * m(1, 0) * k12) / (2.0 * m(0, 0));
    return Mat{{k11, k12}, {k12, k22}};
}

struct ObserverSynthesisResult {
    SymMatrix K{{1.0, 0.0}, {0.0, 1.0}};
    Mat L;       // n x 1
    Mat Lambda;  // n x 1 injection gain, K^-1 L
    double nu = 0.0;
    double epsilon = 0.0; // sqrt(nu)
    double alpha = 0.0;
    double margin = 0.0;  // LMI margin at the solution
    double kappa = 0.0;   // sqrt(cond(K)): envelope |e| <= kappa e^{-alpha t} |e0|
    std::array<std::complex<double>, 2> poles{};
};

inline ObserverSynthesisResult synth_dc_observer(double alpha,
                                                 const DcLinkObserverModel& model = {},
                                                 const ObserverSynthOptions& opts = {}) {
    if (model.A.rows() != 2)
        throw InvalidInput("synth_dc_observer: model must be second order");
    const double a_s = alpha * (1.0 + opts.alpha_cushion);
    const double lo = opts.pole_shift_min, hi = opts.pole_shift_max;
    if (!(lo > 0.0) || !(hi > lo))
        throw InvalidInput("synth_dc_observer: bad pole-shift band");

    VarPool pool;
    ObserverLmiVars vars;
    AffineLmi lmi = bounded_estimation_lmi(model, a_s, pool, vars);

    // Seed: poles near the band edge that minimizes the gain bound; K from
    // the equality-case certificate evaluated at a slightly deeper decay so
    // the seed sits strictly inside the feasible set.
    const double s1 = 0.98 * hi, s2 = 0.98 * hi;
    const double dig = std::min(opts.strictness_dig, 0.5 * s1);
    Mat lambda0(2, 1);
    lambda0(0, 0) = 2.0 * a_s + s1 + s2;
    lambda0(1, 0) = (a_s + s1) * (a_s + s2);
    const Mat m_dig =
        model.A - lambda0 * model.C + Mat::identity(2) * (a_s + dig);
    const double u_dig = (s1 - dig) + (s2 - dig);
    const double v_dig = (s1 - dig) * (s2 - dig);
    const double nu_c = opts.seed_headroom / (v_dig * v_dig);
    const Mat k0 = central_observer_certificate(m_dig, u_dig, v_dig, nu_c);
    const Mat l0 = k0 * lambda0;

    std::vector<double> seed(static_cast<std::size_t>(pool.count()), 0.0);
    vars.K.store(seed, k0);
    vars.L.store(seed, l0);
    seed[static_cast<std::size_t>(vars.nu)] = 1.1 * nu_c;

    SolveOptions sopt;
    sopt.seed = seed;
    sopt.pd_vars = {vars.K};
    sopt.margin_target = opts.margin_target;
    sopt.restarts = opts.restarts;
    sopt.max_iter = opts.max_iter;
    sopt.rng_seed = opts.rng_seed;

    const SymVar kvar = vars.K;
    const RectVar lvar = vars.L;
    sopt.shaping = [kvar, lvar, a_s, lo, hi](std::span<const double> x) {
        const Mat k = kvar.value(x);
        const Mat l = lvar.value(x);
        const double det = k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0);
        const double ks = std::max(1e-300, k.max_abs());
        if (det <= 1e-10 * ks * ks) return 1.0;
        const Mat lam = inverse(k) * l;
        const double u = lam(0, 0) - 2.0 * a_s;
        const double v = lam(1, 0) - a_s * lam(0, 0) + a_s * a_s;
        const double umin = 2.0 * lo, umax = 2.0 * hi;
        const double vmin = lo * lo, vmax = hi * hi;
        double viol = (umin - u) / umax;
        viol = std::max(viol, (u - umax) / umax);
        viol = std::max(viol, (vmin - v) / vmax);
        viol = std::max(viol, (v - vmax) / vmax);
        return viol;
    };

    LmiSolution sol =
        solve_lmi(lmi, LmiObjective::minimize(vars.nu), sopt);

    ObserverSynthesisResult out;
    out.K = SymMatrix(vars.K.value(sol.x));
    out.L = vars.L.value(sol.x);
    out.Lambda = inverse(out.K.mat()) * out.L;
    out.nu = sol.objective;
    out.epsilon = std::sqrt(std::max(0.0, sol.objective));
    out.alpha = alpha;
    out.margin = sol.margin;
    const auto kee = sym_eig_extremes(out.K);
    out.kappa = std::sqrt(kee.max / std::max(kee.min, 1e-300));
    out.poles = eig2(model.A - out.Lambda * model.C);

    if (out.margin > -opts.margin_target * 0.5)
        throw SynthesisFailure("observer synthesis: certificate not strict", out.margin);
    for (const auto& p : out.poles)
        if (p.real() > -alpha)
            throw SynthesisFailure("observer synthesis: pole slower than decay target",
                                   out.margin);
    return out;
}

// ---------------------------------------------------------------------------
// Resonant current-loop state feedback over a polytope of plant vertices.
//
// State x = [tracked current, resonant-filter state]. The loop is closed
// through F = Y X^-1; W handles the delayed coupling of the periodic
// compensator; gamma bounds the performance output z = G x + H u relative to
// unit-scale initial energy (X >= I pins the otherwise free scaling).
// ---------------------------------------------------------------------------

struct CurrentLoopBox {
    double rho1_min = 0.0, rho1_max = 0.0; // R/L extremes
    double rho2_min = 0.0, rho2_max = 0.0; // 1/L extremes
    double omega_c = 0.0;                  // resonant filter corner, rad/s
    double lambda = 0.0;                   // decay rate folded into the LMI
    double h_scale = 1e-4;                 // control weight in z
};

struct VertexPlant {
    Mat A, B;
};

inline std::vector<VertexPlant> box_vertices(const CurrentLoopBox& box) {
    if (!(box.rho1_min > 0.0) || box.rho1_max < box.rho1_min ||
        !(box.rho2_min > 0.0) || box.rho2_max < box.rho2_min ||
        !(box.omega_c > 0.0))
        throw InvalidInput("box_vertices: malformed parameter box");
    std::vector<VertexPlant> v;
    for (double r1 : {box.rho1_min, box.rho1_max})
        for (double r2 : {box.rho2_min, box.rho2_max})
            v.push_back({Mat{{-r1, 0.0}, {0.0, -box.omega_c}}, Mat{{r2}, {0.0}}});
    return v;
}

inline Mat delay_coupling(double omega_c) {
    return Mat{{0.0, 0.0}, {-omega_c, omega_c}};
}

struct FeedbackLmiVars {
    SymVar X, W;
    RectVar Y;
    int gamma = -1;
};

// One polytope vertex of
// [[AX+XA'+BY+Y'B'+W+2lX, Ad X, XG'+Y'H'], [XAd', -W, 0], [GX+HY, 0, -gI]] < 0
inline AffineLmi vertex_decay_lmi(const Mat& A, const Mat& B, const Mat& Ad,
                                  const Mat& G, const Mat& H, double lambda,
                                  const FeedbackLmiVars& vars) {
    const std::size_t n = A.rows(), m = B.cols(), p = G.rows();
    if (A.cols() != n || B.rows() != n || Ad.rows() != n || Ad.cols() != n ||
        G.cols() != n || H.rows() != p || H.cols() != m)
        throw InvalidInput("vertex_decay_lmi: shape mismatch");
    if (vars.X.n != n || vars.W.n != n || vars.Y.r != m || vars.Y.c != n)
        throw InvalidInput("vertex_decay_lmi: variable shape mismatch");

    const std::size_t dim = 2 * n + p;
    AffineLmi lmi(dim);
    const Mat e0 = AffineLmi::embed_rows(dim, n, 0);
    const Mat e1 = AffineLmi::embed_rows(dim, n, n);
    const Mat e2 = AffineLmi::embed_rows(dim, p, 2 * n);

    lmi.add_sym_pair(vars.X, e0 * (A + Mat::identity(n) * lambda), e0.transposed());
    lmi.add_rect_pair(vars.Y, e0 * B, e0.transposed());
    lmi.add_sym_pair(vars.W, e0 * 0.5, e0.transposed());
    lmi.add_sym_pair(vars.X, e0 * Ad, e1.transposed());
    lmi.add_sym_pair(vars.X, e0, G.transposed() * e2.transposed());
    lmi.add_rect_pair(vars.Y, e2 * H, e0.transposed());
    lmi.add_sym_pair(vars.W, e1 * -0.5, e1.transposed());
    lmi.add_scalar_term(vars.gamma, e2 * e2.transposed() * -1.0);
    return lmi;
}

// X >= I normalization: assembled as I - X < 0.
inline AffineLmi scale_pin_lmi(const FeedbackLmiVars& vars) {
    const std::size_t n = vars.X.n;
    AffineLmi lmi(n);
    lmi.add_constant(Mat::identity(n));
    lmi.add_sym_pair(vars.X, Mat::identity(n) * -0.5, Mat::identity(n));
    return lmi;
}

struct FeedbackSynthOptions {
    double target_pole = 3.0e4; // desired inner current-loop corner, rad/s
    double k1_seed = 0.0;
    double f2_band_lo = 0.5;    // multiplicative box on the resonant gain
    double f2_band_hi = 1.6;
    double k1_slack = 0.6;      // |k1| cap as a fraction of the seed gain
    double margin_target = 0.5;
    double pin_target = 1e-4;
    int restarts = 8;
    int max_iter = 9000;
    unsigned rng_seed = 0x7a11bu;
    double x2_seed = 1.05;
    double gamma_seed = 20.0;
    bool minimize_gamma = true;
};

// The runtime controller computes u = k1*i + k2*(filter_state + error). With
// x = [i, filter_state] and the reference folded into a feedforward term this
// is the state feedback u = F x + k2*ref, F = [k1 - k2, k2].
struct ControllerGains {
    double k1 = 0.0, k2 = 0.0;
};

inline Mat feedback_gain_from_controller(const ControllerGains& g) {
    return Mat{{g.k1 - g.k2, g.k2}};
}

inline ControllerGains controller_from_feedback(const Mat& f) {
    if (f.rows() != 1 || f.cols() != 2)
        throw InvalidInput("controller_from_feedback: F must be 1x2");
    return {f(0, 0) + f(0, 1), f(0, 1)};
}

struct FeedbackSynthesisResult {
    Mat F; // 1 x 2 state feedback, x = [current, resonant state]
    double k1 = 0.0, k2 = 0.0; // controller form: u = k1*i + k2*(filter + error)
    SymMatrix X{{1.0, 0.0}, {0.0, 1.0}};
    SymMatrix W{{1.0, 0.0}, {0.0, 1.0}};
    double gamma = 0.0;
    double lambda = 0.0;
    std::vector<double> vertex_margins;
    double worst_margin = 0.0;
};

namespace detail {

struct FeedbackProblem {
    std::vector<AffineLmi> lmis; // 4 vertices + scale pin
    FeedbackLmiVars vars;
    VarPool pool;
};

inline FeedbackProblem feedback_problem(const CurrentLoopBox& box) {
    FeedbackProblem fp;
    fp.vars.X = SymVar::make(fp.pool, 2);
    fp.vars.W = SymVar::make(fp.pool, 2);
    fp.vars.Y = RectVar::make(fp.pool, 1, 2);
    fp.vars.gamma = fp.pool.scalar();
    const Mat ad = delay_coupling(box.omega_c);
    const Mat g = Mat::identity(2);
    const Mat h{{box.h_scale}, {box.h_scale}};
    for (const auto& v : box_vertices(box))
        fp.lmis.push_back(vertex_decay_lmi(v.A, v.B, ad, g, h, box.lambda, fp.vars));
    fp.lmis.push_back(scale_pin_lmi(fp.vars));
    return fp;
}

inline Mat feedback_from(const FeedbackLmiVars& vars, std::span<const double> x) {
    const Mat xm = vars.X.value(x);
    const Mat ym = vars.Y.value(x);
    return ym * inverse(xm);
}

} // namespace detail

inline FeedbackSynthesisResult synth_current_feedback(
    const CurrentLoopBox& box, const FeedbackSynthOptions& opts = {}) {
    if (!(box.lambda > 0.0))
        throw InvalidInput("synth_current_feedback: lambda must be > 0");
    if (box.lambda >= box.omega_c)
        throw SynthesisFailure(
            "synth_current_feedback: decay target at or beyond the resonant corner",
            1.0);

    detail::FeedbackProblem fp = detail::feedback_problem(box);

    // Seed. The resonant gain k2 places the current corner; the X geometry
    // leans toward the [current ~ filter-state] direction that makes the
    // cross term cancellable.
    const double k2_0 = opts.target_pole / box.rho2_min;
    const double f1_0 = opts.k1_seed - k2_0;
    const double x1_0 = 50.0, x2_0 = opts.x2_seed;
    const double x12_0 = 0.98 * x2_0;
    Mat x0{{x1_0, x12_0}, {x12_0, x2_0}};
    Mat f0{{f1_0, k2_0}};
    Mat y0 = f0 * x0;
    Mat w0{{4.0e6 * (opts.target_pole / 3.0e4), 0.0}, {0.0, 200.0}};

    std::vector<double> seed(static_cast<std::size_t>(fp.pool.count()), 0.0);
    fp.vars.X.store(seed, x0);
    fp.vars.W.store(seed, w0);
    fp.vars.Y.store(seed, y0);
    seed[static_cast<std::size_t>(fp.vars.gamma)] = opts.gamma_seed;

    std::vector<double> scale(seed.size(), 1.0);
    {
        std::vector<double> tmp = seed;
        fp.vars.X.store(tmp, Mat{{10.0, 0.3 * x2_0}, {0.3 * x2_0, 0.25 * x2_0}});
        fp.vars.W.store(tmp, Mat{{0.3 * w0(0, 0), 100.0}, {100.0, 60.0}});
        fp.vars.Y.store(tmp, Mat{{0.3 * std::fabs(y0(0, 0)), 1.0}});
        tmp[static_cast<std::size_t>(fp.vars.gamma)] = 0.3 * opts.gamma_seed;
        scale = tmp;
    }

    SolveOptions sopt;
    sopt.seed = seed;
    sopt.scale = scale;
    sopt.pd_vars = {fp.vars.X, fp.vars.W};
    sopt.margin_target = opts.margin_target;
    sopt.per_lmi_target.assign(fp.lmis.size(), opts.margin_target);
    sopt.per_lmi_target.back() = opts.pin_target; // the X >= I pin
    sopt.restarts = opts.restarts;
    sopt.max_iter = opts.max_iter;
    sopt.rng_seed = opts.rng_seed;

    const FeedbackLmiVars vcopy = fp.vars;
    const double f2_lo = opts.f2_band_lo * k2_0, f2_hi = opts.f2_band_hi * k2_0;
    const double k1_cap = opts.k1_slack * k2_0;
    sopt.shaping = [vcopy, f2_lo, f2_hi, k1_cap, k2_0](std::span<const double> x) {
        const Mat xm = vcopy.X.value(x);
        const double det = xm(0, 0) * xm(1, 1) - xm(0, 1) * xm(1, 0);
        const double xs = std::max(1e-300, xm.max_abs());
        if (det <= 1e-10 * xs * xs) return 1.0;
        const Mat f = vcopy.Y.value(x) * inverse(xm);
        const double f2 = f(0, 1);
        const double k1 = f(0, 0) + f(0, 1);
        const double g = x[static_cast<std::size_t>(vcopy.gamma)];
        double viol = (f2_lo - f2) / k2_0;
        viol = std::max(viol, (f2 - f2_hi) / k2_0);
        viol = std::max(viol, (std::fabs(k1) - k1_cap) / k2_0);
        viol = std::max(viol, 1e-9 - g);
        return viol;
    };

    LmiSolution sol;
    if (opts.minimize_gamma)
        sol = solve_lmi_system(fp.lmis, LmiObjective::minimize(fp.vars.gamma), sopt);
    else
        sol = solve_lmi_system(fp.lmis, LmiObjective::feasibility(), sopt);

    FeedbackSynthesisResult out;
    out.F = detail::feedback_from(fp.vars, sol.x);
    const ControllerGains cg = controller_from_feedback(out.F);
    out.k1 = cg.k1;
    out.k2 = cg.k2;
    out.X = SymMatrix(fp.vars.X.value(sol.x));
    out.W = SymMatrix(fp.vars.W.value(sol.x));
    out.gamma = sol.x[static_cast<std::size_t>(fp.vars.gamma)];
    out.lambda = box.lambda;
    for (std::size_t i = 0; i + 1 < fp.lmis.size(); ++i)
        out.vertex_margins.push_back(fp.lmis[i].margin(sol.x));
    out.worst_margin = *std::max_element(out.vertex_margins.begin(),
                                         out.vertex_margins.end());
    if (out.worst_margin > -1e-6)
        throw SynthesisFailure("current-loop synthesis: certificate not strict",
                               out.worst_margin);
    return out;
}

struct CertificateCheck {
    bool ok = false;
    double margin = 0.0; // worst vertex margin (negative when ok)
    SymMatrix X{{1.0, 0.0}, {0.0, 1.0}};
    SymMatrix W{{1.0, 0.0}, {0.0, 1.0}};
    double gamma = 0.0;
};

// Re-derives a certificate for a FIXED gain F by substituting Y = F X, which
// leaves a convex feasibility problem in (X, W, gamma).
inline CertificateCheck verify_feedback_certificate(const CurrentLoopBox& box,
                                                    const Mat& F,
                                                    const FeedbackSynthOptions& opts = {}) {
    if (F.rows() != 1 || F.cols() != 2)
        throw InvalidInput("verify_feedback_certificate: F must be 1x2");

    VarPool pool;
    FeedbackLmiVars vars;
    vars.X = SymVar::make(pool, 2);
    vars.W = SymVar::make(pool, 2);
    vars.gamma = pool.scalar();
    // Y is intentionally absent: closed-loop matrices absorb F.

    const Mat ad = delay_coupling(box.omega_c);
    const Mat g = Mat::identity(2);
    const Mat h{{box.h_scale}, {box.h_scale}};
    const Mat gcl = g + h * F;

    std::vector<AffineLmi> lmis;
    for (const auto& v : box_vertices(box)) {
        const Mat acl = v.A + v.B * F;
        const std::size_t dim = 6;
        AffineLmi lmi(dim);
        const Mat e0 = AffineLmi::embed_rows(dim, 2, 0);
        const Mat e1 = AffineLmi::embed_rows(dim, 2, 2);
        const Mat e2 = AffineLmi::embed_rows(dim, 2, 4);
        lmi.add_sym_pair(vars.X, e0 * (acl + Mat::identity(2) * box.lambda),
                         e0.transposed());
        lmi.add_sym_pair(vars.W, e0 * 0.5, e0.transposed());
        lmi.add_sym_pair(vars.X, e0 * ad, e1.transposed());
        lmi.add_sym_pair(vars.X, e0, gcl.transposed() * e2.transposed());
        lmi.add_sym_pair(vars.W, e1 * -0.5, e1.transposed());
        lmi.add_scalar_term(vars.gamma, e2 * e2.transposed() * -1.0);
        lmis.push_back(lmi);
    }
    {
        AffineLmi pin(2);
        pin.add_constant(Mat::identity(2));
        pin.add_sym_pair(vars.X, Mat::identity(2) * -0.5, Mat::identity(2));
        lmis.push_back(pin);
    }

    const double x2_0 = opts.x2_seed;
    Mat x0{{50.0, 0.98 * x2_0}, {0.98 * x2_0, x2_0}};
    Mat w0{{4.0e6, 0.0}, {0.0, 200.0}};
    std::vector<double> seed(static_cast<std::size_t>(pool.count()), 0.0);
    vars.X.store(seed, x0);
    vars.W.store(seed, w0);
    seed[static_cast<std::size_t>(vars.gamma)] = opts.gamma_seed;
    std::vector<double> scale = seed;
    vars.X.store(scale, Mat{{10.0, 0.3 * x2_0}, {0.3 * x2_0, 0.25 * x2_0}});
    vars.W.store(scale, Mat{{1.2e6, 100.0}, {100.0, 60.0}});
    scale[static_cast<std::size_t>(vars.gamma)] = 0.3 * opts.gamma_seed;

    SolveOptions sopt;
    sopt.seed = seed;
    sopt.scale = scale;
    sopt.pd_vars = {vars.X, vars.W};
    sopt.margin_target = opts.margin_target;
    sopt.per_lmi_target.assign(lmis.size(), opts.margin_target);
    sopt.per_lmi_target.back() = opts.pin_target;
    sopt.restarts = opts.restarts;
    sopt.max_iter = opts.max_iter;
    sopt.rng_seed = opts.rng_seed;
    const int gvar = vars.gamma;
    sopt.shaping = [gvar](std::span<const double> x) {
        return 1e-9 - x[static_cast<std::size_t>(gvar)];
    };

    CertificateCheck res;
    try {
        LmiSolution sol = solve_lmi_system(lmis, LmiObjective::feasibility(), sopt);
        res.ok = true;
        res.X = SymMatrix(vars.X.value(sol.x));
        res.W = SymMatrix(vars.W.value(sol.x));
        res.gamma = sol.x[static_cast<std::size_t>(gvar)];
        res.margin = -1e300;
        std::span<const double> xs(sol.x);
        for (std::size_t i = 0; i + 1 < lmis.size(); ++i)
            res.margin = std::max(res.margin, lmis[i].margin(xs));
    } catch (const SynthesisFailure& f) {
        res.ok = false;
        res.margin = f.best_margin;
    }
    return res;
}

} // namespace pvfc
