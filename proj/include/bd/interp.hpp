#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bd/errors.hpp"
#include "bd/model.hpp"
#include "bd/quadrature.hpp"

namespace bd {

struct InterpConfig {
    double eta = 0.3;
    double quad_tol = 1e-10;
    double s_min = -120.0;  // hard quadrature limits; clipping happens inside
    double s_max = 60.0;
    int s_points = 1025;

    void validate(double zs, double z) const {
        if (!(eta > 0.0) || eta >= 1.0)
            throw Error(ErrorCode::contract_violation, "eta must lie in (0,1)");
        if (!(eta < std::log(zs / z)))
            throw Error(ErrorCode::contract_violation, "eta must be below log(z_s/z)");
        if (!(quad_tol > 0.0)) throw Error(ErrorCode::contract_violation, "quad_tol must be > 0");
    }
};

inline double default_eta(double zs, double z) { return std::min(0.99, 0.5 * std::log(zs / z)); }

// Interpolation kernel weight: e^{-s} on the right, (1-s)^{r-1} on the left.
inline double h_weight(double s, double r) {
    return (s >= 0.0) ? std::exp(-s) : std::pow(1.0 - s, r - 1.0);
}

// H_r(t) = integral of h_r over [t, infinity), in closed form.
inline double H_weight(double t, double r) {
    if (t >= 0.0) return std::exp(-t);
    return 1.0 + (std::pow(1.0 - t, r) - 1.0) / r;
}

// Closed-form lower bound K(s,u) >= sum Q_i |u_i| (i ^ e^{s + eta i}); this is
// the exact per-index infimum without the mass coupling.
inline double K_lower(double s, const std::vector<double>& u, double eta,
                      const std::vector<double>& Q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] == 0.0) continue;
        const double idx = static_cast<double>(i + 1);
        acc += Q[i] * std::abs(u[i]) * std::min(idx, std::exp(s + eta * idx));
    }
    return acc;
}

inline double s_eta(double eta) { return -1.0 - std::log(eta); }

namespace detail {

// Upper endpoint z_+ of {x : e^{s + eta x} <= x}, defined for s < s_eta.
// Solves eta x + s = log x on the branch x > 1/eta by bisection.
inline double z_plus(double s, double eta) {
    auto g = [&](double x) { return eta * x + s - std::log(x); };
    double lo = 1.0 / eta;
    double hi = 2.0 * lo;
    while (g(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) break;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-12 * hi) break;
    }
    return 0.5 * (lo + hi);
}

inline double zero_mass_residual(const std::vector<double>& v, const std::vector<double>& Q) {
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) m += Q[i] * static_cast<double>(i + 1) * v[i];
    return m;
}

}  // namespace detail

// The cut index j(s) = ceil(z_+), clamped to N+1 when the whole truncated
// range should be kept.
inline int cut_index(double s, double eta, int N) {
    if (s >= s_eta(eta)) return 1;  // v = 0 regime; no index is kept
    const double zp = detail::z_plus(s, eta);
    if (zp >= static_cast<double>(N + 1)) return N + 1;
    return static_cast<int>(std::ceil(zp));
}

// Candidate minimizer: keep u below j, park the residual mass at j, zero the
// tail. Satisfies the zero-mass constraint by construction.
inline std::vector<double> candidate_v(double s, const std::vector<double>& u, double eta,
                                       const std::vector<double>& Q) {
    const int N = static_cast<int>(u.size());
    std::vector<double> v(u.size(), 0.0);
    if (s >= s_eta(eta)) return v;  // v = 0
    const int j = cut_index(s, eta, N);
    if (j > N) return u;  // keep everything
    for (int i = 1; i < j; ++i) v[static_cast<std::size_t>(i - 1)] = u[static_cast<std::size_t>(i - 1)];
    double tail_mass = 0.0;
    for (int k = j; k <= N; ++k)
        tail_mass += Q[static_cast<std::size_t>(k - 1)] * static_cast<double>(k) *
                     u[static_cast<std::size_t>(k - 1)];
    v[static_cast<std::size_t>(j - 1)] =
        tail_mass / (Q[static_cast<std::size_t>(j - 1)] * static_cast<double>(j));
    return v;
}

struct KExactResult {
    double value = 0.0;
    bool converged = true;
    int sweeps = 0;
    std::vector<double> v;
};

// Constrained K-functional over the truncated zero-mass subspace:
// inf_v ||u - v||_{X_1} + e^s ||v||_{X_eta}. Starts from the candidate above
// and refines by pairwise coordinate descent that preserves the constraint
// (moving v_i is compensated through a pivot coordinate). The objective is
// piecewise linear and convex, so each 1-d subproblem is solved exactly at a
// breakpoint.
inline KExactResult K_exact(double s, const std::vector<double>& u, double eta,
                            const std::vector<double>& Q, double opt_tol = 1e-12,
                            int max_sweeps = 10000) {
    const std::size_t n = u.size();
    if (std::abs(detail::zero_mass_residual(u, Q)) >
        1e-8 * (1.0 + K_lower(s_eta(eta) + 1.0, u, eta, Q)))
        throw Error(ErrorCode::contract_violation, "K_exact requires zero-mass u");

    std::vector<double> A(n), B(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double idx = static_cast<double>(i + 1);
        A[i] = Q[i] * idx;
        B[i] = Q[i] * std::exp(s + eta * idx);  // e^s folded into the weight
        if (!std::isfinite(B[i])) B[i] = std::numeric_limits<double>::max() / 1e6;
    }
    auto objective = [&](const std::vector<double>& v) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) f += A[i] * std::abs(u[i] - v[i]) + B[i] * std::abs(v[i]);
        return f;
    };

    KExactResult res;
    res.v = candidate_v(s, u, eta, Q);
    double f = objective(res.v);

    const int j = cut_index(s, eta, static_cast<int>(n));
    const std::size_t pivot = static_cast<std::size_t>(std::min<int>(j, static_cast<int>(n))) - 1;
    const double wp = Q[pivot] * static_cast<double>(pivot + 1);

    double scale = f + K_lower(s, u, eta, Q);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double f_before = f;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == pivot) continue;
            const double wi = Q[i] * static_cast<double>(i + 1);
            const double rho = wi / wp;
            const double vi = res.v[i];
            const double vp = res.v[pivot];
            // candidates: kinks of the four absolute-value terms
            const double cand[4] = {0.0, u[i], vi + vp / rho, vi + (vp - (u[pivot])) / rho};
            auto part = [&](double t) {
                const double vpn = vp - rho * (t - vi);
                return A[i] * std::abs(u[i] - t) + B[i] * std::abs(t) +
                       A[pivot] * std::abs(u[pivot] - vpn) + B[pivot] * std::abs(vpn);
            };
            const double cur = part(vi);
            double best = cur;
            double best_t = vi;
            for (double t : cand) {
                const double val = part(t);
                if (val < best) {
                    best = val;
                    best_t = t;
                }
            }
            if (best < cur) {
                res.v[pivot] = vp - rho * (best_t - vi);
                res.v[i] = best_t;
                f += best - cur;
            }
        }
        f = objective(res.v);  // resync accumulated deltas
        ++res.sweeps;
        if (f_before - f < opt_tol * scale) {
            res.value = f;
            return res;
        }
    }
    res.converged = false;
    res.value = f;
    return res;
}

struct StarNormResult {
    double value = 0.0;
    double tail_bound = 0.0;
    double s_lo = 0.0;
    double s_hi = 0.0;
    int points = 0;
};

// ||u||_* = integral of K(s,u) h_r(s) ds, by refined trapezoid on a grid
// clipped where the integrand falls below quad_tol * peak.
inline StarNormResult star_norm(const std::vector<double>& u, const std::vector<double>& Q,
                                double r, double eta, const InterpConfig& cfg) {
    auto integrand = [&](double s) { return K_lower(s, u, eta, Q) * h_weight(s, r); };
    // probe for the peak on a coarse grid
    double peak = 0.0;
    for (int i = 0; i <= 64; ++i) {
        const double s = cfg.s_min + (cfg.s_max - cfg.s_min) * i / 64.0;
        peak = std::max(peak, integrand(s));
    }
    if (peak <= 0.0) return {};
    const double cut = cfg.quad_tol * peak;
    double s_lo = 0.0;
    while (s_lo > cfg.s_min && integrand(s_lo) > cut) s_lo -= 1.0;
    double s_hi = 0.0;
    while (s_hi < cfg.s_max && integrand(s_hi) > cut) s_hi += 1.0;

    StarNormResult out;
    out.s_lo = s_lo;
    out.s_hi = s_hi;
    int pts = std::max(cfg.s_points, 65);
    double prev = 0.0;
    for (int refine = 0; refine < 8; ++refine) {
        double acc = 0.0;
        const double dh = (s_hi - s_lo) / (pts - 1);
        for (int i = 0; i < pts; ++i) {
            const double s = s_lo + dh * i;
            const double w = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
            acc += w * integrand(s);
        }
        acc *= dh;
        if (refine > 0 && std::abs(acc - prev) <= cfg.quad_tol * std::abs(acc)) {
            out.value = acc;
            out.points = pts;
            break;
        }
        prev = acc;
        out.value = acc;
        out.points = pts;
        pts = 2 * pts - 1;
    }
    // Discarded-tail estimates: e^{-s} decay on the right, e^{s} decay of K on
    // the left (polynomial weight growth bounded by a factor of 4).
    out.tail_bound = integrand(s_hi) + 4.0 * integrand(s_lo);
    if (out.tail_bound > cfg.quad_tol * out.value + 1e-300) {
        if (s_lo <= cfg.s_min || s_hi >= cfg.s_max)
            throw Error(ErrorCode::widen_grid,
                        "quadrature tails exceed quad_tol at the configured s range");
    }
    return out;
}

// Per-index weight integral I(i) = integral (i ^ e^{s+eta i}) h_r(s) ds,
// evaluated piecewise with the switch point s* = log i - eta i split out.
inline double per_index_weight_integral(int i, double r, double eta, double tol = 1e-11) {
    const double idx = static_cast<double>(i);
    const double s_star = std::log(idx) - eta * idx;
    const double s_low = s_star - 60.0;  // e^{s - s*} < 1e-26 beyond
    auto rising = [&](double s) { return std::exp(s + eta * idx) * h_weight(s, r); };
    double acc = 0.0;
    if (s_star <= 0.0) {
        acc += integrate_adaptive(rising, s_low, s_star, tol);
        // i * (1-s)^{r-1} over [s*, 0]
        acc += idx * (std::pow(1.0 - s_star, r) - 1.0) / r;
        acc += idx;  // integral of i e^{-s} over [0, inf)
    } else {
        acc += integrate_adaptive(rising, s_low, 0.0, tol);
        acc += std::exp(eta * idx) * s_star;  // e^{s+eta i} e^{-s} over [0, s*]
        acc += idx * std::exp(-s_star);       // i e^{-s} over [s*, inf)
    }
    return acc;
}

struct HrShiftReport {
    double sup_ratio = 0.0;
    double sup_ratio_refined = 0.0;
    double grid_stability = 0.0;  // relative change under grid doubling
    double worst_s = 0.0;
    double worst_t = 0.0;
};

// sup over the (s, t) grid of H_m(s+t) / (H_k(s) (1+t)^{m-k}), which the
// shifted-weight comparison asserts is finite for 0 < m < k.
inline HrShiftReport Hr_shift_bound(double m, double k, const std::vector<double>& t_grid,
                                    const std::vector<double>& s_grid) {
    if (!(0.0 < m && m < k))
        throw Error(ErrorCode::contract_violation, "require 0 < m < k");
    auto sup_on = [&](const std::vector<double>& ss, const std::vector<double>& tt, double* ws,
                      double* wt) {
        double sup = 0.0;
        for (double s : ss)
            for (double t : tt) {
                const double ratio =
                    H_weight(s + t, m) / (H_weight(s, k) * std::pow(1.0 + t, m - k));
                if (ratio > sup) {
                    sup = ratio;
                    if (ws) *ws = s;
                    if (wt) *wt = t;
                }
            }
        return sup;
    };
    HrShiftReport rep;
    rep.sup_ratio = sup_on(s_grid, t_grid, &rep.worst_s, &rep.worst_t);
    auto midpoints = [](const std::vector<double>& g) {
        std::vector<double> out = g;
        for (std::size_t i = 0; i + 1 < g.size(); ++i) out.push_back(0.5 * (g[i] + g[i + 1]));
        return out;
    };
    rep.sup_ratio_refined = sup_on(midpoints(s_grid), midpoints(t_grid), nullptr, nullptr);
    rep.grid_stability =
        std::abs(rep.sup_ratio_refined - rep.sup_ratio) / std::max(rep.sup_ratio_refined, 1e-300);
    return rep;
}

struct GronwallReport {
    std::vector<double> t;
    std::vector<double> integral;
    std::vector<double> bound;
    double min_margin = std::numeric_limits<double>::infinity();  // bound / integral
};

// Numeric check of the convolution estimate
// integral_0^t (1+t-s)^{-r} (1+s)^{-r} ds <= 2^{r+1}/(r-1) (1+t)^{-r}.
inline GronwallReport gronwall_convolution_check(double r, const std::vector<double>& t_grid,
                                                 double tol = 1e-11) {
    if (!(r > 1.0)) throw Error(ErrorCode::contract_violation, "require r > 1");
    GronwallReport rep;
    for (double t : t_grid) {
        auto f = [&](double s) { return std::pow(1.0 + t - s, -r) * std::pow(1.0 + s, -r); };
        const double val = (t > 0.0) ? integrate_adaptive(f, 0.0, t, tol) : 0.0;
        const double bound = std::pow(2.0, r + 1.0) / (r - 1.0) * std::pow(1.0 + t, -r);
        rep.t.push_back(t);
        rep.integral.push_back(val);
        rep.bound.push_back(bound);
        if (val > bound)
            throw Error(ErrorCode::bound_failure,
                        "convolution bound violated at t=" + std::to_string(t));
        if (val > 0.0) rep.min_margin = std::min(rep.min_margin, bound / val);
    }
    return rep;
}

}  // namespace bd
