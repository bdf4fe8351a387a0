#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "bd/errors.hpp"
#include "bd/model.hpp"

namespace bd {

// Truncated state c_1..c_N with the conserved first moment and the
// Ball-Carr-Penrose entropy attached.
struct StateVector {
    double t = 0.0;
    std::vector<double> c;
    double mass = 0.0;
    double entropy = 0.0;
};

enum class Method { explicit_adaptive, implicit_euler };

struct IntegratorConfig {
    Method method = Method::explicit_adaptive;
    double rtol = 1e-9;
    double atol = 1e-15;
    double dt_init = 1e-4;
    double dt_max = 1.0;
    double t_end = 100.0;
    std::vector<double> checkpoint_times;  // sorted, within [0, t_end]
    // Explicit steps are capped at stability_fraction / max_i(a_i c_1 + b_i).
    double stability_fraction = 0.7;
    // Negative components above -clamp_rel * ||c||_inf are clamped to zero and
    // counted; anything below that aborts the run.
    double clamp_rel = 1e-14;
    double entropy_tol_rel = 1e-12;

    void validate() const {
        if (!(rtol > 0.0) || !(atol > 0.0))
            throw Error(ErrorCode::contract_violation, "rtol and atol must be positive");
        if (!(dt_init > 0.0) || dt_init > dt_max)
            throw Error(ErrorCode::contract_violation, "require 0 < dt_init <= dt_max");
    }
};

// Net flux J_i = a_i c_1 c_i - b_{i+1} c_{i+1}, defined for 1 <= i <= N-1.
inline double flux(const std::vector<double>& c, const CoefficientModel& m, int i) {
    if (i < 1 || i >= m.N)
        throw Error(ErrorCode::contract_violation, "flux index must satisfy 1 <= i <= N-1");
    const auto k = static_cast<std::size_t>(i - 1);
    return m.a[k] * c[0] * c[k] - m.b[k + 1] * c[k + 1];
}

// dc/dt with the J_N = 0 closure:
//   dc_i = J_{i-1} - J_i   (2 <= i <= N-1)
//   dc_N = J_{N-1}
//   dc_1 = -J_1 - sum_{i<N} J_i
// The closure makes sum_i i * dc_i vanish identically.
inline void rhs(const std::vector<double>& c, const CoefficientModel& m,
                std::vector<double>& out) {
    const auto n = static_cast<std::size_t>(m.N);
    out.assign(n, 0.0);
    const double c1 = c[0];
    double flux_sum = 0.0;
    double j_prev = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double j = m.a[k] * c1 * c[k] - m.b[k + 1] * c[k + 1];
        flux_sum += j;
        if (k >= 1) out[k] = j_prev - j;
        j_prev = j;
    }
    out[n - 1] = j_prev;
    const double j1 = m.a[0] * c1 * c1 - m.b[1] * c[1];
    out[0] = -j1 - flux_sum;
}

inline std::vector<double> rhs(const std::vector<double>& c, const CoefficientModel& m) {
    std::vector<double> out;
    rhs(c, m, out);
    return out;
}

// V-tilde(c) = sum c_i (log(c_i / Qt_i) - 1); empty terms contribute zero.
inline double entropy(const std::vector<double>& c, const std::vector<double>& qtilde) {
    double v = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i] > 0.0) v += c[i] * (std::log(c[i] / qtilde[i]) - 1.0);
    }
    return v;
}

// Relative entropy against the equilibrium Q: sum c log(c/Q) - c + Q >= 0.
inline double relative_entropy(const std::vector<double>& c, const std::vector<double>& Q) {
    double v = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i] > 0.0) {
            v += c[i] * std::log(c[i] / Q[i]) - c[i] + Q[i];
        } else {
            v += Q[i];
        }
    }
    return v;
}

inline double first_moment(const std::vector<double>& c) {
    double m = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) m += static_cast<double>(i + 1) * c[i];
    return m;
}

struct StepRecord {
    double t = 0.0;
    double dt = 0.0;
    double mass = 0.0;
    double entropy = 0.0;
    double c1 = 0.0;
};

struct Trajectory {
    std::vector<StateVector> checkpoints;
    std::vector<StepRecord> steps;  // accepted steps only
    double mass_initial = 0.0;
    double mass_drift_rel_max = 0.0;
    long entropy_violations = 0;
    double entropy_violation_max = 0.0;
    long clamped_count = 0;
    double worst_negative = 0.0;
    long n_accepted = 0;
    long n_rejected = 0;
};

using StepObserver = std::function<void(double t, const std::vector<double>& c)>;

namespace detail {

inline double sigma_max(const std::vector<double>& c, const CoefficientModel& m) {
    const double c1 = c[0];
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s = std::max(s, m.a[k] * c1 + m.b[k]);
    return s;
}

inline double error_norm(const std::vector<double>& err, const std::vector<double>& y0,
                         const std::vector<double>& y1, double rtol, double atol) {
    double acc = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double w = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = err[i] / w;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

// Clamp small negatives after an accepted step; abort on large ones.
inline void clamp_negatives(std::vector<double>& c, double clamp_rel, Trajectory& traj) {
    double cmax = 0.0;
    for (double x : c) cmax = std::max(cmax, std::abs(x));
    const double floor = -clamp_rel * cmax;
    for (auto& x : c) {
        if (x < 0.0) {
            traj.worst_negative = std::min(traj.worst_negative, x);
            if (x < floor) {
                throw Error(ErrorCode::integration_failure,
                            "negative concentration " + std::to_string(x) +
                                " below clamp threshold " + std::to_string(floor));
            }
            x = 0.0;
            ++traj.clamped_count;
        }
    }
}

// Analytic Jacobian of rhs() in c-coordinates; tridiagonal plus a dense first
// row and column through the monomer. Used by the implicit fallback.
inline void rhs_jacobian(const std::vector<double>& c, const CoefficientModel& m,
                         std::vector<std::vector<double>>& J) {
    const auto n = static_cast<std::size_t>(m.N);
    J.assign(n, std::vector<double>(n, 0.0));
    const double c1 = c[0];
    // Adds sign * dJ_k/dc to row r, where J_k = a[k] c_1 c[k] - b[k+1] c[k+1]
    // (0-based flux index k). For k = 0 the flux is a[0] c_1^2 - b[1] c[1].
    auto add_flux = [&](std::size_t r, std::size_t k, double sign) {
        if (k == 0) {
            J[r][0] += sign * 2.0 * m.a[0] * c1;
        } else {
            J[r][k] += sign * m.a[k] * c1;
            J[r][0] += sign * m.a[k] * c[k];
        }
        J[r][k + 1] += -sign * m.b[k + 1];
    };
    for (std::size_t r = 1; r + 1 < n; ++r) {
        add_flux(r, r - 1, 1.0);
        add_flux(r, r, -1.0);
    }
    add_flux(n - 1, n - 2, 1.0);
    add_flux(0, 0, -2.0);
    for (std::size_t k = 1; k + 1 < n; ++k) add_flux(0, k, -1.0);
}

inline void lu_solve_inplace(std::vector<std::vector<double>>& A, std::vector<double>& rhs_vec) {
    const std::size_t n = A.size();
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[best][col])) best = r;
        if (best != col) {
            std::swap(A[best], A[col]);
            std::swap(rhs_vec[best], rhs_vec[col]);
        }
        const double d = A[col][col];
        if (d == 0.0) throw Error(ErrorCode::integration_failure, "singular Newton matrix");
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A[r][col] / d;
            if (f == 0.0) continue;
            A[r][col] = 0.0;
            for (std::size_t cc = col + 1; cc < n; ++cc) A[r][cc] -= f * A[col][cc];
            rhs_vec[r] -= f * rhs_vec[col];
        }
    }
    for (std::size_t ri = n; ri-- > 0;) {
        double s = rhs_vec[ri];
        for (std::size_t cc = ri + 1; cc < n; ++cc) s -= A[ri][cc] * rhs_vec[cc];
        rhs_vec[ri] = s / A[ri][ri];
    }
}

}  // namespace detail

// Mass-conserving time integration. The default is a Bogacki-Shampine 3(2)
// embedded pair with PI step control and a hard step cap at
// stability_fraction / max_i(a_i c_1 + b_i); implicit Euler with damped Newton
// is the fallback for runs where that cap is too restrictive.
inline Trajectory integrate(const std::vector<double>& c0, const CoefficientModel& m,
                            const IntegratorConfig& cfg, const StepObserver& observer = {}) {
    cfg.validate();
    if (static_cast<int>(c0.size()) != m.N)
        throw Error(ErrorCode::contract_violation, "state length does not match model N");
    for (double x : c0)
        if (x < 0.0 || !std::isfinite(x))
            throw Error(ErrorCode::contract_violation, "initial state must be nonnegative/finite");

    const DetailedBalance db = detailed_balance(m);
    Trajectory traj;
    std::vector<double> c = c0;
    double t = 0.0;
    traj.mass_initial = first_moment(c);
    double v_prev = entropy(c, db.qtilde);

    auto record = [&](double tt, double dt_used) {
        StepRecord rec;
        rec.t = tt;
        rec.dt = dt_used;
        rec.mass = first_moment(c);
        rec.entropy = entropy(c, db.qtilde);
        rec.c1 = c[0];
        if (traj.mass_initial > 0.0) {
            traj.mass_drift_rel_max = std::max(
                traj.mass_drift_rel_max, std::abs(rec.mass - traj.mass_initial) / traj.mass_initial);
        }
        const double tol = cfg.entropy_tol_rel * std::abs(v_prev);
        if (rec.entropy > v_prev + tol) {
            ++traj.entropy_violations;
            traj.entropy_violation_max =
                std::max(traj.entropy_violation_max, rec.entropy - v_prev);
        }
        v_prev = rec.entropy;
        traj.steps.push_back(rec);
        if (observer) observer(tt, c);
    };
    record(0.0, 0.0);

    const double t_eps = 1e-12 * std::max(1.0, std::abs(cfg.t_end));
    std::size_t next_cp = 0;
    auto emit_checkpoints = [&](double t_old, const std::vector<double>& c_old, double t_new,
                                const std::vector<double>& c_new) {
        while (next_cp < cfg.checkpoint_times.size() &&
               cfg.checkpoint_times[next_cp] <= t_new + t_eps) {
            const double tc = cfg.checkpoint_times[next_cp];
            const double w =
                (t_new > t_old) ? std::clamp((tc - t_old) / (t_new - t_old), 0.0, 1.0) : 1.0;
            StateVector sv;
            sv.t = tc;
            sv.c.resize(c_new.size());
            for (std::size_t i = 0; i < c_new.size(); ++i)
                sv.c[i] = (1.0 - w) * c_old[i] + w * c_new[i];
            sv.mass = first_moment(sv.c);
            sv.entropy = entropy(sv.c, db.qtilde);
            traj.checkpoints.push_back(std::move(sv));
            ++next_cp;
        }
    };

    const auto n = static_cast<std::size_t>(m.N);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), y1(n), work(n), err(n);
    double dt = cfg.dt_init;
    bool have_k1 = false;

    // Steps are clipped to land exactly on checkpoint times, so checkpoint
    // states carry no interpolation error; the interpolation path below stays
    // as a fallback.
    auto clip_to_checkpoint = [&](double step) {
        if (next_cp < cfg.checkpoint_times.size()) {
            const double gap = cfg.checkpoint_times[next_cp] - t;
            if (gap > t_eps) step = std::min(step, gap);
        }
        return step;
    };

    if (cfg.method == Method::explicit_adaptive) {
        while (cfg.t_end - t > t_eps) {
            const double cap = cfg.stability_fraction / std::max(detail::sigma_max(c, m), 1e-300);
            dt = std::min(dt, cfg.dt_max);
            const double step = clip_to_checkpoint(std::min({dt, cap, cfg.t_end - t}));
            const bool limited = step < dt;  // capped or clipped, not error-limited
            if (step < 1e-14) {
                throw Error(ErrorCode::stiffness_failure,
                            "step size underflow at t=" + std::to_string(t) +
                                "; consider implicit_euler");
            }
            if (!have_k1) {
                rhs(c, m, k1);
                have_k1 = true;
            }
            for (std::size_t i = 0; i < n; ++i) work[i] = c[i] + 0.5 * step * k1[i];
            rhs(work, m, k2);
            for (std::size_t i = 0; i < n; ++i) work[i] = c[i] + 0.75 * step * k2[i];
            rhs(work, m, k3);
            for (std::size_t i = 0; i < n; ++i)
                y1[i] = c[i] + step * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]);
            rhs(y1, m, k4);
            for (std::size_t i = 0; i < n; ++i)
                err[i] = step * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] -
                                 1.0 / 8.0 * k4[i]);
            const double enorm = detail::error_norm(err, c, y1, cfg.rtol, cfg.atol);
            if (enorm <= 1.0) {
                const std::vector<double> c_old = c;
                const double t_old = t;
                c = y1;
                t += step;
                detail::clamp_negatives(c, cfg.clamp_rel, traj);
                ++traj.n_accepted;
                record(t, step);
                emit_checkpoints(t_old, c_old, t, c);
                k1 = k4;  // FSAL, still valid after clamp at the 1e-14 scale
                const double grow = (enorm > 0.0) ? 0.9 * std::pow(enorm, -1.0 / 3.0) : 5.0;
                if (!limited) dt = step * std::clamp(grow, 0.2, 5.0);
            } else {
                ++traj.n_rejected;
                dt = step * std::clamp(0.9 * std::pow(enorm, -1.0 / 3.0), 0.2, 0.9);
                have_k1 = true;  // k1 unchanged, state unchanged
            }
        }
    } else {
        // Implicit Euler, damped Newton, error estimate by step doubling.
        std::vector<std::vector<double>> J;
        std::vector<std::vector<double>> A;
        std::vector<double> g(n), half1(n), half2(n);
        auto newton_step = [&](const std::vector<double>& base, double h,
                               std::vector<double>& out) -> bool {
            out = base;
            for (int it = 0; it < 50; ++it) {
                rhs(out, m, k1);
                double res = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    g[i] = base[i] + h * k1[i] - out[i];
                    res = std::max(res, std::abs(g[i]));
                }
                const double scale = cfg.atol + cfg.rtol * bd::sup_norm(out);
                if (res <= 0.1 * scale) return true;
                detail::rhs_jacobian(out, m, J);
                A.assign(n, std::vector<double>(n, 0.0));
                for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t cidx = 0; cidx < n; ++cidx) A[r][cidx] = -h * J[r][cidx];
                    A[r][r] += 1.0;
                }
                detail::lu_solve_inplace(A, g);
                double alpha = 1.0;
                for (int d = 0; d < 8; ++d) {
                    for (std::size_t i = 0; i < n; ++i) work[i] = out[i] + alpha * g[i];
                    rhs(work, m, k2);
                    double res2 = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        res2 = std::max(res2, std::abs(base[i] + h * k2[i] - work[i]));
                    if (res2 < res || d == 7) {
                        out = work;
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            return false;
        };
        while (cfg.t_end - t > t_eps) {
            dt = std::min({dt, cfg.dt_max, cfg.t_end - t});
            dt = clip_to_checkpoint(dt);
            if (dt < 1e-14)
                throw Error(ErrorCode::stiffness_failure, "implicit step size underflow");
            bool ok = newton_step(c, dt, y1);
            ok = ok && newton_step(c, 0.5 * dt, half1) && newton_step(half1, 0.5 * dt, half2);
            if (!ok) {
                dt *= 0.5;
                ++traj.n_rejected;
                continue;
            }
            for (std::size_t i = 0; i < n; ++i) err[i] = half2[i] - y1[i];
            const double enorm = detail::error_norm(err, c, half2, cfg.rtol, cfg.atol);
            if (enorm <= 1.0) {
                const std::vector<double> c_old = c;
                const double t_old = t;
                // Richardson-extrapolated value (order 2 locally)
                for (std::size_t i = 0; i < n; ++i) c[i] = 2.0 * half2[i] - y1[i];
                t += dt;
                detail::clamp_negatives(c, cfg.clamp_rel, traj);
                ++traj.n_accepted;
                record(t, dt);
                emit_checkpoints(t_old, c_old, t, c);
                dt *= std::clamp(0.9 / std::sqrt(std::max(enorm, 1e-10)), 0.2, 4.0);
            } else {
                ++traj.n_rejected;
                dt *= std::clamp(0.9 / std::sqrt(enorm), 0.2, 0.9);
            }
        }
    }
    // flush checkpoints coinciding with t_end up to rounding
    emit_checkpoints(t, c, t + 2.0 * t_eps, c);
    return traj;
}

}  // namespace bd
