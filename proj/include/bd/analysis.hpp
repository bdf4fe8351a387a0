#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bd/dynamics.hpp"
#include "bd/errors.hpp"
#include "bd/linops.hpp"
#include "bd/model.hpp"
#include "bd/sampling.hpp"

namespace bd {

// ||h||_{X_k} = sum Q_i i^k |h_i|.
inline double weighted_norm(const std::vector<double>& h, const std::vector<double>& Q, double k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i)
        acc += Q[i] * std::pow(static_cast<double>(i + 1), k) * std::abs(h[i]);
    return acc;
}

// ||h||_{X_eta} = sum Q_i e^{eta i} |h_i|.
inline double x_eta_norm(const std::vector<double>& h, const std::vector<double>& Q, double eta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i)
        acc += Q[i] * std::exp(eta * static_cast<double>(i + 1)) * std::abs(h[i]);
    return acc;
}

// ||h||_H = (sum Q_i h_i^2)^{1/2}.
inline double h_norm(const std::vector<double>& h, const std::vector<double>& Q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += Q[i] * h[i] * h[i];
    return std::sqrt(acc);
}

inline double zero_mass_functional(const std::vector<double>& h, const std::vector<double>& Q) {
    double m = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) m += Q[i] * static_cast<double>(i + 1) * h[i];
    return m;
}

// Relative perturbation h_i = c_i / Q_i - 1 with the mass constraint tracked.
struct Perturbation {
    std::vector<double> h;
    double zero_mass_residual = 0.0;
    double compensation = 0.0;  // amount moved into the pivot coordinate
    int pivot = 1;
};

// physical = true enforces h_i >= -1 (nonnegative concentrations); abstract
// zero-mass data for the linear-operator experiments may skip it.
inline Perturbation project_zero_mass(std::vector<double> h, const std::vector<double>& Q,
                                      int pivot = 1, bool physical = true) {
    if (physical) {
        for (double x : h)
            if (x < -1.0)
                throw Error(ErrorCode::infeasible_perturbation, "h_i < -1 before projection");
    }
    Perturbation p;
    p.pivot = pivot;
    p.compensation = project_zero_mass_inplace(h, Q, pivot);
    const auto pi = static_cast<std::size_t>(pivot - 1);
    if (physical && h[pi] < -1.0)
        throw Error(ErrorCode::infeasible_perturbation,
                    "zero-mass correction pushed the pivot coordinate below -1");
    p.zero_mass_residual = std::abs(zero_mass_functional(h, Q));
    p.h = std::move(h);
    return p;
}

enum class SignPattern { plus, alternating, random_signs };
enum class TailProfile {
    absolute,  // Q_i h_i = amplitude * sigma_i * i^{-p}; the heavy-tail data
               // whose X_{1+k} norm diverges in N once p <= k+2
    relative,  // h_i = amplitude * sigma_i * i^{-p}; benign in symmetrized
               // coordinates, used where e^{Lt} is applied by eigensolve
};

struct PolynomialTail {
    Perturbation perturbation;
    bool norm_divergence_warning = false;  // p too small for the requested k
};

// Power-tail initial data, projected to zero mass through the pivot.
inline PolynomialTail make_polynomial_tail(double p, SignPattern pattern, double amplitude,
                                           const Equilibrium& eq, double k_check,
                                           TailProfile profile = TailProfile::absolute,
                                           int pivot = 1, std::uint64_t seed = 0,
                                           bool physical = true) {
    if (!(amplitude > 0.0)) throw Error(ErrorCode::contract_violation, "amplitude must be > 0");
    const auto n = static_cast<std::size_t>(eq.N);
    std::vector<double> h(n, 0.0);
    auto rng = make_stream(seed, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double sigma = 1.0;
        if (pattern == SignPattern::alternating) sigma = (i % 2 == 0) ? 1.0 : -1.0;
        if (pattern == SignPattern::random_signs) sigma = (rng() & 1u) ? 1.0 : -1.0;
        const double shape = amplitude * sigma * std::pow(static_cast<double>(i + 1), -p);
        h[i] = (profile == TailProfile::absolute) ? shape / eq.Q[i] : shape;
    }
    PolynomialTail out;
    out.norm_divergence_warning = (profile == TailProfile::absolute) && (p <= k_check + 2.0);
    out.perturbation = project_zero_mass(std::move(h), eq.Q, pivot, physical);
    return out;
}

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int points = 0;
};

// Least squares of log(values) against log(1 + times) on [window_lo, window_hi].
inline FitResult fit_rate(const std::vector<double>& times, const std::vector<double>& values,
                          double window_lo, double window_hi) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window_lo || times[i] > window_hi) continue;
        if (!(values[i] > 0.0))
            throw Error(ErrorCode::fit_domain, "fit_rate requires positive values on the window");
        x.push_back(std::log1p(times[i]));
        y.push_back(std::log(values[i]));
    }
    if (x.size() < 10)
        throw Error(ErrorCode::fit_domain, "fit_rate requires at least 10 points in the window");
    const double nn = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    FitResult f;
    f.points = static_cast<int>(x.size());
    const double denom = nn * sxx - sx * sx;
    f.slope = (nn * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / nn;
    const double ss_tot = syy - sy * sy / nn;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += e * e;
    }
    f.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

// Local log-log slopes over a sliding window of grid points.
inline std::vector<double> local_slopes(const std::vector<double>& times,
                                        const std::vector<double>& values, int window = 10) {
    std::vector<double> out(times.size(), std::numeric_limits<double>::quiet_NaN());
    if (times.size() < static_cast<std::size_t>(window)) return out;
    for (std::size_t i = static_cast<std::size_t>(window) - 1; i < times.size(); ++i) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        bool ok = true;
        for (int w = 0; w < window; ++w) {
            const std::size_t idx = i - static_cast<std::size_t>(w);
            if (!(values[idx] > 0.0)) {
                ok = false;
                break;
            }
            const double xx = std::log1p(times[idx]);
            const double yy = std::log(values[idx]);
            sx += xx;
            sy += yy;
            sxx += xx * xx;
            sxy += xx * yy;
        }
        if (!ok) continue;
        const double nn = window;
        out[i] = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    }
    return out;
}

// First grid time past t_min where the local slope steepens beyond
// factor * target_exponent; NaN when no crossover is seen in the window.
inline double crossover_time(const std::vector<double>& times, const std::vector<double>& values,
                             double target_exponent, double factor = 2.0, double t_min = 1.0,
                             int window = 10) {
    const std::vector<double> slopes = local_slopes(times, values, window);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t_min || std::isnan(slopes[i])) continue;
        if (slopes[i] < -factor * target_exponent) return times[i];
    }
    return std::numeric_limits<double>::quiet_NaN();
}

struct DecayReport {
    double k = 0.0;
    double m = 0.0;
    double target_exponent = 0.0;  // k - m for the linear flow, k - m - 1 nonlinear
    double initial_norm_k = 0.0;   // ||h(0)||_{X_{1+k}}
    std::vector<double> times;
    std::vector<double> norms_m;   // ||h(t)||_{X_{1+m}}
    std::vector<double> norms_k;   // ||h(t)||_{X_{1+k}}
    std::vector<double> h1;
    std::vector<double> local_slope;
    double domination_constant = 0.0;  // sup over pre-crossover window
    double crossover = std::numeric_limits<double>::quiet_NaN();
    FitResult fitted;
    bool fit_ok = false;
    // nonlinear-run extras
    double sup_norm_k = 0.0;
    double sup_abs_h1 = 0.0;
    bool stability_breach = false;
    double growth_rate_hat = 0.0;  // fitted K in ||h(t)|| <= e^{Kt} ||h(0)||
    double N_sensitivity = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void finish_decay_report(DecayReport& rep, double fit_lo, double fit_hi) {
    rep.local_slope = local_slopes(rep.times, rep.norms_m);
    rep.crossover = crossover_time(rep.times, rep.norms_m, rep.target_exponent);
    double dom = 0.0;
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        if (!std::isnan(rep.crossover) && rep.times[i] >= rep.crossover) break;
        const double t = rep.times[i];
        dom = std::max(dom,
                       rep.norms_m[i] * std::pow(1.0 + t, rep.target_exponent) / rep.initial_norm_k);
    }
    rep.domination_constant = dom;
    const double hi = std::isnan(rep.crossover) ? fit_hi : std::min(fit_hi, rep.crossover);
    try {
        rep.fitted = fit_rate(rep.times, rep.norms_m, fit_lo, hi);
        rep.fit_ok = true;
    } catch (const Error&) {
        rep.fit_ok = false;
    }
    double growth = 0.0;
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        if (rep.times[i] < 1.0 || rep.norms_k[i] <= 0.0) continue;
        growth = std::max(growth, std::log(rep.norms_k[i] / rep.initial_norm_k) / rep.times[i]);
    }
    rep.growth_rate_hat = growth;
}

}  // namespace detail

enum class LinearRoute { stepper, eigen };

// Evolve du/dt = L u and record the weighted norms on the requested grid.
// The stepper route runs the controlled explicit pair on the factored
// operator; the eigensolve route is exact but only trustworthy for data whose
// symmetrized coordinates sqrt(Q_i) u_i stay moderate.
inline DecayReport linear_decay_experiment(const OperatorBundle& bundle,
                                           const std::vector<double>& u0, double k, double m,
                                           const std::vector<double>& t_grid,
                                           LinearRoute route = LinearRoute::stepper,
                                           double rtol = 1e-9, double atol = 1e-300) {
    if (!(0.0 < m && m < k))
        throw Error(ErrorCode::contract_violation, "require 0 < m < k");
    const auto& Q = bundle.eq.Q;
    DecayReport rep;
    rep.k = k;
    rep.m = m;
    rep.target_exponent = k - m;
    rep.initial_norm_k = weighted_norm(u0, Q, 1.0 + k);

    auto record = [&](double t, const std::vector<double>& u) {
        rep.times.push_back(t);
        rep.norms_m.push_back(weighted_norm(u, Q, 1.0 + m));
        rep.norms_k.push_back(weighted_norm(u, Q, 1.0 + k));
        rep.h1.push_back(u[0]);
    };

    if (route == LinearRoute::eigen) {
        if (bundle.N > 1000)
            throw Error(ErrorCode::contract_violation, "eigen route limited to N <= 1000");
        const Eigen::MatrixXd S = symmetrized_L(bundle);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        Eigen::VectorXd y0(bundle.N);
        for (Eigen::Index i = 0; i < bundle.N; ++i)
            y0(i) = bundle.sqrtQ[static_cast<std::size_t>(i)] * u0[static_cast<std::size_t>(i)];
        const Eigen::VectorXd coef = es.eigenvectors().transpose() * y0;
        std::vector<double> u(static_cast<std::size_t>(bundle.N));
        for (double t : t_grid) {
            Eigen::VectorXd scaled = coef;
            for (Eigen::Index i = 0; i < bundle.N; ++i)
                scaled(i) *= std::exp(es.eigenvalues()(i) * t);
            const Eigen::VectorXd y = es.eigenvectors() * scaled;
            for (Eigen::Index i = 0; i < bundle.N; ++i)
                u[static_cast<std::size_t>(i)] = y(i) / bundle.sqrtQ[static_cast<std::size_t>(i)];
            record(t, u);
        }
    } else {
        // controlled BS23 on the factored L with the equilibrium stiffness cap
        const auto n = static_cast<std::size_t>(bundle.N);
        double sig = 0.0;
        for (int i = 1; i <= bundle.N; ++i)
            sig = std::max(sig, bundle.eq.Q[0] * bundle.model.a_of(i) + bundle.model.b_of(i));
        const double cap = 0.7 / sig;
        std::vector<double> u = u0, k1(n), k2(n), k3(n), k4(n), y1(n), work(n), err(n);
        double t = 0.0;
        double dt = std::min(1e-4, cap);
        std::size_t next = 0;
        bool have_k1 = false;
        const double t_end = t_grid.empty() ? 0.0 : t_grid.back();
        // Per-component relative control; the dt*|k1| term keeps freshly
        // populated components from blowing up the weight ratio.
        auto err_norm = [&](double step) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double w = atol + rtol * std::max({std::abs(u[i]), std::abs(y1[i]),
                                                         step * std::abs(k1[i])});
                const double r = err[i] / w;
                acc += r * r;
            }
            return std::sqrt(acc / static_cast<double>(n));
        };
        if (!t_grid.empty() && t_grid.front() == 0.0) {
            record(0.0, u);
            next = 1;
        }
        std::vector<double> u_old(n);
        while (t < t_end) {
            dt = std::min({dt, cap, t_end - t});
            if (dt < 1e-14) throw Error(ErrorCode::stiffness_failure, "linear stepper underflow");
            if (!have_k1) {
                bundle.apply_L(u, k1);
                have_k1 = true;
            }
            for (std::size_t i = 0; i < n; ++i) work[i] = u[i] + 0.5 * dt * k1[i];
            bundle.apply_L(work, k2);
            for (std::size_t i = 0; i < n; ++i) work[i] = u[i] + 0.75 * dt * k2[i];
            bundle.apply_L(work, k3);
            for (std::size_t i = 0; i < n; ++i)
                y1[i] = u[i] + dt * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]);
            bundle.apply_L(y1, k4);
            for (std::size_t i = 0; i < n; ++i)
                err[i] = dt * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] -
                               1.0 / 8.0 * k4[i]);
            const double enorm = err_norm(dt);
            if (enorm <= 1.0) {
                u_old = u;
                const double t_old = t;
                u = y1;
                t += dt;
                k1 = k4;
                while (next < t_grid.size() && t_grid[next] <= t) {
                    const double tc = t_grid[next];
                    const double w = (t > t_old) ? (tc - t_old) / (t - t_old) : 1.0;
                    for (std::size_t i = 0; i < n; ++i) work[i] = (1.0 - w) * u_old[i] + w * u[i];
                    record(tc, work);
                    ++next;
                }
                const double grow = (enorm > 0.0) ? 0.9 * std::pow(enorm, -1.0 / 3.0) : 5.0;
                dt *= std::clamp(grow, 0.2, 5.0);
            } else {
                dt *= std::clamp(0.9 * std::pow(enorm, -1.0 / 3.0), 0.2, 0.9);
            }
        }
    }
    detail::finish_decay_report(rep, 2.0, rep.times.empty() ? 0.0 : rep.times.back());
    return rep;
}

struct NonlinearDecayConfig {
    IntegratorConfig integrator;
    double stability_eps_norm = std::numeric_limits<double>::infinity();
    double stability_eps_h1 = std::numeric_limits<double>::infinity();
    double fit_window_lo = 2.0;
};

// Full nonlinear run in c-coordinates from c = Q (1 + h0); norms recorded at
// accepted steps. A breach of the configured smallness envelope is reported,
// not thrown: it means the decay theorem's hypothesis failed, not the solver.
inline DecayReport nonlinear_decay_experiment(const CoefficientModel& model, const Equilibrium& eq,
                                              const std::vector<double>& h0, double k, double m,
                                              const NonlinearDecayConfig& cfg) {
    if (!(k > m + 2.0))
        throw Error(ErrorCode::contract_violation, "require k > m + 2");
    const auto n = static_cast<std::size_t>(eq.N);
    DecayReport rep;
    rep.k = k;
    rep.m = m;
    rep.target_exponent = k - m - 1.0;
    rep.initial_norm_k = weighted_norm(h0, eq.Q, 1.0 + k);

    std::vector<double> c0(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
        c0[i] = eq.Q[i] * (1.0 + h0[i]);
        if (c0[i] < 0.0)
            throw Error(ErrorCode::infeasible_perturbation, "initial concentration negative");
    }
    auto observer = [&](double t, const std::vector<double>& c) {
        double nm = 0.0, nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double delta = c[i] - eq.Q[i];  // Q_i h_i without the 1/Q blowup
            const double idx = static_cast<double>(i + 1);
            nm += std::pow(idx, 1.0 + m) * std::abs(delta);
            nk += std::pow(idx, 1.0 + k) * std::abs(delta);
        }
        rep.times.push_back(t);
        rep.norms_m.push_back(nm);
        rep.norms_k.push_back(nk);
        const double h1 = c[0] / eq.Q[0] - 1.0;
        rep.h1.push_back(h1);
        rep.sup_norm_k = std::max(rep.sup_norm_k, nk);
        rep.sup_abs_h1 = std::max(rep.sup_abs_h1, std::abs(h1));
        if (nk > cfg.stability_eps_norm || std::abs(h1) > cfg.stability_eps_h1)
            rep.stability_breach = true;
    };
    integrate(c0, model, cfg.integrator, observer);
    detail::finish_decay_report(rep, cfg.fit_window_lo, rep.times.empty() ? 0.0 : rep.times.back());
    return rep;
}

struct DuhamelReport {
    double max_rel_residual = 0.0;
    double max_abs_residual = 0.0;
    std::vector<double> t;
    std::vector<double> rel_residual;
    std::vector<double> abs_residual;
};

// Residual of h(t) = e^{Lt} h(0) + int_0^t e^{L(t-s)} h_1(s) Gamma h(s) ds on
// a trajectory sampled at checkpoints, with e^{Lt} from the eigendecomposition
// of the symmetrized form. The integral treats the forcing as piecewise linear
// between checkpoints and integrates e^{lambda (t-s)} against it exactly per
// mode, so the stiff modes near s = t do not pollute the O(dt^2) budget.
inline DuhamelReport duhamel_residual(const std::vector<StateVector>& checkpoints,
                                      const OperatorBundle& bundle,
                                      const std::vector<double>& t_grid,
                                      double rel_tol = 1e-3) {
    if (bundle.N > 1000)
        throw Error(ErrorCode::contract_violation, "duhamel_residual limited to N <= 1000");
    if (checkpoints.size() < 3)
        throw Error(ErrorCode::contract_violation, "duhamel_residual needs dense checkpoints");
    const auto n = static_cast<std::size_t>(bundle.N);
    const auto& Q = bundle.eq.Q;

    const Eigen::MatrixXd S = symmetrized_L(bundle);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::MatrixXd& V = es.eigenvectors();
    auto to_y = [&](const std::vector<double>& h) {
        Eigen::VectorXd y(bundle.N);
        for (Eigen::Index i = 0; i < bundle.N; ++i)
            y(i) = bundle.sqrtQ[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)];
        return y;
    };
    auto expL = [&](double t, const Eigen::VectorXd& coef, std::vector<double>& out) {
        Eigen::VectorXd scaled = coef;
        for (Eigen::Index i = 0; i < bundle.N; ++i) scaled(i) *= std::exp(es.eigenvalues()(i) * t);
        const Eigen::VectorXd y = V * scaled;
        out.resize(n);
        for (Eigen::Index i = 0; i < bundle.N; ++i)
            out[static_cast<std::size_t>(i)] = y(i) / bundle.sqrtQ[static_cast<std::size_t>(i)];
    };

    // h and h_1 Gamma h at every checkpoint, in eigenbasis coefficients
    std::vector<std::vector<double>> hs(checkpoints.size());
    std::vector<Eigen::VectorXd> f_coef(checkpoints.size());
    std::vector<double> times(checkpoints.size());
    std::vector<double> gh(n);
    for (std::size_t j = 0; j < checkpoints.size(); ++j) {
        times[j] = checkpoints[j].t;
        hs[j].resize(n);
        for (std::size_t i = 0; i < n; ++i) hs[j][i] = checkpoints[j].c[i] / Q[i] - 1.0;
        bundle.apply_Gamma(hs[j], gh);
        const double h1 = hs[j][0];
        for (auto& x : gh) x *= h1;
        f_coef[j] = V.transpose() * to_y(gh);
    }
    const Eigen::VectorXd h0_coef = V.transpose() * to_y(hs[0]);
    const double h0_scale = weighted_norm(hs[0], Q, 1.0);

    // phi0 = int_0^d e^{lu} du, phi1 = int_0^d u e^{lu} du, series for small ld
    auto phi01 = [](double l, double d, double& p0, double& p1) {
        const double x = l * d;
        if (std::abs(x) < 1e-5) {
            p0 = d * (1.0 + x / 2.0 + x * x / 6.0);
            p1 = d * d * (0.5 + x / 3.0 + x * x / 8.0);
        } else {
            const double e = std::exp(x);
            p0 = (e - 1.0) / l;
            p1 = (d * e) / l - (e - 1.0) / (l * l);
        }
    };

    DuhamelReport rep;
    std::vector<double> pred(n), term(n);
    for (double t : t_grid) {
        // locate the last checkpoint <= t
        std::size_t jt = 0;
        while (jt + 1 < times.size() && times[jt + 1] <= t + 1e-12) ++jt;
        expL(t, h0_coef, pred);
        // exact per-mode integral of the piecewise-linear forcing over [0, t]
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(bundle.N);
        for (std::size_t j = 0; j + 1 <= jt; ++j) {
            const double d = times[j + 1] - times[j];
            if (d <= 0.0) continue;
            const double tau1 = t - times[j + 1];
            for (Eigen::Index i = 0; i < bundle.N; ++i) {
                const double lam = es.eigenvalues()(i);
                double p0, p1;
                phi01(lam, d, p0, p1);
                const double slope = (f_coef[j + 1](i) - f_coef[j](i)) / d;
                // f(s) = f_{j+1} - u * slope with u = s_{j+1} - s
                acc(i) += std::exp(lam * tau1) * (f_coef[j + 1](i) * p0 - slope * p1);
            }
        }
        const Eigen::VectorXd y = V * acc;
        for (std::size_t i = 0; i < n; ++i)
            pred[i] += y(static_cast<Eigen::Index>(i)) / bundle.sqrtQ[i];

        for (std::size_t i = 0; i < n; ++i) term[i] = hs[jt][i] - pred[i];
        const double abs_res = weighted_norm(term, Q, 1.0);
        const double denom = weighted_norm(hs[jt], Q, 1.0);
        const double rel_res = (h0_scale > 0.0 && denom > 0.0) ? abs_res / denom : 0.0;
        rep.t.push_back(times[jt]);
        rep.abs_residual.push_back(abs_res);
        rep.rel_residual.push_back(rel_res);
        rep.max_abs_residual = std::max(rep.max_abs_residual, abs_res);
        rep.max_rel_residual = std::max(rep.max_rel_residual, rel_res);
    }
    if (rep.max_rel_residual > rel_tol)
        throw Error(ErrorCode::formulation_inconsistency,
                    "Duhamel residual " + std::to_string(rep.max_rel_residual) +
                        " exceeds tolerance " + std::to_string(rel_tol));
    return rep;
}

}  // namespace bd
