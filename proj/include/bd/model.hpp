#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bd/errors.hpp"
#include "bd/util.hpp"

namespace bd {

// Coefficient family a_i = i^alpha, b_i = a_i (z_s + q / i^(1-mu)).
struct PenroseParams {
    double alpha = 0.5;
    double mu = 0.0;
    double q = 1.0;
    double zs = 2.0;
};

// Rate sequences a_i (attachment) and b_i (detachment), 1-based size index,
// plus the growth diagnostics C1 = min a_i and C2 = max over i of
// max(a_i, b_i)/i.
struct CoefficientModel {
    int N = 0;
    std::optional<PenroseParams> penrose;
    std::vector<double> a;  // a[i-1] = a_i
    std::vector<double> b;  // b[i-1] = b_i
    double C1 = 0.0;
    double C2 = 0.0;

    [[nodiscard]] double a_of(int i) const { return a[static_cast<std::size_t>(i - 1)]; }
    [[nodiscard]] double b_of(int i) const { return b[static_cast<std::size_t>(i - 1)]; }
};

namespace detail {

inline void finish_model(CoefficientModel& m) {
    double c1 = std::numeric_limits<double>::infinity();
    double c2 = 0.0;
    for (int i = 1; i <= m.N; ++i) {
        const double ai = m.a_of(i);
        const double bi = m.b_of(i);
        if (!(ai > 0.0) || !(bi > 0.0)) {
            throw Error(ErrorCode::invalid_model,
                        "nonpositive coefficient at i=" + std::to_string(i));
        }
        c1 = std::min(c1, ai);
        c2 = std::max(c2, std::max(ai, bi) / static_cast<double>(i));
    }
    m.C1 = c1;
    m.C2 = c2;
}

}  // namespace detail

inline CoefficientModel build_coefficients(const PenroseParams& p, int N) {
    if (N < 8) throw Error(ErrorCode::invalid_model, "truncation N must be >= 8");
    if (!(p.alpha > 0.0) || p.alpha > 1.0)
        throw Error(ErrorCode::invalid_model, "alpha must lie in (0,1]");
    if (p.mu < 0.0 || p.mu > 1.0) throw Error(ErrorCode::invalid_model, "mu must lie in [0,1]");
    if (!(p.q > 0.0)) throw Error(ErrorCode::invalid_model, "q must be positive");
    if (!(p.zs > 0.0)) throw Error(ErrorCode::invalid_model, "z_s must be positive");
    CoefficientModel m;
    m.N = N;
    m.penrose = p;
    m.a.resize(static_cast<std::size_t>(N));
    m.b.resize(static_cast<std::size_t>(N));
    for (int i = 1; i <= N; ++i) {
        const double x = static_cast<double>(i);
        const double ai = std::pow(x, p.alpha);
        m.a[static_cast<std::size_t>(i - 1)] = ai;
        m.b[static_cast<std::size_t>(i - 1)] = ai * (p.zs + p.q / std::pow(x, 1.0 - p.mu));
    }
    detail::finish_model(m);
    return m;
}

inline CoefficientModel build_coefficients(std::vector<double> a, std::vector<double> b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::length_mismatch, "custom a and b sequences differ in length");
    if (a.size() < 8)
        throw Error(ErrorCode::length_mismatch, "custom sequences must provide at least 8 terms");
    CoefficientModel m;
    m.N = static_cast<int>(a.size());
    m.a = std::move(a);
    m.b = std::move(b);
    detail::finish_model(m);
    return m;
}

inline CoefficientModel build_coefficients(std::vector<double> a, std::vector<double> b, int N) {
    if (static_cast<int>(a.size()) < N || static_cast<int>(b.size()) < N)
        throw Error(ErrorCode::length_mismatch, "custom sequences shorter than N");
    a.resize(static_cast<std::size_t>(N));
    b.resize(static_cast<std::size_t>(N));
    return build_coefficients(std::move(a), std::move(b));
}

// Detailed-balance coefficients, Qt_1 = 1, Qt_{i+1} = Qt_i a_i / b_{i+1}.
// The recursion runs in compensated log space: at N ~ 1000 the plain running
// sum carries |log Qt| ~ 700, and its last-bit rounding alone would spoil the
// 1e-14 residual target on the exponentiated sequence.
struct DetailedBalance {
    std::vector<double> qtilde;
    std::vector<double> log_qtilde;
};

inline DetailedBalance detailed_balance(const CoefficientModel& m) {
    DetailedBalance db;
    const auto n = static_cast<std::size_t>(m.N);
    db.qtilde.resize(n);
    db.log_qtilde.resize(n);
    DoubleDouble acc;
    db.qtilde[0] = 1.0;
    db.log_qtilde[0] = 0.0;
    for (int i = 1; i < m.N; ++i) {
        acc.add(std::log(m.a_of(i)));
        acc.add(-std::log(m.b_of(i + 1)));
        // exp(hi)*(1+lo) keeps the compensation term's accuracy in the value
        db.log_qtilde[static_cast<std::size_t>(i)] = acc.value();
        db.qtilde[static_cast<std::size_t>(i)] = std::exp(acc.hi) * (1.0 + acc.lo);
    }
    return db;
}

struct CriticalZ {
    double zs = 0.0;
    double convergence_estimate = 0.0;  // |r_N - r_{N/2}| / r_N for custom models
    bool warning = false;               // estimate above 10%
};

inline CriticalZ critical_z(const CoefficientModel& m) {
    CriticalZ out;
    if (m.penrose) {
        out.zs = m.penrose->zs;
        return out;
    }
    const double r_full = m.b_of(m.N) / m.a_of(m.N);
    const double r_half = m.b_of(m.N / 2) / m.a_of(m.N / 2);
    out.zs = r_full;
    out.convergence_estimate = std::abs(r_full - r_half) / r_full;
    out.warning = out.convergence_estimate > 0.10;
    return out;
}

struct MassResult {
    double rho = 0.0;
    double tail_bound = 0.0;
};

// rho(z) = sum_{i<=N} i Qt_i z^i, with a geometric-ratio estimate of the
// discarded tail based on the last observed term ratio.
inline MassResult mass_of_z(const CoefficientModel& m, const DetailedBalance& db, double z) {
    const double zs = critical_z(m).zs;
    if (!(z > 0.0)) return {0.0, 0.0};
    if (z >= zs)
        throw Error(ErrorCode::supercritical_rejected,
                    "z=" + std::to_string(z) + " is not below z_s=" + std::to_string(zs));
    const double logz = std::log(z);
    MassResult out;
    double t_prev = 0.0;
    double t_last = 0.0;
    for (int i = 1; i <= m.N; ++i) {
        const double qi =
            std::exp(db.log_qtilde[static_cast<std::size_t>(i - 1)] + static_cast<double>(i) * logz);
        const double term = static_cast<double>(i) * qi;
        out.rho += term;
        t_prev = t_last;
        t_last = term;
    }
    if (t_prev > 0.0 && t_last > 0.0) {
        const double r = t_last / t_prev;
        out.tail_bound = (r < 1.0) ? t_last * r / ((1.0 - r) * (1.0 - r))
                                   : std::numeric_limits<double>::infinity();
    }
    return out;
}

// Equilibrium Q_i = Qt_i z^i at truncation N, with the mass and tail
// diagnostics attached.
struct Equilibrium {
    int N = 0;
    double zs = 0.0;
    double z = 0.0;
    double rho = 0.0;
    double tail_bound = 0.0;
    double ratio_at_N = 0.0;  // Q_N / Q_{N-1}, compared against z/z_s
    std::vector<double> qtilde;
    std::vector<double> log_qtilde;
    std::vector<double> Q;
    std::vector<double> log_Q;

    [[nodiscard]] double Q_of(int i) const { return Q[static_cast<std::size_t>(i - 1)]; }
};

inline Equilibrium equilibrium_from_z(const CoefficientModel& m, const DetailedBalance& db,
                                      double z) {
    const CriticalZ cz = critical_z(m);
    if (!(z > 0.0) || z >= cz.zs)
        throw Error(ErrorCode::supercritical_rejected, "z must lie in (0, z_s)");
    Equilibrium eq;
    eq.N = m.N;
    eq.zs = cz.zs;
    eq.z = z;
    eq.qtilde = db.qtilde;
    eq.log_qtilde = db.log_qtilde;
    const auto n = static_cast<std::size_t>(m.N);
    eq.Q.resize(n);
    eq.log_Q.resize(n);
    const double logz = std::log(z);
    for (int i = 1; i <= m.N; ++i) {
        const double lq = db.log_qtilde[static_cast<std::size_t>(i - 1)] + static_cast<double>(i) * logz;
        eq.log_Q[static_cast<std::size_t>(i - 1)] = lq;
        eq.Q[static_cast<std::size_t>(i - 1)] = std::exp(lq);
    }
    const MassResult mr = mass_of_z(m, db, z);
    eq.rho = mr.rho;
    eq.tail_bound = mr.tail_bound;
    eq.ratio_at_N = std::exp(eq.log_Q[n - 1] - eq.log_Q[n - 2]);
    return eq;
}

// Invert rho(z) by bisection on (0, z_s). The map is strictly increasing and
// its derivative blows up near z_s, which is why Newton is not used here.
inline Equilibrium solve_z(const CoefficientModel& m, const DetailedBalance& db, double rho_target,
                           double tol) {
    if (!(tol > 0.0)) throw Error(ErrorCode::contract_violation, "tol must be positive");
    if (!(rho_target > 0.0))
        throw Error(ErrorCode::contract_violation, "rho_target must be positive");
    const CriticalZ cz = critical_z(m);
    const double z_hi = cz.zs * (1.0 - 1e-6);
    const MassResult at_top = mass_of_z(m, db, z_hi);
    if (rho_target >= at_top.rho) {
        throw Error(ErrorCode::supercritical_rejected,
                    "rho_target exceeds rho(z_s(1-1e-6)) at this N");
    }
    // When the critical mass is finite the truncation uncertainty near z_s
    // forms a dead band; an infinite tail bound there just means rho diverges
    // at z_s and any finite target is subcritical.
    if (std::isfinite(at_top.tail_bound) && rho_target > at_top.rho - at_top.tail_bound) {
        throw Error(ErrorCode::supercritical_rejected,
                    "rho_target within the tail bound of rho(z_s(1-1e-6)) at this N");
    }
    double lo = 0.0;
    double hi = z_hi;
    double mid = 0.5 * z_hi;
    MassResult mr{};
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        mr = mass_of_z(m, db, mid);
        if (std::abs(mr.rho - rho_target) <= tol * rho_target) break;
        if (mr.rho < rho_target) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
            mr = mass_of_z(m, db, mid);
            if (std::abs(mr.rho - rho_target) > tol * rho_target) {
                throw Error(ErrorCode::truncation_too_small,
                            "bisection exhausted before meeting tol at this truncation");
            }
            break;
        }
    }
    return equilibrium_from_z(m, db, mid);
}

// Asymptotically strong fragmentation: smallest N_z such that
// a_i (z + delta) <= b_i for every i in (N_z, N]. delta defaults to
// (z_s - z)/2 at the call site. sup_violation reports max a_i(z+delta) - b_i.
struct FragmentationIndex {
    double delta = 0.0;
    int N_z = 0;
    double sup_violation = 0.0;
    bool holds_from_1 = false;
};

inline FragmentationIndex strong_fragmentation_index(const CoefficientModel& m, double z,
                                                     double delta) {
    FragmentationIndex out;
    out.delta = delta;
    int last_violation = 0;
    double sup = -std::numeric_limits<double>::infinity();
    for (int i = 1; i <= m.N; ++i) {
        const double gap = m.a_of(i) * (z + delta) - m.b_of(i);
        sup = std::max(sup, gap);
        if (gap > 0.0) last_violation = i;
    }
    out.N_z = std::max(1, last_violation);
    out.sup_violation = sup;
    out.holds_from_1 = (last_violation == 0);
    return out;
}

// Max relative residual of Qt_i a_i = Qt_{i+1} b_{i+1} over the stored range.
inline double detailed_balance_residual(const CoefficientModel& m, const DetailedBalance& db) {
    double worst = 0.0;
    for (int i = 1; i < m.N; ++i) {
        const double lhs = db.qtilde[static_cast<std::size_t>(i - 1)] * m.a_of(i);
        const double rhs = db.qtilde[static_cast<std::size_t>(i)] * m.b_of(i + 1);
        worst = std::max(worst, std::abs(lhs - rhs) / lhs);
    }
    return worst;
}

}  // namespace bd
