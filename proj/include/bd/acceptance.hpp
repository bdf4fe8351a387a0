#pragma once

// Acceptance battery: every release-gating property with its threshold pinned
// in code. Each criterion prints one PASS/FAIL line with the observed value
// against the threshold. "fast" trims truncation sizes and horizons for a
// sub-minute smoke run; "full" is the gate.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bd/analysis.hpp"
#include "bd/dynamics.hpp"
#include "bd/interp.hpp"
#include "bd/linops.hpp"
#include "bd/model.hpp"
#include "bd/sampling.hpp"

namespace bd {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

enum class Suite { fast, full };

namespace acceptance {

constexpr std::uint64_t kSeed = 0xBD5EEDull;

inline CoefficientModel workhorse(int N) {
    return build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, N);
}

inline Equilibrium workhorse_eq(const CoefficientModel& m) {
    return equilibrium_from_z(m, detailed_balance(m), 1.0);  // z = 0.5 z_s
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

// 1. Detailed balance residual at N=1000 for both reference families.
inline CriterionResult c1_detailed_balance(Suite suite) {
    CriterionResult r{1, "detailed-balance", false, "", 0.0};
    const int N = (suite == Suite::full) ? 1000 : 300;
    double worst = 0.0;
    for (const auto& p : {PenroseParams{1.0, 1.0, 1.0, 2.0}, PenroseParams{0.5, 0.0, 1.0, 2.0}}) {
        const CoefficientModel m = build_coefficients(p, N);
        worst = std::max(worst, detailed_balance_residual(m, detailed_balance(m)));
    }
    r.pass = worst <= 1e-14;
    r.detail = "max residual " + fmt(worst) + " <= 1e-14, N=" + std::to_string(N);
    return r;
}

// 2. Equilibrium round trip at 25/50/75% of the estimated critical mass.
inline CriterionResult c2_round_trip(Suite suite) {
    CriterionResult r{2, "equilibrium-round-trip", false, "", 0.0};
    const int N = (suite == Suite::full) ? 1000 : 300;
    const CoefficientModel m = workhorse(N);
    const DetailedBalance db = detailed_balance(m);
    const double rho_s = mass_of_z(m, db, m.penrose->zs * (1.0 - 1e-6)).rho;
    double worst = 0.0;
    for (double f : {0.25, 0.5, 0.75}) {
        const double target = f * rho_s;
        const Equilibrium eq = solve_z(m, db, target, 1e-10);
        const MassResult mr = mass_of_z(m, db, eq.z);
        worst = std::max(worst, std::abs(mr.rho - target) / target);
    }
    r.pass = worst <= 1e-9;
    r.detail = "max |rho(z)-rho|/rho " + fmt(worst) + " <= 1e-9, rho_s~" + fmt(rho_s);
    return r;
}

// 3. Conservation, entropy monotonicity, and tolerance-refinement stability.
inline CriterionResult c3_conservation_entropy(Suite suite) {
    CriterionResult r{3, "conservation-entropy", false, "", 0.0};
    const int N = (suite == Suite::full) ? 300 : 120;
    const double t_end = (suite == Suite::full) ? 100.0 : 30.0;
    const CoefficientModel m = workhorse(N);
    const Equilibrium eq = workhorse_eq(m);
    const PolynomialTail tail = make_polynomial_tail(2.0, SignPattern::alternating, 0.3, eq, 3.0,
                                                     TailProfile::relative);
    std::vector<double> c0(static_cast<std::size_t>(N));
    for (std::size_t i = 0; i < c0.size(); ++i) c0[i] = eq.Q[i] * (1.0 + tail.perturbation.h[i]);

    auto run = [&](double rtol) {
        IntegratorConfig ic;
        ic.rtol = rtol;
        ic.atol = 1e-15;
        ic.t_end = t_end;
        ic.checkpoint_times = {t_end};
        return integrate(c0, m, ic);
    };
    const Trajectory coarse = run(1e-6);
    const Trajectory fine = run(1e-9);
    double dist = 0.0;
    for (std::size_t i = 0; i < c0.size(); ++i)
        dist += static_cast<double>(i + 1) *
                std::abs(coarse.checkpoints[0].c[i] - fine.checkpoints[0].c[i]);
    const double rel_dist = dist / fine.mass_initial;
    const bool mass_ok = fine.mass_drift_rel_max <= 1e-9;
    const bool entropy_ok = fine.entropy_violations == 0;
    const bool refine_ok = rel_dist <= 1e-5;
    r.pass = mass_ok && entropy_ok && refine_ok;
    r.detail = "mass drift " + fmt(fine.mass_drift_rel_max) + " <= 1e-9; entropy violations " +
               std::to_string(fine.entropy_violations) + " == 0; refinement X1 distance " +
               fmt(rel_dist) + " <= 1e-5";
    return r;
}

// 4. Dirichlet-form identity over random zero-mass vectors.
inline CriterionResult c4_dirichlet_identity(Suite suite) {
    CriterionResult r{4, "dirichlet-form-identity", false, "", 0.0};
    const int N = (suite == Suite::full) ? 500 : 200;
    const int samples = 1000;
    const CoefficientModel m = workhorse(N);
    const Equilibrium eq = workhorse_eq(m);
    const OperatorBundle b = assemble_bundle(m, eq);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        auto rng = make_stream(kSeed + 4, static_cast<std::uint64_t>(s));
        const std::vector<double> h = random_zero_mass(rng, eq.Q);
        Eigen::Map<const Eigen::VectorXd> hv(h.data(), N);
        const Eigen::VectorXd Lh = b.L * hv;
        double form = 0.0;
        for (int i = 0; i < N; ++i)
            form += eq.Q[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)] * Lh(i);
        std::vector<double> gh;
        b.apply_G(h, gh);
        double dirichlet = 0.0;
        for (std::size_t j = 0; j < gh.size(); ++j) dirichlet += b.W[j] * gh[j] * gh[j];
        worst = std::max(worst, std::abs(form + dirichlet) / std::abs(form));
    }
    r.pass = worst <= 1e-12;
    r.detail = "max |<h,Lh>_H + sum w (Gh)^2| / |<h,Lh>_H| = " + fmt(worst) + " <= 1e-12";
    return r;
}

// 5. Spectral gap positivity, truncation stability, and the F(g) form gap
//    inside half the scanned threshold.
inline CriterionResult c5_spectral_gap(Suite suite) {
    CriterionResult r{5, "spectral-gap", false, "", 0.0};
    const int N_hi = (suite == Suite::full) ? 800 : 400;
    const int N_lo = N_hi / 2;
    const CoefficientModel m_hi = workhorse(N_hi);
    const CoefficientModel m_lo = workhorse(N_lo);
    const SpectralReport hi = spectral_gap(assemble_bundle(m_hi, workhorse_eq(m_hi)));
    const SpectralReport lo = spectral_gap(assemble_bundle(m_lo, workhorse_eq(m_lo)));
    const double drift = std::abs(hi.lambda_c - lo.lambda_c) / hi.lambda_c;

    const int N_form = (suite == Suite::full) ? 400 : 200;
    const CoefficientModel mf = workhorse(N_form);
    const OperatorBundle bf = assemble_bundle(mf, workhorse_eq(mf));
    const double g_max = 0.5;
    const int g_steps = 10;
    double delta_hat_H = g_max;
    for (int gi = 0; gi <= g_steps; ++gi) {
        const double g = g_max * gi / g_steps;
        const double lam = std::min(quadratic_form_gap(bf, g), quadratic_form_gap(bf, -g));
        if (lam <= 0.0) {
            delta_hat_H = std::max(0.0, g - g_max / g_steps);
            break;
        }
    }
    double lam_min = std::numeric_limits<double>::infinity();
    for (double f : {0.5, 0.25, 0.125}) {
        const double g = f * delta_hat_H;
        lam_min = std::min({lam_min, quadratic_form_gap(bf, g), quadratic_form_gap(bf, -g)});
    }
    r.pass = hi.lambda_c > 0.0 && drift <= 0.01 && lam_min > 0.0;
    r.detail = "lambda_c " + fmt(hi.lambda_c) + " > 0; |drift(N=" + std::to_string(N_hi) + "->" +
               std::to_string(N_lo) + ")| " + fmt(drift) + " <= 0.01; lambda_H(|g|<=0.5*" +
               fmt(delta_hat_H) + ") >= " + fmt(lam_min) + " > 0";
    return r;
}

// 6. Finite-difference Jacobian vs L, and F(g) = L + g Gamma exactly.
inline CriterionResult c6_jacobian(Suite suite) {
    CriterionResult r{6, "jacobian-consistency", false, "", 0.0};
    const int N = 200;
    (void)suite;
    const CoefficientModel m = workhorse(N);
    const Equilibrium eq = workhorse_eq(m);
    const OperatorBundle b = assemble_bundle(m, eq);
    const JacobianReport jr = jacobian_consistency(m, eq, b, 1e-6);
    double fdiff = 0.0;
    for (double g : {0.0, 0.3, -0.7}) {
        const Eigen::MatrixXd F = b.F_of(g);
        const Eigen::MatrixXd ref = b.L + g * b.Gamma;
        fdiff = std::max(fdiff, (F - ref).cwiseAbs().maxCoeff());
    }
    r.pass = jr.max_rel_error <= 1e-5 && fdiff == 0.0;
    r.detail = "FD Jacobian max rel err " + fmt(jr.max_rel_error) + " <= 1e-5 (step 1e-6); " +
               "max |F(g)-(L+g Gamma)| = " + fmt(fdiff) + " == 0";
    return r;
}

// 7. Dissipativity of A(0) in X_1 and of A(g) in X_{1+k} inside half the
//    scanned threshold, k in {0,1,2,3}.
inline CriterionResult c7_dissipativity(Suite suite) {
    CriterionResult r{7, "dissipativity", false, "", 0.0};
    const int N = (suite == Suite::full) ? 300 : 150;
    const int samples = (suite == Suite::full) ? 10000 : 2000;
    const CoefficientModel m = workhorse(N);
    const Equilibrium eq = workhorse_eq(m);
    bool ok = true;
    std::ostringstream detail;
    const DissipativityReport base = dissipativity_check(m, eq, 0.0, 0.0, samples, kSeed + 7, 2);
    ok = ok && base.pass;
    detail << "A(0) in X_1: max ratio " << fmt(base.max_ratio) << " <= 1e-12";
    for (double k : {0.0, 1.0, 2.0, 3.0}) {
        const DeltaScan scan = delta_k_scan(m, eq, k, 1.5, 30, samples / 10, kSeed + 17, 2);
        const DissipativityReport at_half =
            dissipativity_check(m, eq, 0.5 * scan.delta_hat, k, samples, kSeed + 27, 2);
        const DissipativityReport at_half_neg =
            dissipativity_check(m, eq, -0.5 * scan.delta_hat, k, samples, kSeed + 37, 2);
        ok = ok && at_half.pass && at_half_neg.pass && scan.delta_hat > 0.0;
        detail << "; k=" << k << " delta_hat " << fmt(scan.delta_hat) << " ratio@half "
               << fmt(std::max(at_half.max_ratio, at_half_neg.max_ratio));
    }
    r.pass = ok;
    r.detail = detail.str();
    return r;
}

// 8. K-functional sandwich and star-norm / X_{1+r} equivalence.
inline CriterionResult c8_k_functional(Suite suite) {
    CriterionResult r{8, "k-functional-sandwich", false, "", 0.0};
    const int N = (suite == Suite::full) ? 160 : 96;
    const int samples = (suite == Suite::full) ? 100 : 30;
    const CoefficientModel m = workhorse(N);
    const Equilibrium eq = workhorse_eq(m);
    const double eta = default_eta(eq.zs, eq.z);
    const double C = std::max(2.0 + std::exp(eta), 1.0 / eta);
    double worst_ratio = 0.0;
    bool sandwich_ok = true;
    for (int s = 0; s < samples; ++s) {
        auto rng = make_stream(kSeed + 8, static_cast<std::uint64_t>(s));
        const std::vector<double> u = random_zero_mass(rng, eq.Q);
        for (int si = 0; si <= 30; ++si) {
            const double sv = -30.0 + 2.0 * si;
            const double lo = K_lower(sv, u, eta, eq.Q);
            if (lo <= 0.0) continue;
            const KExactResult ex = K_exact(sv, u, eta, eq.Q);
            const double ratio = ex.value / lo;
            worst_ratio = std::max(worst_ratio, ratio);
            if (ex.value < lo * (1.0 - 1e-9) || ratio > C * (1.0 + 1e-9)) sandwich_ok = false;
        }
    }
    bool equiv_ok = true;
    std::ostringstream edetail;
    InterpConfig icfg;
    icfg.eta = eta;
    for (double rr : {1.0, 2.0, 3.0}) {
        double c_minus = std::numeric_limits<double>::infinity();
        double c_plus = 0.0;
        for (int i = 1; i <= N; ++i) {
            const double I = per_index_weight_integral(i, rr, eta);
            const double w = std::pow(1.0 + i, 1.0 + rr);
            c_minus = std::min(c_minus, I / w);
            c_plus = std::max(c_plus, I / w);
        }
        for (int s = 0; s < 20; ++s) {
            auto rng = make_stream(kSeed + 18, static_cast<std::uint64_t>(s));
            const std::vector<double> u = random_zero_mass(rng, eq.Q);
            const double star = star_norm(u, eq.Q, rr, eta, icfg).value;
            const double xr = weighted_norm(u, eq.Q, 1.0 + rr);
            if (xr <= 0.0) continue;
            const double ratio = star / xr;
            if (ratio < c_minus * (1.0 - 1e-6) ||
                ratio > c_plus * std::pow(2.0, 1.0 + rr) * (1.0 + 1e-6))
                equiv_ok = false;
        }
        edetail << " r=" << rr << " C-=" << fmt(c_minus) << " C+=" << fmt(c_plus);
    }
    r.pass = sandwich_ok && equiv_ok;
    r.detail = "K_lower <= K_exact <= C*K_lower with C=" + fmt(C) + ", observed max ratio " +
               fmt(worst_ratio) + (sandwich_ok ? " ok" : " VIOLATED") + "; equivalence" +
               edetail.str() + (equiv_ok ? " ok" : " VIOLATED");
    return r;
}

// 9. Gronwall convolution bound.
inline CriterionResult c9_gronwall(Suite suite) {
    CriterionResult r{9, "gronwall-convolution", false, "", 0.0};
    (void)suite;
    double min_margin = std::numeric_limits<double>::infinity();
    for (double rr : {2.0, 3.0}) {
        const GronwallReport rep = gronwall_convolution_check(rr, {1.0, 10.0, 100.0});
        min_margin = std::min(min_margin, rep.min_margin);
    }
    r.pass = min_margin >= 1.0;
    r.detail = "min bound/integral margin " + fmt(min_margin) + " >= 1";
    return r;
}

// 10. Linear decay domination (k,m)=(3,1): finite, truncation-stable, with
//     the truncation-induced crossover moving out as N grows.
inline CriterionResult c10_linear_decay(Suite suite) {
    CriterionResult r{10, "linear-decay-domination", false, "", 0.0};
    const int N_lo = (suite == Suite::full) ? 200 : 100;
    const int N_hi = (suite == Suite::full) ? 800 : 200;
    const double t_end = (suite == Suite::full) ? 1500.0 : 400.0;
    const double k = 3.0, mm = 1.0, p = k + 3.5;
    auto run_at = [&](int N) {
        const CoefficientModel m = workhorse(N);
        const Equilibrium eq = workhorse_eq(m);
        const OperatorBundle b = assemble_bundle(m, eq);
        const PolynomialTail tail = make_polynomial_tail(p, SignPattern::alternating, 1e-2, eq, k,
                                                         TailProfile::absolute, 1, 0, false);
        std::vector<double> grid;
        grid.push_back(0.0);
        for (int i = 0; i <= 200; ++i)
            grid.push_back(0.05 * std::pow(t_end / 0.05, i / 200.0));
        return linear_decay_experiment(b, tail.perturbation.h, k, mm, grid);
    };
    const DecayReport lo = run_at(N_lo);
    const DecayReport hi = run_at(N_hi);
    const double growth = hi.domination_constant / lo.domination_constant;
    const double cross_lo = lo.crossover;
    const double cross_hi = hi.crossover;
    const bool cross_ok =
        !std::isnan(cross_lo) && (std::isnan(cross_hi) || cross_hi > cross_lo);
    r.pass = std::isfinite(hi.domination_constant) && hi.domination_constant > 0.0 &&
             growth < 2.0 && cross_ok;
    r.detail = "domination N=" + std::to_string(N_lo) + ": " + fmt(lo.domination_constant) +
               ", N=" + std::to_string(N_hi) + ": " + fmt(hi.domination_constant) + " (growth " +
               fmt(growth) + " < 2); crossover " + fmt(cross_lo) + " -> " +
               (std::isnan(cross_hi) ? std::string("beyond horizon") : fmt(cross_hi));
    return r;
}

// 11. Nonlinear decay domination (k,m)=(3.5,1) with the Lyapunov envelope.
inline CriterionResult c11_nonlinear_decay(Suite suite) {
    CriterionResult r{11, "nonlinear-decay-domination", false, "", 0.0};
    const int N_lo = (suite == Suite::full) ? 200 : 100;
    const int N_hi = (suite == Suite::full) ? 800 : 200;
    const double t_end = (suite == Suite::full) ? 300.0 : 100.0;
    const double k = 3.5, mm = 1.0, p = k + 3.0;
    auto run_at = [&](int N) {
        const CoefficientModel m = workhorse(N);
        const Equilibrium eq = workhorse_eq(m);
        const PolynomialTail tail = make_polynomial_tail(p, SignPattern::plus, 1e-2, eq, k);
        NonlinearDecayConfig cfg;
        cfg.integrator.t_end = t_end;
        cfg.integrator.rtol = 1e-9;
        // Lyapunov ladder on short horizons fixes the envelope first.
        double eps_norm = 0.0, eps_h1 = 0.0;
        for (double f : {1.0, 0.5, 0.25}) {
            const PolynomialTail t2 = make_polynomial_tail(p, SignPattern::plus, f * 1e-2, eq, k);
            NonlinearDecayConfig c2 = cfg;
            c2.integrator.t_end = 20.0;
            const DecayReport r2 = nonlinear_decay_experiment(m, eq, t2.perturbation.h, k, mm, c2);
            if (f == 1.0) {
                eps_norm = 1.05 * r2.sup_norm_k;
                eps_h1 = 1.05 * r2.sup_abs_h1;
            }
        }
        cfg.stability_eps_norm = eps_norm;
        cfg.stability_eps_h1 = eps_h1;
        return nonlinear_decay_experiment(m, eq, tail.perturbation.h, k, mm, cfg);
    };
    const DecayReport lo = run_at(N_lo);
    const DecayReport hi = run_at(N_hi);
    const double growth = hi.domination_constant / lo.domination_constant;
    r.pass = std::isfinite(hi.domination_constant) && hi.domination_constant > 0.0 &&
             growth < 2.0 && !lo.stability_breach && !hi.stability_breach;
    r.detail = "domination N=" + std::to_string(N_lo) + ": " + fmt(lo.domination_constant) +
               ", N=" + std::to_string(N_hi) + ": " + fmt(hi.domination_constant) + " (growth " +
               fmt(growth) + " < 2); |h1| sup " + fmt(hi.sup_abs_h1) + ", norm_k sup " +
               fmt(hi.sup_norm_k) + (hi.stability_breach ? " BREACH" : " within envelope");
    return r;
}

// 12. Duhamel residual scales quadratically under amplitude halving.
inline CriterionResult c12_duhamel(Suite suite) {
    CriterionResult r{12, "duhamel-residual", false, "", 0.0};
    const int N = (suite == Suite::full) ? 300 : 150;
    const CoefficientModel m = workhorse(N);
    const Equilibrium eq = workhorse_eq(m);
    const OperatorBundle b = assemble_bundle(m, eq);
    IntegratorConfig ic;
    ic.rtol = 1e-11;
    ic.atol = 1e-17;
    ic.t_end = 10.0;
    for (double t = 0.0; t <= 10.0 + 1e-12; t += 0.1) ic.checkpoint_times.push_back(t);
    auto residual_at = [&](double amp) {
        const PolynomialTail tail =
            make_polynomial_tail(2.0, SignPattern::alternating, amp, eq, 3.0,
                                 TailProfile::relative);
        std::vector<double> c0(static_cast<std::size_t>(N));
        for (std::size_t i = 0; i < c0.size(); ++i)
            c0[i] = eq.Q[i] * (1.0 + tail.perturbation.h[i]);
        const Trajectory traj = integrate(c0, m, ic);
        return duhamel_residual(traj.checkpoints, b, {2.5, 5.0, 7.5, 10.0});
    };
    const DuhamelReport big = residual_at(1e-2);
    const DuhamelReport small = residual_at(5e-3);
    const double ratio = big.max_abs_residual / small.max_abs_residual;
    r.pass = ratio >= 3.0 && ratio <= 5.0 && big.max_rel_residual <= 1e-3;
    r.detail = "abs residual ratio under halving " + fmt(ratio) + " in [3,5]; rel residual " +
               fmt(big.max_rel_residual) + " <= 1e-3";
    return r;
}

}  // namespace acceptance

inline std::vector<CriterionResult> run_acceptance(Suite suite,
                                                   const std::function<void(const CriterionResult&)>&
                                                       on_result = {}) {
    struct Entry {
        int id;
        const char* name;
        CriterionResult (*fn)(Suite);
    };
    const Entry criteria[] = {
        {1, "detailed-balance", acceptance::c1_detailed_balance},
        {2, "equilibrium-round-trip", acceptance::c2_round_trip},
        {3, "conservation-entropy", acceptance::c3_conservation_entropy},
        {4, "dirichlet-form-identity", acceptance::c4_dirichlet_identity},
        {5, "spectral-gap", acceptance::c5_spectral_gap},
        {6, "jacobian-consistency", acceptance::c6_jacobian},
        {7, "dissipativity", acceptance::c7_dissipativity},
        {8, "k-functional-sandwich", acceptance::c8_k_functional},
        {9, "gronwall-convolution", acceptance::c9_gronwall},
        {10, "linear-decay-domination", acceptance::c10_linear_decay},
        {11, "nonlinear-decay-domination", acceptance::c11_nonlinear_decay},
        {12, "duhamel-residual", acceptance::c12_duhamel},
    };
    std::vector<CriterionResult> results;
    for (const Entry& entry : criteria) {
        const auto start = std::chrono::steady_clock::now();
        CriterionResult res;
        try {
            res = entry.fn(suite);
        } catch (const std::exception& e) {
            res.pass = false;
            res.detail = std::string("exception: ") + e.what();
        }
        res.id = entry.id;
        res.name = entry.name;
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back(res);
        if (on_result) on_result(results.back());
    }
    return results;
}

inline void print_criterion(const CriterionResult& r) {
    std::printf("[%s] %2d %-28s %s (%.2fs)\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.empty() ? "criterion" : r.name.c_str(), r.detail.c_str(), r.seconds);
    std::fflush(stdout);
}

}  // namespace bd
