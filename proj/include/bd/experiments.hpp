#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bd/analysis.hpp"
#include "bd/config.hpp"
#include "bd/dynamics.hpp"
#include "bd/errors.hpp"
#include "bd/interp.hpp"
#include "bd/io.hpp"
#include "bd/linops.hpp"
#include "bd/model.hpp"
#include "bd/sampling.hpp"

namespace bd {

struct RunContext {
    std::filesystem::path out;
    std::uint64_t seed = 12345;
    int threads = 1;
};

namespace detail {

inline CoefficientModel model_from_config(ConfigReader& cfg) {
    const std::string kind = cfg.get<std::string>("model", "kind", "penrose");
    const int N = cfg.require<int>("model", "N");
    if (kind == "penrose") {
        PenroseParams p;
        p.alpha = cfg.get<double>("model", "alpha", 0.5);
        p.mu = cfg.get<double>("model", "mu", 0.0);
        p.q = cfg.get<double>("model", "q", 1.0);
        p.zs = cfg.get<double>("model", "zs", 2.0);
        return build_coefficients(p, N);
    }
    if (kind == "custom") {
        auto a = cfg.require<std::vector<double>>("model", "a");
        auto b = cfg.require<std::vector<double>>("model", "b");
        return build_coefficients(std::move(a), std::move(b), N);
    }
    throw ValidationError("model.kind must be penrose or custom");
}

inline Equilibrium equilibrium_from_config(ConfigReader& cfg, const CoefficientModel& m,
                                           const DetailedBalance& db) {
    const bool has_z = cfg.has("", "z");
    const bool has_rho = cfg.has("", "rho");
    if (has_z == has_rho)
        throw ValidationError("exactly one of z or rho must be given");
    if (has_z) {
        const double z = cfg.require<double>("", "z");
        cfg.record("", "rho", json());
        return equilibrium_from_z(m, db, z);
    }
    const double rho = cfg.require<double>("", "rho");
    const double tol = cfg.get<double>("", "solve_tol", 1e-10);
    cfg.record("", "z", json());
    return solve_z(m, db, rho, tol);
}

inline IntegratorConfig integrator_from_config(ConfigReader& cfg) {
    IntegratorConfig ic;
    const std::string method = cfg.get<std::string>("integrator", "method", "explicit_adaptive");
    if (method == "explicit_adaptive") {
        ic.method = Method::explicit_adaptive;
    } else if (method == "implicit_euler") {
        ic.method = Method::implicit_euler;
    } else {
        throw ValidationError("integrator.method must be explicit_adaptive or implicit_euler");
    }
    ic.rtol = cfg.get<double>("integrator", "rtol", 1e-9);
    ic.atol = cfg.get<double>("integrator", "atol", 1e-15);
    ic.dt_init = cfg.get<double>("integrator", "dt_init", 1e-4);
    ic.dt_max = cfg.get<double>("integrator", "dt_max", 1.0);
    ic.t_end = cfg.get<double>("integrator", "t_end", 100.0);
    ic.stability_fraction = cfg.get<double>("integrator", "stability_fraction", 0.7);
    const int cp = cfg.get<int>("integrator", "checkpoints", 21);
    const std::string spacing = cfg.get<std::string>("integrator", "checkpoint_spacing", "linear");
    for (int i = 0; i < cp; ++i) {
        const double f = static_cast<double>(i) / std::max(1, cp - 1);
        if (spacing == "log") {
            const double t0 = std::min(0.01 * ic.t_end, 0.1);
            ic.checkpoint_times.push_back(i == 0 ? 0.0
                                                 : t0 * std::pow(ic.t_end / t0, f));
        } else {
            ic.checkpoint_times.push_back(f * ic.t_end);
        }
    }
    return ic;
}

struct PerturbationSpec {
    double p = 6.5;
    SignPattern pattern = SignPattern::alternating;
    double amplitude = 1e-2;
    TailProfile profile = TailProfile::absolute;
    int pivot = 1;
    std::uint64_t seed = 0;
};

inline PerturbationSpec perturbation_from_config(ConfigReader& cfg) {
    PerturbationSpec spec;
    spec.p = cfg.get<double>("perturbation", "p", 6.5);
    const std::string pat = cfg.get<std::string>("perturbation", "pattern", "alternating");
    if (pat == "plus") {
        spec.pattern = SignPattern::plus;
    } else if (pat == "alternating") {
        spec.pattern = SignPattern::alternating;
    } else if (pat == "random") {
        spec.pattern = SignPattern::random_signs;
    } else {
        throw ValidationError("perturbation.pattern must be plus, alternating or random");
    }
    spec.amplitude = cfg.get<double>("perturbation", "amplitude", 1e-2);
    const std::string prof = cfg.get<std::string>("perturbation", "profile", "absolute");
    if (prof == "absolute") {
        spec.profile = TailProfile::absolute;
    } else if (prof == "relative") {
        spec.profile = TailProfile::relative;
    } else {
        throw ValidationError("perturbation.profile must be absolute or relative");
    }
    spec.pivot = cfg.get<int>("perturbation", "pivot", 1);
    spec.seed = cfg.get<std::uint64_t>("perturbation", "seed", 0);
    return spec;
}

inline std::vector<double> log_time_grid(double t_min, double t_end, int points) {
    std::vector<double> g;
    g.push_back(0.0);
    for (int i = 0; i < points; ++i) {
        const double f = static_cast<double>(i) / std::max(1, points - 1);
        g.push_back(t_min * std::pow(t_end / t_min, f));
    }
    return g;
}

inline json decay_report_json(const DecayReport& rep) {
    json j;
    j["k"] = rep.k;
    j["m"] = rep.m;
    j["target_exponent"] = rep.target_exponent;
    j["initial_norm_k"] = rep.initial_norm_k;
    j["domination_constant"] = rep.domination_constant;
    j["crossover_time"] = rep.crossover;
    j["fitted_slope"] = rep.fit_ok ? json(rep.fitted.slope) : json();
    j["fitted_r_squared"] = rep.fit_ok ? json(rep.fitted.r_squared) : json();
    j["sup_norm_k"] = rep.sup_norm_k;
    j["sup_abs_h1"] = rep.sup_abs_h1;
    j["stability_breach"] = rep.stability_breach;
    j["growth_rate_hat"] = rep.growth_rate_hat;
    j["N_sensitivity"] = std::isnan(rep.N_sensitivity) ? json() : json(rep.N_sensitivity);
    return j;
}

inline void decay_csv(const DecayReport& rep, const std::filesystem::path& path) {
    CsvWriter csv({"t", "norm_m", "norm_k", "h1", "local_slope"});
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        csv.append_row(std::vector<double>{rep.times[i], rep.norms_m[i], rep.norms_k[i], rep.h1[i],
                                           rep.local_slope[i]});
    }
    csv.save(path);
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline json run_equilibrium(ConfigReader& cfg, const RunContext& ctx) {
    const CoefficientModel m = detail::model_from_config(cfg);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = detail::equilibrium_from_config(cfg, m, db);

    CsvWriter csv({"i", "a_i", "b_i", "Qtilde_i", "Q_i", "db_residual"});
    for (int i = 1; i <= m.N; ++i) {
        double resid = 0.0;
        if (i < m.N) {
            const double lhs = db.qtilde[static_cast<std::size_t>(i - 1)] * m.a_of(i);
            const double rhs_v = db.qtilde[static_cast<std::size_t>(i)] * m.b_of(i + 1);
            resid = std::abs(lhs - rhs_v) / lhs;
        }
        csv.append_row(std::vector<double>{static_cast<double>(i), m.a_of(i), m.b_of(i),
                                           db.qtilde[static_cast<std::size_t>(i - 1)],
                                           eq.Q[static_cast<std::size_t>(i - 1)], resid});
    }
    csv.save(ctx.out / "equilibrium.csv");

    const FragmentationIndex fi = strong_fragmentation_index(m, eq.z, 0.5 * (eq.zs - eq.z));
    json j;
    j["z"] = eq.z;
    j["z_s"] = eq.zs;
    j["rho"] = eq.rho;
    j["tail_bound"] = eq.tail_bound;
    j["ratio_at_N"] = eq.ratio_at_N;
    j["ratio_target"] = eq.z / eq.zs;
    j["detailed_balance_residual_max"] = detailed_balance_residual(m, db);
    j["C1"] = m.C1;
    j["C2"] = m.C2;
    j["fragmentation"] = {{"delta", fi.delta},
                          {"N_z", fi.N_z},
                          {"sup_violation", fi.sup_violation},
                          {"holds_from_1", fi.holds_from_1}};
    const CriticalZ cz = critical_z(m);
    j["critical_z"] = {{"zs", cz.zs},
                       {"convergence_estimate", cz.convergence_estimate},
                       {"warning", cz.warning}};
    return j;
}

inline json run_simulate(ConfigReader& cfg, const RunContext& ctx) {
    const CoefficientModel m = detail::model_from_config(cfg);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = detail::equilibrium_from_config(cfg, m, db);
    const IntegratorConfig ic = detail::integrator_from_config(cfg);
    const detail::PerturbationSpec ps = detail::perturbation_from_config(cfg);
    const double k_norm = cfg.get<double>("pair", "k", 3.0);
    const double m_norm = cfg.get<double>("pair", "m", 1.0);
    const bool snapshots = cfg.get<bool>("", "snapshots", false);

    const PolynomialTail tail =
        make_polynomial_tail(ps.p, ps.pattern, ps.amplitude, eq, k_norm, ps.profile, ps.pivot,
                             ps.seed);
    const auto n = static_cast<std::size_t>(m.N);
    std::vector<double> c0(n);
    for (std::size_t i = 0; i < n; ++i) c0[i] = eq.Q[i] * (1.0 + tail.perturbation.h[i]);

    CsvWriter csv({"t", "mass", "entropy", "rel_entropy", "norm_X1",
                   "norm_X1p" + format_double(m_norm), "norm_X1p" + format_double(k_norm), "c_1"});
    std::vector<double> h(n);
    auto observer = [&](double t, const std::vector<double>& c) {
        double n1 = 0.0, nm = 0.0, nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = c[i] / eq.Q[i] - 1.0;
            const double delta = std::abs(c[i] - eq.Q[i]);
            const double idx = static_cast<double>(i + 1);
            n1 += idx * delta;
            nm += std::pow(idx, 1.0 + m_norm) * delta;
            nk += std::pow(idx, 1.0 + k_norm) * delta;
        }
        csv.append_row(std::vector<double>{t, first_moment(c), entropy(c, db.qtilde),
                                           relative_entropy(c, eq.Q), n1, nm, nk, c[0]});
    };
    const Trajectory traj = integrate(c0, m, ic, observer);
    csv.save(ctx.out / "trajectory.csv");

    if (snapshots) {
        json snaps = json::array();
        for (const auto& sv : traj.checkpoints) {
            json s;
            s["t"] = sv.t;
            s["mass"] = sv.mass;
            s["entropy"] = sv.entropy;
            s["c"] = sv.c;
            snaps.push_back(std::move(s));
        }
        save_json(ctx.out / "snapshots.json", snaps);
    }

    json j;
    j["mass_initial"] = traj.mass_initial;
    j["mass_drift_rel_max"] = traj.mass_drift_rel_max;
    j["entropy_violations"] = traj.entropy_violations;
    j["entropy_violation_max"] = traj.entropy_violation_max;
    j["clamped_count"] = traj.clamped_count;
    j["worst_negative"] = traj.worst_negative;
    j["steps_accepted"] = traj.n_accepted;
    j["steps_rejected"] = traj.n_rejected;
    j["initial_norms"] = {{"X1", weighted_norm(tail.perturbation.h, eq.Q, 1.0)},
                          {"X1pk", weighted_norm(tail.perturbation.h, eq.Q, 1.0 + k_norm)}};
    // growth-rate sanity: fitted K in ||h(t)||_{X_{1+k}} <= e^{Kt} ||h(0)||
    double khat = 0.0;
    const double norm0 = weighted_norm(tail.perturbation.h, eq.Q, 1.0 + k_norm);
    for (const auto& sv : traj.checkpoints) {
        if (sv.t < 1.0) continue;
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            nk += std::pow(static_cast<double>(i + 1), 1.0 + k_norm) * std::abs(sv.c[i] - eq.Q[i]);
        if (nk > 0.0 && norm0 > 0.0) khat = std::max(khat, std::log(nk / norm0) / sv.t);
    }
    j["growth_rate_hat"] = khat;
    return j;
}

inline json run_spectrum(ConfigReader& cfg, const RunContext& ctx) {
    const CoefficientModel m = detail::model_from_config(cfg);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = detail::equilibrium_from_config(cfg, m, db);
    const OperatorBundle bundle = assemble_bundle(m, eq);
    const SpectralReport rep = spectral_gap(bundle);

    // half-truncation comparison
    const CoefficientModel m2 = m.penrose ? build_coefficients(*m.penrose, m.N / 2)
                                          : build_coefficients(m.a, m.b, m.N / 2);
    const DetailedBalance db2 = detailed_balance(m2);
    const Equilibrium eq2 = equilibrium_from_z(m2, db2, eq.z);
    const SpectralReport rep2 = spectral_gap(assemble_bundle(m2, eq2));

    const double g_max = cfg.get<double>("spectrum", "g_max", 0.5);
    const int g_steps = cfg.get<int>("spectrum", "g_steps", 10);
    json lambda_h = json::array();
    double delta_hat_H = g_max;
    bool failed = false;
    for (int gi = 0; gi <= g_steps; ++gi) {
        const double g = g_max * gi / g_steps;
        double lam = quadratic_form_gap(bundle, g);
        if (g > 0.0) lam = std::min(lam, quadratic_form_gap(bundle, -g));
        lambda_h.push_back({{"g", g}, {"lambda_H", lam}});
        if (lam <= 0.0 && !failed) {
            failed = true;
            delta_hat_H = std::max(0.0, g - g_max / g_steps);
        }
    }

    json delta_k = json::object();
    const auto k_list = cfg.get<std::vector<double>>("spectrum", "k_list", {});
    const int samples = cfg.get<int>("spectrum", "samples", 2000);
    for (double k : k_list) {
        const DeltaScan scan = delta_k_scan(m, eq, k, 1.5, 30, samples, ctx.seed, ctx.threads);
        delta_k[format_double(k)] = scan.delta_hat;
    }

    json j;
    j["N"] = m.N;
    j["z"] = eq.z;
    j["z_s"] = eq.zs;
    j["lambda_c"] = rep.lambda_c;
    j["lambda_c_half_N"] = rep2.lambda_c;
    j["N_stability"] = std::abs(rep.lambda_c - rep2.lambda_c) / rep.lambda_c;
    j["residual"] = rep.residual;
    j["lambda_H"] = lambda_h;
    j["delta_hat_H"] = delta_hat_H;
    j["delta_hat_k"] = delta_k;
    (void)ctx;
    return j;
}

inline json run_dissipativity(ConfigReader& cfg, const RunContext& ctx) {
    const CoefficientModel m = detail::model_from_config(cfg);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = detail::equilibrium_from_config(cfg, m, db);
    const auto k_list = cfg.get<std::vector<double>>("dissipativity", "k_list", {0.0, 1.0, 2.0, 3.0});
    const double g_max = cfg.get<double>("dissipativity", "g_max", 1.5);
    const int g_steps = cfg.get<int>("dissipativity", "g_steps", 30);
    const int samples = cfg.get<int>("dissipativity", "samples", 10000);
    const int ntilde = cfg.get<int>("dissipativity", "ntilde", 0);

    json j;
    j["k"] = json::array();
    bool all_pass = true;
    for (double k : k_list) {
        const DissipativityReport rep0 =
            dissipativity_check(m, eq, 0.0, k, samples, ctx.seed, ctx.threads, ntilde);
        const DeltaScan scan =
            delta_k_scan(m, eq, k, g_max, g_steps, samples / 10 + 1, ctx.seed + 1, ctx.threads);
        const DissipativityReport rep_half = dissipativity_check(
            m, eq, 0.5 * scan.delta_hat, k, samples, ctx.seed + 2, ctx.threads, ntilde);
        json jk;
        jk["k"] = k;
        jk["Ntilde"] = rep0.Ntilde;
        jk["pass_g0"] = rep0.pass;
        jk["max_ratio_g0"] = rep0.max_ratio;
        jk["delta_hat"] = scan.delta_hat;
        jk["pass_half_delta"] = rep_half.pass;
        jk["max_ratio_half_delta"] = rep_half.max_ratio;
        if (!rep0.pass) jk["witness"] = rep0.witness;
        if (!rep_half.pass) jk["witness_half"] = rep_half.witness;
        all_pass = all_pass && rep0.pass && rep_half.pass;
        j["k"].push_back(std::move(jk));
    }
    if (!all_pass)
        throw Error(ErrorCode::dissipativity_failure, "sign functional went positive; see report");
    return j;
}

inline json run_interp_check(ConfigReader& cfg, const RunContext& ctx) {
    const CoefficientModel m = detail::model_from_config(cfg);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = detail::equilibrium_from_config(cfg, m, db);

    InterpConfig icfg;
    icfg.eta = cfg.has("interp", "eta") ? cfg.require<double>("interp", "eta")
                                        : default_eta(eq.zs, eq.z);
    cfg.record("interp", "eta", icfg.eta);
    icfg.quad_tol = cfg.get<double>("interp", "quad_tol", 1e-10);
    const double s_lo = cfg.get<double>("interp", "s_lo", -30.0);
    const double s_hi = cfg.get<double>("interp", "s_hi", 30.0);
    const int s_points = cfg.get<int>("interp", "s_points", 61);
    const int samples = cfg.get<int>("interp", "kexact_samples", 100);
    const auto r_list = cfg.get<std::vector<double>>("interp", "r", {1.0, 2.0, 3.0});
    icfg.validate(eq.zs, eq.z);

    const double C = std::max(2.0 + std::exp(icfg.eta), 1.0 / icfg.eta);
    double worst_ratio = 0.0;
    bool sandwich_ok = true;
    for (int sample = 0; sample < samples; ++sample) {
        auto rng = make_stream(ctx.seed, static_cast<std::uint64_t>(sample));
        std::vector<double> u = random_zero_mass(rng, eq.Q);
        for (int si = 0; si < s_points; ++si) {
            const double s = s_lo + (s_hi - s_lo) * si / std::max(1, s_points - 1);
            const double lo = K_lower(s, u, icfg.eta, eq.Q);
            const KExactResult ex = K_exact(s, u, icfg.eta, eq.Q);
            if (lo <= 0.0) continue;
            const double ratio = ex.value / lo;
            worst_ratio = std::max(worst_ratio, ratio);
            if (ex.value < lo * (1.0 - 1e-9) || ratio > C * (1.0 + 1e-9)) sandwich_ok = false;
        }
    }

    json equiv = json::object();
    for (double r : r_list) {
        double c_minus = std::numeric_limits<double>::infinity();
        double c_plus = 0.0;
        for (int i = 1; i <= m.N; ++i) {
            const double I = per_index_weight_integral(i, r, icfg.eta);
            const double w = std::pow(1.0 + i, 1.0 + r);
            c_minus = std::min(c_minus, I / w);
            c_plus = std::max(c_plus, I / w);
        }
        double obs_min = std::numeric_limits<double>::infinity();
        double obs_max = 0.0;
        for (int sample = 0; sample < 20; ++sample) {
            auto rng = make_stream(ctx.seed + 99, static_cast<std::uint64_t>(sample));
            std::vector<double> u = random_zero_mass(rng, eq.Q);
            const StarNormResult sn = star_norm(u, eq.Q, r, icfg.eta, icfg);
            const double xr = weighted_norm(u, eq.Q, 1.0 + r);
            if (xr > 0.0) {
                obs_min = std::min(obs_min, sn.value / xr);
                obs_max = std::max(obs_max, sn.value / xr);
            }
        }
        const double pow_r = std::pow(2.0, 1.0 + r);
        equiv[format_double(r)] = {{"C_minus", c_minus},
                                   {"C_plus", c_plus},
                                   {"observed_min", obs_min},
                                   {"observed_max", obs_max},
                                   {"within_bounds", obs_min >= c_minus && obs_max <= c_plus * pow_r}};
    }

    const HrShiftReport hs = Hr_shift_bound(1.0, 3.0, detail::log_time_grid(0.05, 100.0, 120),
                                            [] {
                                                std::vector<double> g;
                                                for (int i = -50; i <= 50; i += 2)
                                                    g.push_back(static_cast<double>(i));
                                                return g;
                                            }());
    const GronwallReport gr = gronwall_convolution_check(2.0, {0.0, 1.0, 10.0, 100.0});

    json j;
    j["eta"] = icfg.eta;
    j["sandwich"] = {{"C_bound", C}, {"observed_max_ratio", worst_ratio}, {"ok", sandwich_ok}};
    j["equivalence_ratios"] = equiv;
    j["Hr_shift"] = {{"sup_ratio", hs.sup_ratio}, {"grid_stability", hs.grid_stability}};
    j["gronwall_min_margin"] = gr.min_margin;
    if (!sandwich_ok)
        throw Error(ErrorCode::bound_failure, "K-functional sandwich violated; see report");
    return j;
}

inline json run_linear_decay(ConfigReader& cfg, const RunContext& ctx) {
    const CoefficientModel m = detail::model_from_config(cfg);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = detail::equilibrium_from_config(cfg, m, db);
    const double k = cfg.get<double>("pair", "k", 3.0);
    const double mm = cfg.get<double>("pair", "m", 1.0);
    const detail::PerturbationSpec ps = detail::perturbation_from_config(cfg);
    const double t_end = cfg.get<double>("decay", "t_end", 400.0);
    const double t_min = cfg.get<double>("decay", "t_min", 0.05);
    const int t_points = cfg.get<int>("decay", "t_points", 160);
    const double rtol = cfg.get<double>("decay", "rtol", 1e-9);
    const std::string route_s = cfg.get<std::string>("decay", "route", "stepper");
    const LinearRoute route = (route_s == "eigen") ? LinearRoute::eigen : LinearRoute::stepper;

    auto run_at = [&](const CoefficientModel& mod, const Equilibrium& eqq) {
        const OperatorBundle bundle = assemble_bundle(mod, eqq);
        // abstract zero-mass data for the linear flow; no h >= -1 constraint
        const PolynomialTail tail = make_polynomial_tail(ps.p, ps.pattern, ps.amplitude, eqq, k,
                                                         ps.profile, ps.pivot, ps.seed, false);
        return linear_decay_experiment(bundle, tail.perturbation.h, k, mm,
                                       detail::log_time_grid(t_min, t_end, t_points), route, rtol);
    };
    DecayReport rep = run_at(m, eq);
    const CoefficientModel m2 = m.penrose ? build_coefficients(*m.penrose, m.N / 2)
                                          : build_coefficients(m.a, m.b, m.N / 2);
    const DetailedBalance db2 = detailed_balance(m2);
    const DecayReport rep2 = run_at(m2, equilibrium_from_z(m2, db2, eq.z));
    rep.N_sensitivity = rep.domination_constant / rep2.domination_constant;

    detail::decay_csv(rep, ctx.out / "linear_decay.csv");
    json j = detail::decay_report_json(rep);
    j["N"] = m.N;
    j["half_N"] = {{"domination_constant", rep2.domination_constant},
                   {"crossover_time", rep2.crossover}};
    return j;
}

inline json run_nonlinear_decay(ConfigReader& cfg, const RunContext& ctx) {
    const CoefficientModel m = detail::model_from_config(cfg);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = detail::equilibrium_from_config(cfg, m, db);
    const double k = cfg.get<double>("pair", "k", 3.5);
    const double mm = cfg.get<double>("pair", "m", 1.0);
    const detail::PerturbationSpec ps = detail::perturbation_from_config(cfg);

    NonlinearDecayConfig ncfg;
    ncfg.integrator = detail::integrator_from_config(cfg);
    ncfg.fit_window_lo = cfg.get<double>("decay", "fit_lo", 2.0);
    const bool lyapunov = cfg.get<bool>("decay", "lyapunov_scan", true);
    const bool duhamel_check = cfg.get<bool>("decay", "duhamel_check", false);

    const PolynomialTail tail =
        make_polynomial_tail(ps.p, ps.pattern, ps.amplitude, eq, k, ps.profile, ps.pivot, ps.seed);

    json scan = json::array();
    if (lyapunov) {
        // short runs over a ladder of initial sizes establish the envelope
        double eps_norm = 0.0, eps_h1 = 0.0;
        for (double f : {1.0, 0.5, 0.25}) {
            const PolynomialTail t2 = make_polynomial_tail(ps.p, ps.pattern, f * ps.amplitude, eq,
                                                           k, ps.profile, ps.pivot, ps.seed);
            NonlinearDecayConfig c2 = ncfg;
            c2.integrator.t_end = std::min(20.0, ncfg.integrator.t_end);
            c2.integrator.checkpoint_times.clear();
            const DecayReport r2 =
                nonlinear_decay_experiment(m, eq, t2.perturbation.h, k, mm, c2);
            scan.push_back({{"delta", weighted_norm(t2.perturbation.h, eq.Q, 1.0 + k)},
                            {"sup_norm_k", r2.sup_norm_k},
                            {"sup_abs_h1", r2.sup_abs_h1}});
            if (f == 1.0) {
                eps_norm = 1.05 * r2.sup_norm_k;
                eps_h1 = std::max(1.05 * r2.sup_abs_h1, 1e-300);
            }
        }
        ncfg.stability_eps_norm = eps_norm;
        ncfg.stability_eps_h1 = eps_h1;
    }

    DecayReport rep = nonlinear_decay_experiment(m, eq, tail.perturbation.h, k, mm, ncfg);
    detail::decay_csv(rep, ctx.out / "nonlinear_decay.csv");
    json j = detail::decay_report_json(rep);
    j["N"] = m.N;
    j["lyapunov_scan"] = scan;
    j["stability_eps_norm"] = ncfg.stability_eps_norm;
    j["stability_eps_h1"] = ncfg.stability_eps_h1;

    if (duhamel_check) {
        NonlinearDecayConfig c3 = ncfg;
        const double cp_dt = cfg.get<double>("decay", "checkpoint_dt", 0.1);
        c3.integrator.checkpoint_times.clear();
        for (double t = 0.0; t <= c3.integrator.t_end + 1e-12; t += cp_dt)
            c3.integrator.checkpoint_times.push_back(t);
        std::vector<double> c0(static_cast<std::size_t>(m.N));
        for (std::size_t i = 0; i < c0.size(); ++i)
            c0[i] = eq.Q[i] * (1.0 + tail.perturbation.h[i]);
        const Trajectory traj = integrate(c0, m, c3.integrator);
        const OperatorBundle bundle = assemble_bundle(m, eq);
        const DuhamelReport dr = duhamel_residual(
            traj.checkpoints, bundle,
            {0.25 * c3.integrator.t_end, 0.5 * c3.integrator.t_end, c3.integrator.t_end});
        j["duhamel_max_rel_residual"] = dr.max_rel_residual;
    }
    return j;
}

inline json run_duhamel(ConfigReader& cfg, const RunContext& ctx) {
    const CoefficientModel m = detail::model_from_config(cfg);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = detail::equilibrium_from_config(cfg, m, db);
    detail::PerturbationSpec ps = detail::perturbation_from_config(cfg);
    const double t_end = cfg.get<double>("duhamel", "t_end", 10.0);
    const double cp_dt = cfg.get<double>("duhamel", "checkpoint_dt", 0.1);
    const int halvings = cfg.get<int>("duhamel", "halvings", 1);

    IntegratorConfig ic = detail::integrator_from_config(cfg);
    ic.t_end = t_end;
    ic.checkpoint_times.clear();
    for (double t = 0.0; t <= t_end + 1e-12; t += cp_dt) ic.checkpoint_times.push_back(t);

    const OperatorBundle bundle = assemble_bundle(m, eq);
    std::vector<double> t_grid = {0.25 * t_end, 0.5 * t_end, 0.75 * t_end, t_end};

    auto residual_at = [&](double amplitude) {
        const PolynomialTail tail = make_polynomial_tail(ps.p, ps.pattern, amplitude, eq, 3.0,
                                                         ps.profile, ps.pivot, ps.seed);
        std::vector<double> c0(static_cast<std::size_t>(m.N));
        for (std::size_t i = 0; i < c0.size(); ++i)
            c0[i] = eq.Q[i] * (1.0 + tail.perturbation.h[i]);
        const Trajectory traj = integrate(c0, m, ic);
        return duhamel_residual(traj.checkpoints, bundle, t_grid);
    };

    json seq = json::array();
    double prev_abs = 0.0;
    json ratios = json::array();
    CsvWriter csv({"amplitude", "max_abs_residual", "max_rel_residual"});
    for (int hv = 0; hv <= halvings; ++hv) {
        const double amp = ps.amplitude / std::pow(2.0, hv);
        const DuhamelReport dr = residual_at(amp);
        seq.push_back({{"amplitude", amp},
                       {"max_abs_residual", dr.max_abs_residual},
                       {"max_rel_residual", dr.max_rel_residual}});
        csv.append_row(std::vector<double>{amp, dr.max_abs_residual, dr.max_rel_residual});
        if (hv > 0) ratios.push_back(prev_abs / dr.max_abs_residual);
        prev_abs = dr.max_abs_residual;
    }
    csv.save(ctx.out / "duhamel.csv");
    json j;
    j["runs"] = seq;
    j["halving_ratios"] = ratios;
    return j;
}

// Dispatch by experiment kind. Returns the report body; the CLI wraps it with
// the config echo and hash and writes it out.
inline json run_experiment(ConfigReader& cfg, const RunContext& ctx) {
    const std::string kind = cfg.require<std::string>("", "experiment");
    if (kind == "equilibrium") return run_equilibrium(cfg, ctx);
    if (kind == "simulate") return run_simulate(cfg, ctx);
    if (kind == "spectrum") return run_spectrum(cfg, ctx);
    if (kind == "dissipativity") return run_dissipativity(cfg, ctx);
    if (kind == "interp-check") return run_interp_check(cfg, ctx);
    if (kind == "linear-decay") return run_linear_decay(cfg, ctx);
    if (kind == "nonlinear-decay") return run_nonlinear_decay(cfg, ctx);
    if (kind == "duhamel") return run_duhamel(cfg, ctx);
    throw ValidationError("unknown experiment kind: " + kind);
}

}  // namespace bd
