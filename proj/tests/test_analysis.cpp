#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bd/analysis.hpp"
#include "bd/interp.hpp"
#include "bd/model.hpp"
#include "bd/sampling.hpp"

using namespace bd;
using Catch::Approx;

namespace {

struct Bench {
    CoefficientModel m;
    Equilibrium eq;
};

Bench make_bench(int N) {
    Bench b;
    b.m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, N);
    b.eq = equilibrium_from_z(b.m, detailed_balance(b.m), 1.0);
    return b;
}

}  // namespace

TEST_CASE("weighted norm closed forms") {
    SECTION("single entry at i=1 weighs Q_1 for every k") {
        const std::vector<double> Q = {0.7, 0.5, 0.3};
        const std::vector<double> h = {1.0, 0.0, 0.0};
        for (double k : {0.0, 1.0, 3.5}) CHECK(weighted_norm(h, Q, k) == Approx(0.7));
    }
    SECTION("geometric weights hand sum") {
        const std::vector<double> Q = {0.5, 0.25, 0.125, 0.0625};
        const std::vector<double> h = {1.0, 1.0, 1.0, 0.0};
        CHECK(weighted_norm(h, Q, 1.0) == Approx(11.0 / 8.0).epsilon(1e-15));
    }
    SECTION("monotone in the exponent") {
        const Bench b = make_bench(64);
        for (int s = 0; s < 50; ++s) {
            auto rng = make_stream(61, static_cast<std::uint64_t>(s));
            const std::vector<double> h = random_zero_mass(rng, b.eq.Q);
            REQUIRE(weighted_norm(h, b.eq.Q, 2.0) <=
                    weighted_norm(h, b.eq.Q, 4.0) * (1.0 + 1e-13));
        }
    }
}

TEST_CASE("zero-mass projection") {
    const Bench b = make_bench(32);
    SECTION("already balanced vectors are unchanged") {
        std::vector<double> h(32, 0.0);
        h[1] = 1.0;
        h[0] = -2.0 * b.eq.Q[1] / b.eq.Q[0];
        const Perturbation p = project_zero_mass(h, b.eq.Q);
        CHECK(p.compensation == Approx(0.0).margin(1e-15));
    }
    SECTION("single bump compensated through h_1") {
        std::vector<double> h(32, 0.0);
        h[1] = 1.0;  // e_2
        const Perturbation p = project_zero_mass(h, b.eq.Q);
        CHECK(p.h[0] == Approx(-2.0 * b.eq.Q[1] / b.eq.Q[0]).epsilon(1e-14));
        CHECK(p.zero_mass_residual <= 1e-14);
    }
    SECTION("residual after projection is rounding-level") {
        for (int s = 0; s < 1000; ++s) {
            auto rng = make_stream(67, static_cast<std::uint64_t>(s));
            std::vector<double> h(32);
            for (auto& x : h) x = 2.0 * (static_cast<double>(rng() % 1000) / 999.0) - 1.0;
            const Perturbation p = project_zero_mass(h, b.eq.Q);
            double scale = 0.0;
            for (std::size_t i = 0; i < p.h.size(); ++i)
                scale += b.eq.Q[i] * static_cast<double>(i + 1) * std::abs(p.h[i]);
            REQUIRE(p.zero_mass_residual <= 1e-12 * scale);
        }
    }
    SECTION("infeasible corrections are rejected") {
        std::vector<double> h(32, 0.0);
        h[1] = -1.5;
        CHECK_THROWS_AS(project_zero_mass(h, b.eq.Q), Error);
    }
}

TEST_CASE("polynomial tail construction") {
    const Bench b = make_bench(100);
    SECTION("norms scale linearly with amplitude") {
        // abstract (non-physical) data: the alternating absolute tail dips
        // below -1 in h once Q_i decays past the power law
        const PolynomialTail t1 = make_polynomial_tail(6.0, SignPattern::alternating, 1e-3, b.eq,
                                                       3.0, TailProfile::absolute, 1, 0, false);
        const PolynomialTail t2 = make_polynomial_tail(6.0, SignPattern::alternating, 5e-4, b.eq,
                                                       3.0, TailProfile::absolute, 1, 0, false);
        const double n1 = weighted_norm(t1.perturbation.h, b.eq.Q, 4.0);
        const double n2 = weighted_norm(t2.perturbation.h, b.eq.Q, 4.0);
        CHECK(n1 == Approx(2.0 * n2).epsilon(1e-10));
        CHECK(std::isfinite(n1));
        CHECK_FALSE(t1.norm_divergence_warning);
    }
    SECTION("shallow tails trip the divergence warning") {
        const PolynomialTail t =
            make_polynomial_tail(3.5, SignPattern::plus, 1e-3, b.eq, 3.0);
        CHECK(t.norm_divergence_warning);
    }
    SECTION("relative profile keeps entries bounded") {
        const PolynomialTail t =
            make_polynomial_tail(2.0, SignPattern::alternating, 0.3, b.eq, 3.0,
                                 TailProfile::relative);
        for (double x : t.perturbation.h) REQUIRE(std::abs(x) <= 0.31);
    }
}

TEST_CASE("rate fitting") {
    std::vector<double> t, v;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(0.5 * i);
        v.push_back(std::pow(1.0 + 0.5 * i, -2.0));
    }
    SECTION("exact power law") {
        const FitResult f = fit_rate(t, v, 0.0, 50.0);
        CHECK(f.slope == Approx(-2.0).margin(1e-10));
        CHECK(f.r_squared == Approx(1.0).margin(1e-12));
    }
    SECTION("scaling moves only the intercept") {
        std::vector<double> v3 = v;
        for (auto& x : v3) x *= 3.0;
        const FitResult f = fit_rate(t, v3, 0.0, 50.0);
        CHECK(f.slope == Approx(-2.0).margin(1e-10));
        CHECK(f.intercept == Approx(std::log(3.0)).margin(1e-10));
    }
    SECTION("exponential masquerades as a steep power law") {
        std::vector<double> te, ve;
        for (int i = 0; i <= 90; ++i) {
            te.push_back(10.0 + i);
            ve.push_back(std::exp(-(10.0 + i)));
        }
        const FitResult f = fit_rate(te, ve, 10.0, 100.0);
        CHECK(f.slope < -5.0);
    }
    SECTION("domain errors") {
        CHECK_THROWS_AS(fit_rate({1, 2, 3}, {1, 1, 1}, 0.0, 5.0), Error);
        std::vector<double> bad = v;
        bad[20] = 0.0;
        CHECK_THROWS_AS(fit_rate(t, bad, 0.0, 50.0), Error);
    }
}

TEST_CASE("local slopes and crossover detection") {
    std::vector<double> t, v;
    // power law that switches to exponential at t = 40
    for (int i = 0; i <= 400; ++i) {
        const double tt = 0.25 * i;
        t.push_back(tt);
        const double poly = std::pow(1.0 + tt, -2.0);
        v.push_back(tt < 40.0 ? poly : poly * std::exp(-(tt - 40.0)));
    }
    const double cross = crossover_time(t, v, 2.0);
    CHECK(cross > 40.0);
    CHECK(cross < 60.0);
}

TEST_CASE("linear decay routes agree on benign data") {
    const Bench b = make_bench(80);
    const OperatorBundle bundle = assemble_bundle(b.m, b.eq);
    const PolynomialTail tail = make_polynomial_tail(2.0, SignPattern::alternating, 1e-2, b.eq,
                                                     3.0, TailProfile::relative);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(0.5 * i);
    const DecayReport via_eigen =
        linear_decay_experiment(bundle, tail.perturbation.h, 3.0, 1.0, grid, LinearRoute::eigen);
    const DecayReport via_stepper = linear_decay_experiment(bundle, tail.perturbation.h, 3.0, 1.0,
                                                            grid, LinearRoute::stepper, 1e-10);
    REQUIRE(via_eigen.times.size() == via_stepper.times.size());
    for (std::size_t i = 0; i < via_eigen.times.size(); ++i) {
        REQUIRE(via_stepper.norms_m[i] ==
                Approx(via_eigen.norms_m[i]).epsilon(1e-6).margin(1e-14));
    }
}

TEST_CASE("linear decay of the zero vector is identically zero") {
    const Bench b = make_bench(40);
    const OperatorBundle bundle = assemble_bundle(b.m, b.eq);
    const DecayReport rep = linear_decay_experiment(bundle, std::vector<double>(40, 0.0), 3.0, 1.0,
                                                    {0.0, 1.0, 2.0});
    for (double n : rep.norms_m) CHECK(n == 0.0);
}

TEST_CASE("exponential-tail data decays log-linearly under the linear flow") {
    const Bench b = make_bench(120);
    const OperatorBundle bundle = assemble_bundle(b.m, b.eq);
    const double eta = default_eta(b.eq.zs, b.eq.z);
    std::vector<double> u(120);
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = ((i % 2) ? -1.0 : 1.0) * std::exp(-2.0 * eta * static_cast<double>(i + 1)) /
               b.eq.Q[i];
    project_zero_mass_inplace(u, b.eq.Q, 1);
    std::vector<double> grid;
    for (int i = 0; i <= 60; ++i) grid.push_back(0.5 * i);
    const DecayReport rep =
        linear_decay_experiment(bundle, u, 3.0, 1.0, grid, LinearRoute::eigen);
    // fit log norm against t (not log(1+t)): slope is the decay rate
    double lambda_hat = 0.0;
    const double n0 = rep.norms_m.front();
    for (std::size_t i = 1; i < rep.times.size(); ++i) {
        if (rep.norms_m[i] <= 0.0) break;
        lambda_hat = -std::log(rep.norms_m[i] / n0) / rep.times[i];
    }
    CHECK(lambda_hat > 0.0);
}

TEST_CASE("nonlinear decay of the zero perturbation stays zero") {
    const Bench b = make_bench(40);
    NonlinearDecayConfig cfg;
    cfg.integrator.t_end = 5.0;
    const DecayReport rep =
        nonlinear_decay_experiment(b.m, b.eq, std::vector<double>(40, 0.0), 3.5, 1.0, cfg);
    CHECK(rep.sup_norm_k <= 1e-12);
    CHECK_FALSE(rep.stability_breach);
}

TEST_CASE("nonlinear decay requires k > m + 2") {
    const Bench b = make_bench(40);
    NonlinearDecayConfig cfg;
    CHECK_THROWS_AS(
        nonlinear_decay_experiment(b.m, b.eq, std::vector<double>(40, 0.0), 2.0, 1.0, cfg), Error);
}

TEST_CASE("duhamel residual vanishes for the zero perturbation") {
    const Bench b = make_bench(60);
    const OperatorBundle bundle = assemble_bundle(b.m, b.eq);
    IntegratorConfig ic;
    ic.t_end = 4.0;
    for (double t = 0.0; t <= 4.0 + 1e-12; t += 0.1) ic.checkpoint_times.push_back(t);
    const Trajectory traj = integrate(b.eq.Q, b.m, ic);
    const DuhamelReport rep = duhamel_residual(traj.checkpoints, bundle, {2.0, 4.0});
    CHECK(rep.max_abs_residual <= 1e-12);
}

TEST_CASE("duhamel residual drops roughly fourfold under amplitude halving") {
    const Bench b = make_bench(80);
    const OperatorBundle bundle = assemble_bundle(b.m, b.eq);
    auto residual_at = [&](double amp) {
        const PolynomialTail tail = make_polynomial_tail(2.0, SignPattern::alternating, amp, b.eq,
                                                         3.0, TailProfile::relative);
        std::vector<double> c0(80);
        for (std::size_t i = 0; i < c0.size(); ++i)
            c0[i] = b.eq.Q[i] * (1.0 + tail.perturbation.h[i]);
        IntegratorConfig ic;
        ic.rtol = 1e-11;
        ic.atol = 1e-17;
        ic.t_end = 8.0;
        for (double t = 0.0; t <= 8.0 + 1e-12; t += 0.1) ic.checkpoint_times.push_back(t);
        const Trajectory traj = integrate(c0, b.m, ic);
        return duhamel_residual(traj.checkpoints, bundle, {2.0, 4.0, 8.0});
    };
    const DuhamelReport big = residual_at(1e-2);
    const DuhamelReport small = residual_at(5e-3);
    const double ratio = big.max_abs_residual / small.max_abs_residual;
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
}

TEST_CASE("duhamel residual shrinks under checkpoint refinement") {
    const Bench b = make_bench(60);
    const OperatorBundle bundle = assemble_bundle(b.m, b.eq);
    auto residual_at = [&](double dt) {
        const PolynomialTail tail = make_polynomial_tail(2.0, SignPattern::alternating, 1e-2, b.eq,
                                                         3.0, TailProfile::relative);
        std::vector<double> c0(60);
        for (std::size_t i = 0; i < c0.size(); ++i)
            c0[i] = b.eq.Q[i] * (1.0 + tail.perturbation.h[i]);
        IntegratorConfig ic;
        ic.rtol = 1e-11;
        ic.atol = 1e-17;
        ic.t_end = 4.0;
        for (double t = 0.0; t <= 4.0 + 1e-12; t += dt) ic.checkpoint_times.push_back(t);
        const Trajectory traj = integrate(c0, b.m, ic);
        return duhamel_residual(traj.checkpoints, bundle, {4.0}).max_abs_residual;
    };
    const double coarse = residual_at(0.2);
    const double fine = residual_at(0.1);
    CHECK(fine <= coarse * (1.0 + 1e-9));
}

TEST_CASE("H embeds into X1 with the Cauchy-Schwarz constant") {
    const Bench b = make_bench(80);
    double chat = 0.0;
    for (std::size_t i = 0; i < b.eq.Q.size(); ++i)
        chat += b.eq.Q[i] * std::pow(static_cast<double>(i + 1), 2.0);
    chat = std::sqrt(chat);
    for (int s = 0; s < 100; ++s) {
        auto rng = make_stream(71, static_cast<std::uint64_t>(s));
        const std::vector<double> h = random_zero_mass(rng, b.eq.Q);
        REQUIRE(weighted_norm(h, b.eq.Q, 1.0) <= chat * h_norm(h, b.eq.Q) * (1.0 + 1e-12));
    }
}

TEST_CASE("zero mass is preserved along nonlinear trajectories") {
    const Bench b = make_bench(60);
    const PolynomialTail tail = make_polynomial_tail(6.0, SignPattern::plus, 1e-2, b.eq, 3.0);
    std::vector<double> c0(60);
    for (std::size_t i = 0; i < c0.size(); ++i) c0[i] = b.eq.Q[i] * (1.0 + tail.perturbation.h[i]);
    IntegratorConfig ic;
    ic.t_end = 20.0;
    std::vector<double> h(60);
    double worst = 0.0;
    auto observer = [&](double, const std::vector<double>& c) {
        double mass = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i)
            mass += static_cast<double>(i + 1) * (c[i] - b.eq.Q[i]);
        worst = std::max(worst, std::abs(mass));
    };
    integrate(c0, b.m, ic, observer);
    CHECK(worst <= 1e-9 * b.eq.rho);
}
