#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "bd/dynamics.hpp"
#include "bd/model.hpp"

using namespace bd;
using Catch::Approx;

namespace {

CoefficientModel tiny_constant_model(int N) {
    CoefficientModel m;  // built by hand: the public builders enforce N >= 8
    m.N = N;
    m.a.assign(static_cast<std::size_t>(N), 1.0);
    m.b.assign(static_cast<std::size_t>(N), 1.0);
    m.C1 = m.C2 = 1.0;
    return m;
}

}  // namespace

TEST_CASE("flux hand cases") {
    const CoefficientModel m = tiny_constant_model(8);
    SECTION("pure monomer state") {
        std::vector<double> c(8, 0.0);
        c[0] = 1.0;
        CHECK(flux(c, m, 1) == Approx(1.0));
        for (int i = 2; i <= 7; ++i) CHECK(flux(c, m, i) == 0.0);
    }
    SECTION("no monomers means nonpositive fluxes") {
        std::vector<double> c = {0.0, 0.3, 0.2, 0.7, 0.1, 0.0, 0.4, 0.2};
        for (int i = 1; i <= 7; ++i) CHECK(flux(c, m, i) <= 0.0);
    }
    SECTION("index bounds") {
        std::vector<double> c(8, 0.1);
        CHECK_THROWS_AS(flux(c, m, 0), Error);
        CHECK_THROWS_AS(flux(c, m, 8), Error);
    }
}

TEST_CASE("rhs hand case at N=3") {
    const CoefficientModel m = tiny_constant_model(3);
    const std::vector<double> c = {2.0, 1.0, 1.0};
    const std::vector<double> d = rhs(c, m);
    // J1 = 2*2 - 1 = 3, J2 = 2*1 - 1 = 1, J3 = 0 closure
    CHECK(d[0] == Approx(-7.0));
    CHECK(d[1] == Approx(2.0));
    CHECK(d[2] == Approx(1.0));
    CHECK(1.0 * d[0] + 2.0 * d[1] + 3.0 * d[2] == Approx(0.0).margin(1e-14));
}

TEST_CASE("rhs vanishes at equilibrium") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 100);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = equilibrium_from_z(m, db, 1.0);
    const std::vector<double> d = rhs(eq.Q, m);
    double scale = 0.0;
    for (int i = 1; i <= m.N; ++i)
        scale = std::max(scale, m.a_of(i) * eq.Q[0] * eq.Q[static_cast<std::size_t>(i - 1)]);
    CHECK(sup_norm(d) <= 1e-13 * scale);
}

TEST_CASE("closure conserves the first moment on random states") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 60);
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> c(60), d;
    for (int trial = 0; trial < 1000; ++trial) {
        for (auto& x : c) x = unif(rng);
        rhs(c, m, d);
        double mass_dot = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            mass_dot += static_cast<double>(i + 1) * d[i];
            scale = std::max(scale, std::abs(d[i]));
        }
        REQUIRE(std::abs(mass_dot) <= 1e-13 * scale * m.N);
    }
}

TEST_CASE("entropy closed forms") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 40);
    const DetailedBalance db = detailed_balance(m);
    SECTION("at c = Qt the log term vanishes") {
        double expected = 0.0;
        for (double q : db.qtilde) expected -= q;
        CHECK(entropy(db.qtilde, db.qtilde) == Approx(expected).epsilon(1e-14));
    }
    SECTION("empty state has zero entropy") {
        CHECK(entropy(std::vector<double>(40, 0.0), db.qtilde) == 0.0);
    }
    SECTION("relative entropy is zero at Q and positive off Q at equal mass") {
        const Equilibrium eq = equilibrium_from_z(m, db, 1.0);
        CHECK(relative_entropy(eq.Q, eq.Q) == Approx(0.0).margin(1e-15));
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> unif(0.1, 2.0);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> c = eq.Q;
            // redistribute mass between two sites, keeping sum i c_i fixed
            const std::size_t i = rng() % 39;
            const double amount = unif(rng) * c[i] * 0.5;
            c[i] -= amount;
            c[i + 1] += amount * static_cast<double>(i + 1) / static_cast<double>(i + 2);
            REQUIRE(relative_entropy(c, eq.Q) > 0.0);
        }
    }
}

TEST_CASE("equilibrium is a fixed point of the integrator") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 64);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = equilibrium_from_z(m, db, 1.0);
    IntegratorConfig cfg;
    cfg.t_end = 5.0;
    cfg.checkpoint_times = {5.0};
    const Trajectory traj = integrate(eq.Q, m, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < eq.Q.size(); ++i)
        worst = std::max(worst, std::abs(traj.checkpoints[0].c[i] - eq.Q[i]) / eq.Q[0]);
    CHECK(worst <= 1e-12);
}

TEST_CASE("perturbation norm decays and matches a fixed-step reference") {
    const int N = 50;
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, N);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = equilibrium_from_z(m, db, 1.0);
    std::vector<double> c0(eq.Q);
    for (std::size_t i = 0; i < c0.size(); ++i)
        c0[i] *= 1.0 + 0.05 * ((i % 2) ? -1.0 : 1.0) / static_cast<double>(i + 1);

    IntegratorConfig cfg;
    cfg.t_end = 10.0;
    cfg.checkpoint_times = {10.0};
    std::vector<double> norms;
    auto observer = [&](double, const std::vector<double>& c) {
        double n1 = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i)
            n1 += static_cast<double>(i + 1) * std::abs(c[i] - eq.Q[i]);
        norms.push_back(n1);
    };
    const Trajectory traj = integrate(c0, m, cfg, observer);

    // X1 norm decreasing along the run (skip the first few transient steps)
    for (std::size_t i = 4; i < norms.size(); ++i) REQUIRE(norms[i] <= norms[i - 1] * (1.0 + 1e-9));

    // small-step midpoint reference run
    std::vector<double> c = c0, k1, k2, work(c0.size());
    const double dt = 1e-4;
    const int steps = static_cast<int>(10.0 / dt);
    for (int s = 0; s < steps; ++s) {
        rhs(c, m, k1);
        for (std::size_t i = 0; i < c.size(); ++i) work[i] = c[i] + 0.5 * dt * k1[i];
        rhs(work, m, k2);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += dt * k2[i];
    }
    const std::vector<double>& cend = traj.checkpoints[0].c;
    double dist = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        dist += static_cast<double>(i + 1) * std::abs(cend[i] - c[i]);
    CHECK(dist / traj.mass_initial <= 1e-6);
}

TEST_CASE("tolerance refinement changes the endpoint by little") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 64);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = equilibrium_from_z(m, db, 1.0);
    std::vector<double> c0(eq.Q);
    for (std::size_t i = 0; i < c0.size(); ++i) c0[i] *= 1.0 + ((i % 2) ? -0.1 : 0.1);
    auto run = [&](double rtol) {
        IntegratorConfig cfg;
        cfg.rtol = rtol;
        cfg.t_end = 20.0;
        cfg.checkpoint_times = {20.0};
        return integrate(c0, m, cfg);
    };
    const Trajectory a = run(1e-6);
    const Trajectory b = run(1e-9);
    double dist = 0.0;
    for (std::size_t i = 0; i < c0.size(); ++i)
        dist += static_cast<double>(i + 1) * std::abs(a.checkpoints[0].c[i] - b.checkpoints[0].c[i]);
    CHECK(dist / b.mass_initial <= 1e-5);
}

TEST_CASE("mass, positivity and entropy bookkeeping on a real run") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 80);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = equilibrium_from_z(m, db, 1.0);
    std::vector<double> c0(eq.Q);
    for (std::size_t i = 0; i < c0.size(); ++i) c0[i] *= 1.0 + ((i % 2) ? -0.25 : 0.25);
    IntegratorConfig cfg;
    cfg.t_end = 50.0;
    const Trajectory traj = integrate(c0, m, cfg);
    CHECK(traj.mass_drift_rel_max <= 1e-9);
    CHECK(traj.entropy_violations == 0);
    CHECK(traj.worst_negative >= -1e-14 * 1.0);
    CHECK(traj.n_accepted > 10);
}

TEST_CASE("implicit euler agrees with the explicit integrator") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 24);
    const DetailedBalance db = detailed_balance(m);
    const Equilibrium eq = equilibrium_from_z(m, db, 0.5);
    std::vector<double> c0(eq.Q);
    for (std::size_t i = 0; i < c0.size(); ++i) c0[i] *= 1.0 + ((i % 3) ? -0.1 : 0.2);
    IntegratorConfig ex;
    ex.t_end = 2.0;
    ex.checkpoint_times = {2.0};
    IntegratorConfig im = ex;
    im.method = Method::implicit_euler;
    im.rtol = 1e-8;
    const Trajectory te = integrate(c0, m, ex);
    const Trajectory ti = integrate(c0, m, im);
    double dist = 0.0;
    for (std::size_t i = 0; i < c0.size(); ++i)
        dist += static_cast<double>(i + 1) * std::abs(te.checkpoints[0].c[i] - ti.checkpoints[0].c[i]);
    CHECK(dist / te.mass_initial <= 1e-5);
    CHECK(ti.mass_drift_rel_max <= 1e-9);
}

TEST_CASE("analytic jacobian of rhs matches finite differences") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 12);
    std::vector<double> c(12);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.1 + 0.05 * static_cast<double>(i % 4);
    std::vector<std::vector<double>> J;
    detail::rhs_jacobian(c, m, J);
    const double eps = 1e-7;
    std::vector<double> cp, cm, fp, fm;
    for (std::size_t j = 0; j < c.size(); ++j) {
        cp = c;
        cm = c;
        cp[j] += eps;
        cm[j] -= eps;
        rhs(cp, m, fp);
        rhs(cm, m, fm);
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double fd = (fp[i] - fm[i]) / (2.0 * eps);
            REQUIRE(J[i][j] == Approx(fd).margin(1e-6));
        }
    }
}

TEST_CASE("integrator input validation") {
    const CoefficientModel m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, 16);
    IntegratorConfig cfg;
    SECTION("negative initial state") {
        std::vector<double> c0(16, 0.1);
        c0[3] = -0.2;
        CHECK_THROWS_AS(integrate(c0, m, cfg), Error);
    }
    SECTION("bad tolerances") {
        cfg.rtol = 0.0;
        CHECK_THROWS_AS(integrate(std::vector<double>(16, 0.1), m, cfg), Error);
    }
    SECTION("length mismatch") {
        CHECK_THROWS_AS(integrate(std::vector<double>(8, 0.1), m, cfg), Error);
    }
}
