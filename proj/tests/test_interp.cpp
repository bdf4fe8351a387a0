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
    double eta;
};

Bench make_bench(int N) {
    Bench b;
    b.m = build_coefficients(PenroseParams{0.5, 0.0, 1.0, 2.0}, N);
    b.eq = equilibrium_from_z(b.m, detailed_balance(b.m), 1.0);
    b.eta = default_eta(b.eq.zs, b.eq.z);
    return b;
}

}  // namespace

TEST_CASE("K_lower closed forms") {
    const Bench b = make_bench(64);
    SECTION("saturates at the X1 norm for s past s_eta") {
        const double s = s_eta(b.eta) + 0.5;
        std::vector<double> u(64, 0.0);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = ((i % 2) ? -1.0 : 1.0) / (1.0 + i);
        bool min_is_index = true;
        for (int i = 1; i <= 64; ++i)
            if (std::exp(s + b.eta * i) < i) min_is_index = false;
        REQUIRE(min_is_index);
        CHECK(K_lower(s, u, b.eta, b.eq.Q) ==
              Approx(weighted_norm(u, b.eq.Q, 1.0)).epsilon(1e-13));
    }
    SECTION("single entry") {
        std::vector<double> u(64, 0.0);
        u[0] = 1.0;
        for (double s : {-3.0, 0.0, 4.0})
            CHECK(K_lower(s, u, b.eta, b.eq.Q) ==
                  Approx(b.eq.Q[0] * std::min(1.0, std::exp(s + b.eta))).epsilon(1e-14));
    }
    SECTION("zero vector") {
        CHECK(K_lower(0.0, std::vector<double>(64, 0.0), b.eta, b.eq.Q) == 0.0);
    }
}

TEST_CASE("K_exact respects the paper sandwich") {
    const Bench b = make_bench(60);
    const double C = std::max(2.0 + std::exp(b.eta), 1.0 / b.eta);
    for (int s = 0; s < 100; ++s) {
        auto rng = make_stream(41, static_cast<std::uint64_t>(s));
        const std::vector<double> u = random_zero_mass(rng, b.eq.Q);
        for (double sv : {-25.0, -10.0, -2.0, 0.0, 2.0, 10.0, 25.0}) {
            const double lo = K_lower(sv, u, b.eta, b.eq.Q);
            if (lo <= 0.0) continue;
            const KExactResult ex = K_exact(sv, u, b.eta, b.eq.Q);
            REQUIRE(ex.value >= lo * (1.0 - 1e-9));
            REQUIRE(ex.value <= C * lo * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("K_exact limits") {
    const Bench b = make_bench(48);
    auto rng = make_stream(43, 7);
    const std::vector<double> u = random_zero_mass(rng, b.eq.Q);
    SECTION("large s recovers the X1 norm") {
        const KExactResult ex = K_exact(40.0, u, b.eta, b.eq.Q);
        CHECK(ex.value == Approx(weighted_norm(u, b.eq.Q, 1.0)).epsilon(1e-9));
    }
    SECTION("very negative s collapses to e^s times the X_eta norm") {
        const double s = -60.0;
        const KExactResult ex = K_exact(s, u, b.eta, b.eq.Q);
        CHECK(ex.value <= std::exp(s) * x_eta_norm(u, b.eq.Q, b.eta) * (1.0 + 1e-9));
    }
}

TEST_CASE("K is monotone in s and a norm in u at fixed s") {
    const Bench b = make_bench(48);
    auto rng = make_stream(47, 0);
    const std::vector<double> u = random_zero_mass(rng, b.eq.Q);
    auto rng2 = make_stream(47, 1);
    const std::vector<double> v = random_zero_mass(rng2, b.eq.Q);
    double prev = 0.0;
    for (double s = -20.0; s <= 20.0; s += 1.0) {
        const double kl = K_lower(s, u, b.eta, b.eq.Q);
        REQUIRE(kl >= prev - 1e-13 * (1.0 + kl));
        prev = kl;
        REQUIRE(kl <= weighted_norm(u, b.eq.Q, 1.0) * (1.0 + 1e-13));
    }
    SECTION("homogeneity and triangle inequality") {
        std::vector<double> u2 = u, sum = u;
        for (std::size_t i = 0; i < u.size(); ++i) {
            u2[i] *= -2.5;
            sum[i] += v[i];
        }
        for (double s : {-5.0, 0.0, 5.0}) {
            CHECK(K_lower(s, u2, b.eta, b.eq.Q) ==
                  Approx(2.5 * K_lower(s, u, b.eta, b.eq.Q)).epsilon(1e-12));
            CHECK(K_lower(s, sum, b.eta, b.eq.Q) <=
                  K_lower(s, u, b.eta, b.eq.Q) + K_lower(s, v, b.eta, b.eq.Q) + 1e-13);
        }
    }
}

TEST_CASE("K is concave in the exponentiated variable") {
    const Bench b = make_bench(48);
    auto rng = make_stream(53, 2);
    const std::vector<double> u = random_zero_mass(rng, b.eq.Q);
    for (double sa = -6.0; sa <= 4.0; sa += 0.5) {
        const double sb = sa + 1.0;
        const double ka = K_lower(std::log(std::exp(sa)), u, b.eta, b.eq.Q);
        const double kb = K_lower(std::log(std::exp(sb)), u, b.eta, b.eq.Q);
        const double mid = 0.5 * (std::exp(sa) + std::exp(sb));
        const double km = K_lower(std::log(mid), u, b.eta, b.eq.Q);
        REQUIRE(km >= 0.5 * (ka + kb) - 1e-12 * (1.0 + km));
    }
}

TEST_CASE("star norm basics") {
    const Bench b = make_bench(120);
    InterpConfig cfg;
    cfg.eta = b.eta;
    SECTION("zero vector") {
        const StarNormResult sn = star_norm(std::vector<double>(120, 0.0), b.eq.Q, 2.0, b.eta, cfg);
        CHECK(sn.value == 0.0);
    }
    SECTION("single-index vectors against the per-index quadrature") {
        for (int i : {1, 10, 100}) {
            std::vector<double> u(120, 0.0);
            u[static_cast<std::size_t>(i - 1)] = 1.0 / b.eq.Q[static_cast<std::size_t>(i - 1)];
            for (double r : {1.0, 2.0}) {
                const StarNormResult sn = star_norm(u, b.eq.Q, r, b.eta, cfg);
                const double expected = per_index_weight_integral(i, r, b.eta);
                REQUIRE(sn.value == Approx(expected).epsilon(1e-6));
            }
        }
    }
    SECTION("equivalence with the X_{1+r} norm") {
        for (double r : {1.0, 2.0, 3.0}) {
            double c_minus = std::numeric_limits<double>::infinity();
            double c_plus = 0.0;
            for (int i = 1; i <= 120; ++i) {
                const double I = per_index_weight_integral(i, r, b.eta);
                const double w = std::pow(1.0 + i, 1.0 + r);
                c_minus = std::min(c_minus, I / w);
                c_plus = std::max(c_plus, I / w);
            }
            for (int s = 0; s < 25; ++s) {
                auto rng = make_stream(59, static_cast<std::uint64_t>(s));
                const std::vector<double> u = random_zero_mass(rng, b.eq.Q);
                const double star = star_norm(u, b.eq.Q, r, b.eta, cfg).value;
                const double xr = weighted_norm(u, b.eq.Q, 1.0 + r);
                if (xr <= 0.0) continue;
                REQUIRE(star / xr >= c_minus * (1.0 - 1e-6));
                REQUIRE(star / xr <= c_plus * std::pow(2.0, 1.0 + r) * (1.0 + 1e-6));
            }
        }
    }
}

TEST_CASE("H weight closed form and shift bound") {
    SECTION("right half is a pure exponential") {
        for (double t : {0.0, 0.5, 3.0}) CHECK(H_weight(t, 2.0) == Approx(std::exp(-t)));
    }
    SECTION("left half matches the integrated polynomial") {
        CHECK(H_weight(-1.0, 2.0) == Approx(1.0 + (std::pow(2.0, 2.0) - 1.0) / 2.0));
        CHECK(H_weight(-3.0, 1.0) == Approx(1.0 + 3.0));
    }
    SECTION("ratio at t = 0 is finite for m < k") {
        const HrShiftReport rep = Hr_shift_bound(1.0, 3.0, {0.0}, {-20.0, -5.0, 0.0, 5.0});
        CHECK(std::isfinite(rep.sup_ratio));
    }
    SECTION("(m,k)=(1,3) sup over a wide grid is finite and grid-stable") {
        // the sup lives at small t (t = k - m - 1 on the exponential branch),
        // so the t grid is dense there and coarse beyond
        std::vector<double> s_grid, t_grid;
        for (int i = -50; i <= 50; i += 2) s_grid.push_back(i);
        for (double t = 0.0; t <= 4.0; t += 0.125) t_grid.push_back(t);
        for (double t = 5.0; t <= 100.0; t += 1.0) t_grid.push_back(t);
        const HrShiftReport rep = Hr_shift_bound(1.0, 3.0, t_grid, s_grid);
        CHECK(std::isfinite(rep.sup_ratio));
        CHECK(rep.grid_stability <= 0.01);
    }
    SECTION("invalid order rejected") {
        CHECK_THROWS_AS(Hr_shift_bound(3.0, 1.0, {0.0}, {0.0}), Error);
    }
}

TEST_CASE("gronwall convolution bound") {
    SECTION("empty integral at t = 0") {
        const GronwallReport rep = gronwall_convolution_check(2.0, {0.0});
        CHECK(rep.integral[0] == 0.0);
        CHECK(rep.bound[0] == Approx(8.0));
    }
    SECTION("r = 2, t = 1 against the partial-fraction value") {
        const GronwallReport rep = gronwall_convolution_check(2.0, {1.0});
        // (1/9)(1 + (4/3) log 2), by partial fractions
        CHECK(rep.integral[0] == Approx(0.21379958230517708).epsilon(1e-10));
        CHECK(rep.integral[0] <= rep.bound[0]);
    }
    SECTION("r = 3 margins on the reference grid") {
        const GronwallReport rep = gronwall_convolution_check(3.0, {1.0, 10.0, 100.0});
        CHECK(rep.min_margin >= 1.0);
    }
    SECTION("r <= 1 rejected") {
        CHECK_THROWS_AS(gronwall_convolution_check(1.0, {1.0}), Error);
    }
}

TEST_CASE("interp config validation") {
    InterpConfig cfg;
    cfg.eta = 0.5;
    CHECK_THROWS_AS(cfg.validate(2.0, 1.5), Error);  // eta >= log(z_s/z)
    cfg.eta = 0.0;
    CHECK_THROWS_AS(cfg.validate(2.0, 0.5), Error);
    cfg.eta = 0.3;
    CHECK_NOTHROW(cfg.validate(2.0, 1.0));
}
