#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bd/util.hpp"

namespace bd {

// Zero-mass correction through a single pivot coordinate (1-based), the same
// scheme analysis::project_zero_mass exposes publicly.
inline double project_zero_mass_inplace(std::vector<double>& h, const std::vector<double>& Q,
                                        int pivot = 1) {
    double mass = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) mass += Q[i] * static_cast<double>(i + 1) * h[i];
    const auto p = static_cast<std::size_t>(pivot - 1);
    const double mu = mass / (Q[p] * static_cast<double>(pivot));
    h[p] -= mu;
    return mu;
}

// Random zero-mass perturbations mixing sign patterns and tail weights:
// rough uniform entries, smooth low-frequency profiles, heavy polynomial
// tails in the absolute perturbation Q_i h_i, light exponential tails, and
// sparse spike patterns. Used by the sampling-based operator checks.
inline std::vector<double> random_zero_mass(std::mt19937_64& rng, const std::vector<double>& Q) {
    const std::size_t n = Q.size();
    std::vector<double> h(n, 0.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    const int family = static_cast<int>(rng() % 5);
    switch (family) {
        case 0:  // rough relative
            for (auto& x : h) x = sym(rng);
            break;
        case 1: {  // smooth relative, few random modes
            const int modes = 1 + static_cast<int>(rng() % 3);
            for (int m = 0; m < modes; ++m) {
                const double amp = sym(rng);
                const double freq = 6.28318530717958648 * unit(rng) / static_cast<double>(n);
                const double phase = 6.28318530717958648 * unit(rng);
                for (std::size_t i = 0; i < n; ++i)
                    h[i] += amp * std::sin(freq * static_cast<double>(i + 1) + phase);
            }
            break;
        }
        case 2: {  // heavy polynomial tail in Q_i h_i
            const double p = 2.5 + 5.0 * unit(rng);
            for (std::size_t i = 0; i < n; ++i) {
                const double sign = (rng() & 1u) ? 1.0 : -1.0;
                h[i] = sign * std::pow(static_cast<double>(i + 1), -p) / Q[i];
            }
            break;
        }
        case 3: {  // light exponential tail in Q_i h_i
            const double beta = 0.05 + 0.5 * unit(rng);
            for (std::size_t i = 0; i < n; ++i)
                h[i] = sym(rng) * std::exp(-beta * static_cast<double>(i + 1)) / Q[i];
            break;
        }
        default: {  // sparse spikes
            const int spikes = 1 + static_cast<int>(rng() % 6);
            for (int s = 0; s < spikes; ++s) {
                const auto idx = static_cast<std::size_t>(rng() % n);
                h[idx] += sym(rng) * std::pow(10.0, 3.0 * sym(rng));
            }
            break;
        }
    }
    // Random pivot exercises both h_1-sign branches of the duality pairing.
    const int pivot = (rng() & 1u) ? 1 : 1 + static_cast<int>(rng() % Q.size());
    project_zero_mass_inplace(h, Q, pivot);
    return h;
}

}  // namespace bd
