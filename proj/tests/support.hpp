#pragma once

// Test-only generators and independent oracles (finite differences, brute
// force search). Nothing here calls into the code paths it is used to check
// beyond the scalar function being differentiated or searched.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>

#include "pricedyn/market.hpp"

namespace pricedyn::testing {

struct RandomShape {
    int n_max = 20;
    int S_max = 5;
    int D_max = 10;
    double gamma_lo = 0.05;
    double gamma_hi = 2.0;
};

// Random valid instance with random (non-contiguous) group assignment.
inline MarketInstance random_instance(Rng& rng, const RandomShape& shape = {}) {
    std::uniform_int_distribution<int> n_dist(1, shape.n_max);
    const int n = n_dist(rng);
    const int m = std::uniform_int_distribution<int>(1, n)(rng);
    int S = std::uniform_int_distribution<int>(0, shape.S_max)(rng);
    int D = std::uniform_int_distribution<int>(0, shape.D_max)(rng);
    if (S + D == 0) D = 1;

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    MarketInstance inst;
    inst.n = n;
    inst.m = m;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    inst.groups.assign(m, {});
    for (int j = 0; j < m; ++j) inst.groups[j].push_back(perm[j]);  // nonempty
    for (int i = m; i < n; ++i) inst.groups[std::uniform_int_distribution<int>(0, m - 1)(rng)].push_back(perm[i]);

    inst.mu.resize(m);
    for (int j = 0; j < m; ++j) inst.mu[j] = 0.1 + 0.9 * u01(rng);
    inst.A.resize(n, D);
    for (int d = 0; d < D; ++d)
        for (int i = 0; i < n; ++i) inst.A(i, d) = 0.01 + 4.99 * u01(rng);
    for (int s = 0; s < S; ++s) {
        SupplierSpec sp;
        sp.gamma = shape.gamma_lo + (shape.gamma_hi - shape.gamma_lo) * u01(rng);
        sp.cost_coeff = 0.5 + u01(rng);
        sp.y_hat.resize(n);
        for (int i = 0; i < n; ++i) sp.y_hat[i] = 0.01 + 1.99 * u01(rng);
        inst.suppliers.push_back(sp);
    }
    return inst;
}

inline Vector random_prices(Rng& rng, int n, double lo = 0.0, double hi = 3.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector p(n);
    for (int i = 0; i < n; ++i) p[i] = u(rng);
    return p;
}

// Central differences with step h.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& p,
                                 double h = 1e-5) {
    Vector g(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        Vector hi = p, lo = p;
        hi[i] += h;
        lo[i] -= h;
        g[i] = (f(hi) - f(lo)) / (2.0 * h);
    }
    return g;
}

// Normwise relative agreement: |a - b|_inf <= rel * |b|_inf + abs.
inline bool close_normwise(const Vector& a, const Vector& b, double rel = 1e-6, double abs = 1e-8) {
    return (a - b).lpNorm<Eigen::Infinity>() <= rel * b.lpNorm<Eigen::Infinity>() + abs;
}

// Maximizer of a concave 1-D function on [lo, hi] by golden-section search.
template <class T, class F>
T golden_max(F f, T lo, T hi, int iters = 200) {
    using std::sqrt;
    const T r = (sqrt(T(5)) - T(1)) / T(2);
    T a = lo, b = hi;
    T c = b - r * (b - a), d = a + r * (b - a);
    T fc = f(c), fd = f(d);
    for (int k = 0; k < iters; ++k) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return (a + b) / T(2);
}

// Minimum of f over the box [0, hi]^2 by a coarse grid followed by
// successively finer grids around the incumbent.
inline std::pair<Vector, double> grid_min_2d(const std::function<double(const Vector&)>& f, double hi,
                                             int points = 201, int refinements = 6) {
    Vector best(2);
    double best_f = std::numeric_limits<double>::infinity();
    double lo0 = 0.0, lo1 = 0.0, hi0 = hi, hi1 = hi;
    for (int level = 0; level <= refinements; ++level) {
        const double s0 = (hi0 - lo0) / (points - 1), s1 = (hi1 - lo1) / (points - 1);
        for (int a = 0; a < points; ++a) {
            for (int b = 0; b < points; ++b) {
                Vector p(2);
                p << lo0 + a * s0, lo1 + b * s1;
                const double v = f(p);
                if (v < best_f) {
                    best_f = v;
                    best = p;
                }
            }
        }
        lo0 = std::max(0.0, best[0] - 4 * s0);
        hi0 = best[0] + 4 * s0;
        lo1 = std::max(0.0, best[1] - 4 * s1);
        hi1 = best[1] + 4 * s1;
    }
    return {best, best_f};
}

}  // namespace pricedyn::testing
