// quadrature.hpp: Gauss-Legendre nodes and composite rules

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "sln/errors.hpp"

namespace sln::quad {

struct Rule {
    std::vector<double> x;  // nodes
    std::vector<double> w;  // weights
};

// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline Rule gauss_legendre(std::size_t n) {
    if (n == 0) throw InputError("Gauss-Legendre rule needs at least one node");
    Rule r{std::vector<double>(n), std::vector<double>(n)};
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                const double jj = static_cast<double>(j);
                p0 = ((2.0 * jj - 1.0) * z * p1 - (jj - 1.0) * p2) / jj;
            }
            dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

// Composite Gauss-Legendre on [a, b] with n_points total nodes, 8 per panel
// (fewer nodes collapse to a single panel).
inline Rule composite_gauss_legendre(double a, double b, std::size_t n_points) {
    if (n_points < 2) throw InputError("composite rule needs n_points >= 2");
    if (!(b > a)) throw InputError("composite rule needs b > a");
    const std::size_t per_panel = std::min<std::size_t>(8, n_points);
    const std::size_t panels = n_points / per_panel;
    const Rule base = gauss_legendre(per_panel);
    Rule r;
    r.x.reserve(panels * per_panel);
    r.w.reserve(panels * per_panel);
    const double h = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + h * static_cast<double>(p);
        for (std::size_t i = 0; i < per_panel; ++i) {
            r.x.push_back(lo + 0.5 * h * (base.x[i] + 1.0));
            r.w.push_back(0.5 * h * base.w[i]);
        }
    }
    return r;
}

} // namespace sln::quad
