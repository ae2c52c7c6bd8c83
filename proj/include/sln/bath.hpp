// bath.hpp: Ohmic spectral density with algebraic cutoff and the bath
// autocorrelation L(t) = (1/pi) int_0^inf dw J(w) [coth(beta w/2) cos(wt) - i sin(wt)]

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "sln/errors.hpp"
#include "sln/grid.hpp"
#include "sln/quadrature.hpp"

namespace sln {

struct QuadratureSettings {
    double omega_max{500.0};   // upper limit of the numerically integrated part
    std::size_t n_points{2048};
};

struct BathSpec {
    double gamma{0.05};
    double omega_c{10.0};
    double beta{5.0};
    QuadratureSettings quadrature{};

    // Default quadrature tied to the cutoff: omega_max = 50 omega_c.
    static BathSpec make(double gamma, double omega_c, double beta) {
        return {gamma, omega_c, beta, {50.0 * omega_c, 2048}};
    }

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(gamma >= 0.0)) v.emplace_back("bath.gamma must be >= 0");
        if (!(omega_c > 0.0)) v.emplace_back("bath.omega_c must be > 0");
        if (!(beta > 0.0)) v.emplace_back("bath.beta must be > 0");
        if (!(quadrature.omega_max > omega_c)) v.emplace_back("bath.quadrature.omega_max must exceed omega_c");
        if (quadrature.n_points < 2) v.emplace_back("bath.quadrature.n_points must be >= 2");
        return v;
    }

    void check() const {
        const auto v = violations();
        if (!v.empty()) throw InputError(v.front());
    }
};

inline double spectral_density(double omega, const BathSpec& spec) {
    if (omega < 0.0) throw DomainError("spectral_density: omega must be >= 0");
    const double u = omega / spec.omega_c;
    const double d = 1.0 + u * u;
    return spec.gamma * omega / (d * d);
}

namespace detail {

// x / tanh(x), regular at the origin.
inline double x_coth_x(double x) {
    if (std::abs(x) < 1e-4) return 1.0 + x * x / 3.0;
    return x / std::tanh(x);
}

// 1/2 - (b/2) int_0^inf sin(bx)/(1+x^2) dx, the normalized zero-temperature
// cosine transform of x/(1+x^2)^2.
inline double zero_temperature_kernel(double b) {
    if (b == 0.0) return 0.5;
    if (b > 40.0) {
        // Asymptotic series -sum_{k>=1} (2k)!/(2 b^{2k}); stop at the smallest term.
        double term = 1.0 / (b * b);
        double sum = 0.0;
        for (int k = 1; k < 60; ++k) {
            sum += term;
            const double next = term * (2.0 * k + 1.0) * (2.0 * k + 2.0) / (b * b);
            if (next > term || next < 1e-18 * sum) break;
            term = next;
        }
        return -sum;
    }
    const double p = 0.5 * (std::exp(-b) * std::expint(b) - std::exp(b) * std::expint(-b));
    return 0.5 - 0.5 * b * p;
}

} // namespace detail

// Integrand of L(t) at frequency omega, with the finite omega -> 0 limit.
inline std::complex<double> correlation_integrand(double omega, double t, const BathSpec& spec) {
    if (omega < 0.0) throw DomainError("correlation_integrand: omega must be >= 0");
    const double u = omega / spec.omega_c;
    const double d = 1.0 + u * u;
    const double j_coth = spec.gamma / (d * d) * (2.0 / spec.beta) * detail::x_coth_x(0.5 * spec.beta * omega);
    return {j_coth * std::cos(omega * t), -spectral_density(omega, spec) * std::sin(omega * t)};
}

// Evaluates L(t) with quadrature nodes prepared once.
//
// Splitting coth = 1 + 2 n_B, the zero-temperature and imaginary parts have closed
// forms for this spectral density; the thermal part decays as exp(-beta w) and is
// integrated numerically on [0, min(omega_max, 60/beta)] at n_points and 2 n_points
// nodes, the two results being required to agree.
class CorrelationEvaluator {
public:
    static constexpr double kRelTol = 1e-6;
    static constexpr double kAbsTol = 1e-13;

    explicit CorrelationEvaluator(const BathSpec& spec)
        : spec_(spec) {
        spec_.check();
        if (spec_.gamma == 0.0) return;
        const double upper = std::min(spec_.quadrature.omega_max, 60.0 / spec_.beta);
        coarse_ = thermal_rule(upper, spec_.quadrature.n_points);
        fine_ = thermal_rule(upper, 2 * spec_.quadrature.n_points);
    }

    const BathSpec& spec() const { return spec_; }

    std::complex<double> operator()(double t) const {
        if (t < 0.0) throw DomainError("bath_correlation: t must be >= 0");
        if (spec_.gamma == 0.0) return {0.0, 0.0};
        const double a = spec_.omega_c;
        const double zero_t = spec_.gamma / std::numbers::pi * a * a * detail::zero_temperature_kernel(a * t);
        const double thermal_c = thermal(coarse_, t);
        const double thermal_f = thermal(fine_, t);
        const double re = zero_t + thermal_f;
        if (std::abs(thermal_f - thermal_c) > kRelTol * std::abs(re) + kAbsTol) {
            std::ostringstream os;
            os.precision(17);
            os << "bath_correlation: quadrature not converged at t=" << t << " (n_points="
               << spec_.quadrature.n_points << ": " << thermal_c << ", doubled: " << thermal_f
               << ", Re L=" << re << ")";
            throw NumericalError(os.str());
        }
        const double im = -0.25 * spec_.gamma * a * a * a * t * std::exp(-a * t);
        return {re, im};
    }

private:
    struct ThermalRule {
        std::vector<double> omega;
        std::vector<double> weight;  // quadrature weight * (2/pi) J(w) n_B(w)
    };

    ThermalRule thermal_rule(double upper, std::size_t n) const {
        const auto r = quad::composite_gauss_legendre(0.0, upper, n);
        ThermalRule tr{r.x, r.w};
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            const double w = r.x[i];
            const double u = w / spec_.omega_c;
            const double d = 1.0 + u * u;
            // J(w) n_B(w) = gamma w / d^2 / expm1(beta w), regular at w -> 0.
            const double bw = spec_.beta * w;
            const double w_over = bw < 1e-8 ? 1.0 / spec_.beta : w / std::expm1(bw);
            tr.weight[i] *= 2.0 / std::numbers::pi * spec_.gamma / (d * d) * w_over;
        }
        return tr;
    }

    static double thermal(const ThermalRule& r, double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < r.omega.size(); ++i) s += r.weight[i] * std::cos(r.omega[i] * t);
        return s;
    }

    BathSpec spec_;
    ThermalRule coarse_, fine_;
};

inline std::complex<double> bath_correlation(double t, const BathSpec& spec) {
    return CorrelationEvaluator(spec)(t);
}

struct CorrelationTable {
    TimeGrid grid;
    std::vector<double> re_L;
    std::vector<double> im_L;

    std::size_t size() const { return re_L.size(); }
    std::complex<double> at(std::size_t k) const { return {re_L[k], im_L[k]}; }
    std::vector<double> t_grid() const { return grid.times(); }
};

inline CorrelationTable tabulate_correlation(const CorrelationEvaluator& eval, const TimeGrid& grid) {
    CorrelationTable tab{grid, std::vector<double>(grid.size), std::vector<double>(grid.size)};
    for (std::size_t k = 0; k < grid.size; ++k) {
        const auto l = eval(grid[k]);
        tab.re_L[k] = l.real();
        tab.im_L[k] = l.imag();
    }
    return tab;
}

inline CorrelationTable tabulate_correlation(const BathSpec& spec, const TimeGrid& grid) {
    return tabulate_correlation(CorrelationEvaluator(spec), grid);
}

} // namespace sln
