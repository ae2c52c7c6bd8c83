// propagator.hpp: fixed-step RK4 integration of the SLN equation along one noise path
//
//   d rho/dt = -i [H_S(t), rho] + i xi(t) [sz, rho] + (i/2) nu(t) {sz, rho}
//   H_S(t)   = -(omega/2) sx + lambda0 sin(omega t) sz

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sln/density_matrix.hpp"
#include "sln/errors.hpp"
#include "sln/grid.hpp"
#include "sln/noise.hpp"

namespace sln {

struct DriveSpec {
    double lambda0{0.0};
    bool enabled{false};

    double amplitude() const { return enabled ? lambda0 : 0.0; }
};

struct SystemSpec {
    double omega{1.0};  // system frequency; also the (resonant) drive frequency
    DriveSpec drive{};

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(omega >= 0.0)) v.emplace_back("system.omega must be >= 0");
        if (!(drive.lambda0 >= 0.0)) v.emplace_back("drive.lambda0 must be >= 0");
        return v;
    }
};

enum class Scheme { rk4 };

struct IntegratorSpec {
    Scheme scheme{Scheme::rk4};
    std::size_t substeps{1};  // RK4 steps per noise-grid interval
    double divergence_norm{1e6};
};

inline DensityMatrix sln_rhs(const DensityMatrix& rho, double t, cplx xi, cplx nu, const SystemSpec& sys) {
    const cplx a = rho(0, 0), b = rho(0, 1), c = rho(1, 0), d = rho(1, 1);
    const double half_w = 0.5 * sys.omega;
    const double lam = sys.drive.amplitude() * std::sin(sys.omega * t);
    constexpr cplx i{0.0, 1.0};
    // [H, rho] with H = [[lam, -w/2], [-w/2, -lam]]
    const cplx h00 = half_w * (b - c);
    const cplx h01 = 2.0 * lam * b + half_w * (a - d);
    const cplx h10 = -2.0 * lam * c - half_w * (a - d);
    // [sz, rho] = [[0, 2b], [-2c, 0]],  {sz, rho} = [[2a, 0], [0, -2d]]
    return {{-i * h00 + i * nu * a,
             -i * h01 + 2.0 * i * xi * b,
             -i * h10 - 2.0 * i * xi * c,
             i * h00 - i * nu * d}};
}

struct Trajectory {
    TimeGrid grid;
    std::vector<DensityMatrix> rho;
    std::vector<cplx> sigma_y;  // Tr(sy rho_Z), unnormalized
    std::vector<cplx> xi;
};

// Integrates rho0 along the path and calls on_node(k, rho) at every grid node.
// Noise at intermediate stage times is linearly interpolated between samples.
template <class OnNode>
void propagate_visit(const DensityMatrix& rho0, const NoisePath& path, const SystemSpec& sys,
                     const IntegratorSpec& integ, OnNode&& on_node) {
    const std::size_t n = path.grid.size;
    if (path.xi.size() != n || path.nu.size() != n) throw InputError("propagate: noise path size mismatch");
    if (integ.substeps == 0) throw InputError("propagate: substeps must be >= 1");
    const double h = path.grid.dt / static_cast<double>(integ.substeps);
    const double inv_s = 1.0 / static_cast<double>(integ.substeps);

    DensityMatrix rho = rho0;
    on_node(std::size_t{0}, rho);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const cplx xi0 = path.xi[k], dxi = path.xi[k + 1] - path.xi[k];
        const cplx nu0 = path.nu[k], dnu = path.nu[k + 1] - path.nu[k];
        const double tk = path.grid[k];
        for (std::size_t s = 0; s < integ.substeps; ++s) {
            const double f0 = static_cast<double>(s) * inv_s;
            const double fm = (static_cast<double>(s) + 0.5) * inv_s;
            const double f1 = static_cast<double>(s + 1) * inv_s;
            const double t0 = tk + f0 * path.grid.dt;
            const cplx xm = xi0 + fm * dxi, nm = nu0 + fm * dnu;

            const DensityMatrix k1 = sln_rhs(rho, t0, xi0 + f0 * dxi, nu0 + f0 * dnu, sys);
            const DensityMatrix k2 = sln_rhs(rho + (0.5 * h) * k1, t0 + 0.5 * h, xm, nm, sys);
            const DensityMatrix k3 = sln_rhs(rho + (0.5 * h) * k2, t0 + 0.5 * h, xm, nm, sys);
            const DensityMatrix k4 = sln_rhs(rho + h * k3, t0 + h, xi0 + f1 * dxi, nu0 + f1 * dnu, sys);
            for (std::size_t e = 0; e < 4; ++e)
                rho.m[e] += (h / 6.0) * (k1.m[e] + 2.0 * k2.m[e] + 2.0 * k3.m[e] + k4.m[e]);
        }
        const double norm = rho.max_abs();
        if (!(norm <= integ.divergence_norm))
            throw DivergedTrajectory(path.seed_id, path.grid[k + 1], norm);
        on_node(k + 1, rho);
    }
}

inline Trajectory propagate(const DensityMatrix& rho0, const NoisePath& path, const SystemSpec& sys,
                            const IntegratorSpec& integ = {}) {
    Trajectory tr;
    tr.grid = path.grid;
    tr.rho.resize(path.grid.size);
    tr.sigma_y.resize(path.grid.size);
    tr.xi = path.xi;
    propagate_visit(rho0, path, sys, integ, [&](std::size_t k, const DensityMatrix& r) {
        tr.rho[k] = r;
        tr.sigma_y[k] = expect_y(r);
    });
    return tr;
}

// Zero noise of the right shape, for closed-system propagation.
inline NoisePath zero_noise(const TimeGrid& grid) {
    return {grid, std::vector<cplx>(grid.size), std::vector<cplx>(grid.size), 0};
}

} // namespace sln
