// density_matrix.hpp: 2x2 complex matrix value type and Pauli-eigenstate helpers

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <string_view>

#include "sln/errors.hpp"

namespace sln {

using cplx = std::complex<double>;

// Row-major 2x2 complex matrix. Per-realization SLN states are neither Hermitian
// nor trace one, so no invariant is enforced here.
struct DensityMatrix {
    std::array<cplx, 4> m{};

    constexpr cplx& operator()(int r, int c) { return m[static_cast<std::size_t>(2 * r + c)]; }
    constexpr const cplx& operator()(int r, int c) const { return m[static_cast<std::size_t>(2 * r + c)]; }

    cplx trace() const { return m[0] + m[3]; }

    DensityMatrix adjoint() const {
        return {{std::conj(m[0]), std::conj(m[2]), std::conj(m[1]), std::conj(m[3])}};
    }

    // Largest entry modulus; used as the divergence norm.
    double max_abs() const {
        double r = 0.0;
        for (const auto& z : m) r = std::max(r, std::abs(z));
        return r;
    }

    // Largest entry of |rho - rho^dagger|.
    double hermiticity_defect() const {
        return std::max({std::abs(m[0].imag()) * 2.0, std::abs(m[3].imag()) * 2.0,
                         std::abs(m[1] - std::conj(m[2]))});
    }

    DensityMatrix& operator+=(const DensityMatrix& o) {
        for (std::size_t i = 0; i < 4; ++i) m[i] += o.m[i];
        return *this;
    }
    DensityMatrix& operator-=(const DensityMatrix& o) {
        for (std::size_t i = 0; i < 4; ++i) m[i] -= o.m[i];
        return *this;
    }
    DensityMatrix& operator*=(cplx s) {
        for (auto& z : m) z *= s;
        return *this;
    }

    friend DensityMatrix operator+(DensityMatrix a, const DensityMatrix& b) { return a += b; }
    friend DensityMatrix operator-(DensityMatrix a, const DensityMatrix& b) { return a -= b; }
    friend DensityMatrix operator*(cplx s, DensityMatrix a) { return a *= s; }
    friend DensityMatrix operator*(DensityMatrix a, cplx s) { return a *= s; }
    friend bool operator==(const DensityMatrix&, const DensityMatrix&) = default;

    friend DensityMatrix operator*(const DensityMatrix& a, const DensityMatrix& b) {
        return {{a.m[0] * b.m[0] + a.m[1] * b.m[2], a.m[0] * b.m[1] + a.m[1] * b.m[3],
                 a.m[2] * b.m[0] + a.m[3] * b.m[2], a.m[2] * b.m[1] + a.m[3] * b.m[3]}};
    }
};

inline DensityMatrix hermitian_part(const DensityMatrix& rho) {
    DensityMatrix h = rho + rho.adjoint();
    h *= 0.5;
    return h;
}

namespace pauli {
inline constexpr cplx I{0.0, 1.0};
inline DensityMatrix identity() { return {{1.0, 0.0, 0.0, 1.0}}; }
inline DensityMatrix x() { return {{0.0, 1.0, 1.0, 0.0}}; }
inline DensityMatrix y() { return {{0.0, -I, I, 0.0}}; }
inline DensityMatrix z() { return {{1.0, 0.0, 0.0, -1.0}}; }
} // namespace pauli

// Tr(sigma_k rho) for k = x, y, z; complex for non-Hermitian rho.
inline cplx expect_x(const DensityMatrix& r) { return r(0, 1) + r(1, 0); }
inline cplx expect_y(const DensityMatrix& r) { return pauli::I * (r(0, 1) - r(1, 0)); }
inline cplx expect_z(const DensityMatrix& r) { return r(0, 0) - r(1, 1); }

struct BlochVector {
    double x{0.0}, y{0.0}, z{0.0};
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

// Bloch vector of the Hermitian part.
inline BlochVector bloch_vector(const DensityMatrix& r) {
    return {expect_x(r).real(), expect_y(r).real(), expect_z(r).real()};
}

// (I + n.sigma)/2 for a unit (or sub-unit) Bloch vector.
inline DensityMatrix from_bloch(const BlochVector& b) {
    return {{cplx{0.5 * (1.0 + b.z), 0.0}, cplx{0.5 * b.x, -0.5 * b.y},
             cplx{0.5 * b.x, 0.5 * b.y}, cplx{0.5 * (1.0 - b.z), 0.0}}};
}

// Pure state on the Bloch sphere at polar angle theta, azimuth phi.
inline DensityMatrix pure_state(double theta, double phi) {
    return from_bloch({std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                       std::cos(theta)});
}

enum class PauliAxis { x, y, z };

inline std::string_view axis_name(PauliAxis a) {
    switch (a) {
        case PauliAxis::x: return "x";
        case PauliAxis::y: return "y";
        case PauliAxis::z: return "z";
    }
    return "?";
}

inline PauliAxis parse_axis(std::string_view s) {
    if (s == "x" || s == "sx" || s == "sigma_x") return PauliAxis::x;
    if (s == "y" || s == "sy" || s == "sigma_y") return PauliAxis::y;
    if (s == "z" || s == "sz" || s == "sigma_z") return PauliAxis::z;
    throw InputError("unknown Pauli axis '" + std::string(s) + "'");
}

// Eigenstate of sigma_axis with eigenvalue sign (+1 or -1).
inline DensityMatrix pauli_eigenstate(PauliAxis axis, int sign) {
    const double s = sign >= 0 ? 1.0 : -1.0;
    switch (axis) {
        case PauliAxis::x: return from_bloch({s, 0.0, 0.0});
        case PauliAxis::y: return from_bloch({0.0, s, 0.0});
        case PauliAxis::z: return from_bloch({0.0, 0.0, s});
    }
    return {};
}

inline std::string eigenstate_label(PauliAxis axis, int sign) {
    return std::string(axis_name(axis)) + (sign >= 0 ? "+" : "-");
}

// Physical-state check for initial preparations.
inline bool is_physical(const DensityMatrix& r, double tol = 1e-12) {
    if (r.hermiticity_defect() > tol) return false;
    if (std::abs(r.trace() - 1.0) > tol) return false;
    const double a = r(0, 0).real(), d = r(1, 1).real();
    const double disc = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(r(0, 1)));
    return 0.5 * (a + d) - disc >= -tol;
}

} // namespace sln
