// grid.hpp: uniform time grid shared by every series in the pipeline

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "sln/errors.hpp"

namespace sln {

struct TimeGrid {
    double dt{0.0};
    std::size_t size{0};

    static TimeGrid over(double t_end, std::size_t n_steps) {
        if (!(t_end > 0.0) || n_steps == 0) throw InputError("time grid needs t_end > 0 and n_steps >= 1");
        return {t_end / static_cast<double>(n_steps), n_steps + 1};
    }

    double operator[](std::size_t k) const { return static_cast<double>(k) * dt; }
    double t_end() const { return size == 0 ? 0.0 : (*this)[size - 1]; }
    std::size_t steps() const { return size == 0 ? 0 : size - 1; }

    std::vector<double> times() const {
        std::vector<double> t(size);
        for (std::size_t k = 0; k < size; ++k) t[k] = (*this)[k];
        return t;
    }

    // Grids match when spacing agrees to rounding.
    bool same_as(const TimeGrid& o) const {
        return size == o.size && std::abs(dt - o.dt) <= 1e-14 * std::max(dt, o.dt);
    }
};

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Default propagation window [0, 2pi] with 4096 steps.
inline TimeGrid default_grid() { return TimeGrid::over(two_pi, 4096); }

} // namespace sln
