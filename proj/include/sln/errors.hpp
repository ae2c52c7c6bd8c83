// errors.hpp: exception types shared by all slnsim modules

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sln {

// Caller supplied a value outside an operation's mathematical domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed or inconsistent input (mismatched grids, non-Hermitian states, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not meet its accuracy contract.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A single SLN realization left the bounded region; carries the realization index.
class DivergedTrajectory : public NumericalError {
public:
    DivergedTrajectory(std::uint64_t index, double time, double norm)
        : NumericalError("trajectory " + std::to_string(index) + " diverged at t=" +
                         std::to_string(time) + " (norm " + std::to_string(norm) + ")")
        , index_(index)
        , time_(time)
        , norm_(norm) {}

    std::uint64_t index() const noexcept { return index_; }
    double time() const noexcept { return time_; }
    double norm() const noexcept { return norm_; }

private:
    std::uint64_t index_;
    double time_;
    double norm_;
};

} // namespace sln
