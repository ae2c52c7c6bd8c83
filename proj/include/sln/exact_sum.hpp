// exact_sum.hpp: order-independent exact summation of doubles
//
// Values are accumulated as a 256-bit two's-complement fixed-point number with
// 128 fractional bits, so any double with |x| >= ~1e-23 is added without
// rounding and the sum is independent of the order of additions. This is what
// lets ensemble means be bitwise identical across worker counts and merges.

#pragma once

#include <cmath>
#include <cstdint>

#include "sln/errors.hpp"

namespace sln {

class ExactSum {
public:
    using u128 = unsigned __int128;

    void add(double x) {
        if (x == 0.0) return;
        if (!std::isfinite(x)) throw NumericalError("ExactSum: non-finite value");
        int e = 0;
        const double frac = std::frexp(std::abs(x), &e);  // |x| = frac 2^e, frac in [0.5, 1)
        const auto mant = static_cast<std::uint64_t>(std::ldexp(frac, 53));
        const int shift = e - 53 + kFracBits;  // bit position of mant's lsb
        u128 lo = 0, hi = 0;
        if (shift < 0) {
            if (shift <= -64) return;  // below resolution
            lo = static_cast<u128>(mant >> -shift);
        } else if (shift >= 128) {
            if (shift > 128 + 72) throw NumericalError("ExactSum: value out of range");
            hi = static_cast<u128>(mant) << (shift - 128);
        } else {
            lo = static_cast<u128>(mant) << shift;
            hi = shift == 0 ? 0 : static_cast<u128>(mant) >> (128 - shift);
        }
        if (x > 0.0) add_raw(lo, hi);
        else sub_raw(lo, hi);
    }

    ExactSum& operator+=(const ExactSum& o) {
        add_raw(o.lo_, o.hi_);
        return *this;
    }

    double to_double() const {
        u128 lo = lo_, hi = hi_;
        const bool neg = static_cast<__int128>(hi) < 0;
        if (neg) {
            lo = ~lo + 1;
            hi = ~hi + (lo == 0 ? 1 : 0);
        }
        const long double v = static_cast<long double>(hi) + std::ldexp(static_cast<long double>(lo), -kFracBits);
        return static_cast<double>(neg ? -v : v);
    }

    bool is_zero() const { return lo_ == 0 && hi_ == 0; }
    friend bool operator==(const ExactSum&, const ExactSum&) = default;

private:
    static constexpr int kFracBits = 128;

    void add_raw(u128 lo, u128 hi) {
        const u128 old = lo_;
        lo_ += lo;
        hi_ += hi + (lo_ < old ? 1 : 0);
    }
    void sub_raw(u128 lo, u128 hi) {
        const u128 old = lo_;
        lo_ -= lo;
        hi_ -= hi + (lo_ > old ? 1 : 0);
    }

    u128 lo_{0};  // fractional part
    u128 hi_{0};  // integer part, two's complement
};

} // namespace sln
