// fft.hpp: minimal RAII wrapper over FFTW complex transforms

#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include "sln/errors.hpp"

namespace sln::fft {

namespace detail {
// The FFTW planner is not re-entrant; execution on distinct buffers is.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};
} // namespace detail

// fftw_malloc'd complex buffer; alignment matches the one plans are created with.
class Buffer {
public:
    Buffer() = default;
    explicit Buffer(std::size_t n)
        : n_(n)
        , data_(static_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * n))) {
        if (n != 0 && !data_) throw std::bad_alloc();
    }

    std::size_t size() const { return n_; }
    std::complex<double>* data() { return data_.get(); }
    const std::complex<double>* data() const { return data_.get(); }
    std::complex<double>& operator[](std::size_t i) { return data_.get()[i]; }
    const std::complex<double>& operator[](std::size_t i) const { return data_.get()[i]; }

private:
    std::size_t n_{0};
    std::unique_ptr<std::complex<double>[], detail::FftwFree> data_;
};

// Forward (e^{-i...}) and backward (e^{+i...}, unnormalized) plans of one length.
class Plan {
public:
    explicit Plan(std::size_t n)
        : n_(n) {
        if (n == 0) throw InputError("FFT length must be positive");
        Buffer in(n), out(n);
        std::lock_guard lock(detail::planner_mutex());
        const int len = static_cast<int>(n);
        fwd_ = fftw_plan_dft_1d(len, as_fftw(in.data()), as_fftw(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(len, as_fftw(in.data()), as_fftw(out.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!fwd_ || !bwd_) throw NumericalError("FFTW failed to create a plan");
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan() {
        std::lock_guard lock(detail::planner_mutex());
        if (fwd_) fftw_destroy_plan(fwd_);
        if (bwd_) fftw_destroy_plan(bwd_);
    }

    std::size_t size() const { return n_; }

    void forward(Buffer& in, Buffer& out) const { fftw_execute_dft(fwd_, as_fftw(in.data()), as_fftw(out.data())); }
    void backward(Buffer& in, Buffer& out) const { fftw_execute_dft(bwd_, as_fftw(in.data()), as_fftw(out.data())); }

private:
    static fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

    std::size_t n_;
    fftw_plan fwd_{nullptr};
    fftw_plan bwd_{nullptr};
};

} // namespace sln::fft
