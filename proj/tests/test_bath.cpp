#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "sln/bath.hpp"

using namespace sln;

namespace {

const BathSpec kOperating = BathSpec::make(0.05, 10.0, 5.0);

// J(w) coth(beta w / 2), written out independently of the library.
double j_coth(double w, double g, double wc, double beta) {
    if (w == 0.0) return 2.0 * g / beta;
    const double u = w / wc;
    return g * w / ((1 + u * u) * (1 + u * u)) / std::tanh(0.5 * beta * w);
}

double j_plain(double w, double g, double wc) {
    const double u = w / wc;
    return g * w / ((1 + u * u) * (1 + u * u));
}

template <class F>
double simpson(F&& f, double a, double b, std::size_t n) {
    if (n % 2) ++n;
    const double h = (b - a) / static_cast<double>(n);
    double s = f(a) + f(b);
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
    return s * h / 3.0;
}

// Re L(0) by Simpson's rule on the tan-mapped half line, 10x the library's nodes.
double re_l0_oracle(double g, double wc, double beta) {
    const auto f = [&](double th) {
        if (th >= 0.5 * std::numbers::pi) return 0.0;
        const double w = wc * std::tan(th);
        const double c = std::cos(th);
        return j_coth(w, g, wc, beta) * wc / (c * c);
    };
    return simpson(f, 0.0, 0.5 * std::numbers::pi, 20480) / std::numbers::pi;
}

} // namespace

TEST(SpectralDensity, Examples) {
    EXPECT_EQ(spectral_density(0.0, kOperating), 0.0);
    EXPECT_NEAR(spectral_density(10.0, kOperating), 0.125, 1e-15);
    EXPECT_THROW(spectral_density(-1.0, kOperating), DomainError);
}

TEST(SpectralDensity, ArgmaxByScan) {
    double best = 0.0, arg = 0.0;
    for (int i = 0; i <= 2000000; ++i) {
        const double w = 20.0 * i / 2000000.0;
        const double j = spectral_density(w, kOperating);
        if (j > best) {
            best = j;
            arg = w;
        }
    }
    EXPECT_NEAR(arg, 10.0 / std::sqrt(3.0), 2e-5);
    EXPECT_NEAR(10.0 / std::sqrt(3.0), 5.7735, 1e-4);
}

TEST(BathSpec, Violations) {
    auto s = kOperating;
    EXPECT_TRUE(s.violations().empty());
    s.gamma = -1;
    s.beta = 0;
    s.omega_c = 0;
    s.quadrature.n_points = 1;
    EXPECT_EQ(s.violations().size(), 4u);
    EXPECT_THROW(CorrelationEvaluator{s}, InputError);
}

TEST(BathCorrelation, ReL0AgainstIndependentQuadrature) {
    const double oracle = re_l0_oracle(0.05, 10.0, 5.0);
    const double got = bath_correlation(0.0, kOperating).real();
    EXPECT_NEAR(got, oracle, 1e-6 * std::abs(oracle));
    EXPECT_EQ(bath_correlation(0.0, kOperating).imag(), 0.0);
}

TEST(BathCorrelation, FiniteTimesAgainstDirectQuadrature) {
    const CorrelationEvaluator eval(kOperating);
    const double scale = std::abs(eval(0.0).real());
    for (double t : {0.05, 0.3, 1.0, 2.5}) {
        // [0, 2e4] carries all but ~1e-7 of either integral.
        const auto re = [&](double w) { return j_coth(w, 0.05, 10.0, 5.0) * std::cos(w * t); };
        const auto im = [&](double w) { return -j_plain(w, 0.05, 10.0) * std::sin(w * t); };
        const double ore = simpson(re, 0.0, 2e4, 4000000) / std::numbers::pi;
        const double oim = simpson(im, 0.0, 2e4, 4000000) / std::numbers::pi;
        const auto l = eval(t);
        EXPECT_NEAR(l.real(), ore, 1e-6 * scale) << "t=" << t;
        EXPECT_NEAR(l.imag(), oim, 1e-6 * scale) << "t=" << t;
    }
}

TEST(BathCorrelation, ZeroCoupling) {
    auto s = kOperating;
    s.gamma = 0.0;
    for (double t : {0.0, 0.5, 3.0}) EXPECT_EQ(bath_correlation(t, s), std::complex<double>(0.0, 0.0));
    const auto tab = tabulate_correlation(s, default_grid());
    for (std::size_t k = 0; k < tab.size(); ++k) {
        EXPECT_EQ(tab.re_L[k], 0.0);
        EXPECT_EQ(tab.im_L[k], 0.0);
    }
}

TEST(BathCorrelation, NegativeTimeRejected) { EXPECT_THROW(bath_correlation(-0.1, kOperating), DomainError); }

TEST(BathCorrelation, UnconvergedQuadratureIsReported) {
    auto s = kOperating;
    s.beta = 0.05;  // hot bath, long thermal tail
    s.quadrature.n_points = 2;
    EXPECT_THROW(bath_correlation(0.7, s), NumericalError);
}

TEST(BathCorrelation, IntegrandLimitAtZeroFrequency) {
    const auto v = correlation_integrand(0.0, 0.0, kOperating);
    EXPECT_NEAR(v.real(), 2.0 * 0.05 / 5.0, 1e-15);
    EXPECT_EQ(v.imag(), 0.0);
    const auto near = correlation_integrand(1e-7, 0.0, kOperating);
    EXPECT_NEAR(near.real(), 2.0 * 0.05 / 5.0, 1e-10);
}

TEST(CorrelationTable, InvariantsAtOperatingPoint) {
    const auto tab = tabulate_correlation(kOperating, default_grid());
    ASSERT_EQ(tab.size(), 4097u);
    EXPECT_EQ(tab.im_L[0], 0.0);
    EXPECT_GT(tab.re_L[0], 0.0);
    for (std::size_t k = 0; k < tab.size(); ++k) EXPECT_GE(tab.re_L[0], std::abs(tab.re_L[k]));
}

TEST(CorrelationTable, GridDoublingAgreesOnSharedNodes) {
    const auto coarse = tabulate_correlation(kOperating, TimeGrid::over(two_pi, 512));
    const auto fine = tabulate_correlation(kOperating, TimeGrid::over(two_pi, 1024));
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        EXPECT_NEAR(coarse.re_L[k], fine.re_L[2 * k], 1e-13);
        EXPECT_NEAR(coarse.im_L[k], fine.im_L[2 * k], 1e-13);
    }
}

TEST(CorrelationTable, LinearInCoupling) {
    auto a = kOperating, b = kOperating;
    a.gamma = 0.01;
    b.gamma = 0.1;
    const CorrelationEvaluator ea(a), eb(b);
    for (double t : {0.0, 0.2, 1.0, 4.0}) {
        EXPECT_NEAR(eb(t).real(), 10.0 * ea(t).real(), 1e-12);
        EXPECT_NEAR(eb(t).imag(), 10.0 * ea(t).imag(), 1e-12);
    }
}
