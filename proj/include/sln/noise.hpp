// noise.hpp: synthesis of the correlated complex noise pair (xi, nu)
//
// Targets, with L = Re L + i Im L tabulated on the simulation spacing:
//   <xi(t) xi(t')> = Re L(t - t')
//   <xi(t) nu(t')> = 2i theta(t - t') Im L(t - t')
//   <nu(t) nu(t')> = 0
//
// With w real white noise and eta circular complex white noise (<eta eta> = 0,
// <eta eta*> = 2):
//   xi = g * w + k * eta,   nu = h * conj(eta)
// |g^|^2 is the circulant-embedded spectrum of Re L, and 2 k^(w) h^(-w) is the
// spectrum of the causal cross-kernel. The circular parts drop out of <xi xi>
// and <nu nu>. The split |k^|^2 = a |C^|/4, |h^|^2 = |C^|/a balances the
// growth of per-realization weights driven by Im xi against that driven by nu.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sln/bath.hpp"
#include "sln/errors.hpp"
#include "sln/exact_sum.hpp"
#include "sln/fft.hpp"
#include "sln/grid.hpp"

namespace sln {

using cplx = std::complex<double>;

struct NoisePath {
    TimeGrid grid;
    std::vector<cplx> xi;
    std::vector<cplx> nu;
    std::uint64_t seed_id{0};
};

// Independent normal stream per (master_seed, realization_index).
inline std::mt19937_64 realization_engine(std::uint64_t master_seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x534c4eu};
    return std::mt19937_64(seq);
}

struct EmbeddingCheck {
    bool ok{false};
    std::size_t size{0};          // embedding length M
    std::size_t worst_bin{0};     // most negative eigenvalue bin
    double worst_relative{0.0};   // lambda_min / lambda_max
    double worst_frequency{0.0};  // angular frequency of worst_bin
};

namespace detail {

inline constexpr double kClipTolerance = 1e-10;

// Eigenvalues of the circulant embedding of Re L on M points.
inline std::vector<double> circulant_eigenvalues(const CorrelationTable& table, std::size_t m) {
    fft::Plan plan(m);
    fft::Buffer in(m), out(m);
    const std::size_t half = m / 2;
    for (std::size_t n = 0; n < m; ++n) {
        const std::size_t lag = n <= half ? n : m - n;
        in[n] = table.re_L[lag];
    }
    plan.forward(in, out);
    std::vector<double> lambda(m);
    for (std::size_t i = 0; i < m; ++i) lambda[i] = out[i].real();
    return lambda;
}

inline EmbeddingCheck inspect(const std::vector<double>& lambda, double dt) {
    EmbeddingCheck c;
    c.size = lambda.size();
    const double peak = *std::max_element(lambda.begin(), lambda.end());
    const auto worst = std::min_element(lambda.begin(), lambda.end());
    c.worst_bin = static_cast<std::size_t>(worst - lambda.begin());
    c.worst_relative = peak > 0.0 ? *worst / peak : 0.0;
    const double m = static_cast<double>(c.size);
    const double bin = c.worst_bin <= c.size / 2 ? static_cast<double>(c.worst_bin)
                                                 : static_cast<double>(c.worst_bin) - m;
    c.worst_frequency = two_pi * bin / (m * dt);
    c.ok = peak <= 0.0 || c.worst_relative >= -kClipTolerance;
    return c;
}

inline std::size_t initial_embedding(std::size_t n_nodes) {
    return std::bit_ceil(std::max<std::size_t>(2 * (n_nodes - 1), 2));
}

} // namespace detail

inline EmbeddingCheck check_embedding(const CorrelationTable& table, std::size_t m) {
    if (table.size() < m / 2 + 1) throw InputError("correlation table shorter than embedding half-length");
    return detail::inspect(detail::circulant_eigenvalues(table, m), table.grid.dt);
}

// Tabulates L on the simulation spacing far enough out that the circulant
// embedding is nonnegative (within the clip tolerance), doubling the
// embedding length as needed.
inline CorrelationTable tabulate_for_noise(const BathSpec& spec, const TimeGrid& grid,
                                           std::size_t max_embedding = std::size_t{1} << 22) {
    if (grid.size < 2) throw InputError("noise grid needs at least two nodes");
    const CorrelationEvaluator eval(spec);
    std::size_t m = detail::initial_embedding(grid.size);
    CorrelationTable tab{TimeGrid{grid.dt, 0}, {}, {}};
    EmbeddingCheck last;
    for (; m <= max_embedding; m *= 2) {
        const std::size_t need = m / 2 + 1;
        for (std::size_t k = tab.size(); k < need; ++k) {
            const auto l = eval(grid.dt * static_cast<double>(k));
            tab.re_L.push_back(l.real());
            tab.im_L.push_back(l.imag());
        }
        tab.grid.size = need;
        if (spec.gamma == 0.0) return tab;
        last = check_embedding(tab, m);
        if (last.ok) return tab;
    }
    std::ostringstream os;
    os << "noise embedding stayed indefinite up to length " << last.size << ": eigenvalue ratio "
       << last.worst_relative << " at bin " << last.worst_bin << " (omega=" << last.worst_frequency << ")";
    throw NumericalError(os.str());
}

class NoiseSynthesizer {
public:
    static constexpr double kDefaultBalance = 1.0;

    struct Workspace {
        fft::Buffer w, w_hat, eta, eta_hat, work;
        explicit Workspace(std::size_t m) : w(m), w_hat(m), eta(m), eta_hat(m), work(m) {}
    };

    // Picks the shortest power-of-two embedding (>= 2 (n_nodes-1)) that the
    // table covers and whose spectrum is nonnegative within the clip tolerance.
    NoiseSynthesizer(const CorrelationTable& table, std::size_t n_nodes, double balance = kDefaultBalance)
        : grid_{table.grid.dt, n_nodes}
        , balance_(balance) {
        if (!(balance > 0.0)) throw InputError("noise balance must be > 0");
        if (n_nodes < 2) throw InputError("noise grid needs at least two nodes");
        if (table.size() < n_nodes) throw InputError("correlation table does not cover the simulation window");
        zero_ = std::all_of(table.re_L.begin(), table.re_L.end(), [](double v) { return v == 0.0; }) &&
                std::all_of(table.im_L.begin(), table.im_L.end(), [](double v) { return v == 0.0; });
        if (zero_) return;

        std::vector<double> lambda;
        EmbeddingCheck check;
        for (std::size_t m = detail::initial_embedding(n_nodes); m / 2 + 1 <= table.size(); m *= 2) {
            lambda = detail::circulant_eigenvalues(table, m);
            check = detail::inspect(lambda, table.grid.dt);
            if (check.ok) break;
        }
        if (!check.ok) {
            std::ostringstream os;
            if (check.size == 0) {
                os << "correlation table too short for a circulant embedding of " << n_nodes << " nodes";
            } else {
                os << "negative noise power spectrum: ratio " << check.worst_relative << " at bin "
                   << check.worst_bin << " (omega=" << check.worst_frequency << ") with embedding "
                   << check.size << "; tabulate L over a longer horizon";
            }
            throw NumericalError(os.str());
        }
        embedding_ = check.size;
        min_relative_eigenvalue_ = check.worst_relative;
        build_filters(table, lambda);
    }

    const TimeGrid& grid() const { return grid_; }
    std::size_t embedding_size() const { return embedding_; }
    bool is_zero() const { return zero_; }
    double min_relative_eigenvalue() const { return min_relative_eigenvalue_; }

    Workspace make_workspace() const { return Workspace(zero_ ? 0 : embedding_); }

    NoisePath generate(std::uint64_t master_seed, std::uint64_t index) const {
        NoisePath path;
        Workspace ws = make_workspace();
        generate(master_seed, index, ws, path);
        return path;
    }

    void generate(std::uint64_t master_seed, std::uint64_t index, Workspace& ws, NoisePath& out) const {
        out.grid = grid_;
        out.seed_id = index;
        out.xi.assign(grid_.size, cplx{});
        out.nu.assign(grid_.size, cplx{});
        if (zero_) return;

        auto engine = realization_engine(master_seed, index);
        std::normal_distribution<double> normal;
        for (std::size_t j = 0; j < embedding_; ++j) ws.w[j] = normal(engine);
        for (std::size_t j = 0; j < embedding_; ++j) {
            const double a = normal(engine);
            const double b = normal(engine);
            ws.eta[j] = {a, b};
        }
        plan_->forward(ws.w, ws.w_hat);
        plan_->forward(ws.eta, ws.eta_hat);

        for (std::size_t m = 0; m < embedding_; ++m) ws.w[m] = g_hat_[m] * ws.w_hat[m] + k_hat_[m] * ws.eta_hat[m];
        plan_->backward(ws.w, ws.work);
        for (std::size_t k = 0; k < grid_.size; ++k) out.xi[k] = ws.work[k];

        // DFT of conj(eta) at bin m is conj(eta^) at bin -m.
        for (std::size_t m = 0; m < embedding_; ++m)
            ws.w[m] = h_hat_[m] * std::conj(ws.eta_hat[(embedding_ - m) % embedding_]);
        plan_->backward(ws.w, ws.work);
        for (std::size_t k = 0; k < grid_.size; ++k) out.nu[k] = ws.work[k];
    }

private:
    void build_filters(const CorrelationTable& table, const std::vector<double>& lambda) {
        const std::size_t m = embedding_;
        const double inv_m = 1.0 / static_cast<double>(m);
        plan_ = std::make_shared<fft::Plan>(m);

        g_hat_.resize(m);
        for (std::size_t i = 0; i < m; ++i) g_hat_[i] = std::sqrt(std::max(lambda[i], 0.0));

        // Causal cross-kernel 2i theta(n) Im L(n dt); the lag m/2 is shared by both signs.
        fft::Buffer c(m), c_hat(m);
        const std::size_t half = m / 2;
        for (std::size_t n = 0; n < m; ++n) {
            if (n == 0 || n > half) c[n] = 0.0;
            else if (n == half) c[n] = cplx{0.0, table.im_L[n]};
            else c[n] = cplx{0.0, 2.0 * table.im_L[n]};
        }
        plan_->forward(c, c_hat);

        k_hat_.resize(m);
        h_hat_.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double mag = std::abs(c_hat[i]);
            const double k = std::sqrt(balance_ * mag) / 2.0;
            k_hat_[i] = k * inv_m;
            g_hat_[i] *= inv_m;
        }
        // h^(m) = C^(-m) / (2 k^(-m))
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t neg = (m - i) % m;
            const double k = k_hat_[neg] / inv_m;
            h_hat_[i] = k > 0.0 ? c_hat[neg] / (2.0 * k) * inv_m : cplx{};
        }
    }

    TimeGrid grid_;
    std::size_t embedding_{0};
    bool zero_{false};
    double min_relative_eigenvalue_{0.0};
    std::shared_ptr<const fft::Plan> plan_;
    double balance_{kDefaultBalance};
    std::vector<double> g_hat_;
    std::vector<double> k_hat_;
    std::vector<cplx> h_hat_;
};

inline NoisePath generate_noise_pair(const CorrelationTable& table, std::size_t n_nodes,
                                     std::uint64_t master_seed, std::uint64_t realization_index) {
    return NoiseSynthesizer(table, n_nodes).generate(master_seed, realization_index);
}

// ---------------------------------------------------------------------------
// Statistical self-test

enum class NoiseMoment { xi_xi, xi_nu, nu_nu };

inline const char* moment_name(NoiseMoment m) {
    switch (m) {
        case NoiseMoment::xi_xi: return "xi_xi";
        case NoiseMoment::xi_nu: return "xi_nu";
        case NoiseMoment::nu_nu: return "nu_nu";
    }
    return "?";
}

struct MomentCheck {
    NoiseMoment moment{};
    long lag{0};        // in grid steps, t - t'
    double tau{0.0};
    cplx target;
    cplx estimate;
    double se_re{0.0};
    double se_im{0.0};
    bool pass{false};
};

struct NoiseStatReport {
    std::size_t n_paths{0};
    std::vector<MomentCheck> checks;
    double excess_kurtosis{0.0};    // of Re xi at the probe node
    double excess_kurtosis_se{0.0};
    std::size_t kurtosis_node{0};

    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const MomentCheck& c) { return c.pass; });
    }
    std::size_t failures() const {
        return static_cast<std::size_t>(
            std::count_if(checks.begin(), checks.end(), [](const MomentCheck& c) { return !c.pass; }));
    }
};

// Twenty lags (in steps) spread over the window, denser near zero where Im L lives.
inline std::vector<long> default_stat_lags(std::size_t n_nodes) {
    static constexpr long base[] = {-400, -100, -20, -5, 0, 2, 5, 10, 20, 40,
                                    70, 100, 150, 250, 400, 600, 1000, 1500, 2200, 3000};
    const double scale = static_cast<double>(n_nodes - 1) / 4096.0;
    std::vector<long> lags;
    for (long b : base) {
        long l = std::lround(static_cast<double>(b) * scale);
        if (b != 0 && l == 0) l = b > 0 ? 1 : -1;
        if (std::abs(l) < static_cast<long>(n_nodes) - 1 &&
            std::find(lags.begin(), lags.end(), l) == lags.end())
            lags.push_back(l);
    }
    return lags;
}

// Streaming estimator of the second moments on a lag grid. Each path
// contributes its lag-averaged products; sums are exact, so the report does not
// depend on the order in which paths are added or accumulators merged.
class NoiseStatAccumulator {
public:
    NoiseStatAccumulator(const CorrelationTable& table, const TimeGrid& grid, std::vector<long> lags = {})
        : grid_(grid)
        , lags_(lags.empty() ? default_stat_lags(grid.size) : std::move(lags)) {
        if (std::abs(table.grid.dt - grid.dt) > 1e-14 * grid.dt)
            throw InputError("verify_noise_statistics: table spacing differs from path spacing");
        for (NoiseMoment mom : kMoments) {
            for (long lag : lags_) {
                const std::size_t a = static_cast<std::size_t>(std::abs(lag));
                if (a >= grid.size || a >= table.size()) throw InputError("verify_noise_statistics: lag outside table");
                MomentCheck c;
                c.moment = mom;
                c.lag = lag;
                c.tau = static_cast<double>(lag) * grid.dt;
                switch (mom) {
                    case NoiseMoment::xi_xi: c.target = table.re_L[a]; break;
                    case NoiseMoment::xi_nu: c.target = lag > 0 ? cplx{0.0, 2.0 * table.im_L[a]} : cplx{}; break;
                    case NoiseMoment::nu_nu: c.target = 0.0; break;
                }
                checks_.push_back(c);
            }
        }
        sums_.resize(checks_.size());
    }

    void add(const NoisePath& p) {
        const std::size_t n = grid_.size;
        if (!p.grid.same_as(grid_) || p.xi.size() != n || p.nu.size() != n)
            throw InputError("verify_noise_statistics: paths are on different grids");
        for (std::size_t i = 0; i < checks_.size(); ++i) {
            const long lag = checks_[i].lag;
            const std::size_t a = static_cast<std::size_t>(std::abs(lag));
            cplx acc{};
            for (std::size_t k = 0; k + a < n; ++k) {
                // first factor at the later time when lag > 0
                const std::size_t late = lag >= 0 ? k + a : k;
                const std::size_t early = lag >= 0 ? k : k + a;
                switch (checks_[i].moment) {
                    case NoiseMoment::xi_xi: acc += p.xi[late] * p.xi[early]; break;
                    case NoiseMoment::xi_nu: acc += p.xi[late] * p.nu[early]; break;
                    case NoiseMoment::nu_nu: acc += p.nu[late] * p.nu[early]; break;
                }
            }
            acc /= static_cast<double>(n - a);
            auto& s = sums_[i];
            s[0].add(acc.real());
            s[1].add(acc.imag());
            s[2].add(acc.real() * acc.real());
            s[3].add(acc.imag() * acc.imag());
        }
        const double x = p.xi[n / 2].real();
        double pw = 1.0;
        for (auto& m : probe_) m.add(pw *= x);
        ++count_;
    }

    NoiseStatAccumulator& operator+=(const NoiseStatAccumulator& o) {
        if (!o.grid_.same_as(grid_) || o.lags_ != lags_) throw InputError("noise statistics: incompatible accumulators");
        for (std::size_t i = 0; i < sums_.size(); ++i)
            for (std::size_t j = 0; j < 4; ++j) sums_[i][j] += o.sums_[i][j];
        for (std::size_t j = 0; j < 4; ++j) probe_[j] += o.probe_[j];
        count_ += o.count_;
        return *this;
    }

    std::size_t count() const { return count_; }

    NoiseStatReport report() const {
        NoiseStatReport rep;
        rep.n_paths = count_;
        rep.checks = checks_;
        rep.kurtosis_node = grid_.size / 2;
        if (count_ == 0) return rep;
        const double np = static_cast<double>(count_);
        const auto within = [](double est, double tgt, double se) { return std::abs(est - tgt) <= 3.0 * se || est == tgt; };
        for (std::size_t i = 0; i < checks_.size(); ++i) {
            auto& c = rep.checks[i];
            const auto& s = sums_[i];
            const double m_re = s[0].to_double() / np, m_im = s[1].to_double() / np;
            c.estimate = {m_re, m_im};
            if (count_ > 1) {
                c.se_re = std::sqrt(std::max(s[2].to_double() / np - m_re * m_re, 0.0) / (np - 1.0));
                c.se_im = std::sqrt(std::max(s[3].to_double() / np - m_im * m_im, 0.0) / (np - 1.0));
            }
            c.pass = within(m_re, c.target.real(), c.se_re) && within(m_im, c.target.imag(), c.se_im);
        }
        const double r1 = probe_[0].to_double() / np, r2 = probe_[1].to_double() / np;
        const double r3 = probe_[2].to_double() / np, r4 = probe_[3].to_double() / np;
        const double m2 = r2 - r1 * r1;
        const double m4 = r4 - 4.0 * r1 * r3 + 6.0 * r1 * r1 * r2 - 3.0 * r1 * r1 * r1 * r1;
        rep.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
        rep.excess_kurtosis_se = std::sqrt(24.0 / np);
        return rep;
    }

private:
    static constexpr NoiseMoment kMoments[] = {NoiseMoment::xi_xi, NoiseMoment::xi_nu, NoiseMoment::nu_nu};

    TimeGrid grid_;
    std::vector<long> lags_;
    std::vector<MomentCheck> checks_;
    std::vector<std::array<ExactSum, 4>> sums_;  // sum re, im, re^2, im^2
    std::array<ExactSum, 4> probe_;              // raw moments of Re xi at mid-window
    std::size_t count_{0};
};

inline NoiseStatReport verify_noise_statistics(const std::vector<NoisePath>& paths, const CorrelationTable& table,
                                               std::vector<long> lags = {}) {
    if (paths.empty()) throw InputError("verify_noise_statistics: no paths");
    NoiseStatAccumulator acc(table, paths.front().grid, std::move(lags));
    for (const auto& p : paths) acc.add(p);
    return acc.report();
}

} // namespace sln
