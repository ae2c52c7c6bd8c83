// ensemble.hpp: Monte Carlo average of SLN trajectories over noise realizations
//
// Realizations [first, first+n) are split into contiguous batches. Each batch is
// integrated sequentially by one worker; its per-node sums go into ExactSum
// accumulators and its within-batch second moments (Welford) into exact M2
// accumulators. Means are therefore independent of worker count and of how a
// run is split and merged. Batch means are kept for error bars of nonlinear
// functionals (trace distance, its derivative, time integrals).

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sln/bath.hpp"
#include "sln/density_matrix.hpp"
#include "sln/errors.hpp"
#include "sln/exact_sum.hpp"
#include "sln/grid.hpp"
#include "sln/noise.hpp"
#include "sln/propagator.hpp"

namespace sln {

struct LabeledState {
    std::string label;
    DensityMatrix rho0;
};

// The two eigenstates (+, -) of a Pauli operator.
inline std::vector<LabeledState> pauli_pair(PauliAxis axis) {
    return {{eigenstate_label(axis, +1), pauli_eigenstate(axis, +1)},
            {eigenstate_label(axis, -1), pauli_eigenstate(axis, -1)}};
}

inline std::vector<LabeledState> all_pauli_eigenstates() {
    std::vector<LabeledState> s;
    for (auto a : {PauliAxis::x, PauliAxis::y, PauliAxis::z})
        for (const auto& st : pauli_pair(a)) s.push_back(st);
    return s;
}

struct EnsembleConfig {
    BathSpec bath{};
    SystemSpec system{};
    std::vector<LabeledState> states{{"z+", pauli_eigenstate(PauliAxis::z, +1)}};
    std::size_t n_realizations{10000};
    std::uint64_t master_seed{1};
    std::uint64_t first_index{0};
    IntegratorSpec integrator{};
    double t_end{two_pi};
    std::size_t n_steps{4096};
    std::size_t n_batches{32};
    double noise_balance{NoiseSynthesizer::kDefaultBalance};
    double max_diverged_fraction{1e-3};
    bool require_physical_states{true};

    TimeGrid grid() const { return TimeGrid::over(t_end, n_steps); }

    std::vector<std::string> violations() const {
        auto v = bath.violations();
        for (auto& s : system.violations()) v.push_back(std::move(s));
        if (n_realizations < 1) v.emplace_back("n_realizations must be >= 1");
        if (states.empty()) v.emplace_back("at least one initial state is required");
        if (require_physical_states) {
            for (const auto& s : states)
                if (!is_physical(s.rho0, 1e-12)) v.push_back("initial state '" + s.label + "' is not a physical density matrix");
        }
        if (!(t_end > 0.0)) v.emplace_back("t_end must be > 0");
        if (n_steps < 2) v.emplace_back("n_steps must be >= 2");
        if (n_batches < 1) v.emplace_back("n_batches must be >= 1");
        if (!(noise_balance > 0.0)) v.emplace_back("noise.balance must be > 0");
        if (integrator.substeps < 1) v.emplace_back("integrator.substeps must be >= 1");
        if (!(max_diverged_fraction >= 0.0)) v.emplace_back("max_diverged_fraction must be >= 0");
        return v;
    }
};

// Real components accumulated per node: rho00, rho01, rho10, rho11 (re, im),
// xi Tr(sy rho), Tr rho and rho01 - conj(rho10), each as (re, im).
inline constexpr std::size_t kValuesPerNode = 14;
inline constexpr std::size_t kJqRe = 8;
inline constexpr std::size_t kJqIm = 9;
inline constexpr std::size_t kTraceRe = 10;
inline constexpr std::size_t kTraceIm = 11;
inline constexpr std::size_t kSkewRe = 12;
inline constexpr std::size_t kSkewIm = 13;

struct Batch {
    std::uint64_t first{0};
    std::size_t count{0};
    std::vector<double> mean;  // node-major, kValuesPerNode per node
};

class StateSeries {
public:
    StateSeries() = default;
    StateSeries(LabeledState state, std::size_t nodes)
        : state_(std::move(state))
        , nodes_(nodes)
        , sum_(nodes * kValuesPerNode)
        , m2_within_(nodes * kValuesPerNode) {}

    const std::string& label() const { return state_.label; }
    const DensityMatrix& rho0() const { return state_.rho0; }
    std::size_t nodes() const { return nodes_; }
    std::size_t count() const { return count_; }
    const std::vector<Batch>& batches() const { return batches_; }

    double mean(std::size_t node, std::size_t comp) const { return mean_[node * kValuesPerNode + comp]; }
    // Standard error of the mean; NaN when fewer than two realizations.
    double stderr_of(std::size_t node, std::size_t comp) const { return se_[node * kValuesPerNode + comp]; }

    DensityMatrix rho_bar(std::size_t node) const {
        const double* v = &mean_[node * kValuesPerNode];
        return {{cplx{v[0], v[1]}, cplx{v[2], v[3]}, cplx{v[4], v[5]}, cplx{v[6], v[7]}}};
    }
    // Per-entry standard errors as a complex number (re SE, im SE).
    DensityMatrix rho_stderr(std::size_t node) const {
        const double* v = &se_[node * kValuesPerNode];
        return {{cplx{v[0], v[1]}, cplx{v[2], v[3]}, cplx{v[4], v[5]}, cplx{v[6], v[7]}}};
    }
    cplx jq_accumulator(std::size_t node) const { return {mean(node, kJqRe), mean(node, kJqIm)}; }

    static DensityMatrix batch_rho(const Batch& b, std::size_t node) {
        const double* v = &b.mean[node * kValuesPerNode];
        return {{cplx{v[0], v[1]}, cplx{v[2], v[3]}, cplx{v[4], v[5]}, cplx{v[6], v[7]}}};
    }

    // Accumulation interface used by the runner and by merge().
    void absorb(const std::vector<ExactSum>& sums, const std::vector<ExactSum>& m2, Batch batch) {
        for (std::size_t i = 0; i < sum_.size(); ++i) {
            sum_[i] += sums[i];
            m2_within_[i] += m2[i];
        }
        count_ += batch.count;
        batches_.push_back(std::move(batch));
    }
    void absorb(const StateSeries& o) {
        for (std::size_t i = 0; i < sum_.size(); ++i) {
            sum_[i] += o.sum_[i];
            m2_within_[i] += o.m2_within_[i];
        }
        count_ += o.count_;
        batches_.insert(batches_.end(), o.batches_.begin(), o.batches_.end());
    }

    // Recomputes means and standard errors from the exact accumulators.
    void finalize() {
        std::sort(batches_.begin(), batches_.end(), [](const Batch& a, const Batch& b) { return a.first < b.first; });
        const std::size_t nv = sum_.size();
        mean_.assign(nv, 0.0);
        se_.assign(nv, std::numeric_limits<double>::quiet_NaN());
        if (count_ == 0) return;
        const double n = static_cast<double>(count_);
        for (std::size_t i = 0; i < nv; ++i) mean_[i] = sum_[i].to_double() / n;
        if (count_ < 2) return;
        for (std::size_t i = 0; i < nv; ++i) {
            if (m2_within_[i].to_double() == 0.0 && batches_agree(i)) {
                se_[i] = 0.0;  // identical samples; pooled rounding must not leak in
                continue;
            }
            double between = 0.0;
            for (const auto& b : batches_) {
                if (b.count == 0) continue;
                const double d = b.mean[i] - mean_[i];
                between += static_cast<double>(b.count) * d * d;
            }
            const double m2 = m2_within_[i].to_double() + between;
            se_[i] = std::sqrt(std::max(m2, 0.0) / (n - 1.0) / n);
        }
    }

private:
    bool batches_agree(std::size_t i) const {
        const Batch* first = nullptr;
        for (const auto& b : batches_) {
            if (b.count == 0) continue;
            if (!first) first = &b;
            else if (b.mean[i] != first->mean[i]) return false;
        }
        return true;
    }

    LabeledState state_;
    std::size_t nodes_{0};
    std::size_t count_{0};
    std::vector<ExactSum> sum_;
    std::vector<ExactSum> m2_within_;
    std::vector<Batch> batches_;
    std::vector<double> mean_;
    std::vector<double> se_;
};

// Standard error of a quantity estimated from B batch values F_b with weights
// n_b: var = sum_b n_b (F_b - F_w)^2 / ((B - 1) n), F_w the weighted mean.
inline std::vector<double> spread_se(const std::vector<std::vector<double>>& per_batch,
                                     const std::vector<double>& weights) {
    if (per_batch.empty()) return {};
    const std::size_t len = per_batch.front().size();
    std::vector<double> se(len, std::numeric_limits<double>::quiet_NaN());
    if (per_batch.size() < 2) return se;
    double n = 0.0;
    for (double w : weights) n += w;
    const double nb = static_cast<double>(per_batch.size());
    for (std::size_t k = 0; k < len; ++k) {
        bool same = true;
        for (std::size_t b = 1; b < per_batch.size() && same; ++b) same = per_batch[b][k] == per_batch[0][k];
        if (same) {
            se[k] = 0.0;
            continue;
        }
        double wmean = 0.0;
        for (std::size_t b = 0; b < per_batch.size(); ++b) wmean += weights[b] * per_batch[b][k];
        wmean /= n;
        double acc = 0.0;
        for (std::size_t b = 0; b < per_batch.size(); ++b) {
            const double d = per_batch[b][k] - wmean;
            acc += weights[b] * d * d;
        }
        se[k] = std::sqrt(acc / (nb - 1.0) / n);
    }
    return se;
}

// Batch-spread SE of a functional of batch means. F receives one batch per
// series; all series must come from the same run (aligned batches).
template <class F>
std::vector<double> batch_se(const std::vector<const StateSeries*>& series, F&& functional) {
    if (series.empty()) throw InputError("batch_se: no series");
    const auto& ref = series.front()->batches();
    for (const auto* s : series) {
        if (s->batches().size() != ref.size()) throw InputError("batch_se: series have different batch layouts");
        for (std::size_t b = 0; b < ref.size(); ++b)
            if (s->batches()[b].first != ref[b].first || s->batches()[b].count != ref[b].count)
                throw InputError("batch_se: series have different batch layouts");
    }
    std::vector<std::vector<double>> per_batch;
    std::vector<double> weights;
    std::vector<const Batch*> current(series.size());
    for (std::size_t b = 0; b < ref.size(); ++b) {
        if (ref[b].count == 0) continue;
        for (std::size_t s = 0; s < series.size(); ++s) current[s] = &series[s]->batches()[b];
        per_batch.push_back(functional(current));
        weights.push_back(static_cast<double>(ref[b].count));
    }
    return spread_se(per_batch, weights);
}

struct IndexRange {
    std::uint64_t first{0};
    std::uint64_t count{0};
};

struct EnsembleResult {
    EnsembleConfig config;
    TimeGrid grid;
    std::vector<StateSeries> states;
    std::vector<IndexRange> ranges;
    std::size_t n_requested{0};
    std::size_t n_accepted{0};
    std::size_t diverged_count{0};
    std::vector<std::uint64_t> diverged_indices;

    const StateSeries& state(std::string_view label) const {
        for (const auto& s : states)
            if (s.label() == label) return s;
        throw InputError("no state labelled '" + std::string(label) + "' in ensemble result");
    }
};

struct RunOptions {
    unsigned workers{1};
};

namespace detail {

inline void record_trajectory(const DensityMatrix& r, cplx xi, double* v) {
    for (std::size_t e = 0; e < 4; ++e) {
        v[2 * e] = r.m[e].real();
        v[2 * e + 1] = r.m[e].imag();
    }
    const cplx jq = xi * expect_y(r);
    v[kJqRe] = jq.real();
    v[kJqIm] = jq.imag();
    const cplx tr = r.trace();
    v[kTraceRe] = tr.real();
    v[kTraceIm] = tr.imag();
    const cplx skew = r(0, 1) - std::conj(r(1, 0));
    v[kSkewRe] = skew.real();
    v[kSkewIm] = skew.imag();
}

struct BatchAccumulator {
    std::size_t nv;
    std::vector<std::vector<ExactSum>> sums;
    std::vector<std::vector<double>> mean, m2;
    std::size_t count{0};

    BatchAccumulator(std::size_t n_states, std::size_t nv_)
        : nv(nv_)
        , sums(n_states, std::vector<ExactSum>(nv_))
        , mean(n_states, std::vector<double>(nv_, 0.0))
        , m2(n_states, std::vector<double>(nv_, 0.0)) {}

    void add(const std::vector<std::vector<double>>& values) {
        ++count;
        const double inv = 1.0 / static_cast<double>(count);
        for (std::size_t s = 0; s < values.size(); ++s) {
            const double* x = values[s].data();
            double* mu = mean[s].data();
            double* q = m2[s].data();
            ExactSum* acc = sums[s].data();
            for (std::size_t i = 0; i < nv; ++i) {
                acc[i].add(x[i]);
                const double d = x[i] - mu[i];
                mu[i] += d * inv;
                q[i] += d * (x[i] - mu[i]);
            }
        }
    }
};

} // namespace detail

// Noise machinery for one bath and grid, reusable across ensemble runs.
class NoiseSource {
public:
    NoiseSource(const BathSpec& bath, const TimeGrid& grid, double balance = NoiseSynthesizer::kDefaultBalance)
        : bath_(bath)
        , table_(tabulate_for_noise(bath, grid))
        , synth_(table_, grid.size, balance)
        , balance_(balance) {}

    const BathSpec& bath() const { return bath_; }
    const CorrelationTable& table() const { return table_; }
    const NoiseSynthesizer& synthesizer() const { return synth_; }
    double balance() const { return balance_; }

private:
    BathSpec bath_;
    CorrelationTable table_;
    NoiseSynthesizer synth_;
    double balance_;
};

inline EnsembleResult run_ensemble(const EnsembleConfig& cfg, const NoiseSource& noise, const RunOptions& opt = {}) {
    if (const auto v = cfg.violations(); !v.empty()) throw InputError("ensemble config: " + v.front());
    const TimeGrid grid = cfg.grid();
    if (!noise.synthesizer().grid().same_as(grid)) throw InputError("noise source grid differs from ensemble grid");
    if (noise.balance() != cfg.noise_balance) throw InputError("noise source balance differs from ensemble config");

    const std::size_t nodes = grid.size;
    const std::size_t nv = nodes * kValuesPerNode;
    const std::size_t n_states = cfg.states.size();
    const std::size_t n_batches = std::min<std::size_t>(cfg.n_batches, cfg.n_realizations);

    EnsembleResult res;
    res.config = cfg;
    res.grid = grid;
    res.n_requested = cfg.n_realizations;
    res.ranges.push_back({cfg.first_index, cfg.n_realizations});
    for (const auto& s : cfg.states) res.states.emplace_back(s, nodes);

    std::mutex merge_mutex;
    std::atomic<std::size_t> next_batch{0};
    std::exception_ptr failure;
    std::vector<std::uint64_t> diverged;

    const auto worker = [&] {
        try {
            auto ws = noise.synthesizer().make_workspace();
            NoisePath path;
            std::vector<std::vector<double>> values(n_states, std::vector<double>(nv));
            for (;;) {
                const std::size_t b = next_batch.fetch_add(1);
                if (b >= n_batches) return;
                const std::uint64_t lo = cfg.n_realizations * b / n_batches;
                const std::uint64_t hi = cfg.n_realizations * (b + 1) / n_batches;
                detail::BatchAccumulator acc(n_states, nv);
                std::vector<std::uint64_t> local_diverged;
                for (std::uint64_t r = lo; r < hi; ++r) {
                    const std::uint64_t index = cfg.first_index + r;
                    noise.synthesizer().generate(cfg.master_seed, index, ws, path);
                    try {
                        for (std::size_t s = 0; s < n_states; ++s) {
                            double* v = values[s].data();
                            propagate_visit(cfg.states[s].rho0, path, cfg.system, cfg.integrator,
                                            [&](std::size_t k, const DensityMatrix& rho) {
                                                detail::record_trajectory(rho, path.xi[k], v + k * kValuesPerNode);
                                            });
                        }
                    } catch (const DivergedTrajectory&) {
                        local_diverged.push_back(index);
                        continue;
                    }
                    acc.add(values);
                }
                std::lock_guard lock(merge_mutex);
                for (std::size_t s = 0; s < n_states; ++s) {
                    std::vector<ExactSum> m2(nv);
                    for (std::size_t i = 0; i < nv; ++i) m2[i].add(acc.m2[s][i]);
                    res.states[s].absorb(acc.sums[s], m2, Batch{cfg.first_index + lo, acc.count, std::move(acc.mean[s])});
                }
                diverged.insert(diverged.end(), local_diverged.begin(), local_diverged.end());
            }
        } catch (...) {
            std::lock_guard lock(merge_mutex);
            if (!failure) failure = std::current_exception();
            next_batch.store(n_batches);
        }
    };

    const unsigned n_workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(n_batches)));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::sort(diverged.begin(), diverged.end());
    res.diverged_indices = diverged;
    res.diverged_count = diverged.size();
    res.n_accepted = cfg.n_realizations - res.diverged_count;
    for (auto& s : res.states) s.finalize();

    const double frac = static_cast<double>(res.diverged_count) / static_cast<double>(cfg.n_realizations);
    if (frac > cfg.max_diverged_fraction) {
        std::ostringstream os;
        os << "ensemble failed: " << res.diverged_count << " of " << cfg.n_realizations
           << " trajectories diverged (limit " << cfg.max_diverged_fraction << "); first indices:";
        for (std::size_t i = 0; i < std::min<std::size_t>(5, diverged.size()); ++i) os << ' ' << diverged[i];
        throw NumericalError(os.str());
    }
    return res;
}

inline EnsembleResult run_ensemble(const EnsembleConfig& cfg, const RunOptions& opt = {}) {
    if (const auto v = cfg.violations(); !v.empty()) throw InputError("ensemble config: " + v.front());
    const NoiseSource noise(cfg.bath, cfg.grid(), cfg.noise_balance);
    return run_ensemble(cfg, noise, opt);
}

namespace detail {
inline bool same_setup(const EnsembleConfig& a, const EnsembleConfig& b) {
    const auto bath_eq = [](const BathSpec& x, const BathSpec& y) {
        return x.gamma == y.gamma && x.omega_c == y.omega_c && x.beta == y.beta &&
               x.quadrature.omega_max == y.quadrature.omega_max && x.quadrature.n_points == y.quadrature.n_points;
    };
    if (!bath_eq(a.bath, b.bath)) return false;
    if (a.system.omega != b.system.omega || a.system.drive.amplitude() != b.system.drive.amplitude()) return false;
    if (a.master_seed != b.master_seed || a.t_end != b.t_end || a.n_steps != b.n_steps) return false;
    if (a.integrator.substeps != b.integrator.substeps || a.noise_balance != b.noise_balance) return false;
    if (a.states.size() != b.states.size()) return false;
    for (std::size_t i = 0; i < a.states.size(); ++i)
        if (a.states[i].label != b.states[i].label || !(a.states[i].rho0 == b.states[i].rho0)) return false;
    return true;
}
} // namespace detail

// Pools results over disjoint realization ranges of the same setup.
inline EnsembleResult merge(const std::vector<EnsembleResult>& parts) {
    if (parts.empty()) throw InputError("merge: nothing to merge");
    EnsembleResult out = parts.front();
    std::vector<IndexRange> ranges = out.ranges;
    for (std::size_t p = 1; p < parts.size(); ++p) {
        const auto& r = parts[p];
        if (!detail::same_setup(out.config, r.config) || !out.grid.same_as(r.grid))
            throw InputError("merge: results come from different configurations");
        for (std::size_t s = 0; s < out.states.size(); ++s) out.states[s].absorb(r.states[s]);
        ranges.insert(ranges.end(), r.ranges.begin(), r.ranges.end());
        out.n_requested += r.n_requested;
        out.n_accepted += r.n_accepted;
        out.diverged_count += r.diverged_count;
        out.diverged_indices.insert(out.diverged_indices.end(), r.diverged_indices.begin(), r.diverged_indices.end());
    }
    std::sort(ranges.begin(), ranges.end(), [](const IndexRange& a, const IndexRange& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i].first < ranges[i - 1].first + ranges[i - 1].count)
            throw InputError("merge: realization index ranges overlap");
    }
    out.ranges = ranges;
    std::sort(out.diverged_indices.begin(), out.diverged_indices.end());
    out.config.first_index = ranges.front().first;
    out.config.n_realizations = out.n_requested;
    for (auto& s : out.states) s.finalize();
    return out;
}

} // namespace sln
