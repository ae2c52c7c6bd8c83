// observables.hpp: trace distance, information flow, backflow windows, BLP
// measure, information loss/gain and heat flux from ensemble results.
//
// Error bars of nonlinear functionals (D, its smoothed derivative, time
// integrals) come from the spread of the functional over batch means.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sln/density_matrix.hpp"
#include "sln/ensemble.hpp"
#include "sln/errors.hpp"
#include "sln/grid.hpp"

namespace sln {

inline constexpr double kHermiticityTolerance = 1e-9;

// (1/2) sum |eigenvalues of (rho1 - rho2)|. Inputs must be Hermitian within tol;
// smaller defects are removed by symmetrizing.
inline double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2,
                             double tol = kHermiticityTolerance) {
    if (rho1.hermiticity_defect() > tol || rho2.hermiticity_defect() > tol)
        throw InputError("trace_distance: input is not Hermitian");
    const DensityMatrix d = hermitian_part(rho1 - rho2);
    const double a = d(0, 0).real(), c = d(1, 1).real();
    const double mid = 0.5 * (a + c);
    const double rad = std::hypot(0.5 * (a - c), std::abs(d(0, 1)));
    return 0.5 * (std::abs(mid + rad) + std::abs(mid - rad));
}

// Mean and batch-mean density-matrix series of one preparation. Linear
// combinations of series from the same run stay valid series.
struct RhoSeries {
    std::string label;
    TimeGrid grid;
    std::vector<DensityMatrix> mean;
    std::vector<std::vector<DensityMatrix>> batches;
    std::vector<double> weights;  // realizations per batch
};

inline RhoSeries rho_series(const StateSeries& s, const TimeGrid& grid) {
    RhoSeries r;
    r.label = s.label();
    r.grid = grid;
    r.mean.resize(s.nodes());
    for (std::size_t k = 0; k < s.nodes(); ++k) r.mean[k] = s.rho_bar(k);
    for (const auto& b : s.batches()) {
        if (b.count == 0) continue;
        std::vector<DensityMatrix> v(s.nodes());
        for (std::size_t k = 0; k < s.nodes(); ++k) v[k] = StateSeries::batch_rho(b, k);
        r.batches.push_back(std::move(v));
        r.weights.push_back(static_cast<double>(b.count));
    }
    return r;
}

inline RhoSeries rho_series(const EnsembleResult& res, std::string_view label) {
    return rho_series(res.state(label), res.grid);
}

// sum_i c_i s_i over series from one run.
inline RhoSeries combine(const std::vector<double>& coeff, const std::vector<const RhoSeries*>& series,
                         std::string label = {}) {
    if (series.empty() || coeff.size() != series.size()) throw InputError("combine: coefficient count mismatch");
    const RhoSeries& ref = *series.front();
    for (const auto* s : series) {
        if (!s->grid.same_as(ref.grid) || s->weights != ref.weights)
            throw InputError("combine: series come from different runs");
    }
    RhoSeries out{std::move(label), ref.grid, std::vector<DensityMatrix>(ref.mean.size()),
                  std::vector<std::vector<DensityMatrix>>(ref.batches.size(),
                                                          std::vector<DensityMatrix>(ref.mean.size())),
                  ref.weights};
    for (std::size_t i = 0; i < series.size(); ++i) {
        const cplx c = coeff[i];
        for (std::size_t k = 0; k < out.mean.size(); ++k) out.mean[k] += c * series[i]->mean[k];
        for (std::size_t b = 0; b < out.batches.size(); ++b)
            for (std::size_t k = 0; k < out.mean.size(); ++k) out.batches[b][k] += c * series[i]->batches[b][k];
    }
    return out;
}

// Trace distance between the Hermitian parts of two state series.
inline std::vector<double> trace_distance_series(const std::vector<DensityMatrix>& a,
                                                 const std::vector<DensityMatrix>& b) {
    if (a.size() != b.size()) throw InputError("trace_distance_series: length mismatch");
    std::vector<double> d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) d[k] = trace_distance(hermitian_part(a[k]), hermitian_part(b[k]));
    return d;
}

// ---------------------------------------------------------------------------
// Smoothing and differentiation

struct SmoothingSpec {
    bool enabled{true};
    std::size_t window{31};
    int order{3};
};

namespace detail {

// Solves the small dense system a x = b in place (partial pivoting).
template <std::size_t N>
std::array<double, N> solve_small(std::array<std::array<double, N>, N> a, std::array<double, N> b) {
    for (std::size_t c = 0; c < N; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < N; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        std::swap(a[c], a[p]);
        std::swap(b[c], b[p]);
        for (std::size_t r = c + 1; r < N; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < N; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::array<double, N> x{};
    for (std::size_t c = N; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < N; ++k) s -= a[c][k] * x[k];
        x[c] = s / a[c][c];
    }
    return x;
}

// Weights h_j such that sum_j h_j y_j is the least-squares polynomial of the
// given order through the window, evaluated at window position p.
inline std::vector<double> savgol_weights(std::size_t window, int order, std::size_t p) {
    constexpr std::size_t kMax = 8;
    const std::size_t np = static_cast<std::size_t>(order) + 1;
    if (np > kMax) throw InputError("savitzky_golay: order too high");
    const double half = 0.5 * static_cast<double>(window - 1);
    const auto x_of = [&](std::size_t j) { return (static_cast<double>(j) - half) / std::max(half, 1.0); };

    std::array<std::array<double, kMax>, kMax> ata{};
    for (std::size_t j = 0; j < window; ++j) {
        std::array<double, kMax> pw{};
        pw[0] = 1.0;
        for (std::size_t i = 1; i < np; ++i) pw[i] = pw[i - 1] * x_of(j);
        for (std::size_t r = 0; r < np; ++r)
            for (std::size_t c = 0; c < np; ++c) ata[r][c] += pw[r] * pw[c];
    }
    for (std::size_t r = np; r < kMax; ++r) ata[r][r] = 1.0;
    std::array<double, kMax> e{};
    e[0] = 1.0;
    for (std::size_t i = 1; i < np; ++i) e[i] = e[i - 1] * x_of(p);
    const auto coef = solve_small<kMax>(ata, e);

    std::vector<double> h(window);
    for (std::size_t j = 0; j < window; ++j) {
        double pw = 1.0, s = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            s += coef[i] * pw;
            pw *= x_of(j);
        }
        h[j] = s;
    }
    return h;
}

} // namespace detail

// Local polynomial (Savitzky-Golay) smoother. Edge nodes use the fit of the
// first or last full window evaluated off-centre.
class SavitzkyGolay {
public:
    SavitzkyGolay(std::size_t window, int order)
        : window_(window)
        , order_(order) {
        if (window_ < 1 || window_ % 2 == 0) throw InputError("savitzky_golay: window must be odd");
        if (order_ < 0 || static_cast<std::size_t>(order_) >= window_)
            throw InputError("savitzky_golay: order must be below the window length");
        for (std::size_t p = 0; p < window_; ++p) weights_.push_back(detail::savgol_weights(window_, order_, p));
    }

    std::size_t window() const { return window_; }

    std::vector<double> operator()(const std::vector<double>& y) const {
        const std::size_t n = y.size();
        if (n < window_) return SavitzkyGolay(largest_odd(n), std::min<int>(order_, static_cast<int>(largest_odd(n)) - 1))(y);
        const std::size_t half = window_ / 2;
        std::vector<double> out(n);
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t start, p;
            if (k < half) {
                start = 0;
                p = k;
            } else if (k + half >= n) {
                start = n - window_;
                p = k - start;
            } else {
                start = k - half;
                p = half;
            }
            const auto& h = weights_[p];
            double s = 0.0;
            for (std::size_t j = 0; j < window_; ++j) s += h[j] * y[start + j];
            out[k] = s;
        }
        return out;
    }

private:
    static std::size_t largest_odd(std::size_t n) { return n == 0 ? 1 : (n % 2 == 1 ? n : n - 1); }

    std::size_t window_;
    int order_;
    std::vector<std::vector<double>> weights_;
};

inline std::vector<double> savitzky_golay(const std::vector<double>& y, std::size_t window = 31, int order = 3) {
    return SavitzkyGolay(window, order)(y);
}

// Central differences inside, one-sided at the ends.
inline std::vector<double> finite_difference(const std::vector<double>& y, double dt) {
    const std::size_t n = y.size();
    if (n < 3) throw InputError("information_flow: need at least 3 nodes");
    std::vector<double> d(n);
    d[0] = (y[1] - y[0]) / dt;
    d[n - 1] = (y[n - 1] - y[n - 2]) / dt;
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (y[k + 1] - y[k - 1]) / (2.0 * dt);
    return d;
}

// Delta = dD/dt on a uniform grid, optionally after smoothing D.
inline std::vector<double> information_flow(const std::vector<double>& d, const TimeGrid& grid,
                                            const SmoothingSpec& smoothing = {}) {
    if (d.size() != grid.size) throw InputError("information_flow: series length differs from grid");
    if (d.size() < 3) throw InputError("information_flow: need at least 3 nodes");
    if (!smoothing.enabled) return finite_difference(d, grid.dt);
    return finite_difference(savitzky_golay(d, smoothing.window, smoothing.order), grid.dt);
}

// Overload for explicit sample times; rejects non-uniform spacing.
inline std::vector<double> information_flow(const std::vector<double>& d, const std::vector<double>& t,
                                            const SmoothingSpec& smoothing = {}) {
    if (t.size() != d.size()) throw InputError("information_flow: series and time lengths differ");
    if (t.size() < 3) throw InputError("information_flow: need at least 3 nodes");
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(dt > 0.0)) throw InputError("information_flow: times must increase");
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (std::abs((t[k] - t[k - 1]) - dt) > 1e-9 * dt)
            throw InputError("information_flow: grid is not uniform at node " + std::to_string(k));
    }
    return information_flow(d, TimeGrid{dt, t.size()}, smoothing);
}

// Trapezoid integral of y over nodes [a, b].
inline double trapezoid(const std::vector<double>& y, double dt, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = a; k < b; ++k) s += 0.5 * (y[k] + y[k + 1]) * dt;
    return s;
}

// ---------------------------------------------------------------------------
// Backflow windows

struct Window {
    std::size_t first{0};  // node indices, inclusive
    std::size_t last{0};
    double t_a{0.0};
    double t_b{0.0};
};

inline constexpr std::size_t kWindowMergeGap = 3;

// Maximal runs of nodes with Delta_k > eps_k; runs separated by fewer than
// three nodes are merged.
inline std::vector<Window> backflow_windows(const std::vector<double>& delta, const std::vector<double>& eps,
                                            const TimeGrid& grid) {
    if (eps.size() != delta.size()) throw InputError("backflow_windows: threshold length mismatch");
    for (double e : eps)
        if (!(e > 0.0)) throw InputError("backflow_windows: threshold must be > 0");
    std::vector<Window> w;
    for (std::size_t k = 0; k < delta.size(); ++k) {
        if (!(delta[k] > eps[k])) continue;
        if (!w.empty() && k - w.back().last - 1 < kWindowMergeGap) {
            w.back().last = k;
        } else {
            w.push_back({k, k, 0.0, 0.0});
        }
    }
    for (auto& x : w) {
        x.t_a = grid[x.first];
        x.t_b = grid[x.last];
    }
    return w;
}

inline std::vector<Window> backflow_windows(const std::vector<double>& delta, double eps, const TimeGrid& grid) {
    return backflow_windows(delta, std::vector<double>(delta.size(), eps), grid);
}

inline std::vector<int> window_flags(const std::vector<Window>& windows, std::size_t n) {
    std::vector<int> f(n, 0);
    for (const auto& w : windows)
        for (std::size_t k = w.first; k <= w.last; ++k) f[k] = 1;
    return f;
}

// Trapezoid area of Delta over the windows.
inline double positive_area(const std::vector<double>& delta, const std::vector<Window>& windows, double dt) {
    double s = 0.0;
    for (const auto& w : windows) s += trapezoid(delta, dt, w.first, w.last);
    return s;
}

struct LossGain {
    double loss{0.0};
    double gain{0.0};
    std::optional<double> onset;
};

// Loss up to the first backflow onset (or the end of the record) and the gain
// across the first window.
inline LossGain info_loss_gain(const std::vector<double>& d, const std::vector<Window>& windows, const TimeGrid& grid) {
    if (d.empty()) throw InputError("info_loss_gain: empty series");
    LossGain r;
    if (windows.empty()) {
        r.loss = d.back() - d.front();
        return r;
    }
    const Window& w = windows.front();
    r.loss = d[w.first] - d.front();
    r.gain = d[w.last] - d[w.first];
    r.onset = grid[w.first];
    return r;
}

inline LossGain info_loss_gain(const std::vector<double>& d, const std::vector<double>& delta, double eps,
                               const TimeGrid& grid) {
    return info_loss_gain(d, backflow_windows(delta, eps, grid), grid);
}

// ---------------------------------------------------------------------------
// Pair analysis

struct InfoFlowOptions {
    SmoothingSpec smoothing{};
    double se_multiple{3.0};
    double eps_floor{1e-6};
};

struct InfoFlowReport {
    std::string label_a, label_b;
    TimeGrid grid;
    std::vector<double> D;           // raw trace distance
    std::vector<double> D_smooth;
    std::vector<double> D_se;
    std::vector<double> Delta;
    std::vector<double> Delta_se;
    std::vector<double> epsilon;     // per-node threshold
    std::vector<Window> windows;
    double blp_value{0.0};           // positive area of Delta over the windows
    double I_loss{0.0};
    double I_gain{0.0};
    std::optional<double> first_backflow_time;

    std::vector<int> flags() const { return window_flags(windows, D.size()); }
};

inline InfoFlowReport analyze_pair(const RhoSeries& a, const RhoSeries& b, const InfoFlowOptions& opt = {}) {
    if (!a.grid.same_as(b.grid) || a.mean.size() != b.mean.size() || a.weights != b.weights)
        throw InputError("analyze_pair: series do not share a run");
    InfoFlowReport r;
    r.label_a = a.label;
    r.label_b = b.label;
    r.grid = a.grid;
    r.D = trace_distance_series(a.mean, b.mean);
    r.D_smooth = opt.smoothing.enabled ? savitzky_golay(r.D, opt.smoothing.window, opt.smoothing.order) : r.D;
    r.Delta = finite_difference(r.D_smooth, r.grid.dt);

    std::vector<std::vector<double>> d_b, delta_b;
    for (std::size_t i = 0; i < a.batches.size(); ++i) {
        auto db = trace_distance_series(a.batches[i], b.batches[i]);
        delta_b.push_back(information_flow(db, r.grid, opt.smoothing));
        d_b.push_back(std::move(db));
    }
    r.D_se = spread_se(d_b, a.weights);
    r.Delta_se = spread_se(delta_b, a.weights);
    if (r.D_se.empty()) r.D_se.assign(r.D.size(), std::numeric_limits<double>::quiet_NaN());
    if (r.Delta_se.empty()) r.Delta_se.assign(r.D.size(), std::numeric_limits<double>::quiet_NaN());

    r.epsilon.resize(r.D.size());
    for (std::size_t k = 0; k < r.D.size(); ++k) {
        const double se = std::isfinite(r.Delta_se[k]) ? r.Delta_se[k] : 0.0;
        r.epsilon[k] = std::max(opt.se_multiple * se, opt.eps_floor);
    }
    r.windows = backflow_windows(r.Delta, r.epsilon, r.grid);
    r.blp_value = positive_area(r.Delta, r.windows, r.grid.dt);
    const auto lg = info_loss_gain(r.D_smooth, r.windows, r.grid);
    r.I_loss = lg.loss;
    r.I_gain = lg.gain;
    r.first_backflow_time = lg.onset;
    return r;
}

inline InfoFlowReport analyze_pair(const EnsembleResult& res, std::string_view label_a, std::string_view label_b,
                                   const InfoFlowOptions& opt = {}) {
    return analyze_pair(rho_series(res, label_a), rho_series(res, label_b), opt);
}

// ---------------------------------------------------------------------------
// Heat flux

struct HeatFluxSeries {
    std::string label;
    TimeGrid grid;
    std::vector<double> jq;
    std::vector<double> se;
    std::vector<double> imag_residual;
    std::vector<double> imag_se;
    double integral{0.0};  // trapezoid integral of jq over the window
    double integral_se{0.0};
};

// jq = -omega Re E[xi Tr(sy rho)]; the imaginary part is kept as a residual.
inline HeatFluxSeries heat_flux(const StateSeries& s, const TimeGrid& grid, double omega) {
    HeatFluxSeries h;
    h.label = s.label();
    h.grid = grid;
    const std::size_t n = s.nodes();
    h.jq.resize(n);
    h.se.resize(n);
    h.imag_residual.resize(n);
    h.imag_se.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        h.jq[k] = -omega * s.mean(k, kJqRe);
        h.imag_residual[k] = -omega * s.mean(k, kJqIm);
        h.se[k] = std::abs(omega) * s.stderr_of(k, kJqRe);
        h.imag_se[k] = std::abs(omega) * s.stderr_of(k, kJqIm);
    }
    if (n >= 2) h.integral = trapezoid(h.jq, grid.dt, 0, n - 1);

    std::vector<std::vector<double>> per_batch;
    std::vector<double> weights;
    for (const auto& b : s.batches()) {
        if (b.count == 0) continue;
        std::vector<double> jb(n);
        for (std::size_t k = 0; k < n; ++k) jb[k] = -omega * b.mean[k * kValuesPerNode + kJqRe];
        per_batch.push_back({n >= 2 ? trapezoid(jb, grid.dt, 0, n - 1) : 0.0});
        weights.push_back(static_cast<double>(b.count));
    }
    const auto se = spread_se(per_batch, weights);
    h.integral_se = se.empty() ? std::numeric_limits<double>::quiet_NaN() : se.front();
    return h;
}

inline HeatFluxSeries heat_flux(const EnsembleResult& res, std::string_view label) {
    return heat_flux(res.state(label), res.grid, res.config.system.omega);
}

// Node-level coincidence of backflow windows with intervals of positive j_Q.
struct OverlapStatistic {
    std::size_t nodes{0};
    std::size_t backflow_nodes{0};
    std::size_t positive_jq_nodes{0};
    std::size_t both{0};
    double jaccard{0.0};      // |A and B| / |A or B|, 0 when both empty
    double correlation{0.0};  // phi coefficient of the two indicators, 0 if degenerate
};

inline OverlapStatistic overlap_statistic(const std::vector<int>& window_flag, const std::vector<double>& jq) {
    if (window_flag.size() != jq.size()) throw InputError("overlap_statistic: length mismatch");
    OverlapStatistic o;
    o.nodes = jq.size();
    for (std::size_t k = 0; k < jq.size(); ++k) {
        const bool a = window_flag[k] != 0, b = jq[k] > 0.0;
        o.backflow_nodes += a;
        o.positive_jq_nodes += b;
        o.both += a && b;
    }
    const std::size_t either = o.backflow_nodes + o.positive_jq_nodes - o.both;
    o.jaccard = either == 0 ? 0.0 : static_cast<double>(o.both) / static_cast<double>(either);
    const double n = static_cast<double>(o.nodes);
    const double pa = static_cast<double>(o.backflow_nodes) / n, pb = static_cast<double>(o.positive_jq_nodes) / n;
    const double pab = static_cast<double>(o.both) / n;
    const double den = std::sqrt(pa * (1.0 - pa) * pb * (1.0 - pb));
    o.correlation = den > 0.0 ? (pab - pa * pb) / den : 0.0;
    return o;
}

// ---------------------------------------------------------------------------
// BLP measure over antipodal pure pairs

struct BlochPair {
    double theta{0.0};  // polar angle of the first state
    double phi{0.0};
    DensityMatrix first() const { return pure_state(theta, phi); }
    DensityMatrix second() const { return pure_state(std::numbers::pi - theta, phi + std::numbers::pi); }
};

// n_azimuth x n_polar grid; polar angles at cell midpoints in (0, pi).
inline std::vector<BlochPair> bloch_pair_grid(std::size_t n_azimuth = 24, std::size_t n_polar = 12) {
    std::vector<BlochPair> g;
    for (std::size_t i = 0; i < n_azimuth; ++i)
        for (std::size_t j = 0; j < n_polar; ++j)
            g.push_back({(static_cast<double>(j) + 0.5) * std::numbers::pi / static_cast<double>(n_polar),
                         two_pi * static_cast<double>(i) / static_cast<double>(n_azimuth)});
    return g;
}

// The ensemble map rho0 -> rho_bar(t) is linear along shared noise paths, so
// it is fixed by its action on x+, y+, z+ and z-.
class LinearEnsembleMap {
public:
    LinearEnsembleMap(RhoSeries x_plus, RhoSeries y_plus, RhoSeries z_plus, RhoSeries z_minus)
        : centre_(combine({0.5, 0.5}, {&z_plus, &z_minus}, "centre")) {
        // Phi(sigma_k / 2) = Phi(k+) - Phi(I/2)
        axis_[0] = combine({1.0, -1.0}, {&x_plus, &centre_});
        axis_[1] = combine({1.0, -1.0}, {&y_plus, &centre_});
        axis_[2] = combine({1.0, -1.0}, {&z_plus, &centre_});
    }

    static LinearEnsembleMap from(const EnsembleResult& res) {
        return {rho_series(res, "x+"), rho_series(res, "y+"), rho_series(res, "z+"), rho_series(res, "z-")};
    }

    // Evolved series for the (Hermitian, unit-trace) initial state rho0.
    RhoSeries apply(const DensityMatrix& rho0, std::string label = {}) const {
        const BlochVector b = bloch_vector(rho0);
        return combine({1.0, b.x, b.y, b.z}, {&centre_, &axis_[0], &axis_[1], &axis_[2]}, std::move(label));
    }

private:
    RhoSeries centre_;
    std::array<RhoSeries, 3> axis_;
};

struct BlpResult {
    double value{0.0};
    std::size_t argmax{0};
    std::vector<BlochPair> pairs;
    std::vector<double> areas;
};

inline BlpResult blp_measure(const LinearEnsembleMap& map, const std::vector<BlochPair>& pairs,
                             const InfoFlowOptions& opt = {}) {
    if (pairs.empty()) throw InputError("blp_measure: empty pair grid");
    BlpResult r;
    r.pairs = pairs;
    for (const auto& p : pairs) {
        const auto s1 = map.apply(p.first(), "first");
        const auto s2 = map.apply(p.second(), "second");
        r.areas.push_back(analyze_pair(s1, s2, opt).blp_value);
    }
    const auto it = std::max_element(r.areas.begin(), r.areas.end());
    r.argmax = static_cast<std::size_t>(it - r.areas.begin());
    r.value = *it;
    return r;
}

} // namespace sln
