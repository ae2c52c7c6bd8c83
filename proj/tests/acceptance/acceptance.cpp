// Acceptance suite: one PASS/FAIL line per primary criterion, exit status 1
// if any fails. --scale divides every realization count (for quick local runs;
// ctest uses the full counts).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sln/config.hpp"
#include "sln/experiment.hpp"

using namespace sln;

namespace {

struct Settings {
    unsigned workers{1};
    std::size_t scale{1};
    fs::path out{"acceptance_out"};
};

struct Outcome {
    bool pass{false};
    std::string detail;
};

class Suite {
public:
    void record(int id, const std::string& name, const Outcome& o, double seconds) {
        std::ostringstream os;
        os << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail;
        os.setf(std::ios::fixed);
        os.precision(1);
        os << " (" << seconds << " s)";
        lines_.push_back(os.str());
        std::cout << lines_.back() << std::endl;
        failed_ += !o.pass;
    }
    int finish() const {
        std::cout << "\nsummary\n";
        for (const auto& l : lines_) std::cout << l << '\n';
        std::cout << (failed_ ? std::to_string(failed_) + " criteria failed" : "all criteria passed") << std::endl;
        return failed_ ? 1 : 0;
    }

private:
    std::vector<std::string> lines_;
    int failed_{0};
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

// |x - target| <= 3 se, with exact agreement accepted where the SE vanishes.
bool within3(double x, double target, double se) { return x == target || std::abs(x - target) <= 3.0 * se; }

const BathSpec kPaper = BathSpec::make(0.05, 10.0, 5.0);

EnsembleConfig operating_ensemble(bool driven, std::size_t n, std::uint64_t first) {
    EnsembleConfig c;
    c.bath = kPaper;
    c.system = {1.0, {1.0, driven}};
    c.states = all_pauli_eigenstates();
    c.n_realizations = n;
    c.first_index = first;
    c.master_seed = 1;
    return c;
}

// ---------------------------------------------------------------------------

Outcome noise_contract(const Settings& s) {
    const TimeGrid grid = default_grid();
    const NoiseSource noise(kPaper, grid);
    NoiseStatAccumulator acc(noise.table(), grid);
    const std::size_t n = 10000 / s.scale;
    auto ws = noise.synthesizer().make_workspace();
    NoisePath p;
    for (std::uint64_t i = 0; i < n; ++i) {
        noise.synthesizer().generate(1, i, ws, p);
        acc.add(p);
    }
    const auto rep = acc.report();
    write_json(s.out / "noise_selftest.json", to_json(rep));
    std::size_t lags = 0;
    double worst = 0.0;
    for (const auto& c : rep.checks) {
        lags += c.moment == NoiseMoment::xi_xi;
        const auto z = [](double d, double se) { return se > 0 ? std::abs(d) / se : (d == 0 ? 0.0 : INFINITY); };
        worst = std::max({worst, z(c.estimate.real() - c.target.real(), c.se_re),
                          z(c.estimate.imag() - c.target.imag(), c.se_im)});
    }
    return {rep.pass() && lags == 20,
            "N=" + std::to_string(n) + ", " + std::to_string(lags) + " lags x 3 moments, " +
                std::to_string(rep.failures()) + " checks outside 3 SE, max |z|=" + fmt(worst, 3) +
                ", excess kurtosis " + fmt(rep.excess_kurtosis, 2) + " +- " + fmt(rep.excess_kurtosis_se, 2)};
}

Outcome unitary_limit() {
    const TimeGrid grid = default_grid();
    double worst_d = 0.0, worst_norm = 0.0;
    auto pairs = bloch_pair_grid(6, 3);
    pairs.push_back({0.0, 0.0});
    pairs.push_back({0.5 * std::numbers::pi, 0.0});
    pairs.push_back({0.5 * std::numbers::pi, 0.5 * std::numbers::pi});
    for (bool driven : {false, true}) {
        // gamma = 0 makes every realization the zero-noise trajectory.
        EnsembleConfig c = operating_ensemble(driven, 3, 0);
        c.bath.gamma = 0.0;
        c.states.clear();
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            c.states.push_back({"a" + std::to_string(i), pairs[i].first()});
            c.states.push_back({"b" + std::to_string(i), pairs[i].second()});
        }
        const auto res = run_ensemble(c);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto& a = res.states[2 * i];
            const auto& b = res.states[2 * i + 1];
            const double d0 = trace_distance(a.rho_bar(0), b.rho_bar(0));
            for (std::size_t k = 0; k < grid.size; ++k) {
                worst_d = std::max(worst_d, std::abs(trace_distance(a.rho_bar(k), b.rho_bar(k)) - d0));
                for (const auto* s : {&a, &b}) {
                    const auto v = bloch_vector(s->rho_bar(k));
                    worst_norm = std::max(worst_norm, std::abs(std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z) - 1.0));
                }
            }
        }
    }
    return {worst_d <= 1e-6 && worst_norm <= 1e-6,
            std::to_string(pairs.size()) + " antipodal pairs, driven and undriven: max |D(t)-D(0)|=" + fmt(worst_d, 3) +
                ", max |norm-1|=" + fmt(worst_norm, 3) + " (tol 1e-6)"};
}

// exp(-4 int_0^t (t-s) Re L(s) ds) by composite Simpson on a 16x refined grid.
std::vector<double> dephasing_oracle(const BathSpec& bath, const std::vector<double>& times) {
    const CorrelationEvaluator eval(bath);
    const double t_max = *std::max_element(times.begin(), times.end());
    const std::size_t n = 65536;
    const double h = t_max / static_cast<double>(n);
    std::vector<double> re(n + 1);
    for (std::size_t i = 0; i <= n; ++i) re[i] = eval(h * static_cast<double>(i)).real();
    std::vector<double> out;
    for (double t : times) {
        std::size_t m = static_cast<std::size_t>(std::llround(t / h));
        if (m % 2) throw std::logic_error("dephasing oracle: checkpoint off the Simpson grid");
        double s = 0.0;
        for (std::size_t i = 0; i <= m; ++i) {
            const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            s += w * (t - h * static_cast<double>(i)) * re[i];
        }
        out.push_back(std::exp(-4.0 * s * h / 3.0));
    }
    return out;
}

Outcome dephasing(const Settings& s) {
    EnsembleConfig c = operating_ensemble(false, 10000 / s.scale, 0);
    c.system.omega = 0.0;
    c.states = {{"x+", pauli_eigenstate(PauliAxis::x, +1)}};
    const auto res = run_ensemble(c, {s.workers});
    const auto& st = res.states[0];
    std::vector<double> times;
    std::vector<std::size_t> nodes;
    for (int j = 1; j <= 10; ++j) {
        nodes.push_back(static_cast<std::size_t>(j) * 4096 / 10 / 2 * 2);
        times.push_back(res.grid[nodes.back()]);
    }
    const auto oracle = dephasing_oracle(c.bath, times);
    std::size_t bad = 0;
    double worst = 0.0;
    std::ostringstream os;
    std::ofstream csv(s.out / "dephasing.csv", std::ios::binary);
    csv << "t,abs_rho01,se,oracle\n";
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        const std::size_t k = nodes[j];
        const double re = st.mean(k, 2), im = st.mean(k, 3);
        const double mag = std::hypot(re, im);
        const double se = std::hypot(re * st.stderr_of(k, 2), im * st.stderr_of(k, 3)) / mag;
        const double target = 0.5 * oracle[j];
        bad += !within3(mag, target, se);
        worst = std::max(worst, std::abs(mag - target) / se);
        csv << format_double(times[j]) << ',' << format_double(mag) << ',' << format_double(se) << ','
            << format_double(target) << '\n';
    }
    return {bad == 0, "N=" + std::to_string(c.n_realizations) + ", 10 checkpoints, " + std::to_string(bad) +
                          " outside 3 SE, max |z|=" + fmt(worst, 3) + ", |rho01(2pi)| oracle " + fmt(0.5 * oracle.back())};
}

struct SanityStats {
    std::size_t trace_bad{0}, herm_bad{0}, checked{0};
    double trace_worst{0.0}, herm_worst{0.0};
};

SanityStats sanity(const EnsembleResult& res) {
    SanityStats st;
    const auto z = [](double x, double t, double se) { return x == t ? 0.0 : std::abs(x - t) / se; };
    for (const auto& s : res.states) {
        for (std::size_t k = 0; k < s.nodes(); ++k) {
            ++st.checked;
            const bool tr = within3(s.mean(k, kTraceRe), 1.0, s.stderr_of(k, kTraceRe)) &&
                            within3(s.mean(k, kTraceIm), 0.0, s.stderr_of(k, kTraceIm));
            st.trace_bad += !tr;
            st.trace_worst = std::max({st.trace_worst, z(s.mean(k, kTraceRe), 1.0, s.stderr_of(k, kTraceRe)),
                                       z(s.mean(k, kTraceIm), 0.0, s.stderr_of(k, kTraceIm))});
            // Entrywise Hermiticity: rho01 - conj(rho10) and the imaginary diagonal vanish.
            const std::size_t comps[] = {kSkewRe, kSkewIm, 1, 7};
            bool ok = true;
            for (std::size_t c : comps) {
                ok = ok && within3(s.mean(k, c), 0.0, s.stderr_of(k, c));
                st.herm_worst = std::max(st.herm_worst, z(s.mean(k, c), 0.0, s.stderr_of(k, c)));
            }
            st.herm_bad += !ok;
        }
    }
    return st;
}

double mean_se(const EnsembleResult& res) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& st : res.states)
        for (std::size_t k = 1; k < st.nodes(); ++k)
            for (std::size_t c = 0; c < 8; ++c) {
                const double e = st.stderr_of(k, c);
                if (e > 0.0) {
                    s += e;
                    ++n;
                }
            }
    return s / static_cast<double>(n);
}

struct PairCheck {
    InfoFlowReport report;
    double max_z{0.0};
    double t_max_z{0.0};
};

PairCheck pair_check(const EnsembleResult& res, PauliAxis axis) {
    PairCheck p{analyze_pair(res, eigenstate_label(axis, +1), eigenstate_label(axis, -1))};
    for (std::size_t k = 1; k < p.report.Delta.size(); ++k) {
        const double z = p.report.Delta[k] / p.report.Delta_se[k];
        if (z > p.max_z) {
            p.max_z = z;
            p.t_max_z = res.grid[k];
        }
    }
    return p;
}

std::string describe(const PairCheck& p) {
    std::string s = std::to_string(p.report.windows.size()) + " window(s)";
    if (!p.report.windows.empty())
        s += " first [" + fmt(p.report.windows[0].t_a) + ", " + fmt(p.report.windows[0].t_b) + "]";
    return s + ", max Delta/SE " + fmt(p.max_z, 3) + " at t=" + fmt(p.t_max_z);
}

void write_case(const EnsembleResult& res, const std::string& preset, const Settings& s, std::vector<fs::path>& files) {
    auto cfg = preset_config(preset);
    cfg.n_realizations = res.n_requested;
    cfg.analysis.blp = false;
    cfg.output = (s.out / preset).string();
    const detail::ArtifactLog log({{"config", to_json(cfg)}, {"master_seed", cfg.master_seed}}, files);
    detail::write_dynamics_case(cfg, res, cfg.output, log);
}

std::vector<std::string> csv_files(const fs::path& dir) {
    std::vector<std::string> v;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.path().extension() == ".csv") v.push_back(fs::relative(e.path(), dir).string());
    std::sort(v.begin(), v.end());
    return v;
}

std::string bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome determinism(const Settings& s) {
    auto cfg = preset_config("fig3");
    cfg.n_realizations = 600 / std::min<std::size_t>(s.scale, 10);
    cfg.analysis.blp = true;
    cfg.analysis.blp_azimuth = 6;
    cfg.analysis.blp_polar = 3;
    std::vector<fs::path> dirs;
    const unsigned counts[] = {1, 4, 1};
    for (std::size_t i = 0; i < 3; ++i) {
        cfg.output = (s.out / ("determinism_w" + std::to_string(counts[i]) + "_" + std::to_string(i))).string();
        fs::remove_all(cfg.output);
        run_experiment(cfg, {counts[i]});
        dirs.emplace_back(cfg.output);
    }
    const auto files = csv_files(dirs[0]);
    std::size_t differ = 0;
    for (std::size_t i = 1; i < dirs.size(); ++i) {
        if (csv_files(dirs[i]) != files) ++differ;
        for (const auto& f : files)
            if (bytes(dirs[0] / f) != bytes(dirs[i] / f)) ++differ;
    }
    return {differ == 0 && !files.empty(),
            std::to_string(files.size()) + " CSVs from the fig3 pipeline (N=" + std::to_string(cfg.n_realizations) +
                ", driven and undriven), workers 1/4/1: " + std::to_string(differ) + " differing"};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SLN acceptance suite"};
    Settings s;
    std::string out = s.out.string();
    app.add_option("--workers", s.workers)->check(CLI::PositiveNumber);
    app.add_option("--scale", s.scale, "divide realization counts by this factor")->check(CLI::PositiveNumber);
    app.add_option("--out", out);
    CLI11_PARSE(app, argc, argv);
    s.out = out;
    fs::create_directories(s.out);

    Suite suite;
    const auto timed = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        suite.record(id, name, o, seconds_since(t0));
    };

    timed(1, "noise contract", [&] { return noise_contract(s); });
    timed(2, "unitary limit", [&] { return unitary_limit(); });
    timed(3, "dephasing oracle", [&] { return dephasing(s); });

    // Undriven paper point, N = 1e5 from disjoint ranges [0,1e3) [1e3,1e4) [1e4,1e5).
    const std::size_t n1 = 1000 / s.scale, n2 = 10000 / s.scale, n3 = 100000 / s.scale;
    std::vector<EnsembleResult> undriven_parts;
    std::vector<fs::path> files;
    const auto t_run = std::chrono::steady_clock::now();
    std::string run_error;
    try {
        undriven_parts.push_back(run_ensemble(operating_ensemble(false, n1, 0), {s.workers}));
        undriven_parts.push_back(run_ensemble(operating_ensemble(false, n2 - n1, n1), {s.workers}));
        undriven_parts.push_back(run_ensemble(operating_ensemble(false, n3 - n2, n2), {s.workers}));
    } catch (const std::exception& e) {
        run_error = e.what();
    }
    const double undriven_seconds = seconds_since(t_run);
    std::cout << "undriven ensemble N=" << n3 << " in " << fmt(undriven_seconds, 4) << " s" << std::endl;

    std::optional<EnsembleResult> fig2a, smoke;
    if (run_error.empty()) {
        smoke = merge({undriven_parts[0], undriven_parts[1]});
        fig2a = merge(undriven_parts);
        write_case(*fig2a, "fig2a", s, files);
    }

    timed(4, "ensemble sanity", [&]() -> Outcome {
        if (!fig2a) return {false, "ensemble failed: " + run_error};
        const auto st = sanity(*fig2a);
        const double se1 = mean_se(undriven_parts[0]), se2 = mean_se(*smoke), se3 = mean_se(*fig2a);
        // least-squares slope of log SE against log N
        const double x[] = {std::log(double(n1)), std::log(double(n2)), std::log(double(n3))};
        const double y[] = {std::log(se1), std::log(se2), std::log(se3)};
        const double xm = (x[0] + x[1] + x[2]) / 3, ym = (y[0] + y[1] + y[2]) / 3;
        double sxy = 0, sxx = 0;
        for (int i = 0; i < 3; ++i) {
            sxy += (x[i] - xm) * (y[i] - ym);
            sxx += (x[i] - xm) * (x[i] - xm);
        }
        const double slope = sxy / sxx;
        const bool ok = st.trace_bad == 0 && st.herm_bad == 0 && std::abs(slope + 0.5) <= 0.05;
        return {ok, "6 states x " + std::to_string(fig2a->grid.size) + " nodes: trace outside 3 SE at " +
                        std::to_string(st.trace_bad) + " (max |z| " + fmt(st.trace_worst, 3) + "), Hermiticity outside 3 SE at " +
                        std::to_string(st.herm_bad) + " (max |z| " + fmt(st.herm_worst, 3) + "); SE slope " + fmt(slope, 4) +
                        " over N=" + std::to_string(n1) + "/" + std::to_string(n2) + "/" + std::to_string(n3)};
    });

    timed(5, "fig2a backflow (undriven)", [&]() -> Outcome {
        if (!fig2a) return {false, "ensemble failed: " + run_error};
        const auto x = pair_check(*fig2a, PauliAxis::x), y = pair_check(*fig2a, PauliAxis::y),
                   z = pair_check(*fig2a, PauliAxis::z), zs = pair_check(*smoke, PauliAxis::z);
        const bool ok = x.report.windows.empty() && !y.report.windows.empty() && !z.report.windows.empty() &&
                        !zs.report.windows.empty();
        return {ok, "N=" + std::to_string(n3) + " x: " + describe(x) + "; y: " + describe(y) + "; z: " + describe(z) +
                        "; smoke N=" + std::to_string(n2) + " z: " + describe(zs)};
    });

    std::optional<EnsembleResult> fig2b;
    std::string driven_error;
    const auto t_driven = std::chrono::steady_clock::now();
    try {
        fig2b = run_ensemble(operating_ensemble(true, n3, 0), {s.workers});
        write_case(*fig2b, "fig2b", s, files);
    } catch (const std::exception& e) {
        driven_error = e.what();
    }
    std::cout << "driven ensemble N=" << n3 << " in " << fmt(seconds_since(t_driven), 4) << " s" << std::endl;

    timed(6, "fig2b backflow (driven)", [&]() -> Outcome {
        if (!fig2b) return {false, "ensemble failed: " + driven_error};
        const auto x = pair_check(*fig2b, PauliAxis::x), y = pair_check(*fig2b, PauliAxis::y),
                   z = pair_check(*fig2b, PauliAxis::z);
        return {!x.report.windows.empty(), "N=" + std::to_string(n3) + " x: " + describe(x) + "; y: " + describe(y) +
                                               "; z: " + describe(z)};
    });

    timed(7, "heat flux", [&]() -> Outcome {
        if (!fig2a || !fig2b) return {false, "ensemble failed"};
        std::size_t bad = 0, nodes = 0;
        double worst = 0.0;
        for (const auto* res : {&*fig2a, &*fig2b})
            for (const auto& st : res->states) {
                const auto h = heat_flux(*res, st.label());
                for (std::size_t k = 0; k < h.jq.size(); ++k) {
                    ++nodes;
                    bad += !within3(h.imag_residual[k], 0.0, h.imag_se[k]);
                    if (h.imag_se[k] > 0) worst = std::max(worst, std::abs(h.imag_residual[k]) / h.imag_se[k]);
                }
            }
        EnsembleConfig zc = operating_ensemble(true, 50, 0);
        zc.bath.gamma = 0.0;
        zc.n_batches = 4;
        const auto zres = run_ensemble(zc);
        bool zero = true;
        for (const auto& st : zres.states) {
            const auto h = heat_flux(zres, st.label());
            for (std::size_t k = 0; k < h.jq.size(); ++k) zero = zero && h.jq[k] == 0.0 && h.imag_residual[k] == 0.0;
        }
        const auto xm = heat_flux(*fig2a, "x-");
        const bool relax = xm.integral + 3.0 * xm.integral_se < 0.0;
        return {bad == 0 && zero && relax,
                "imaginary residual outside 3 SE at " + std::to_string(bad) + "/" + std::to_string(nodes) +
                    " nodes (" + fmt(100.0 * bad / nodes, 3) + "%, 0.27% for a Gaussian; max |z| " + fmt(worst, 3) + "); gamma=0 gives jq==0: " + (zero ? "yes" : "no") +
                    "; undriven x- integral " + fmt(xm.integral) + " +- " + fmt(xm.integral_se, 3)};
    });

    timed(8, "backflow / heat-flux overlap", [&]() -> Outcome {
        if (!fig2a || !fig2b) return {false, "ensemble failed"};
        std::ostringstream os;
        bool ok = true;
        nlohmann::json all;
        for (const auto& [name, res] : {std::pair{"fig2a", &*fig2a}, std::pair{"fig2b", &*fig2b}}) {
            for (auto axis : {PauliAxis::x, PauliAxis::y, PauliAxis::z}) {
                const auto rep = analyze_pair(*res, eigenstate_label(axis, +1), eigenstate_label(axis, -1));
                for (int sign : {+1, -1}) {
                    const auto label = eigenstate_label(axis, sign);
                    const auto o = overlap_statistic(rep.flags(), heat_flux(*res, label).jq);
                    ok = ok && o.nodes == res->grid.size && std::isfinite(o.jaccard) && std::isfinite(o.correlation);
                    all[name][label] = to_json(o);
                    if (!rep.windows.empty() && sign == +1)
                        os << name << ' ' << label << " phi=" << fmt(o.correlation, 3) << " jaccard=" << fmt(o.jaccard, 3)
                           << "; ";
                }
            }
        }
        write_json(s.out / "overlap.json", all);
        return {ok, "computed for 12 state/configuration combinations (overlap.json); " + os.str()};
    });

    timed(9, "determinism across worker counts", [&] { return determinism(s); });
    return suite.finish();
}
