// experiment.hpp: runs an ExperimentConfig end to end and writes its CSV and
// JSON artifacts, each with a provenance sidecar

#pragma once

#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sln/config.hpp"
#include "sln/ensemble.hpp"
#include "sln/io.hpp"
#include "sln/noise.hpp"
#include "sln/observables.hpp"

namespace sln {

namespace fs = std::filesystem;

struct ExperimentOutcome {
    std::vector<fs::path> artifacts;
    nlohmann::json summary;
    bool ok{true};            // false when a self-test reported failures
    std::string failure;
};

// "x+" -> "xp", "z-" -> "zm"; file-name friendly state labels.
inline std::string file_label(const std::string& label) {
    std::string s;
    for (char c : label) {
        if (c == '+') s += 'p';
        else if (c == '-') s += 'm';
        else s += c;
    }
    return s;
}

namespace detail {

class ArtifactLog {
public:
    ArtifactLog(nlohmann::json base, std::vector<fs::path>& list)
        : base_(std::move(base))
        , list_(list) {}

    void done(const fs::path& p, const nlohmann::json& extra = {}) const {
        auto prov = base_;
        if (!extra.is_null())
            for (auto it = extra.begin(); it != extra.end(); ++it) prov[it.key()] = it.value();
        write_sidecar(p, prov);
        list_.push_back(p);
    }

    ArtifactLog with(const nlohmann::json& extra) const {
        auto b = base_;
        for (auto it = extra.begin(); it != extra.end(); ++it) b[it.key()] = it.value();
        return ArtifactLog(b, list_);
    }

private:
    nlohmann::json base_;
    std::vector<fs::path>& list_;
};

inline nlohmann::json run_stats(const EnsembleResult& res) {
    return {{"n_requested", res.n_requested},
            {"n_accepted", res.n_accepted},
            {"diverged", res.diverged_count},
            {"diverged_indices", res.diverged_indices}};
}

inline nlohmann::json case_params(const BathSpec& b, const SystemSpec& s) {
    return {{"gamma", b.gamma}, {"beta", b.beta}, {"omega_c", b.omega_c},
            {"driven", s.drive.enabled}, {"lambda0", s.drive.amplitude()}};
}

// Per-pair analysis, heat flux and overlap for one ensemble run.
inline nlohmann::json write_dynamics_case(const ExperimentConfig& cfg, const EnsembleResult& res, const fs::path& dir,
                                          const ArtifactLog& log) {
    nlohmann::json summary;
    summary["run"] = run_stats(res);
    summary["parameters"] = case_params(res.config.bath, res.config.system);

    for (const auto& s : res.states) {
        const auto p = dir / ("ensemble_" + file_label(s.label()) + ".csv");
        write_ensemble_series(p, s, res.grid);
        log.done(p, {{"state", s.label()}});
    }

    std::vector<HeatFluxSeries> heat;
    nlohmann::json heat_json = nlohmann::json::array();
    for (const auto& s : res.states) {
        heat.push_back(heat_flux(res, s.label()));
        const auto p = dir / ("heat_" + file_label(s.label()) + ".csv");
        write_heat_flux(p, heat.back());
        log.done(p, {{"state", s.label()}});
        heat_json.push_back(to_json(heat.back()));
    }
    summary["heat_flux"] = heat_json;

    nlohmann::json pairs = nlohmann::json::array();
    for (auto axis : cfg.pairs) {
        const auto plus = eigenstate_label(axis, +1), minus = eigenstate_label(axis, -1);
        const auto rep = analyze_pair(res, plus, minus, cfg.analysis.info);
        const auto p = dir / ("info_" + std::string(axis_name(axis)) + ".csv");
        write_info_flow(p, rep);
        log.done(p, {{"pair", {plus, minus}}});
        auto j = to_json(rep);
        nlohmann::json overlap;
        const auto flags = rep.flags();
        for (const auto& h : heat)
            if (h.label == plus || h.label == minus) overlap[h.label] = to_json(overlap_statistic(flags, h.jq));
        j["overlap"] = overlap;
        pairs.push_back(j);
    }
    summary["pairs"] = pairs;

    if (cfg.analysis.blp) {
        const auto blp = blp_measure(LinearEnsembleMap::from(res),
                                     bloch_pair_grid(cfg.analysis.blp_azimuth, cfg.analysis.blp_polar), cfg.analysis.info);
        const auto& best = blp.pairs[blp.argmax];
        summary["blp"] = {{"value", blp.value},
                          {"theta", best.theta},
                          {"phi", best.phi},
                          {"grid", {cfg.analysis.blp_azimuth, cfg.analysis.blp_polar}}};
    }
    const auto p = dir / "summary.json";
    write_json(p, summary);
    log.done(p);
    return summary;
}

inline std::vector<bool> drive_settings(const ExperimentConfig& cfg) {
    if (cfg.sweep.driven.empty()) return {cfg.system.drive.enabled};
    return cfg.sweep.driven;
}

inline SystemSpec with_drive(SystemSpec s, bool driven) {
    s.drive.enabled = driven;
    return s;
}

inline void report(std::ostream* out, const std::string& msg) {
    if (out) *out << msg << std::endl;
}

} // namespace detail

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {},
                                        std::ostream* progress = nullptr) {
    cfg.check();
    ExperimentOutcome out;
    const fs::path root = cfg.output;
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create output directory " + root.string() + ": " + ec.message());

    const detail::ArtifactLog log({{"config", to_json(cfg)}, {"master_seed", cfg.master_seed}}, out.artifacts);
    const TimeGrid grid = cfg.grid();

    switch (cfg.kind) {
        case ExperimentKind::bath_table: {
            const auto p = root / "bath_table.csv";
            write_correlation_table(p, tabulate_correlation(cfg.bath, grid));
            log.done(p);
            out.summary = {{"artifact", p.filename().string()}, {"nodes", grid.size}};
            break;
        }

        case ExperimentKind::noise_selftest: {
            const NoiseSource noise(cfg.bath, grid, cfg.noise_balance);
            const auto& synth = noise.synthesizer();
            const unsigned n_workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(cfg.n_realizations)));
            std::vector<NoiseStatAccumulator> acc(n_workers, NoiseStatAccumulator(noise.table(), grid));
            std::vector<std::thread> pool;
            const auto work = [&](unsigned w) {
                auto ws = synth.make_workspace();
                NoisePath path;
                const std::uint64_t lo = cfg.n_realizations * w / n_workers, hi = cfg.n_realizations * (w + 1) / n_workers;
                for (std::uint64_t i = lo; i < hi; ++i) {
                    synth.generate(cfg.master_seed, i, ws, path);
                    acc[w].add(path);
                }
            };
            if (n_workers == 1) work(0);
            else {
                for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
                for (auto& t : pool) t.join();
            }
            for (unsigned w = 1; w < n_workers; ++w) acc[0] += acc[w];
            const auto rep = acc[0].report();

            const auto path0 = root / "noise_path_0.csv";
            write_noise_path(path0, synth.generate(cfg.master_seed, 0));
            log.done(path0, {{"realization", 0}});
            const auto table = root / "bath_table.csv";
            write_correlation_table(table, tabulate_correlation(cfg.bath, grid));
            log.done(table);

            out.summary = to_json(rep);
            out.summary["embedding_size"] = synth.embedding_size();
            out.summary["min_relative_eigenvalue"] = synth.min_relative_eigenvalue();
            const auto p = root / "noise_selftest.json";
            write_json(p, out.summary);
            log.done(p);
            if (!rep.pass()) {
                out.ok = false;
                out.failure = "noise self-test: " + std::to_string(rep.failures()) + " of " +
                              std::to_string(rep.checks.size()) + " moment checks outside 3 SE";
            }
            break;
        }

        case ExperimentKind::pair_dynamics:
        case ExperimentKind::heat_flux: {
            const auto drives = detail::drive_settings(cfg);
            const NoiseSource noise(cfg.bath, grid, cfg.noise_balance);
            nlohmann::json cases = nlohmann::json::object();
            for (bool driven : drives) {
                const auto sys = detail::with_drive(cfg.system, driven);
                const std::string name = driven ? "driven" : "undriven";
                const fs::path dir = drives.size() > 1 ? root / name : root;
                detail::report(progress, "running " + name + " ensemble (" + std::to_string(cfg.n_realizations) +
                                             " realizations)");
                const auto res = run_ensemble(cfg.ensemble(cfg.bath, sys), noise, opt);
                cases[name] = detail::write_dynamics_case(cfg, res, dir, log.with({{"case", detail::case_params(cfg.bath, sys)}}));
            }
            out.summary = drives.size() > 1 ? cases : cases.begin().value();
            break;
        }

        case ExperimentKind::loss_gain_sweep: {
            struct Case {
                std::string sweep;
                BathSpec bath;
                bool driven;
            };
            std::vector<Case> cases;
            for (bool driven : detail::drive_settings(cfg)) {
                for (double b : cfg.sweep.beta) {
                    auto bath = cfg.bath;
                    bath.beta = b;
                    cases.push_back({"beta", bath, driven});
                }
                for (double g : cfg.sweep.gamma) {
                    auto bath = cfg.bath;
                    bath.gamma = g;
                    cases.push_back({"gamma", bath, driven});
                }
            }
            const auto p = root / "loss_gain.csv";
            CsvWriter w(p, {"sweep", "beta", "gamma", "driven", "lambda0", "pair", "I_loss", "I_gain", "onset", "n_windows"});
            nlohmann::json rows = nlohmann::json::array();
            for (std::size_t c = 0; c < cases.size(); ++c) {
                const auto& k = cases[c];
                const auto sys = detail::with_drive(cfg.system, k.driven);
                detail::report(progress, "case " + std::to_string(c + 1) + "/" + std::to_string(cases.size()) + ": " +
                                             k.sweep + " sweep, beta=" + format_double(k.bath.beta) +
                                             " gamma=" + format_double(k.bath.gamma) + (k.driven ? " driven" : " undriven"));
                const auto res = run_ensemble(cfg.ensemble(k.bath, sys), opt);
                for (auto axis : cfg.pairs) {
                    const auto rep = analyze_pair(res, eigenstate_label(axis, +1), eigenstate_label(axis, -1), cfg.analysis.info);
                    const std::string onset = rep.first_backflow_time ? format_double(*rep.first_backflow_time) : "nan";
                    w.row_text({k.sweep, format_double(k.bath.beta), format_double(k.bath.gamma), k.driven ? "1" : "0",
                                format_double(sys.drive.amplitude()), std::string(axis_name(axis)), format_double(rep.I_loss),
                                format_double(rep.I_gain), onset, std::to_string(rep.windows.size())});
                    auto j = to_json(rep);
                    j["sweep"] = k.sweep;
                    j["parameters"] = detail::case_params(k.bath, sys);
                    j["run"] = detail::run_stats(res);
                    rows.push_back(j);
                }
            }
            w.close();
            log.done(p);
            out.summary = {{"cases", rows}};
            const auto s = root / "summary.json";
            write_json(s, out.summary);
            log.done(s);
            break;
        }
    }
    return out;
}

} // namespace sln
