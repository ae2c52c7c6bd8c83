// io.hpp: CSV artifacts (comma separated, header row, LF, %.17g) and JSON
// provenance sidecars

#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sln/bath.hpp"
#include "sln/ensemble.hpp"
#include "sln/errors.hpp"
#include "sln/noise.hpp"
#include "sln/observables.hpp"
#include "sln/propagator.hpp"

#ifndef SLN_VERSION
#define SLN_VERSION "0.0.0"
#endif

namespace sln {

// Raised when an artifact cannot be written or read.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : path_(path)
        , columns_(header.size()) {
        if (path.has_parent_path()) {
            std::error_code ec;
            std::filesystem::create_directories(path.parent_path(), ec);
        }
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        line(header);
    }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_double(v));
        line(cells);
    }
    void row(std::initializer_list<double> values) { row(std::vector<double>(values)); }
    void row_text(const std::vector<std::string>& cells) { line(cells); }

    void close() {
        out_.close();
        if (!out_) throw IoError("error writing " + path_.string());
    }

private:
    void line(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw IoError("row width differs from header in " + path_.string());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        if (!out_) throw IoError("error writing " + path_.string());
    }

    std::filesystem::path path_;
    std::size_t columns_;
    std::ofstream out_;
};

inline void write_correlation_table(const std::filesystem::path& path, const CorrelationTable& tab) {
    CsvWriter w(path, {"t", "re_L", "im_L"});
    for (std::size_t k = 0; k < tab.size(); ++k) w.row({tab.grid[k], tab.re_L[k], tab.im_L[k]});
    w.close();
}

inline void write_noise_path(const std::filesystem::path& path, const NoisePath& p) {
    CsvWriter w(path, {"t", "re_xi", "im_xi", "re_nu", "im_nu"});
    for (std::size_t k = 0; k < p.grid.size; ++k)
        w.row({p.grid[k], p.xi[k].real(), p.xi[k].imag(), p.nu[k].real(), p.nu[k].imag()});
    w.close();
}

inline const std::vector<std::string>& rho_columns() {
    static const std::vector<std::string> c{"re_rho00", "im_rho00", "re_rho01", "im_rho01",
                                            "re_rho10", "im_rho10", "re_rho11", "im_rho11"};
    return c;
}

inline void write_trajectory(const std::filesystem::path& path, const Trajectory& tr) {
    auto header = std::vector<std::string>{"t"};
    for (const auto& c : rho_columns()) header.push_back(c);
    header.insert(header.end(), {"re_sy", "im_sy"});
    CsvWriter w(path, header);
    for (std::size_t k = 0; k < tr.grid.size; ++k) {
        std::vector<double> v{tr.grid[k]};
        for (const auto& z : tr.rho[k].m) v.insert(v.end(), {z.real(), z.imag()});
        v.insert(v.end(), {tr.sigma_y[k].real(), tr.sigma_y[k].imag()});
        w.row(v);
    }
    w.close();
}

// Mean state, per-entry standard error |(se_re, se_im)| and the j_Q accumulator.
inline void write_ensemble_series(const std::filesystem::path& path, const StateSeries& s, const TimeGrid& grid) {
    auto header = std::vector<std::string>{"t"};
    for (const auto& c : rho_columns()) header.push_back(c);
    header.insert(header.end(), {"stderr_00", "stderr_01", "stderr_10", "stderr_11", "jq_mean_re", "jq_mean_im", "jq_se"});
    CsvWriter w(path, header);
    for (std::size_t k = 0; k < s.nodes(); ++k) {
        std::vector<double> v{grid[k]};
        for (std::size_t c = 0; c < 8; ++c) v.push_back(s.mean(k, c));
        for (std::size_t e = 0; e < 4; ++e) v.push_back(std::hypot(s.stderr_of(k, 2 * e), s.stderr_of(k, 2 * e + 1)));
        v.insert(v.end(), {s.mean(k, kJqRe), s.mean(k, kJqIm), s.stderr_of(k, kJqRe)});
        w.row(v);
    }
    w.close();
}

inline void write_info_flow(const std::filesystem::path& path, const InfoFlowReport& r) {
    CsvWriter w(path, {"t", "D", "Delta", "window_flag", "D_smooth", "D_se", "Delta_se", "epsilon"});
    const auto flags = r.flags();
    for (std::size_t k = 0; k < r.D.size(); ++k)
        w.row({r.grid[k], r.D[k], r.Delta[k], static_cast<double>(flags[k]), r.D_smooth[k], r.D_se[k], r.Delta_se[k],
               r.epsilon[k]});
    w.close();
}

inline void write_heat_flux(const std::filesystem::path& path, const HeatFluxSeries& h) {
    CsvWriter w(path, {"t", "jq", "jq_se", "jq_imag_residual", "jq_imag_se"});
    for (std::size_t k = 0; k < h.jq.size(); ++k)
        w.row({h.grid[k], h.jq[k], h.se[k], h.imag_residual[k], h.imag_se[k]});
    w.close();
}

inline nlohmann::json to_json(const InfoFlowReport& r) {
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : r.windows) windows.push_back({w.t_a, w.t_b});
    return {{"pair", {r.label_a, r.label_b}},
            {"blp_value", r.blp_value},
            {"I_loss", r.I_loss},
            {"I_gain", r.I_gain},
            {"first_backflow_time", r.first_backflow_time ? nlohmann::json(*r.first_backflow_time) : nlohmann::json()},
            {"windows", windows}};
}

inline nlohmann::json to_json(const HeatFluxSeries& h) {
    return {{"state", h.label}, {"integral", h.integral}, {"integral_se", h.integral_se}};
}

inline nlohmann::json to_json(const OverlapStatistic& o) {
    return {{"nodes", o.nodes},
            {"backflow_nodes", o.backflow_nodes},
            {"positive_jq_nodes", o.positive_jq_nodes},
            {"both", o.both},
            {"jaccard", o.jaccard},
            {"correlation", o.correlation}};
}

inline nlohmann::json to_json(const NoiseStatReport& rep) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"moment", moment_name(c.moment)},
                          {"lag", c.lag},
                          {"tau", c.tau},
                          {"target", {c.target.real(), c.target.imag()}},
                          {"estimate", {c.estimate.real(), c.estimate.imag()}},
                          {"se", {c.se_re, c.se_im}},
                          {"pass", c.pass}});
    }
    return {{"n_paths", rep.n_paths},
            {"pass", rep.pass()},
            {"failures", rep.failures()},
            {"excess_kurtosis", rep.excess_kurtosis},
            {"excess_kurtosis_se", rep.excess_kurtosis_se},
            {"kurtosis_node", rep.kurtosis_node},
            {"checks", checks}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("error writing " + path.string());
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Writes <artifact>.json next to the artifact.
inline void write_sidecar(const std::filesystem::path& artifact, const nlohmann::json& provenance) {
    nlohmann::json j = provenance;
    j["artifact"] = artifact.filename().string();
    j["code_version"] = SLN_VERSION;
    j["timestamp"] = utc_timestamp();
    auto side = artifact;
    side += ".json";
    write_json(side, j);
}

} // namespace sln
