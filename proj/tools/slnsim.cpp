// slnsim: command-line front end for the SLN spin-boson simulator

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sln/config.hpp"
#include "sln/experiment.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

struct Options {
    std::string config;
    std::string preset;
    unsigned workers{1};
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> realizations;
    std::string out;
};

void error_report(const std::string& kind, const std::string& message,
                  const std::vector<std::string>& violations = {}) {
    nlohmann::json j{{"status", "error"}, {"error", kind}, {"message", message}};
    if (!violations.empty()) j["violations"] = violations;
    std::cout << j.dump(2) << std::endl;
}

std::string config_text(const Options& o) {
    if (!o.config.empty() && !o.preset.empty()) throw sln::ConfigError({"give either --config or --preset, not both"});
    if (!o.preset.empty()) return sln::preset_yaml(o.preset);
    if (!o.config.empty()) {
        try {
            return sln::read_text_file(o.config);
        } catch (const std::runtime_error& e) {
            throw sln::IoError(e.what());
        }
    }
    throw sln::ConfigError({"one of --config or --preset is required"});
}

// Parses without range checks, applies CLI overrides, then validates.
sln::ExperimentConfig load(const Options& o, std::optional<sln::ExperimentKind> force_kind = std::nullopt) {
    std::vector<std::string> v;
    auto cfg = o.config.empty() && o.preset.empty() && force_kind
                   ? sln::ExperimentConfig{}
                   : sln::parse_config(config_text(o), &v);
    // Structural errors are final; range checks are redone after overrides.
    std::vector<std::string> structural;
    const auto range = cfg.violations();
    for (const auto& x : v)
        if (std::find(range.begin(), range.end(), x) == range.end()) structural.push_back(x);
    if (!structural.empty()) throw sln::ConfigError(structural);
    if (force_kind) cfg.kind = *force_kind;
    if (o.seed) cfg.master_seed = *o.seed;
    if (o.realizations) cfg.n_realizations = *o.realizations;
    if (!o.out.empty()) cfg.output = o.out;
    cfg.check();
    return cfg;
}

int run(const Options& o, std::optional<sln::ExperimentKind> kind) {
    const auto cfg = load(o, kind);
    const auto outcome = sln::run_experiment(cfg, {o.workers}, &std::cerr);
    nlohmann::json j{{"status", outcome.ok ? "ok" : "failed"}, {"kind", sln::kind_name(cfg.kind)}, {"output", cfg.output}};
    nlohmann::json files = nlohmann::json::array();
    for (const auto& p : outcome.artifacts) files.push_back(p.string());
    j["artifacts"] = files;
    if (!outcome.ok) {
        error_report("numerical", outcome.failure);
        return kNumerical;
    }
    std::cout << j.dump(2) << std::endl;
    return kOk;
}

int validate(const Options& o) {
    std::vector<std::string> v;
    try {
        v = sln::validate_config_text(config_text(o));
    } catch (const sln::ConfigError& e) {
        v = e.violations();
    }
    std::cout << nlohmann::json{{"valid", v.empty()}, {"violations", v}}.dump(2) << std::endl;
    return v.empty() ? kOk : kConfig;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic Liouville-von Neumann simulator for the driven spin-boson model"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* sub, bool running) {
        sub->add_option("--config", o.config, "YAML experiment configuration");
        sub->add_option("--preset", o.preset, "built-in configuration")->check(CLI::IsMember(sln::preset_names()));
        if (!running) return;
        sub->add_option("--workers", o.workers, "worker threads (affects wall time only)")->check(CLI::PositiveNumber);
        sub->add_option("--seed", o.seed, "master seed override");
        sub->add_option("--realizations", o.realizations, "realization count override");
        sub->add_option("--out", o.out, "output directory override");
    };
    auto* simulate = app.add_subcommand("simulate", "run an experiment and write its artifacts");
    auto* check = app.add_subcommand("validate", "statically validate a configuration");
    auto* bath = app.add_subcommand("bath-table", "write the bath correlation table");
    auto* selftest = app.add_subcommand("noise-selftest", "check generated noise against its target moments");
    common(simulate, true);
    common(check, false);
    common(bath, true);
    common(selftest, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        error_report("usage", e.what());
        return kConfig;
    }

    try {
        if (*check) return validate(o);
        if (*bath) return run(o, sln::ExperimentKind::bath_table);
        if (*selftest) return run(o, sln::ExperimentKind::noise_selftest);
        return run(o, std::nullopt);
    } catch (const sln::ConfigError& e) {
        error_report("config", "invalid configuration", e.violations());
        return kConfig;
    } catch (const sln::IoError& e) {
        error_report("io", e.what());
        return kIo;
    } catch (const sln::NumericalError& e) {
        error_report("numerical", e.what());
        return kNumerical;
    } catch (const sln::InputError& e) {
        error_report("config", e.what());
        return kConfig;
    } catch (const sln::DomainError& e) {
        error_report("config", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        error_report("internal", e.what());
        return 1;
    }
}
