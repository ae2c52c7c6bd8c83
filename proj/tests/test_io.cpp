// The CSV files are the only interface the plotting package reads, so their
// schemas and dialect are pinned here.

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "sln/io.hpp"

using namespace sln;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("sln_io_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    const auto text = slurp(p);
    EXPECT_EQ(text.find('\r'), std::string::npos) << p;
    EXPECT_EQ(text.back(), '\n');
    std::vector<std::vector<std::string>> rows;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) rows.push_back(split(line));
    for (const auto& r : rows) EXPECT_EQ(r.size(), rows.front().size()) << p;
    return rows;
}

const std::vector<std::string> kRho{"re_rho00", "im_rho00", "re_rho01", "im_rho01",
                                    "re_rho10", "im_rho10", "re_rho11", "im_rho11"};

EnsembleResult tiny_run() {
    EnsembleConfig c;
    c.bath = BathSpec::make(0.05, 10.0, 5.0);
    c.states = pauli_pair(PauliAxis::z);
    c.n_realizations = 12;
    c.n_steps = 64;
    c.n_batches = 4;
    return run_ensemble(c);
}

} // namespace

TEST(Csv, DoublesRoundTripExactly) {
    for (double x : {0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 1.0}) EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
}

TEST(Csv, RowWidthChecked) {
    CsvWriter w(scratch("w.csv"), {"a", "b"});
    EXPECT_THROW(w.row({1.0}), IoError);
}

TEST(Csv, UnwritablePathIsIoError) { EXPECT_THROW(CsvWriter("/proc/nonexistent/x.csv", {"a"}), IoError); }

TEST(Csv, CorrelationTableSchema) {
    const auto tab = tabulate_correlation(BathSpec::make(0.05, 10.0, 5.0), TimeGrid::over(two_pi, 64));
    const auto p = scratch("bath.csv");
    write_correlation_table(p, tab);
    const auto rows = read_csv(p);
    EXPECT_EQ(rows.front(), (std::vector<std::string>{"t", "re_L", "im_L"}));
    ASSERT_EQ(rows.size(), 66u);
    EXPECT_EQ(std::strtod(rows[5][1].c_str(), nullptr), tab.re_L[4]);
}

TEST(Csv, NoisePathSchema) {
    const auto grid = TimeGrid::over(two_pi, 64);
    const auto tab = tabulate_for_noise(BathSpec::make(0.05, 10.0, 5.0), grid);
    const auto p = scratch("noise.csv");
    write_noise_path(p, NoiseSynthesizer(tab, grid.size).generate(1, 0));
    EXPECT_EQ(read_csv(p).front(), (std::vector<std::string>{"t", "re_xi", "im_xi", "re_nu", "im_nu"}));
}

TEST(Csv, TrajectorySchema) {
    const auto p = scratch("traj.csv");
    write_trajectory(p, propagate(pauli_eigenstate(PauliAxis::z, 1), zero_noise(TimeGrid::over(1.0, 10)), {}));
    auto want = std::vector<std::string>{"t"};
    want.insert(want.end(), kRho.begin(), kRho.end());
    want.insert(want.end(), {"re_sy", "im_sy"});
    EXPECT_EQ(read_csv(p).front(), want);
}

TEST(Csv, EnsembleAndAnalysisSchemas) {
    const auto res = tiny_run();
    const auto pe = scratch("ens.csv");
    write_ensemble_series(pe, res.states[0], res.grid);
    auto want = std::vector<std::string>{"t"};
    want.insert(want.end(), kRho.begin(), kRho.end());
    want.insert(want.end(), {"stderr_00", "stderr_01", "stderr_10", "stderr_11", "jq_mean_re", "jq_mean_im", "jq_se"});
    const auto rows = read_csv(pe);
    EXPECT_EQ(rows.front(), want);
    EXPECT_EQ(rows.size(), res.grid.size + 1);

    const auto pi = scratch("info.csv");
    const auto rep = analyze_pair(res, "z+", "z-");
    write_info_flow(pi, rep);
    const auto info = read_csv(pi);
    const std::vector<std::string> head(info.front().begin(), info.front().begin() + 4);
    EXPECT_EQ(head, (std::vector<std::string>{"t", "D", "Delta", "window_flag"}));
    for (std::size_t k = 1; k < info.size(); ++k) EXPECT_TRUE(info[k][3] == "0" || info[k][3] == "1");

    const auto ph = scratch("heat.csv");
    write_heat_flux(ph, heat_flux(res, "z+"));
    const auto heat = read_csv(ph);
    const std::vector<std::string> hh(heat.front().begin(), heat.front().begin() + 4);
    EXPECT_EQ(hh, (std::vector<std::string>{"t", "jq", "jq_se", "jq_imag_residual"}));
}

TEST(Json, SummaryAndSidecar) {
    const auto res = tiny_run();
    const auto j = to_json(analyze_pair(res, "z+", "z-"));
    for (const char* key : {"blp_value", "I_loss", "I_gain", "first_backflow_time", "windows"}) EXPECT_TRUE(j.contains(key)) << key;

    const auto p = scratch("artifact.csv");
    { CsvWriter w(p, {"a"}); w.row({1.0}); w.close(); }
    write_sidecar(p, {{"master_seed", 7}});
    const auto side = nlohmann::json::parse(slurp(fs::path(p.string() + ".json")));
    EXPECT_EQ(side["artifact"], "artifact.csv");
    EXPECT_EQ(side["master_seed"], 7);
    EXPECT_TRUE(side.contains("code_version"));
    EXPECT_TRUE(side.contains("timestamp"));
}
