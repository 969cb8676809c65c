#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpe/runner/runner.hpp"

using namespace dpe;
using namespace dpe::runner;

namespace {

const char* kOracle = R"(
# comment lines are allowed
experiment = oracle
[engine]
t_end = 1
dt = 0.001
n_max = 20
duhamel_check = false
[initial_data]
kind = point
node = 0
)";

const char* kBoltzmann = R"(
experiment = boltzmann
[model]
grid.n = 8
sigma.kind = affine
sigma.params = 1, 1
kernel.kind = redistribute
kernel.params = 0.5
[engine]
t_end = 1
dt = 0.03125
n_max = 20
left_check = true
[initial_data]
kind = uniform
)";

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(io::split(line));
    return out;
}

std::string value_of(const std::string& kv_csv, const std::string& key) {
    for (const auto& row : csv_rows(kv_csv))
        if (row.size() == 2 && row[0] == key) return row[1];
    return "<missing>";
}

} // namespace

TEST(Config, ParsesSectionsAndTopLevelKeys) {
    const auto cfg = parse_ini(kOracle);
    EXPECT_EQ(cfg.get("", "experiment"), "oracle");
    EXPECT_EQ(cfg.get("engine", "dt"), "0.001");
    EXPECT_FALSE(cfg.get("engine", "missing").has_value());
    EXPECT_NO_THROW(validate_schema(cfg));
}

TEST(Config, EchoRoundTrips) {
    const auto cfg = parse_ini(kBoltzmann);
    const auto again = parse_ini(cfg.echo());
    EXPECT_EQ(again.sections(), cfg.sections());
    EXPECT_EQ(again.echo(), cfg.echo());
}

TEST(Config, UnknownKeysAreListedTogether) {
    auto cfg = parse_ini(std::string(kOracle) + "[engine2]\nx = 1\n");
    cfg.set("engine", "dtt", "0.1");
    cfg.set("model", "grid.n", "4"); // not an oracle key
    try {
        validate_schema(cfg);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[engine2]"), std::string::npos);
        EXPECT_NE(msg.find("[engine] dtt"), std::string::npos);
        EXPECT_NE(msg.find("[model] grid.n"), std::string::npos);
    }
}

TEST(Config, StructuralErrors) {
    EXPECT_THROW(validate_schema(parse_ini("[engine]\ndt = 1\n")), ConfigError);
    EXPECT_THROW(validate_schema(parse_ini("experiment = magic\n")), ConfigError);
    EXPECT_THROW(parse_ini("[engine]\ndt = 1\ndt = 2\n"), ConfigError);
    EXPECT_THROW(read_config_file("/nonexistent/dir/config.ini"), ConfigError);
    EXPECT_THROW(validate_schema(parse_ini("experiment = oracle\n[model]\nkind = boltzmann\n")), ConfigError);
}

TEST(Config, EngineInvariants) {
    auto with = [](const std::string& key, const std::string& v) {
        auto cfg = parse_ini(kOracle);
        cfg.set("engine", key, v);
        return cfg;
    };
    EXPECT_THROW(run(with("dt", "0")), ConfigError);
    EXPECT_THROW(run(with("t_end", "0")), ConfigError);
    EXPECT_THROW(run(with("n_max", "2")), ConfigError);
    EXPECT_THROW(run(with("n_max", "2.5")), ConfigError);
    EXPECT_THROW(run(with("rule", "simpson")), ConfigError);
    EXPECT_THROW(run(with("left_check", "maybe")), ConfigError);
}

TEST(Run, OracleDefaultIsHonest) {
    const auto rep = run(parse_ini(kOracle));
    EXPECT_EQ(rep.verdict, "honest");
    EXPECT_EQ(rep.exit_code, 0);
    const auto rows = csv_rows(rep.files.at("defects.csv"));
    ASSERT_EQ(rows.size(), 22u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"n", "defect", "ratio"}));
    EXPECT_LT(std::stod(rows.back()[1]), 1e-6);
    for (const char* f : {"report.csv", "ledger.csv", "defects.csv", "norms.csv", "residuals.csv", "config_echo.ini"})
        EXPECT_TRUE(rep.files.count(f)) << f;
    EXPECT_FALSE(rep.files.count("plots.svg"));
    EXPECT_FALSE(rep.files.count("iterates.csv"));
}

TEST(Run, DefectsCsvEqualsLibraryValues) {
    const auto rep = run(parse_ini(kOracle));
    const auto model = ConstantMatrixModel::two_state_swap();
    const auto table = iterate_right(model, TimeGrid(0.0, 1.0, 0.001), unit_point(model.grid(), 0), 20);
    const auto series = honesty_verdict(table);
    const auto rows = csv_rows(rep.files.at("defects.csv"));
    for (std::size_t n = 0; n <= 20; ++n) {
        EXPECT_EQ(rows[n + 1][1], io::format_double(series.values[n]));
        EXPECT_EQ(std::stod(rows[n + 1][1]), series.values[n]); // exact round trip
    }
    EXPECT_EQ(value_of(rep.files.at("report.csv"), "limit_estimate"), io::format_double(series.limit_estimate));
}

TEST(Run, ByteIdenticalReruns) {
    for (const char* text : {kOracle, kBoltzmann}) {
        const auto a = run(parse_ini(text));
        const auto b = run(parse_ini(text));
        EXPECT_EQ(a.files, b.files);
    }
}

TEST(Run, BoltzmannReportsLeftRightAndDuhamel) {
    const auto rep = run(parse_ini(kBoltzmann));
    EXPECT_EQ(rep.verdict, "honest");
    const auto& res = rep.files.at("residuals.csv");
    EXPECT_LE(std::stod(value_of(res, "left_right_discrepancy")), 1e-4);
    EXPECT_LE(std::stod(value_of(res, "duhamel_residual")), 1e-3);
    EXPECT_EQ(value_of(res, "conservative"), "false");
}

TEST(Run, StrictSupercriticalKernelNamesLocation) {
    auto cfg = parse_ini(kBoltzmann);
    cfg.set("model", "kernel.kind", "constant");
    cfg.set("model", "kernel.params", "1.5");
    try {
        run(cfg);
        FAIL() << "expected ContractViolation";
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("t="), std::string::npos);
        EXPECT_NE(msg.find("v="), std::string::npos);
    }
    RunOptions lenient;
    lenient.strict = false;
    const auto rep = run(cfg, lenient);
    EXPECT_EQ(value_of(rep.files.at("residuals.csv"), "max_subcritical_excess"), "2");
}

TEST(Run, InitialDataKinds) {
    auto cfg = parse_ini(kBoltzmann);
    cfg.set("engine", "left_check", "false");
    cfg.set("engine", "duhamel_check", "false");
    cfg.set("initial_data", "kind", "maxwellian");
    cfg.set("initial_data", "temperature", "0.5");
    EXPECT_NEAR(std::stod(value_of(run(cfg).files.at("report.csv"), "u0_norm")), 1.0, 1e-15);

    cfg.set("initial_data", "kind", "point");
    cfg.set("initial_data", "node", "8");
    EXPECT_THROW(run(cfg), ConfigError);

    const auto path = std::filesystem::temp_directory_path() / "dpe_runner_u0.csv";
    {
        std::ofstream os(path);
        os << "index,value\n3,2.5\n";
    }
    cfg.set("initial_data", "kind", "csv");
    cfg.set("initial_data", "path", path.string());
    const auto rep = run(cfg);
    EXPECT_EQ(value_of(rep.files.at("report.csv"), "u0_norm"), io::format_double(2.5 * 0.25));
    cfg.set("initial_data", "kind", "sparkle");
    EXPECT_THROW(run(cfg), ConfigError);
    std::filesystem::remove(path);
}

TEST(Run, OptionalOutputs) {
    auto cfg = parse_ini(kOracle);
    cfg.set("output", "iterates", "true");
    RunOptions opt;
    opt.emit_svg = true;
    const auto rep = run(cfg, opt);
    ASSERT_TRUE(rep.files.count("plots.svg"));
    EXPECT_EQ(rep.files.at("plots.svg").rfind("<svg", 0), 0u);
    const auto rows = csv_rows(rep.files.at("iterates.csv"));
    EXPECT_EQ(rows.size(), 1u + 21u * 1001u * 2u);
    EXPECT_NE(rep.files.at("config_echo.ini").find("emit_svg = true"), std::string::npos);
}

TEST(Run, BasisSweepIsReported) {
    auto cfg = parse_ini(kBoltzmann);
    cfg.set("engine", "left_check", "false");
    cfg.set("honesty", "basis_sweep", "true");
    cfg.set("honesty", "basis_stride", "2");
    const auto rep = run(cfg);
    EXPECT_EQ(value_of(rep.files.at("report.csv"), "basis_entries"), "4");
    EXPECT_EQ(csv_rows(rep.files.at("basis.csv")).size(), 5u);
}

TEST(Run, FragmentationReportsLeakage) {
    const auto cfg = parse_ini(R"(
experiment = fragmentation
[model]
grid.xmin = 0.015625
grid.n = 64
[engine]
dt = 0.015625
n_max = 40
duhamel_check = false
[initial_data]
kind = uniform
)");
    const auto rep = run(cfg);
    EXPECT_EQ(rep.verdict, "honest");
    const auto& res = rep.files.at("residuals.csv");
    EXPECT_LE(std::stod(value_of(res, "kernel_mass_check_over_tolerance")), 1.0);
    EXPECT_GT(std::stod(value_of(res, "leakage_flux")), 0.0);
}

TEST(Run, LiftedChecksAndShattering) {
    const auto lifted = run(parse_ini("experiment = lifted_checks\n[lifted]\nt_max = 6\nh = 0.03125, 0.015625\n"));
    EXPECT_EQ(lifted.exit_code, 0);
    EXPECT_EQ(csv_rows(lifted.files.at("checks.csv")).size(), 1u + 2u * 6u);
    EXPECT_EQ(value_of(lifted.files.at("report.csv"), "lambda"), "4");
    EXPECT_LE(std::stod(value_of(lifted.files.at("report.csv"), "worst_relative_residual")), 0.1);

    const auto shat = run(parse_ini("experiment = shattering_sweep\n[shattering]\nalpha = 0\nlevels = 3, 4\n[engine]\ndt = 0.015625\nn_max = 40\n"));
    EXPECT_EQ(shat.exit_code, 0);
    EXPECT_EQ(csv_rows(shat.files.at("shattering.csv")).size(), 3u);
}

TEST(Sweep, DtHalvingDuhamelRatio) {
    auto cfg = parse_ini(kBoltzmann);
    cfg.set("engine", "left_check", "false");
    cfg.set("sweep", "parameter", "dt");
    cfg.set("sweep", "values", "0.04, 0.02, 0.01");
    const auto rep = sweep(cfg);
    const auto rows = csv_rows(rep.files.at("sweep.csv"));
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0][9], "duhamel_ratio");
    EXPECT_EQ(rows[1][9], "");
    for (std::size_t k = 2; k < 4; ++k) EXPECT_NEAR(std::stod(rows[k][9]), 0.25, 0.1);
}

TEST(Sweep, BoundedFragmentationAllHonest) {
    const auto cfg = parse_ini(R"(
experiment = fragmentation
[model]
grid.xmin = 0.0625
grid.n = 15
rate.kind = constant
rate.params = 1
[engine]
dt = 0.015625
n_max = 40
duhamel_check = false
[initial_data]
kind = uniform
[sweep]
parameter = grid_n
values = 15, 31, 63
)");
    const auto rep = sweep(cfg);
    EXPECT_EQ(rep.exit_code, 0);
    const auto rows = csv_rows(rep.files.at("sweep.csv"));
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_EQ(rows[k][5], "honest");
}

TEST(Sweep, RejectsShortSequences) {
    auto cfg = parse_ini(kOracle);
    cfg.set("sweep", "values", "0.01");
    EXPECT_THROW(sweep(cfg), ConfigError);
    cfg.set("sweep", "values", "0.01, 0.005");
    cfg.set("sweep", "parameter", "grid_n");
    EXPECT_THROW(sweep(cfg), ConfigError);
}

TEST(Outputs, WrittenOnlyOnSuccess) {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "dpe_runner_out";
    fs::remove_all(dir);
    RunOptions opt;
    opt.output_dir = dir.string();
    auto bad = parse_ini(kOracle);
    bad.set("engine", "dt", "-1");
    EXPECT_THROW(run(bad, opt), ConfigError);
    EXPECT_FALSE(fs::exists(dir));

    const auto rep = run(parse_ini(kOracle), opt);
    write_outputs(rep);
    for (const auto& [name, content] : rep.files) {
        std::ifstream in(dir / name, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        EXPECT_EQ(ss.str(), content) << name;
    }
    fs::remove_all(dir);
}

TEST(ExitCodes, FollowTheVerdict) {
    EXPECT_EQ(exit_code_for(Verdict::honest), 0);
    EXPECT_EQ(exit_code_for(Verdict::dishonest), 2);
    EXPECT_EQ(exit_code_for(Verdict::inconclusive), 3);
    auto cfg = parse_ini(kOracle);
    cfg.set("engine", "n_max", "3");
    cfg.set("honesty", "threshold", "1e-30");
    EXPECT_EQ(run(cfg).exit_code, 3);

    // |B| t = 30 with only 20 iterates: the defect ratios sit well above 1.
    auto stiff = parse_ini(kOracle);
    stiff.set("model", "decay", "30");
    stiff.set("model", "matrix", "0, 30, 30, 0");
    const auto rep = run(stiff);
    EXPECT_EQ(rep.verdict, "dishonest");
    EXPECT_EQ(rep.exit_code, 2);
}
