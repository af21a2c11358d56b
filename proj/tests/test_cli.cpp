#include <cstdlib>
#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "test_helpers.hpp"

using namespace causalkit;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "causal-kit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string strip_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') out += line + "\n";
  return out;
}

fs::path bench_csv(const fs::path& dir, std::size_t length = 250, const std::string& seed = "11") {
  const fs::path p = dir / ("bench" + std::to_string(length) + ".csv");
  const CliRun r = run_cli({"gen", "linear-bench", "--seed", seed, "--length", std::to_string(length), "-o", p.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  return p;
}

}  // namespace

TEST(CliParsing, LagLists) {
  const LagSpec a = cli::parse_lags("1-3,5");
  EXPECT_EQ(a.lags, (std::vector<int>{1, 2, 3, 5}));
  EXPECT_FALSE(a.include_present_y);
  const LagSpec b = cli::parse_lags("0");
  EXPECT_EQ(b.lags, (std::vector<int>{1}));
  EXPECT_TRUE(b.include_present_y);
  const LagSpec c = cli::parse_lags("0,2");
  EXPECT_EQ(c.lags, (std::vector<int>{2}));
  EXPECT_TRUE(c.include_present_y);
  EXPECT_ERRC(cli::parse_lags("3-1"), Errc::InvalidArgument);
  EXPECT_ERRC(cli::parse_lags("1,1"), Errc::InvalidArgument);
  EXPECT_ERRC(cli::parse_lags("x"), Errc::InvalidArgument);
  EXPECT_ERRC(cli::parse_lags(""), Errc::InvalidArgument);
}

TEST(CliParsing, NumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(cli::fmt(v)), v);
  EXPECT_EQ(cli::fmt(std::nan("")), "");
  EXPECT_EQ(cli::parse_exponent_range("-2:1"), (std::vector<double>{0.25, 0.5, 1.0, 2.0}));
}

TEST(CliExit, ConfigErrors) {
  const fs::path dir = scratch_dir();
  const fs::path csv = bench_csv(dir);
  EXPECT_EQ(run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "ts1", "-m", "transfer-entropy", "-s", "ts3"}).code,
            2);
  EXPECT_EQ(run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "ts1", "-m", "hsncic", "-l", "0"}).code, 2);
  EXPECT_EQ(run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "ts1", "-m", "mutual-information", "-l", "2"}).code,
            2);
  EXPECT_EQ(run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "ts1", "-m", "granger"}).code, 2);
  EXPECT_EQ(run_cli({"matrix", "-i", csv.string(), "--columns", "ts1", "--output-dir", (dir / "m").string()}).code, 2);
  EXPECT_EQ(run_cli({"test", "-i", csv.string()}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"reproduce", "linear-bench", "--output-dir", (dir / "r").string()}).code, 2);
  const CliRun bad = run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "ts1", "-m", "granger"});
  EXPECT_TRUE(bad.out.empty());
  EXPECT_NE(bad.err.find("granger"), std::string::npos);
}

TEST(CliExit, DataErrors) {
  const fs::path dir = scratch_dir();
  const fs::path csv = bench_csv(dir);
  EXPECT_EQ(run_cli({"test", "-i", (dir / "missing.csv").string(), "-t", "a", "-c", "b"}).code, 3);
  EXPECT_EQ(run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "nope"}).code, 3);
  const fs::path broken = write_file(dir / "broken.csv", "a,b\n1,2\n3,oops\n");
  EXPECT_EQ(run_cli({"test", "-i", broken.string(), "-t", "a", "-c", "b"}).code, 3);
  const fs::path neg = write_file(dir / "neg.csv", "a,b\n1,2\n-3,4\n5,6\n");
  EXPECT_EQ(run_cli({"test", "-i", neg.string(), "-t", "a", "-c", "b", "--preprocess", "log-returns"}).code, 3);
}

TEST(CliExit, NumericalErrors) {
  const fs::path dir = scratch_dir();
  std::string text = "a,b\n";
  for (int i = 0; i < 40; ++i) text += "1,1\n";
  const fs::path flat = write_file(dir / "flat.csv", text);
  const CliRun r = run_cli({"test", "-i", flat.string(), "-t", "a", "-c", "b", "-n", "5", "--seed", "1"});
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST(CliTest, GewekeKernelJson) {
  const fs::path csv = bench_csv(scratch_dir());
  const CliRun r = run_cli({"test", "-i", csv.string(), "-t", "ts4", "-c", "ts3", "-m", "geweke-kernel", "-n", "30",
                            "--seed", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["command"], "test");
  EXPECT_EQ(j["seed"], 5);
  const double p = j["result"]["p_value"];
  EXPECT_GE(p, 0.0);
  EXPECT_LE(p, 1.0);
  EXPECT_EQ(p, 0.0);
  EXPECT_EQ(j["result"]["surrogates"].size(), 30u);
  EXPECT_EQ(j["query"]["kernel"]["kind"], "gaussian");
  EXPECT_EQ(j["query"]["kernel"]["sigma_method"], "cv");
  EXPECT_EQ(j["query"]["kernel"]["gamma_method"], "cv");
  EXPECT_TRUE(j["query"]["kernel"]["sigma"].is_number());
}

TEST(CliTest, FixedKernelSettingsAreEchoed) {
  const fs::path csv = bench_csv(scratch_dir());
  const CliRun r = run_cli({"test", "-i", csv.string(), "-t", "ts4", "-c", "ts3", "-m", "geweke-kernel", "--sigma",
                            "2", "--gamma", "0.001", "-n", "10", "--seed", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["query"]["kernel"]["sigma"], 2.0);
  EXPECT_EQ(j["query"]["kernel"]["gamma"], 0.001);
  EXPECT_FALSE(j["query"]["kernel"].contains("cv"));
}

TEST(CliTest, MutualInformationAtLagZero) {
  const fs::path csv = bench_csv(scratch_dir());
  const CliRun r = run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "ts1", "-m", "mutual-information", "-n", "50",
                            "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["result"]["p_value"], 0.0);
}

TEST(CliTest, TransferEntropyAtLagZeroUsesMutualInformation) {
  const fs::path csv = bench_csv(scratch_dir());
  const CliRun te = run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "ts1", "-m", "transfer-entropy", "-l", "0",
                             "-n", "20", "--seed", "2"});
  const CliRun mi = run_cli({"test", "-i", csv.string(), "-t", "ts2", "-c", "ts1", "-m", "mutual-information", "-n",
                             "20", "--seed", "2"});
  ASSERT_EQ(te.code, 0) << te.err;
  const auto a = nlohmann::json::parse(te.out), b = nlohmann::json::parse(mi.out);
  EXPECT_EQ(a["query"]["measure"], "mutual-information");
  EXPECT_EQ(a["query"]["measure_requested"], "transfer-entropy");
  EXPECT_EQ(a["result"], b["result"]);
}

TEST(CliTest, CsvOutputCarriesConfig) {
  const fs::path dir = scratch_dir();
  const fs::path csv = bench_csv(dir);
  const fs::path out = dir / "res.csv";
  const CliRun r = run_cli({"test", "-i", csv.string(), "-t", "ts6", "-c", "ts5", "-m", "hsncic", "-n", "10", "--seed",
                            "4", "--format", "csv", "-o", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const std::string text = read_file(out);
  EXPECT_NE(text.find("# seed=4\n"), std::string::npos);
  EXPECT_NE(text.find("# query.lambda=0.001\n"), std::string::npos);
  EXPECT_NE(text.find("# query.sigma_xz="), std::string::npos);
  EXPECT_NE(text.find("field,index,value\nobserved,,"), std::string::npos);
  EXPECT_NE(text.find("p_value,,0\n"), std::string::npos);
}

TEST(CliTest, SeedDefaultsToEntropyAndIsEchoed) {
  const fs::path csv = bench_csv(scratch_dir());
  const CliRun r = run_cli({"test", "-i", csv.string(), "-t", "ts4", "-c", "ts3", "-n", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(r.out)["seed"].is_number_unsigned());
}

TEST(CliTest, PreprocessingIsApplied) {
  const fs::path dir = scratch_dir();
  const fs::path prices = write_file(dir / "prices.csv", "date,a,b\nd1,100,50\nd2,101,51\nd3,99,52\nd4,102,50\n"
                                                          "d5,103,49\nd6,101,50\nd7,104,51\nd8,105,53\n");
  const CliRun r = run_cli({"test", "-i", prices.string(), "--index-column", "-t", "a", "-c", "b", "--preprocess",
                            "log-returns,demean", "-n", "5", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["rows"], 7);
  EXPECT_EQ(j["data"]["preprocess"], (nlohmann::json{"log-returns", "demean"}));
}

TEST(CliConfig, IniFileWithFlagOverride) {
  const fs::path dir = scratch_dir();
  const fs::path csv = bench_csv(dir);
  const fs::path ini = write_file(dir / "run.ini", "[test]\nmeasure=hsncic\npermutations=7\nseed=9\ntarget=ts6\n"
                                                   "cause=ts5\ninput=" + csv.string() + "\n");
  const CliRun a = run_cli({"--config", ini.string(), "test"});
  ASSERT_EQ(a.code, 0) << a.err;
  auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j["query"]["measure"], "hsncic");
  EXPECT_EQ(j["permutations"], 7);
  EXPECT_EQ(j["seed"], 9);
  const CliRun b = run_cli({"--config", ini.string(), "test", "-n", "4", "-m", "geweke-linear"});
  ASSERT_EQ(b.code, 0) << b.err;
  j = nlohmann::json::parse(b.out);
  EXPECT_EQ(j["query"]["measure"], "geweke-linear");
  EXPECT_EQ(j["permutations"], 4);
  EXPECT_EQ(j["seed"], 9);
}

TEST(CliConfig, MissingConfigFileIsConfigError) {
  EXPECT_EQ(run_cli({"--config", (scratch_dir() / "none.ini").string(), "gen", "linear-bench"}).code, 2);
}

TEST(CliMatrix, JsonRoundTripAndConvention) {
  const fs::path dir = scratch_dir();
  const fs::path csv = bench_csv(dir);
  const fs::path out = dir / "mx";
  const CliRun r = run_cli({"matrix", "-i", csv.string(), "--columns", "ts3,ts4,ts5,ts6", "--measures",
                            "geweke-linear,transfer-entropy", "-n", "40", "--seed", "3", "--output-dir", out.string(),
                            "--prefix", "run_"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const std::string m : {"geweke-linear", "transfer-entropy"}) {
    const PValueMatrix pm = cli::load_matrix_json(out / ("run_" + m + ".json"));
    EXPECT_EQ(pm.names, (std::vector<std::string>{"ts3", "ts4", "ts5", "ts6"}));
    EXPECT_TRUE(std::isnan(pm.p_values(0, 0)));
    EXPECT_EQ(pm.p_values(1, 0), 0.0) << m;  // ts3 causes ts4
    EXPECT_EQ(pm.p_values(3, 2), 0.0) << m;  // ts5 causes ts6

    // the CSV carries the same numbers
    std::istringstream in(strip_comments(read_file(out / ("run_" + m + ".csv"))));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "target\\cause,ts3,ts4,ts5,ts6");
    for (Eigen::Index i = 0; i < 4; ++i) {
      std::getline(in, line);
      std::vector<std::string> cells;
      std::istringstream cs(line);
      std::string c;
      while (std::getline(cs, c, ',')) cells.push_back(c);
      cells.resize(5);
      for (Eigen::Index k = 0; k < 4; ++k)
        EXPECT_EQ(cells[static_cast<std::size_t>(k + 1)], cli::fmt(pm.p_values(i, k)));
    }
  }
}

TEST(CliMatrix, AllMeasures) {
  const fs::path dir = scratch_dir();
  const fs::path csv = bench_csv(dir, 120);
  const CliRun r = run_cli({"matrix", "-i", csv.string(), "--columns", "ts3,ts4", "--measures", "all", "-n", "5",
                            "--seed", "3", "--output-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const std::string m : {"geweke-linear", "geweke-kernel", "hsncic", "transfer-entropy"}) {
    EXPECT_TRUE(fs::exists(dir / (m + ".csv"))) << m;
    EXPECT_TRUE(fs::exists(dir / (m + ".json"))) << m;
  }
}

TEST(CliScan, WindowsTimesDirections) {
  const fs::path dir = scratch_dir();
  const fs::path csv = bench_csv(dir, 500);
  const CliRun r = run_cli({"scan", "-i", csv.string(), "-t", "ts4", "-c", "ts3", "-w", "250", "--step", "25", "-n", "5",
                            "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(strip_comments(r.out));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "window_start,window_end,dir,value,p_value");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 22u);
  EXPECT_EQ(rows[0].rfind("0,249,ts3->ts4,", 0), 0u);
  EXPECT_EQ(rows[1].rfind("0,249,ts4->ts3,", 0), 0u);
  EXPECT_EQ(rows[21].rfind("250,499,ts4->ts3,", 0), 0u);

  const CliRun side = run_cli({"scan", "-i", csv.string(), "-t", "ts4", "-c", "ts3", "-s", "ts1", "-w", "250", "-n",
                               "5", "--seed", "1"});
  ASSERT_EQ(side.code, 0) << side.err;
  const std::string body = strip_comments(side.out);
  EXPECT_EQ(std::count(body.begin(), body.end(), '\n'), 45);
  EXPECT_NE(body.find(",ts3->ts4|ts1,"), std::string::npos);
  EXPECT_NE(body.find(",ts4->ts3|ts1,"), std::string::npos);
}

TEST(CliScan, DefaultWindowIsWholePanel) {
  const fs::path csv = bench_csv(scratch_dir(), 120);
  const CliRun r = run_cli({"scan", "-i", csv.string(), "-t", "ts4", "-c", "ts3", "-n", "5", "--seed", "1", "--format",
                            "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["windows"], 1);
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][0]["window_end"], "119");
}

TEST(CliScan, UsesIndexLabels) {
  const fs::path dir = scratch_dir();
  std::string text = "date,a,b\n";
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int i = 0; i < 60; ++i) text += (i < 10 ? "t0" : "t") + std::to_string(i) + "," + std::to_string(n(rng)) + "," + std::to_string(n(rng)) + "\n";
  const fs::path csv = write_file(dir / "idx.csv", text);
  const CliRun r = run_cli({"scan", "-i", csv.string(), "--index-column", "-t", "a", "-c", "b", "-w", "40", "--step",
                            "20", "-n", "5", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string body = strip_comments(r.out);
  EXPECT_NE(body.find("\nt00,t39,b->a,"), std::string::npos);
  EXPECT_NE(body.find("\nt20,t59,a->b,"), std::string::npos);
}

TEST(CliScan, WindowTooLongIsDataError) {
  const fs::path csv = bench_csv(scratch_dir(), 100);
  EXPECT_EQ(run_cli({"scan", "-i", csv.string(), "-t", "ts4", "-c", "ts3", "-w", "250", "--seed", "1"}).code, 3);
}

TEST(CliGen, DeterministicAndCommented) {
  const CliRun a = run_cli({"gen", "nonlinear-bench", "--seed", "4", "--length", "30"});
  const CliRun b = run_cli({"gen", "nonlinear-bench", "--seed", "4", "--length", "30"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("# experiment=nonlinear-bench\n"), std::string::npos);
  EXPECT_NE(a.out.find("\nx,y,z\n"), std::string::npos);
  const std::string body = strip_comments(a.out);
  EXPECT_EQ(std::count(body.begin(), body.end(), '\n'), 31);
  EXPECT_EQ(run_cli({"gen", "nonlinear-bench", "--a", "1.5"}).code, 2);
  EXPECT_EQ(run_cli({"gen", "other-bench"}).code, 2);
}

TEST(CliGen, OutputLoadsAsPanel) {
  const fs::path csv = bench_csv(scratch_dir(), 50);
  const TimeSeriesPanel p = load_csv(csv);
  EXPECT_EQ(p.length(), 50u);
  EXPECT_EQ(p.width(), 8u);
  LinearBenchmarkSpec spec;
  spec.length = 50;
  spec.seed = 11;
  const TimeSeriesPanel direct = generate_linear_benchmark(spec);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(p.column(j), direct.column(j));
}

TEST(CliReproduce, LinearBenchIsByteIdentical) {
  const fs::path dir = scratch_dir();
  const std::vector<std::string> common{"reproduce", "linear-bench", "--seed", "21", "--length", "80", "-n", "5",
                                        "--single-lags", "0,1", "--ranges", "1-3"};
  auto args_a = common, args_b = common;
  args_a.insert(args_a.end(), {"--output-dir", (dir / "a").string()});
  args_b.insert(args_b.end(), {"--output-dir", (dir / "b").string()});
  const CliRun a = run_cli(args_a);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(run_cli(args_b).code, 0);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir / "a")) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  const std::vector<std::string> expected{
      "lag0_geweke-kernel.csv", "lag0_geweke-kernel.json", "lag0_geweke-linear.csv", "lag0_geweke-linear.json",
      "lag0_mutual-information.csv", "lag0_mutual-information.json", "lag1_geweke-kernel.csv",
      "lag1_geweke-kernel.json", "lag1_geweke-linear.csv", "lag1_geweke-linear.json", "lag1_hsncic.csv",
      "lag1_hsncic.json", "lag1_transfer-entropy.csv", "lag1_transfer-entropy.json", "lags1-3_geweke-kernel.csv",
      "lags1-3_geweke-kernel.json", "lags1-3_geweke-linear.csv", "lags1-3_geweke-linear.json", "lags1-3_hsncic.csv",
      "lags1-3_hsncic.json", "panel.csv", "report.json"};
  EXPECT_EQ(names, expected);
  for (const auto& n : names) EXPECT_EQ(read_file(dir / "a" / n), read_file(dir / "b" / n)) << n;
}

TEST(CliReproduce, NonlinearBenchCells) {
  const fs::path dir = scratch_dir();
  const CliRun r = run_cli({"reproduce", "nonlinear-bench", "--seed", "3", "--realisations", "4", "--length", "120",
                            "-n", "10", "--output-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(strip_comments(read_file(dir / "realisations.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "realisation,measure,conditioning,value,p_value");
  std::map<std::string, int> cells;
  while (std::getline(in, line)) {
    const auto parts = cli::split(line);
    ++cells[parts[1] + "|" + parts[2]];
  }
  EXPECT_EQ(cells["geweke-linear|none"], 4);
  EXPECT_EQ(cells["geweke-linear|y"], 4);
  EXPECT_EQ(cells["geweke-kernel|none"], 4);
  EXPECT_EQ(cells["geweke-kernel|y"], 4);
  EXPECT_EQ(cells["hsncic|none"], 4);
  EXPECT_EQ(cells["hsncic|y"], 4);
  EXPECT_EQ(cells["transfer-entropy|none"], 4);
  const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(report["te_lag"], 2);
  EXPECT_TRUE(report["gaussian"]["sigma"].is_number());
}

TEST(CliThreads, EnvironmentOverrideKeepsOutput) {
  const fs::path dir = scratch_dir();
  const fs::path csv = bench_csv(dir);
  const std::string base = std::string(CAUSALKIT_CLI_PATH) + " test -i " + csv.string() +
                           " -t ts6 -c ts5 -m geweke-kernel --sigma 2 --gamma 0.001 -n 40 --seed 8 -o ";
  const fs::path one = dir / "one.json", four = dir / "four.json";
  ASSERT_EQ(std::system(("CAUSALKIT_THREADS=1 " + base + one.string()).c_str()), 0);
  ASSERT_EQ(std::system(("CAUSALKIT_THREADS=4 " + base + four.string()).c_str()), 0);
  EXPECT_EQ(read_file(one), read_file(four));
}

TEST(CliBinary, ExitCodesFromProcess) {
  const std::string bin = CAUSALKIT_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  EXPECT_EQ(status(bin + " --help"), 0);
  EXPECT_EQ(status(bin + " test"), 2);
  EXPECT_EQ(status(bin + " test -i /nonexistent.csv -t a -c b"), 3);
}
