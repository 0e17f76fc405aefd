#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kslyap/cli.hpp"
#include "test_support.hpp"

using namespace kslyap;
using kslyap::testing::scratch_dir;
using kslyap::testing::slurp;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "kslyap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> w;
  for (std::string t; in >> t;) w.push_back(t);
  return w;
}

std::string meta_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  const std::string prefix = "# " + key + " = ";
  for (std::string line; std::getline(in, line);)
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  return {};
}

/// Data rows (non-comment lines after the first header) of a CSV text.
std::vector<std::vector<std::string>> data_rows(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::vector<std::string>> rows;
  bool header = false;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> f;
    for (auto v : split_csv(line)) f.emplace_back(v);
    rows.push_back(f);
  }
  return rows;
}

std::vector<double> exponents_of(const Outcome& o) {
  std::vector<double> e;
  for (const auto& r : data_rows(o.out)) e.push_back(std::stod(r.at(1)));
  return e;
}

/// Re-runs the `# command` line of an output file.
Outcome rerun_command(const std::string& text) {
  auto words = split_words(meta_value(text, "command"));
  EXPECT_FALSE(words.empty());
  words.erase(words.begin());
  return run_cli(words);
}

}  // namespace

TEST(Cli, LyapDiagonalOracle) {
  const auto o = run_cli({"lyap", "--system", "diaglin", "--tau", "0", "--T", "1", "--N", "50"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto e = exponents_of(o);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_NEAR(e[0], 0.3, 1e-3);
  EXPECT_NEAR(e[1], -0.1, 1e-3);
  EXPECT_NEAR(e[2], -2.0, 1e-3);
  EXPECT_EQ(meta_value(o.out, "m"), "3");
}

TEST(Cli, LyapLorenzOracle) {
  const auto o = run_cli({"lyap", "--system", "lorenz", "--tau", "100", "--T", "0.5", "--N", "2000"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto e = exponents_of(o);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_NEAR(e[1], 0.0, 0.02);
  EXPECT_NEAR(e[0] + e[1] + e[2], -13.6667, 0.15);
}

TEST(Cli, LyapPeriodicL22MatchesReference) {
  const auto o = run_cli({"lyap", "--bc", "periodic", "--L", "22", "--m", "12"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto e = exponents_of(o);
  const double ref[] = {0.043, 0.003, 0.002, -0.004};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(e[static_cast<std::size_t>(i)], ref[i], 0.01) << i;
}

TEST(Cli, LyapOddL17p5IsNotChaotic) {
  const auto o = run_cli({"lyap", "--bc", "odd", "--L", "17.5", "--m", "12"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto e = exponents_of(o);
  EXPECT_LE(e[0], 0.005);
  EXPECT_EQ(std::stod(meta_value(o.out, "dky")), 0.0);
  EXPECT_NE(meta_value(o.out, "flag").find("nonchaotic"), std::string::npos);
}

TEST(Cli, LyapOutputReproducesByteForByte) {
  const auto dir = scratch_dir("cli_repro");
  const auto path = (dir / "l.csv").string();
  const auto o = run_cli({"lyap", "--bc", "odd", "--L", "12", "--m", "4", "--tau", "20", "--N", "10", "--out", path});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto first = slurp(path);
  EXPECT_EQ(meta_value(first, "epsilon"), "9.9999999999999995e-07");
  EXPECT_EQ(read_results(path).records.size(), 1u);
  std::filesystem::remove(path);
  ASSERT_EQ(rerun_command(first).code, 0);
  EXPECT_EQ(slurp(path), first);
}

TEST(Cli, LyapIntervalScan) {
  const auto o = run_cli({"lyap", "--system", "diaglin", "--rates", "0.3,-0.1", "--tau", "0", "--N", "40",
                          "--scan-T", "0.5,1,2,4"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = data_rows(o.out);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_EQ(r[1], "ok");
    EXPECT_NEAR(std::stod(r[2]), 0.3, 1e-3);
    EXPECT_NEAR(std::stod(r[3]), -0.1, 1e-3);
  }
}

TEST(Cli, SimulateZeroTimeHasOnlyInitialRow) {
  const auto o = run_cli({"simulate", "--L", "22", "--t-end", "0"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = data_rows(o.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0][0], "0");
  DomainSpec spec;
  const auto ks = make_ks(spec);
  const auto f = physical_field(ks, ks.system.sample_initial(0));
  ASSERT_EQ(rows[0].size(), f.u.size() + 1);
  EXPECT_EQ(std::stod(rows[0][1]), f.u[0]);
}

TEST(Cli, SimulateL12TravellingWave) {
  const auto o = run_cli({"simulate", "--L", "12", "--t-end", "500"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = data_rows(o.out);
  ASSERT_EQ(rows.size(), 1001u);
  // u(x0, t) over the second half: one frequency carries most of the power
  std::vector<double> s;
  for (std::size_t k = 500; k < rows.size(); ++k) s.push_back(std::stod(rows[k][1]));
  double mean = 0;
  for (double v : s) mean += v / static_cast<double>(s.size());
  const std::size_t n = s.size();
  std::vector<double> power(n / 2 + 1);
  for (std::size_t q = 1; q <= n / 2; ++q) {
    std::complex<double> acc = 0;
    for (std::size_t t = 0; t < n; ++t)
      acc += (s[t] - mean) * std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(q * t) / static_cast<double>(n));
    power[q] = std::norm(acc);
  }
  double total = 0;
  for (double p : power) total += p;
  const auto peak = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
  double near_peak = 0;
  for (std::size_t q = peak > 2 ? peak - 2 : 1; q <= std::min(peak + 2, n / 2); ++q) near_peak += power[q];
  EXPECT_GT(near_peak / total, 0.5);

  const auto ly = run_cli({"lyap", "--L", "12", "--m", "6"});
  ASSERT_EQ(ly.code, 0) << ly.err;
  EXPECT_NEAR(exponents_of(ly)[0], 0.003, 0.01);
}

TEST(Cli, SimulateOddL17p5Bounded) {
  const auto o = run_cli({"simulate", "--bc", "odd", "--L", "17.5", "--t-end", "300", "--dt-out", "1"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = data_rows(o.out);
  double late_max = 0, late_min = 1e300;
  for (std::size_t k = 150; k < rows.size(); ++k) {
    double amp = 0;
    for (std::size_t i = 1; i < rows[k].size(); ++i) amp = std::max(amp, std::abs(std::stod(rows[k][i])));
    late_max = std::max(late_max, amp);
    late_min = std::min(late_min, amp);
  }
  EXPECT_LT(late_max, 10.0);
  EXPECT_GT(late_min, 0.1);
}

TEST(Cli, ConfigFileWithCommandLineOverride) {
  const auto dir = scratch_dir("cli_config");
  std::ofstream(dir / "c.cfg") << "# run settings\nsystem = diaglin\ntau = 0\nN = 20\nT = 1\nrates = 0.5, -1\n";
  const auto o = run_cli({"lyap", "--config", (dir / "c.cfg").string(), "--N", "30"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(meta_value(o.out, "N"), "30");
  EXPECT_EQ(meta_value(o.out, "tau"), "0");
  EXPECT_EQ(meta_value(o.out, "rates"), "0.5,-1");
  EXPECT_NEAR(exponents_of(o)[0], 0.5, 1e-3);
  std::ofstream(dir / "bad.cfg") << "unknown_key = 3\n";
  EXPECT_NE(run_cli({"lyap", "--config", (dir / "bad.cfg").string()}).code, 0);
}

TEST(Cli, SweepEmptyGridFails) {
  const auto dir = scratch_dir("cli_empty");
  const auto o = run_cli({"sweep", "--L-start", "12", "--L-end", "10", "--out", (dir / "r.csv").string()});
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.err.find("empty grid"), std::string::npos);
}

TEST(Cli, SweepThenRerunPrintedCommand) {
  const auto dir = scratch_dir("cli_sweep");
  const auto path = (dir / "r.csv").string();
  const auto o = run_cli({"sweep", "--L-start", "10", "--L-end", "11", "--dL", "1", "--m", "4", "--tau", "20",
                          "--N", "10", "--T", "1", "--workers", "2", "--out", path});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto first = slurp(path);
  EXPECT_EQ(read_results(path).records.size(), 2u);
  std::filesystem::remove(path);
  ASSERT_EQ(rerun_command(first).code, 0);
  EXPECT_EQ(slurp(path), first);
}

TEST(Cli, FitRecoversSyntheticLaw) {
  const auto dir = scratch_dir("cli_fit");
  std::vector<SpectrumRecord> recs;
  for (double Lc : {55.0, 65.0, 75.0, 85.0, 95.0})
    for (int k = -10; k <= 10; ++k) {
      const double L = Lc + 0.1 * k;
      Vector e(12);
      for (Eigen::Index i = 0; i < 12; ++i) e[i] = predict_exponent(static_cast<std::size_t>(i + 1), L);
      recs.push_back(make_record(L, BoundaryCondition::Periodic, 0, e));
    }
  const auto path = (dir / "syn.csv").string();
  write_results(path, {{"dL", "0.1"}}, 12, recs);
  const auto out = (dir / "fit.txt").string();
  const auto o = run_cli({"fit", path, "--out", out});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto text = slurp(out);
  EXPECT_EQ(meta_value(text, "centers"), "55,65,75,85,95");
  std::istringstream in(text);
  bool fits = false;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("# table = fits", 0) == 0) fits = true;
    if (!fits || line.rfind("best,", 0) != 0) continue;
    std::vector<std::string> f;
    for (auto v : split_csv(line)) f.emplace_back(v);
    EXPECT_NEAR(std::stod(f[1]), 1.0, 0.02);
    EXPECT_NEAR(std::stod(f[2]), 0.093, 1e-6);
    EXPECT_NEAR(std::stod(f[5]), 0.39, 1e-6);
  }
  EXPECT_TRUE(fits);
  EXPECT_EQ(rerun_command(text).code, 0);
  EXPECT_EQ(slurp(out), text);
}

TEST(Cli, DkyOverReferenceDomainSizes) {
  const auto dir = scratch_dir("cli_dky");
  const auto path = (dir / "r.csv").string();
  for (const char* L : {"12", "13.5", "22", "36", "60", "100"}) {
    const auto o = run_cli({"sweep", "--L-start", L, "--L-end", L, "--dL", "0.5", "--out", path, "--resume"});
    ASSERT_EQ(o.code, 0) << o.err;
  }
  const auto o = run_cli({"dky", path, "--Lmin-fit", "0"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = data_rows(o.out);
  const auto file = read_results(path);
  ASSERT_EQ(file.records.size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) {
    if (file.records[k].flags.failed) {
      // the travelling wave at L=12 leaves m=24 frame columns that vanish exactly
      EXPECT_EQ(file.records[k].L, 12.0);
      EXPECT_NE(rows[k][2].find("failed"), std::string::npos);
      continue;
    }
    // independent evaluation of the Kaplan-Yorke sum
    const Vector& e = file.records[k].exponents;
    double s = 0, d = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      if (s + e[i] < 0) {
        d = static_cast<double>(i) + s / std::abs(e[i]);
        break;
      }
      s += e[i];
    }
    if (e[0] < 0) d = 0;
    EXPECT_NEAR(std::stod(rows[k][1]), d, 1e-9);
  }
  EXPECT_NEAR(std::stod(rows[5][1]), 22.44, 0.05);
  std::istringstream in(o.out);
  double slope = 0;
  for (std::string line; std::getline(in, line);)
    if (line.rfind("0,", 0) == 0) slope = std::stod(std::string(split_csv(line)[1]));
  EXPECT_GT(slope, 0.0);
}

TEST(Cli, SchemaErrorsExitNonzeroWithLine) {
  const auto dir = scratch_dir("cli_schema");
  const auto path = (dir / "bad.csv").string();
  std::ofstream(path) << "L,bc,seed,flag,dky,j,lambda_1\n22,periodic,0,ok,0,0\n";
  const auto o = run_cli({"dky", path});
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.err.find("line 2"), std::string::npos) << o.err;
  EXPECT_NE(run_cli({"fit", path}).code, 0);
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run_cli({}).code, 0);
  EXPECT_NE(run_cli({"lyap", "--bogus"}).code, 0);
  EXPECT_NE(run_cli({"lyap", "--bc", "rigid"}).code, 0);
  EXPECT_NE(run_cli({"lyap", "--system", "lorenz", "--m", "4"}).code, 0);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, ExecutableExitStatus) {
  const std::string exe = KSLYAP_CLI_PATH;
  EXPECT_EQ(std::system((exe + " lyap --system diaglin --tau 0 --N 5 > /dev/null 2>&1").c_str()), 0);
  EXPECT_NE(std::system((exe + " sweep --L-start 5 --L-end 1 --out /tmp/kslyap_x.csv > /dev/null 2>&1").c_str()), 0);
}
