#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mindiff/cli.hpp"
#include "mindiff/error.hpp"
#include "mindiff/examples.hpp"
#include "mindiff/io.hpp"
#include "mindiff/target_law.hpp"

using namespace mindiff;

namespace {

struct CliRun {
  int code = 0;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path scratch() {
  const auto dir = std::filesystem::temp_directory_path() / "mindiff_cli_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Data rows of a CSV artifact, comment lines skipped.
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream l(line);
    std::string cell;
    while (std::getline(l, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const std::vector<ExampleReport>& all_reports() {
  static const std::vector<ExampleReport> reports = [] {
    std::vector<ExampleReport> r;
    ExampleOptions o;
    o.seed = 20;
    for (const std::string& name : example_names()) r.push_back(run_example(name, o));
    return r;
  }();
  return reports;
}

}  // namespace

TEST(Cli, SameSeedGivesIdenticalBytes) {
  const std::vector<std::string> args{"simulate", "blj", "--law", "jump3", "--x0", "0.4", "--paths", "2000",
                                      "--delta", "0.01", "--seed", "11", "--probes", "0.25", "0.75"};
  const CliRun a = cli(args), b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  std::vector<std::string> one = args, four = args;
  one.insert(one.end(), {"--threads", "1"});
  four.insert(four.end(), {"--threads", "4"});
  EXPECT_EQ(cli(one).out, a.out);
  EXPECT_EQ(cli(four).out, a.out);
  std::vector<std::string> json = args;
  json.insert(json.end(), {"--format", "json"});
  EXPECT_EQ(cli(json).out, cli(json).out);
  std::vector<std::string> other = args;
  other[11] = "12";
  EXPECT_NE(cli(other).out, a.out);
}

TEST(Cli, CsvRowsCarryThePathRecord) {
  const CliRun r = cli({"simulate", "exp", "--law", "jump3", "--x0", "0.5", "--paths", "50", "--delta", "0.01", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("# schema_version: 1\n# config: {", 0), 0u);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 51u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"path", "value", "gamma", "l_x0", "steps", "censored"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(std::stoul(rows[i][0]), i - 1);
    const double v = std::stod(rows[i][1]);
    EXPECT_TRUE(v == 0.0 || v == 0.5 || v == 1.0) << v;
  }
}

TEST(Cli, ClassifyJump3AtWSix) {
  // kappa = kappa0 = 1/3, so W = 2 / kappa = 6.
  const CliRun r = cli({"classify", "--law", "jump3", "--x0", "0.5", "--lambda", "1", "--kappa", "min"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("left"), "absorbing");
  EXPECT_EQ(j.at("right"), "absorbing");
  EXPECT_EQ(j.at("minimal"), true);
  EXPECT_EQ(j.at("config").at("kappa"), "min");

  const Json w5 = Json::parse(cli({"classify", "--law", "jump3", "--x0", "0.5", "--kappa", "0.4"}).out);
  EXPECT_EQ(w5.at("left"), "sticky-reflecting");
  EXPECT_EQ(w5.at("minimal"), false);
}

TEST(Cli, PlotDataColumnsAgree) {
  for (const char* x0 : {"0.5", "0.4"}) {
    const CliRun r = cli({"plot-data", "--law", "jump3", "--x0", x0, "--kappa", "0.5", "--points", "101"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 102u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "u", "kappa_minus_v"}));
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double x = std::stod(rows[i][0]), u = std::stod(rows[i][1]), w = std::stod(rows[i][2]);
      EXPECT_NEAR(u, w, 1e-12) << x;
      // Independent value: kappa - |x - x0| + U(x0) - U(x) with U the jump3 potential.
      const double a = std::stod(x0);
      auto pot = [](double y) { return (std::abs(y) + std::abs(y - 0.5) + std::abs(y - 1.0)) / 3.0; };
      EXPECT_NEAR(u, 0.5 - (pot(a) - pot(x) + std::abs(x - a)), 1e-12) << x;
    }
  }
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli({"simulate", "blj", "--law", "jump3", "--x0", "0.4"}).code, kExitUsage);  // no seed
  EXPECT_EQ(cli({"classify", "--law", "no-such-law", "--x0", "0.5"}).code, kExitUsage);
  EXPECT_EQ(cli({"classify", "--law", "jump3", "--x0", "0.5", "--kappa", "0.1"}).code, kExitUsage);  // below kappa0
  EXPECT_EQ(cli({"classify", "--law", "jump3", "--x0", "0.5", "--kappa", "abc"}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"kappa0", "--law", "jump3", "--format", "csv"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitPass);
  // Every path censored: the checks cannot pass.
  EXPECT_EQ(cli({"verify", "--law", "jump3", "--x0", "0.4", "--paths", "100", "--delta", "0.01", "--seed", "1",
                 "--max-steps", "1"})
                .code,
            kExitVerification);
  const CliRun ok = cli({"verify", "--law", "jump3", "--x0", "0.4", "--paths", "20000", "--delta", "0.01", "--seed", "1"});
  EXPECT_EQ(ok.code, kExitPass) << ok.out;
}

TEST(Cli, OutputsReproduceFromTheirConfig) {
  const auto dir = scratch();
  const std::string sim = (dir / "sim.csv").string(), rep = (dir / "rep.json").string();
  ASSERT_EQ(cli({"simulate", "exp", "--law", "jump3", "--x0", "0.4", "--paths", "500", "--delta", "0.01", "--seed",
                 "9", "--out", sim})
                .code,
            0);
  const CliRun again = cli({"reproduce", "--config", sim, "--threads", "2"});
  EXPECT_EQ(again.code, 0) << again.out;
  EXPECT_EQ(Json::parse(again.out).at("identical"), true);

  const int code = cli({"run-example", "jump3", "--seed", "4", "--paths", "2000", "--out", rep}).code;
  ASSERT_TRUE(code == kExitPass || code == kExitVerification);
  EXPECT_EQ(cli({"reproduce", "--config", rep}).code, 0);

  // A tampered artifact no longer matches.
  std::string text = slurp(sim);
  text.back() = text.back() == '\n' ? ' ' : '\n';
  std::ofstream(sim, std::ios::binary) << text;
  EXPECT_EQ(cli({"reproduce", "--config", sim}).code, kExitVerification);
}

TEST(Cli, ConfigFileSuppliesUnsetFlags) {
  const auto dir = scratch();
  const std::string cfg = (dir / "cfg.json").string();
  std::ofstream(cfg) << R"({"law": "jump3", "x0": 0.5, "kappa": 0.4})";
  const Json from_file = Json::parse(cli({"classify", "--config", cfg}).out);
  EXPECT_EQ(from_file.at("left"), "sticky-reflecting");
  // Command-line flags win over the file.
  const Json overridden = Json::parse(cli({"classify", "--config", cfg, "--kappa", "min"}).out);
  EXPECT_EQ(overridden.at("left"), "absorbing");
}

TEST(Cli, BuildSpeedThenToLawRecoversTheLaw) {
  const auto dir = scratch();
  const std::string speed = (dir / "speed.json").string(), law = (dir / "law.json").string();
  ASSERT_EQ(cli({"build-speed", "--law", "jump3", "--x0", "0.5", "--kappa", "0.4", "--out", speed}).code, 0);
  ASSERT_EQ(cli({"to-law", "--speed", speed, "--x0", "0.5", "--out", law}).code, 0);
  const TargetLaw back = load_law(law);
  ASSERT_EQ(back.atoms().size(), 3u);
  for (const Atom& a : back.atoms()) EXPECT_NEAR(a.mass, 1.0 / 3.0, 1e-6) << a.x;
  const CliRun k0 = cli({"kappa0", "--law", law, "--x0", "0.5"});
  EXPECT_NEAR(Json::parse(k0.out).at("kappa0").get<double>(), 1.0 / 3.0, 1e-6);
}

TEST(Cli, EigenWritesProfiles) {
  const CliRun r = cli({"eigen", "--speed", "lebesgue", "--x0", "1", "--lambda", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_GT(rows.size(), 100u);
  for (std::size_t i = 1; i < rows.size(); i += 97) {
    const double x = std::stod(rows[i][0]);
    // Reflecting Brownian motion on [0, 2]: cosh profiles.
    EXPECT_NEAR(std::stod(rows[i][1]), std::cosh(x) / std::cosh(1.0), 1e-6) << x;
    EXPECT_NEAR(std::stod(rows[i][2]), std::cosh(2.0 - x) / std::cosh(1.0), 1e-6) << x;
  }
}

TEST(Examples, EveryExamplePasses) {
  for (const ExampleReport& r : all_reports()) {
    EXPECT_TRUE(r.pass()) << r.name;
    for (const Check& c : r.checks)
      if (!c.informational) EXPECT_TRUE(c.pass) << r.name << ": " << c.name << " " << c.statistic << " vs " << c.expected;
  }
}

TEST(Examples, PipelinesCoverThePublicOperations) {
  std::set<std::string> used;
  for (const ExampleReport& r : all_reports()) used.insert(r.operations.begin(), r.operations.end());
  for (const std::string& op : public_operations()) EXPECT_TRUE(used.count(op)) << op;
  EXPECT_THROW(run_example("nope"), InputError);
}
