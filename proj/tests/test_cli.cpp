#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "synth/json_io.hpp"

namespace fs = std::filesystem;
using synth::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("synth_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    write("pi.json", R"({"mass": [[0.4, 0.1], [0.1, 0.4]]})");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream f(path(name));
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  int run(std::vector<std::string> args) const {
    args.insert(args.begin(), "synth");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return synth::cli::run(static_cast<int>(argv.size()), argv.data());
  }

  fs::path dir_;
};

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_F(CliTest, MissingInputFileIsValidationError) {
  EXPECT_EQ(run({"coupling", "--pi", path("nope.json")}), 2);
  EXPECT_EQ(run({"exact-demo", "--pi", path("nope.json"), "--r0", "0.1", "--r", "1"}), 2);
}

TEST_F(CliTest, BadFlagsAreValidationErrors) {
  EXPECT_EQ(run({"regions"}), 2);
  EXPECT_EQ(run({"regions", "--dsbs", "0.2", "--units", "furlongs"}), 2);
  EXPECT_EQ(run({"regions", "--dsbs", "0.2", "--gaussian", "0.5"}), 2);
  EXPECT_EQ(run({"regions", "--pi", path("pi.json"), "--r0-grid", "0:1"}), 2);
  EXPECT_EQ(run({"regions", "--pi", path("pi.json"), "--bound", "outerish"}), 2);
  EXPECT_EQ(run({"coupling", "--pi", path("pi.json"), "--sense", "sideways"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
}

TEST_F(CliTest, CoverRejectsZeroTrialsAndUnknownKeys) {
  write("params.json", R"({"qw": {"mass": [0.5, 0.5]},
    "qx_given_w": {"mass": [[1, 0], [0, 1]]}, "qy_given_w": {"mass": [[0.8, 0.2], [0.2, 0.8]]},
    "n": 4, "r": 1.0, "r0": 0.5, "eps": 0.3})");
  EXPECT_EQ(run({"cover", "--params", path("params.json"), "--trials", "0"}), 2);
  write("bad.json", R"({"qw": {"mass": [0.5, 0.5]},
    "qx_given_w": {"mass": [[1, 0], [0, 1]]}, "qy_given_w": {"mass": [[0.8, 0.2], [0.2, 0.8]]},
    "n": 4, "r": 1.0, "r0": 0.5, "colour": "blue"})");
  EXPECT_EQ(run({"cover", "--params", path("bad.json"), "--trials", "2"}), 2);
  write("badpi.json", R"({"mass": [[0.5, 0.5]], "extra": 1})");
  EXPECT_EQ(run({"coupling", "--pi", path("badpi.json")}), 2);
}

TEST_F(CliTest, CoverReport) {
  write("params.json", R"({"qw": {"mass": [0.5, 0.5]},
    "qx_given_w": {"mass": [[1, 0], [0, 1]]}, "qy_given_w": {"mass": [[0.8, 0.2], [0.2, 0.8]]},
    "n": 4, "r": 1.0, "r0": 0.5, "eps": 0.3, "seed": 11})");
  ASSERT_EQ(run({"cover", "--params", path("params.json"), "--trials", "5", "--threshold", "100",
                 "--out", path("r.json")}),
            0);
  const json j = json::parse(slurp("r.json"));
  EXPECT_EQ(j["schema"], "synth-cover/1");
  EXPECT_EQ(j["n"], 4);
  EXPECT_EQ(j["trials"], 5);
  EXPECT_EQ(j["per_trial_deficits"].size(), 5u);
  EXPECT_EQ(j["rates"]["units"], "bits");
  EXPECT_DOUBLE_EQ(j["rates"]["r"].get<double>(), 1.0);
  EXPECT_EQ(j["config"]["resolved_params"]["eps"], 0.3);
  // 2^4 messages per key, 2^2 keys.
  EXPECT_EQ(j["messages"], 16);
  EXPECT_EQ(j["keys"], 4);
  const double f = j["fraction_below"].get<double>();
  EXPECT_GE(f, j["ci95"][0].get<double>());
  EXPECT_LE(f, j["ci95"][1].get<double>());

  ASSERT_EQ(run({"cover", "--params", path("params.json"), "--trials", "5", "--threshold", "100",
                 "--threads", "3", "--out", path("r3.json")}),
            0);
  const json k = json::parse(slurp("r3.json"));
  EXPECT_EQ(j["per_trial_deficits"], k["per_trial_deficits"]);
}

TEST_F(CliTest, DsbsCompareMarksInteriorStrict) {
  ASSERT_EQ(run({"regions", "--dsbs", "0.2", "--compare", "--points", "11", "--out", path("c.csv")}), 0);
  const std::string text = slurp("c.csv");
  EXPECT_EQ(text.rfind("# schema: synth-regions/1\n", 0), 0u);
  EXPECT_NE(text.find("# config: "), std::string::npos);
  const auto rows = csv_rows(text);
  ASSERT_EQ(rows.size(), 23u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"curve", "param", "R0", "R", "sum_bound", "r_bound", "strict"}));
  for (std::size_t i = 1; i <= 11; ++i) {
    const auto& ex = rows[i];
    const auto& tv = rows[i + 11];
    EXPECT_EQ(ex[0], "exact");
    EXPECT_EQ(tv[0], "tv");
    EXPECT_EQ(ex[1], tv[1]);
    const bool interior = i != 1 && i != 11;
    EXPECT_EQ(ex[6], interior ? "1" : "0") << i;
    EXPECT_GE(std::stod(ex[4]), std::stod(tv[4]) - 1e-12);
  }
  // a = p end: R = 1 - H2(0.2) bits.
  const double h2 = -(0.2 * std::log2(0.2) + 0.8 * std::log2(0.8));
  EXPECT_NEAR(std::stod(rows[11][5]), 1.0 - h2, 1e-12);
}

TEST_F(CliTest, GaussianCompareJson) {
  ASSERT_EQ(run({"regions", "--gaussian", "0.5", "--compare", "--points", "9", "--format", "json",
                 "--units", "nats", "--out", path("g.json")}),
            0);
  const json j = json::parse(slurp("g.json"));
  EXPECT_EQ(j["param_name"], "alpha");
  EXPECT_EQ(j["units"], "nats");
  ASSERT_EQ(j["rows"].size(), 18u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(j["rows"][i]["curve"], "exact-inner");
    EXPECT_GE(j["rows"][i]["sum_bound"].get<double>(), j["rows"][i + 9]["sum_bound"].get<double>());
  }
}

TEST_F(CliTest, SearchedCuffBoundaryIsAboveWynerValueAtZeroR0) {
  ASSERT_EQ(run({"regions", "--pi", path("pi.json"), "--bound", "cuff", "--r0-grid", "0:1:3",
                 "--restarts", "4", "--out", path("cuff.csv")}),
            0);
  const auto rows = csv_rows(slurp("cuff.csv"));
  ASSERT_EQ(rows.size(), 4u);
  // Common information of DSBS(0.2): 1 + H2(p) - 2 H2(a0), a0 = (1 - sqrt(1 - 2p)) / 2.
  auto h2 = [](double x) { return -(x * std::log2(x) + (1 - x) * std::log2(1 - x)); };
  const double a0 = (1.0 - std::sqrt(1.0 - 0.4)) / 2.0;
  const double wyner = 1.0 + h2(0.2) - 2.0 * h2(a0);
  const double r_at_zero = std::stod(rows[1][3]);
  EXPECT_GE(r_at_zero, wyner - 1e-9);
  EXPECT_LE(r_at_zero, wyner + 1e-3);
  // With enough common randomness R drops to I(X;Y) = 1 - H2(p).
  EXPECT_NEAR(std::stod(rows[3][3]), 1.0 - h2(0.2), 1e-6);
}

TEST_F(CliTest, CouplingMaxAndMin) {
  ASSERT_EQ(run({"coupling", "--pi", path("pi.json"), "--out", path("max.json")}), 0);
  const json j = json::parse(slurp("max.json"));
  EXPECT_EQ(j["schema"], "synth-coupling/1");
  // Uniform marginals: all mass on the off-diagonal, log2(1/0.1).
  EXPECT_NEAR(j["value"].get<double>(), std::log2(10.0), 1e-12);
  EXPECT_NEAR(j["coupling"][0][1].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(j["coupling"][1][0].get<double>(), 0.5, 1e-12);

  write("px.json", R"({"mass": [0.7, 0.3]})");
  ASSERT_EQ(run({"coupling", "--pi", path("pi.json"), "--px", path("px.json"), "--sense", "min",
                 "--units", "nats", "--out", path("min.json")}),
            0);
  const json m = json::parse(slurp("min.json"));
  // Diagonal as far as possible: 0.5 on (0,0), 0.3 on (1,1), 0.2 on (0,1).
  const double expect = 0.8 * std::log(1 / 0.4) + 0.2 * std::log(1 / 0.1);
  EXPECT_NEAR(m["value"].get<double>(), expect, 1e-12);
}

TEST_F(CliTest, ExactDemoHappyPathIsExactAndReproducible) {
  const std::vector<std::string> args{"exact-demo", "--pi", path("pi.json"), "--n", "8", "--r0", "0.15",
                                      "--r", "1.15", "--eps", "0.1", "--seed", "3"};
  auto a = args;
  a.insert(a.end(), {"--out", path("d1.json")});
  ASSERT_EQ(run(a), 0);
  auto b = args;
  b.insert(b.end(), {"--out", path("d2.json")});
  ASSERT_EQ(run(b), 0);
  EXPECT_EQ(slurp("d1.json"), slurp("d2.json"));

  const json j = json::parse(slurp("d1.json"));
  EXPECT_EQ(j["schema"], "synth-exact-demo/1");
  EXPECT_TRUE(j["finite"].get<bool>());
  EXPECT_LE(j["exactness_max_abs_error"].get<double>(), 1e-12);
  for (const char* k : {"deficit", "delta", "measured_rate", "rate_breakdown", "fallback_probability"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_GE(j["delta"].get<double>(), j["deficit"].get<double>());
  const auto& rb = j["rate_breakdown"];
  EXPECT_NEAR(rb["total"].get<double>(),
              rb["flag"].get<double>() + rb["code"].get<double>() + rb["fallback"].get<double>(), 1e-12);
  // 70 of 256 binary strings of length 8 have three to five ones.
  EXPECT_DOUBLE_EQ(j["pi_typical"].get<double>(), 70.0 / 256.0);
}

TEST_F(CliTest, ExactDemoRational) {
  ASSERT_EQ(run({"exact-demo", "--pi", path("pi.json"), "--n", "6", "--r0", "0", "--r", "1.6", "--eps", "0.2",
                 "--rational", "--out", path("q.json")}),
            0);
  const json j = json::parse(slurp("q.json"));
  EXPECT_TRUE(j["rational_exact"].get<bool>());
  EXPECT_LE(j["exactness_max_abs_error"].get<double>(), 1e-15);
  EXPECT_EQ(run({"exact-demo", "--pi", path("pi.json"), "--n", "7", "--r0", "0", "--r", "1.6", "--rational"}), 2);
}

TEST_F(CliTest, ExactDemoUncoveredReportsNumericFailure) {
  // Rate far below what the typical set needs: some key cannot encode a typical x^n.
  EXPECT_EQ(run({"exact-demo", "--pi", path("pi.json"), "--n", "6", "--r0", "0", "--r", "0.1",
                 "--out", path("u.json")}),
            3);
  const json j = json::parse(slurp("u.json"));
  EXPECT_FALSE(j["finite"].get<bool>());
  EXPECT_EQ(j["deficit"], "inf");
}

TEST_F(CliTest, DecompositionFile) {
  write("dec.json", R"({"pw": {"mass": [0.5, 0.5]}, "px_given_w": {"mass": [[1, 0], [0, 1]]},
                        "py_given_w": {"mass": [[0.8, 0.2], [0.2, 0.8]]}})");
  ASSERT_EQ(run({"exact-demo", "--pi", path("pi.json"), "--n", "8", "--r0", "0.15", "--r", "1.15", "--eps", "0.1",
                 "--seed", "3", "--decomposition", path("dec.json"), "--out", path("f.json")}),
            0);
  EXPECT_LE(json::parse(slurp("f.json"))["exactness_max_abs_error"].get<double>(), 1e-12);
  write("wrong.json", R"({"pw": {"mass": [1.0]}, "px_given_w": {"mass": [[0.5, 0.5]]},
                          "py_given_w": {"mass": [[0.5, 0.5]]}})");
  EXPECT_EQ(run({"exact-demo", "--pi", path("pi.json"), "--r0", "0", "--r", "1", "--decomposition",
                 path("wrong.json")}),
            2);
}
