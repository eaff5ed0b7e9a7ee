#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "support.hpp"

using namespace ftrv;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args) {
  static int counter = 0;
  const auto base = fs::temp_directory_path() / ("ftrv_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  const auto out = base.string() + ".out";
  const auto err = base.string() + ".err";
  const std::string cmd = std::string(FTRV_CLI) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  fs::remove(out);
  fs::remove(err);
  return r;
}

std::string fixture(const std::string& name) { return "'" + support::fixture_path(name) + "'"; }

}  // namespace

TEST(Cli, EvalFixtureB) {
  const auto r = run("eval " + fixture("p5_b.json") + " --graph " + fixture("p5.graph") +
                     " --objective 'max{ET(v,0) for v in V}'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j.at("metrics").at("ET_max").get<double>(), 1.0 + std::sqrt(2.0), 1e-9);
}

TEST(Cli, EvalFixtureDOneFault) {
  const auto r = run("eval " + fixture("p5_d.json") + " --graph " + fixture("p5.graph") + " --objective '" +
                     support::fixture_objective('d') + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(r.out).at("metrics").at("ET_R_max").get<double>(), 7.0, 1e-9);
}

TEST(Cli, OracleOnPathOfThree) {
  const auto dir = fs::temp_directory_path() / "ftrv_cli_oracle";
  fs::remove_all(dir);
  const auto p3 = dir / "p3.graph";
  fs::create_directories(dir);
  write_file(p3, serialize_graph(gen_path(3)));
  const auto o = run("oracle --graph " + p3.string() + " --agents 1 --memory 2 --objective 'max{ET(v,0) for v in V}' --out " +
                     dir.string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(o.out).at("U").get<double>(), 3.0);
  EXPECT_TRUE(fs::exists(dir / "strategy.json"));
  // memoryless: nothing covers every vertex
  const auto none = run("oracle --graph " + p3.string() + " --agents 1 --objective 'max{ET(v,0) for v in V}'");
  EXPECT_EQ(none.code, 1);
  fs::remove_all(dir);
}

TEST(Cli, SimulateFixtureC) {
  const auto r = run("simulate " + fixture("p5_c.json") + " --graph " + fixture("p5.graph") +
                     " --objective 'max{ET(v,0) + VT(v,0) for v in V}' --trials 20000");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("flags").get<int>(), 0);
}

TEST(Cli, GradcheckP5) {
  const auto r = run("gradcheck --graph " + fixture("p5.graph") +
                     " --mode coordinated --agents 2 --memory 3 --objective 'max{ET(v,0) + sqrt(VT(v,0)) for v in V}' "
                     "--seeds 1,2 --coords 40");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LE(j.at("max_rel_error").get<double>(), 1e-4);
  EXPECT_GE(j.at("checked").get<int>(), 50);
}

TEST(Cli, SynthFromConfigWithOverrides) {
  const auto dir = fs::temp_directory_path() / "ftrv_cli_synth";
  fs::remove_all(dir);
  const auto cfg = std::string(FTRV_SOURCE_DIR) + "/configs/p5_m3_k0.json";
  const auto r = run("synth --config '" + cfg + "' --steps 15 --seeds 2 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind(kSummaryHeader, 0), 0u);
  for (const char* f : {"strategy.json", "report.json", "steps.csv", "summary.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(read_file(dir / "summary.csv"), r.out);
  // reproducible bit for bit
  const auto again = run("synth --config '" + cfg + "' --steps 15 --seeds 2 --out " + dir.string() + "_2");
  EXPECT_EQ(read_file(dir / "strategy.json"), read_file(fs::path(dir.string() + "_2") / "strategy.json"));
  fs::remove_all(dir);
  fs::remove_all(dir.string() + "_2");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("synth --bogus").code, 2);
  EXPECT_EQ(run("eval").code, 2);
  const auto bad = run("eval " + fixture("p5_a.json") + " --graph " + fixture("p5.graph") + " --objective 'max{ET(A,0)'");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("expected"), std::string::npos);
  EXPECT_EQ(run("synth --graph " + fixture("p5.graph") + " --objective 'max{ET(v,0) for v in V}'").code, 2);
  EXPECT_EQ(run("eval " + fixture("missing.json") + " --graph " + fixture("p5.graph") + " --objective 'max{ET(A,0)}'").code, 2);
  // well-formed but fixture (a) cannot cover the one-fault atoms
  const auto unc = run("eval " + fixture("p5_a.json") + " --graph " + fixture("p5.graph") +
                       " --objective 'max{ET(v,1) for v in V}'");
  EXPECT_EQ(unc.code, 1) << unc.out;
  EXPECT_EQ(run("--help").code, 0);
}
