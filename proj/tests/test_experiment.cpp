#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "support.hpp"

using namespace ftrv;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const char* text, const fs::path& base = {}) {
  return parse_experiment(nlohmann::json::parse(text), base);
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ftrv_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, FullExample) {
  const auto c = parse(R"({
    "graph": {"path": 7}, "mode": "coordinated", "n": 2, "memory": 3,
    "objective": "max{ET(v,0) for v in V}", "optimizer": {"steps": 10, "lr": 0.2, "prune": 0.0, "seeds": [3, 4]},
    "trials": 1000, "out": "runs/x", "kappa": 1, "alpha": 0})");
  ASSERT_TRUE(c.graph);
  EXPECT_EQ(c.graph->kind, GraphSource::Kind::path);
  EXPECT_EQ(load_graph(*c.graph), gen_path(7));
  EXPECT_EQ(c.spec(), SolutionSpec::coordinated(2, 3));
  EXPECT_EQ(c.optimizer.steps, 10u);
  EXPECT_EQ(c.optimizer.lr, 0.2);
  EXPECT_EQ(c.optimizer.prune, 0.0);
  EXPECT_EQ(c.optimizer.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(c.trials, 1000u);
  EXPECT_EQ(c.out, fs::path("runs/x"));
  EXPECT_EQ(c.kappa, 1.0);
  EXPECT_EQ(c.alpha, 0.0);
}

TEST(Config, DefaultsAndGraphSources) {
  const auto c = parse(R"({"graph": "p5.graph"})", FTRV_FIXTURES);
  EXPECT_EQ(c.mode, Mode::coordinated);
  EXPECT_EQ(c.agents, 2);
  EXPECT_EQ(c.optimizer.steps, 600u);
  EXPECT_EQ(c.optimizer.seeds.size(), 5u);
  EXPECT_EQ(load_graph(*c.graph), support::p5());

  const auto g = parse(R"({"graph": {"grid": {"width": 3, "height": 2, "removed": [["r0c0", "r0c1"]]}}})");
  EXPECT_EQ(load_graph(*g.graph), gen_grid(3, 2, {{"r0c0", "r0c1"}}));
  const auto t = parse(R"({"graph": {"triangle": {"chord": [1, 4]}}})");
  EXPECT_EQ(load_graph(*t.graph), gen_triangle(1, 4));
  const auto t0 = parse(R"({"graph": {"triangle": {}}})");
  EXPECT_EQ(load_graph(*t0.graph), gen_triangle());
}

TEST(Config, AutonomousMemoryList) {
  const auto c = parse(R"({"mode": "autonomous", "n": 2, "memory": [2, 3]})");
  EXPECT_EQ(c.spec(), SolutionSpec::autonomous({2, 3}));
  const auto bad = parse(R"({"mode": "autonomous", "n": 3, "memory": [2, 3]})");
  EXPECT_THROW(bad.spec(), ValidationError);
  const auto co = parse(R"({"mode": "coordinated", "memory": [2, 3]})");
  EXPECT_THROW(co.spec(), ValidationError);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse(R"({"grpah": "x"})"), ValidationError);
  EXPECT_THROW(parse(R"({"optimizer": {"step": 3}})"), ValidationError);
  EXPECT_THROW(parse(R"({"n": "two"})"), ValidationError);
  EXPECT_THROW(parse(R"({"graph": {"path": 3, "grid": {}}})"), ValidationError);
  EXPECT_THROW(parse(R"({"graph": {"triangle": {"chord": [1]}}})"), ValidationError);
  EXPECT_THROW(parse(R"({"mode": "swarm"})"), ValidationError);
  EXPECT_THROW(parse(R"([1, 2])"), ValidationError);
  EXPECT_THROW(load_experiment(fs::path(FTRV_FIXTURES) / "p5.graph"), ParseError);
  EXPECT_THROW(load_experiment(fs::path(FTRV_FIXTURES) / "missing.json"), ValidationError);
}

TEST(Config, Lists) {
  EXPECT_EQ(parse_seed_list("1,2,30"), (std::vector<std::uint64_t>{1, 2, 30}));
  EXPECT_THROW(parse_seed_list("1,,2"), ValidationError);
  EXPECT_THROW(parse_seed_list("x"), ValidationError);
  EXPECT_EQ(parse_memory_list("2,3"), (std::vector<int>{2, 3}));
  EXPECT_THROW(parse_memory_list("0"), ValidationError);
}

TEST(Report, FixedFormatting) {
  EXPECT_EQ(fixed(2.0, 2), "2.00");
  EXPECT_EQ(fixed(1.0 + std::sqrt(2.0), 6), "2.414214");
  EXPECT_EQ(fixed(std::nullopt), "N/A");
  EXPECT_EQ(fixed(std::numeric_limits<double>::quiet_NaN()), "N/A");
}

TEST(Report, SummaryCsvGolden) {
  SummaryRow row;
  row.mode = Mode::autonomous;
  row.memory = memory_text(SolutionSpec::autonomous({2, 3}));
  row.kappa = 1.0;
  row.alpha = 0.1;
  row.metrics.et_max = 1.0 + std::sqrt(2.0);
  row.metrics.vt_max = 1e-12;
  row.metrics.sqrt_vt_max = 1e-6;
  row.metrics.et_r_max = 5.0;
  row.step_time = 0.00123456;
  row.seed = 4;
  EXPECT_EQ(summary_csv(row), read_file(fs::path(FTRV_FIXTURES) / "../golden/summary.csv"));
  EXPECT_EQ(memory_text(SolutionSpec::coordinated(2, 3)), "3");
}

TEST(Report, JsonShape) {
  const auto env = support::p5();
  const auto sol = support::load_fixture(env, 'd');
  const auto obj = compile(parse_objective(support::fixture_objective('d')), env, sol.space->spec());
  const auto r = eval_objective(sol, obj);
  const auto j = report_to_json(r, *sol.space, obj);
  EXPECT_DOUBLE_EQ(j.at("U").get<double>(), r.u);
  EXPECT_DOUBLE_EQ(j.at("metrics").at("ET_R_max").get<double>(), 7.0);
  EXPECT_EQ(j.at("initial_config").get<std::string>(), r.initial_label);
  const auto& best = j.at("bsccs").at(r.chosen);
  EXPECT_TRUE(best.at("covered").get<bool>());
  EXPECT_EQ(best.at("atoms").size(), obj.atoms.size());
  EXPECT_EQ(best.at("summands").size(), 2u);
  EXPECT_EQ(best.at("summands")[1].at("weight").get<double>(), 0.5);
}

TEST(Commands, SynthWritesArtifacts) {
  const auto dir = scratch_dir("synth");
  auto c = parse(R"({"graph": {"path": 3}, "n": 1, "memory": 2, "objective": "max{ET(v,0) for v in V}",
                     "optimizer": {"steps": 30, "seeds": [1, 2]}, "trials": 2000, "kappa": 0, "alpha": 0})");
  const auto s = run_synth(c);
  write_synth(s, dir);
  for (const char* f : {"strategy.json", "report.json", "steps.csv", "summary.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(report.at("runs").size(), 2u);
  EXPECT_TRUE(report.contains("validation"));
  const auto steps = read_file(dir / "steps.csv");
  EXPECT_EQ(steps.rfind(kStepsHeader, 0), 0u);
  std::size_t rows = 0;
  for (const auto& r : s.result.runs) rows += r.steps.size();
  EXPECT_EQ(static_cast<std::size_t>(std::count(steps.begin(), steps.end(), '\n')), rows + 1);
  // the strategy file evaluates to the reported U
  const auto sol = parse_solution(s.env, read_file(dir / "strategy.json"));
  EXPECT_NEAR(eval_objective(sol, s.objective).u, report.at("U").get<double>(), 1e-12);
  fs::remove_all(dir);
}

TEST(Commands, MissingPieces) {
  ExperimentConfig c;
  EXPECT_THROW(run_synth(c), ValidationError);
  c.graph = GraphSource{GraphSource::Kind::path, {}, 3};
  EXPECT_THROW(run_synth(c), ValidationError);
  c.objective = "max{ET(Q,0)}";
  EXPECT_THROW(run_synth(c), ValidationError);
  c.objective = "max{ET(A,0)";
  EXPECT_THROW(run_synth(c), ParseError);
}
