#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ftrv/environment.hpp"
#include "ftrv/error.hpp"
#include "ftrv/objective.hpp"
#include "ftrv/optimizer.hpp"
#include "ftrv/report.hpp"
#include "ftrv/simulate.hpp"
#include "ftrv/strategy.hpp"

namespace ftrv {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed for " + p.string());
}

/// Either a graph file or one of the built-in generators.
struct GraphSource {
  enum class Kind { file, path, grid, triangle } kind = Kind::file;
  std::filesystem::path file;
  int length = 0;
  int width = 0;
  int height = 0;
  std::vector<std::pair<std::string, std::string>> removed;
  int chord_a = 0;
  int chord_b = 3;
};

inline Environment load_graph(const GraphSource& g) {
  switch (g.kind) {
    case GraphSource::Kind::file:
      return parse_graph(read_file(g.file));
    case GraphSource::Kind::path:
      return gen_path(g.length);
    case GraphSource::Kind::grid:
      return gen_grid(g.width, g.height, g.removed);
    case GraphSource::Kind::triangle:
      return gen_triangle(g.chord_a, g.chord_b);
  }
  throw ValidationError("unknown graph source");
}

struct ExperimentConfig {
  std::optional<GraphSource> graph;
  Mode mode = Mode::coordinated;
  int agents = 2;
  std::vector<int> memory{1};  // one entry, or one per agent (autonomous)
  std::string objective;
  OptimizerConfig optimizer;
  std::size_t trials = 0;  // Monte Carlo validation after synthesis; 0 skips it
  std::filesystem::path out;
  std::optional<double> kappa;  // labels for the summary row only
  std::optional<double> alpha;

  SolutionSpec spec() const {
    if (mode == Mode::coordinated) {
      if (memory.size() != 1) throw ValidationError("coordinated mode takes a single shared memory size");
      return SolutionSpec::coordinated(agents, memory[0]);
    }
    if (memory.size() == 1) return SolutionSpec::autonomous(agents, memory[0]);
    if (static_cast<int>(memory.size()) != agents)
      throw ValidationError("memory list has " + std::to_string(memory.size()) + " entries for " +
                            std::to_string(agents) + " agents");
    return SolutionSpec::autonomous(memory);
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
}

template <class T>
T get(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("missing or malformed '" + std::string(key) + "' in " + where);
  }
}

inline GraphSource parse_graph_source(const nlohmann::json& j, const std::filesystem::path& base) {
  GraphSource g;
  if (j.is_string()) {
    g.kind = GraphSource::Kind::file;
    g.file = base / j.get<std::string>();
    return g;
  }
  check_keys(j, {"path", "grid", "triangle"}, "graph");
  if (j.size() != 1) throw ValidationError("graph generator needs exactly one of path, grid, triangle");
  if (j.contains("path")) {
    g.kind = GraphSource::Kind::path;
    g.length = get<int>(j, "path", "graph");
  } else if (j.contains("grid")) {
    const auto& s = j["grid"];
    check_keys(s, {"width", "height", "removed"}, "grid");
    g.kind = GraphSource::Kind::grid;
    g.width = get<int>(s, "width", "grid");
    g.height = get<int>(s, "height", "grid");
    if (s.contains("removed"))
      g.removed = get<std::vector<std::pair<std::string, std::string>>>(s, "removed", "grid");
  } else {
    const auto& s = j["triangle"];
    check_keys(s, {"chord"}, "triangle");
    g.kind = GraphSource::Kind::triangle;
    if (s.contains("chord")) {
      const auto chord = get<std::vector<int>>(s, "chord", "triangle");
      if (chord.size() != 2) throw ValidationError("triangle chord needs two vertex indices");
      g.chord_a = chord[0];
      g.chord_b = chord[1];
    }
  }
  return g;
}

}  // namespace detail

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& part : detail::split_commas(text)) {
    std::uint64_t v = 0;
    auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size() || part.empty())
      throw ValidationError("bad seed '" + part + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty seed list");
  return out;
}

inline std::vector<int> parse_memory_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : detail::split_commas(text)) {
    int v = 0;
    auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size() || part.empty() || v < 1)
      throw ValidationError("bad memory size '" + part + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty memory list");
  return out;
}

/// Reads an experiment config. Relative graph paths resolve against `base`;
/// the output directory is taken as given.
inline ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  detail::check_keys(j, {"graph", "mode", "n", "memory", "objective", "optimizer", "trials", "out", "kappa", "alpha"},
                     "config");
  ExperimentConfig c;
  const std::string where = "config";
  if (j.contains("graph")) c.graph = detail::parse_graph_source(j["graph"], base);
  if (j.contains("mode")) c.mode = parse_mode(detail::get<std::string>(j, "mode", where));
  if (j.contains("n")) c.agents = detail::get<int>(j, "n", where);
  if (j.contains("memory")) {
    const auto& m = j["memory"];
    c.memory = m.is_array() ? detail::get<std::vector<int>>(j, "memory", where)
                            : std::vector<int>{detail::get<int>(j, "memory", where)};
  }
  if (j.contains("objective")) c.objective = detail::get<std::string>(j, "objective", where);
  if (j.contains("trials")) c.trials = detail::get<std::size_t>(j, "trials", where);
  if (j.contains("out")) c.out = detail::get<std::string>(j, "out", where);
  if (j.contains("kappa")) c.kappa = detail::get<double>(j, "kappa", where);
  if (j.contains("alpha")) c.alpha = detail::get<double>(j, "alpha", where);
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    detail::check_keys(o, {"steps", "lr", "prune", "seeds", "parallel"}, "optimizer");
    if (o.contains("steps")) c.optimizer.steps = detail::get<std::size_t>(o, "steps", "optimizer");
    if (o.contains("lr")) c.optimizer.lr = detail::get<double>(o, "lr", "optimizer");
    if (o.contains("prune")) c.optimizer.prune = detail::get<double>(o, "prune", "optimizer");
    if (o.contains("seeds")) c.optimizer.seeds = detail::get<std::vector<std::uint64_t>>(o, "seeds", "optimizer");
    if (o.contains("parallel")) c.optimizer.parallel = detail::get<bool>(o, "parallel", "optimizer");
  }
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment(j, file.parent_path());
}

// --- commands ----------------------------------------------------------------

struct SynthOutcome {
  Environment env;
  CompiledObjective objective;
  SynthesisResult result;
  EvaluationReport report;
  std::optional<ValidationReport> validation;
  SummaryRow summary;
};

inline Environment require_graph(const ExperimentConfig& c) {
  if (!c.graph) throw ValidationError("no graph given");
  return load_graph(*c.graph);
}

inline CompiledObjective require_objective(const ExperimentConfig& c, const Environment& env,
                                           const SolutionSpec& spec) {
  if (c.objective.empty()) throw ValidationError("no objective given");
  return compile(parse_objective(c.objective), env, spec);
}

inline SynthOutcome run_synth(const ExperimentConfig& c) {
  auto env = require_graph(c);
  const auto spec = c.spec();
  auto obj = require_objective(c, env, spec);
  auto result = synthesize(env, spec, obj, c.optimizer);
  const auto& best = result.best_run();
  // Re-evaluate the saved (pruned) strategy so the report matches the file.
  auto report = eval_objective(best.best_solution, obj);
  std::optional<ValidationReport> validation;
  if (c.trials > 0) validation = validate_solution(best.best_solution, obj, c.trials, best.seed);
  SummaryRow row{spec.mode, memory_text(spec), c.kappa, c.alpha, report.metrics, best.mean_step_seconds(), best.seed};
  return {std::move(env), std::move(obj), std::move(result), std::move(report), std::move(validation), row};
}

inline void write_synth(const SynthOutcome& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& best = s.result.best_run();
  write_file(dir / "strategy.json", serialize_solution(best.best_solution));
  auto report = report_to_json(s.report, *best.best_solution.space, s.objective);
  report["seed"] = best.seed;
  report["best_step"] = best.best_step;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.result.runs) {
    nlohmann::json j{{"seed", r.seed}, {"best_U", detail::finite_or_null(r.best_u)}, {"steps", r.steps.size()}};
    if (!r.error.empty()) j["stopped"] = r.error;
    runs.push_back(std::move(j));
  }
  report["runs"] = std::move(runs);
  if (s.validation) report["validation"] = validation_to_json(*s.validation);
  write_file(dir / "report.json", report.dump(1) + "\n");
  write_file(dir / "steps.csv", steps_csv(s.result));
  write_file(dir / "summary.csv", summary_csv(s.summary));
}

}  // namespace ftrv
