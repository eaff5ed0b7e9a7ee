// Command-line front end: synthesis, exact evaluation, Monte Carlo
// validation, deterministic baseline and gradient checking.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ftrv/ftrv.hpp"

namespace {

struct Flags {
  std::string config;
  std::string graph;
  std::string objective;
  int agents = 0;
  std::string memory;
  std::string mode;
  std::size_t steps = 0;
  double lr = 0.0;
  double prune = -1.0;
  std::string seeds;
  std::string out;
  std::size_t trials = 0;
  std::string strategy;
  std::uint64_t limit = ftrv::kBruteForceLimit;
  double fd_step = 1e-5;
  std::size_t coords = 50;
  std::uint64_t seed = 1;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "experiment config (JSON)");
  cmd->add_option("--graph", f.graph, "graph file");
  cmd->add_option("--objective", f.objective, "objective string");
  cmd->add_option("--out", f.out, "output directory");
}

void add_spec(CLI::App* cmd, Flags& f) {
  cmd->add_option("--agents", f.agents, "number of agents")->check(CLI::Range(1, 31));
  cmd->add_option("--memory", f.memory, "memory size, or comma list per agent (autonomous)");
  cmd->add_option("--mode", f.mode, "autonomous | coordinated");
}

void add_optimizer(CLI::App* cmd, Flags& f) {
  cmd->add_option("--steps", f.steps, "optimization steps per seed");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--prune", f.prune, "zero action probabilities below this value (0 keeps full support)");
  cmd->add_option("--seeds", f.seeds, "comma-separated seeds");
}

/// Config file first, then explicit flags on top.
ftrv::ExperimentConfig merge(const Flags& f) {
  ftrv::ExperimentConfig c;
  if (!f.config.empty()) c = ftrv::load_experiment(f.config);
  if (!f.graph.empty()) {
    ftrv::GraphSource g;
    g.file = f.graph;
    c.graph = g;
  }
  if (!f.objective.empty()) c.objective = f.objective;
  if (f.agents > 0) c.agents = f.agents;
  if (!f.memory.empty()) c.memory = ftrv::parse_memory_list(f.memory);
  if (!f.mode.empty()) c.mode = ftrv::parse_mode(f.mode);
  if (f.steps > 0) c.optimizer.steps = f.steps;
  if (f.lr > 0.0) c.optimizer.lr = f.lr;
  if (f.prune >= 0.0) c.optimizer.prune = f.prune;
  if (!f.seeds.empty()) c.optimizer.seeds = ftrv::parse_seed_list(f.seeds);
  if (!f.out.empty()) c.out = f.out;
  if (f.trials > 0) c.trials = f.trials;
  return c;
}

ftrv::Solution load_strategy(const ftrv::Environment& env, const std::string& file) {
  return ftrv::parse_solution(env, ftrv::read_file(file));
}

int cmd_synth(const Flags& f) {
  const auto c = merge(f);
  if (c.out.empty()) throw ftrv::ValidationError("synth needs an output directory (--out or \"out\" in the config)");
  const auto s = ftrv::run_synth(c);
  ftrv::write_synth(s, c.out);
  std::cout << ftrv::summary_csv(s.summary);
  if (s.validation && !s.validation->ok()) {
    std::cerr << "validation: " << s.validation->flags() << " atom(s) disagree with simulation\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const Flags& f) {
  const auto c = merge(f);
  const auto env = ftrv::require_graph(c);
  const auto sol = load_strategy(env, f.strategy);
  const auto obj = ftrv::require_objective(c, env, sol.space->spec());
  const auto report = ftrv::eval_objective(sol, obj);
  const auto text = ftrv::report_to_json(report, *sol.space, obj).dump(1) + "\n";
  if (!c.out.empty()) {
    std::filesystem::create_directories(c.out);
    ftrv::write_file(c.out / "report.json", text);
  }
  std::cout << text;
  return 0;
}

int cmd_simulate(const Flags& f) {
  auto c = merge(f);
  const auto env = ftrv::require_graph(c);
  const auto sol = load_strategy(env, f.strategy);
  const auto obj = ftrv::require_objective(c, env, sol.space->spec());
  const std::size_t trials = c.trials > 0 ? c.trials : 100'000;
  const auto v = ftrv::validate_solution(sol, obj, trials, f.seed);
  std::cout << ftrv::validation_to_json(v).dump(1) << "\n";
  if (!v.ok()) {
    std::cerr << "validation: " << v.flags() << " atom(s) disagree with simulation\n";
    return 1;
  }
  return 0;
}

int cmd_oracle(const Flags& f) {
  const auto c = merge(f);
  const auto env = ftrv::require_graph(c);
  const auto spec = c.spec();
  const auto obj = ftrv::require_objective(c, env, spec);
  const auto r = ftrv::brute_force_deterministic(env, spec, obj, f.limit);
  nlohmann::json j{{"U", ftrv::detail::finite_or_null(r.u)},
                   {"candidates", r.candidates},
                   {"uncoverable", r.uncoverable}};
  if (r.report) j["metrics"] = ftrv::metrics_to_json(r.report->metrics);
  if (r.witness && !c.out.empty()) {
    std::filesystem::create_directories(c.out);
    ftrv::write_file(c.out / "strategy.json", ftrv::serialize_solution(*r.witness));
  }
  std::cout << j.dump(1) << "\n";
  if (!r.witness) {
    std::cerr << "no deterministic solution covers every atom\n";
    return 1;
  }
  return 0;
}

int cmd_gradcheck(const Flags& f) {
  auto c = merge(f);
  if (f.prune < 0.0) c.optimizer.prune = 0.0;  // smooth by default
  const auto env = ftrv::require_graph(c);
  const auto spec = c.spec();
  const auto obj = ftrv::require_objective(c, env, spec);
  const auto space = ftrv::make_space(env, spec);
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  for (auto seed : c.optimizer.seeds) {
    const auto params = ftrv::init_params(space, seed);
    const auto r = ftrv::finite_diff_check(params, obj, f.fd_step, f.coords, seed, c.optimizer.prune);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    excluded += r.excluded;
  }
  std::cout << nlohmann::json{{"max_rel_error", worst}, {"checked", checked}, {"excluded", excluded}}.dump(1) << "\n";
  return worst <= 1e-4 && checked > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault-tolerant randomized patrolling strategies"};
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "synthesize a strategy by gradient descent");
  add_common(synth, f);
  add_spec(synth, f);
  add_optimizer(synth, f);
  synth->add_option("--trials", f.trials, "Monte Carlo trials for validating the result (0 skips)");

  auto* eval = app.add_subcommand("eval", "evaluate a strategy file exactly");
  eval->add_option("strategy", f.strategy, "strategy file")->required();
  add_common(eval, f);

  auto* sim = app.add_subcommand("simulate", "check a strategy's atoms against Monte Carlo estimates");
  sim->add_option("strategy", f.strategy, "strategy file")->required();
  add_common(sim, f);
  sim->add_option("--trials", f.trials, "trials per atom (default 100000)");
  sim->add_option("--seed", f.seed, "random seed");

  auto* oracle = app.add_subcommand("oracle", "best deterministic strategy by exhaustive search");
  add_common(oracle, f);
  add_spec(oracle, f);
  oracle->add_option("--limit", f.limit, "maximum number of candidates");

  auto* grad = app.add_subcommand("gradcheck", "compare the adjoint gradient with finite differences");
  add_common(grad, f);
  add_spec(grad, f);
  grad->add_option("--seeds", f.seeds, "comma-separated seeds for random parameters");
  grad->add_option("--prune", f.prune, "pruning threshold (default 0)");
  grad->add_option("--fd-step", f.fd_step, "finite-difference step");
  grad->add_option("--coords", f.coords, "coordinates checked per seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(f);
    if (*eval) return cmd_eval(f);
    if (*sim) return cmd_simulate(f);
    if (*oracle) return cmd_oracle(f);
    if (*grad) return cmd_gradcheck(f);
  } catch (const ftrv::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ftrv::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
