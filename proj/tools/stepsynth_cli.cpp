// Copyright 2026 The stepsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// stepsynth: solve tasks, run programs, run benchmark sweeps, emit training
// data, print the vocabulary manifest, and serve guidance.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 no program found (or, for
// run, some pair differs).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "stepsynth/stepsynth.hpp"

namespace {

using namespace stepsynth;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotFound = 2;

struct SearchFlags {
  double budget = 180.0;
  std::size_t budget_nodes = 0;
  int max_depth = SearchConfig{}.max_depth;
  double floor = SearchConfig{}.floor;
  std::size_t cap = SearchConfig{}.cap;
  bool entropy = false;
  double entropy_boost = SearchConfig{}.entropy_boost;
  double entropy_fraction = SearchConfig{}.entropy_fraction;
  std::uint64_t seed = 0;
  std::string guidance = "oracle";
  int remote_timeout_ms = kDefaultRemoteTimeoutMs;
  CLI::Option* budget_opt = nullptr;

  void add_to(CLI::App* app) {
    budget_opt = app->add_option("--budget", budget, "Wall-clock budget per run, seconds")
                     ->check(CLI::PositiveNumber);
    app->add_option("--budget-nodes", budget_nodes,
                    "Node budget per run; alone, it replaces the wall-clock budget");
    app->add_option("--max-depth", max_depth, "Maximum program length")->check(CLI::PositiveNumber);
    app->add_option("--floor", floor, "Token probability floor")->check(CLI::Range(0.0, 0.999999));
    app->add_option("--cap", cap, "Candidate cap per expansion")->check(CLI::PositiveNumber);
    app->add_flag("--entropy", entropy, "Restart with boosted root tokens when the queue empties");
    app->add_option("--entropy-boost", entropy_boost, "Probability added to boosted tokens")
        ->check(CLI::Range(0.0, 0.999999));
    app->add_option("--entropy-fraction", entropy_fraction, "Fraction of root tokens boosted")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", seed, "Seed for sampling, noise and restarts");
    app->add_option("--guidance", guidance, "oracle | uniform | noisy:<eps> | remote:<endpoint>");
    app->add_option("--remote-timeout", remote_timeout_ms, "Remote request timeout, ms")
        ->check(CLI::PositiveNumber);
  }

  SearchConfig config() const {
    SearchConfig c;
    c.budget_seconds = budget;
    if (budget_nodes && budget_opt->count() == 0)
      c.budget_seconds = std::numeric_limits<double>::infinity();
    c.budget_nodes = budget_nodes;
    c.max_depth = max_depth;
    c.floor = floor;
    c.cap = cap;
    c.entropy = entropy;
    c.entropy_boost = entropy_boost;
    c.entropy_fraction = entropy_fraction;
    c.seed = seed;
    return c;
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  SearchFlags flags;
  std::string task;
  std::string solver = "search";
  std::string trace;
  std::string out;
};

int cmd_solve(const SolveArgs& a) {
  TaskInstance inst;
  if (find_task(a.task)) {
    std::mt19937_64 rng(a.flags.seed);
    inst = sample_instance(*find_task(a.task), rng);
  } else {
    inst = load_arc_task(a.task);
  }
  const Solver solver = parse_solver(a.solver);
  auto model = make_model(GuidanceSpec::parse(a.flags.guidance), ground_truths(all_tasks()),
                          a.flags.seed, Vocabulary{}, a.flags.remote_timeout_ms);
  SearchConfig cfg = a.flags.config();
  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace);
    if (!trace) throw std::runtime_error("cannot write " + a.trace);
    cfg.trace = &trace;
  }
  const SearchResult r = run_solver(solver, inst, *model, cfg);
  std::cerr << "stop: " << stop_name(r.stop) << ", nodes: " << r.stats.nodes
            << ", dead: " << r.stats.dead << ", expansions: " << r.stats.expansions
            << ", restarts: " << r.stats.restarts << ", seconds: " << r.stats.elapsed_seconds
            << '\n';
  if (!r.program) {
    std::cerr << "no program found\n";
    return kExitNotFound;
  }
  const std::string text = format_program(*r.program);
  std::cout << text;
  if (!inst.tests.empty())
    std::cerr << "test pairs: "
              << (verify_program(*r.program, inst.test_inputs(), inst.test_targets()) ? "pass"
                                                                                       : "fail")
              << '\n';
  if (!a.out.empty()) write_file(a.out, text);
  return kExitOk;
}

struct BenchArgs {
  SearchFlags flags;
  std::string suite = "ood";
  std::vector<std::string> solvers = {"search", "greedy"};
  int n_samples = 10;
  std::string out;
  bool quiet = false;
};

int cmd_bench(const BenchArgs& a) {
  BenchOptions o;
  o.suite = a.suite;
  o.solvers.clear();
  for (const auto& s : a.solvers) o.solvers.push_back(parse_solver(s));
  o.guidance = GuidanceSpec::parse(a.flags.guidance);
  o.n_samples = a.n_samples;
  o.search = a.flags.config();
  o.seed = a.flags.seed;
  o.remote_timeout_ms = a.flags.remote_timeout_ms;
  const BenchReport report = run_bench(o, a.quiet ? nullptr : &std::cerr);
  std::cout << report.table();
  if (!a.out.empty()) write_file(a.out, report.to_json().dump(2) + "\n");
  return kExitOk;
}

struct GenArgs {
  std::size_t n = 20000;
  std::uint64_t seed = 0;
  std::string out;
  std::string suite = "train";
};

int cmd_gen_data(const GenArgs& a) {
  const auto specs = a.suite == "train" ? training_tasks()
                     : a.suite == "ood" ? ood_tasks()
                     : a.suite == "all" ? all_tasks()
                                        : throw std::invalid_argument("unknown suite " + a.suite);
  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot write " + a.out);
  const std::size_t lines = emit_dataset(specs, a.n, a.seed, out);
  out.close();
  if (!out) throw std::runtime_error("write failed: " + a.out);
  std::cout << "manifest_sha256 " << Vocabulary().manifest_hash() << '\n'
            << "examples " << a.n << '\n'
            << "lines " << lines << '\n';
  return kExitOk;
}

int cmd_manifest(const std::string& out) {
  const Vocabulary v;
  if (!out.empty()) write_file(out, v.manifest());
  else std::cout << v.manifest();
  std::cerr << "manifest_sha256 " << v.manifest_hash() << '\n'
            << "target vocabulary " << v.size() << ", state vocabulary " << kStateVocabularySize
            << '\n';
  return kExitOk;
}

struct RunArgs {
  std::string program;
  std::string task;
  bool print = false;
};

int cmd_run(const RunArgs& a) {
  std::ifstream in(a.program);
  if (!in) throw std::runtime_error("cannot read " + a.program);
  std::stringstream text;
  text << in.rdbuf();
  const Program p = parse_program(text.str());
  const TaskInstance inst = load_arc_task(a.task);
  bool all = true;
  auto check = [&](const char* kind, const std::vector<std::pair<Grid, Grid>>& pairs) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Grid out = run_program(p, {pairs[i].first}).front();
      const bool ok = grids_equal(out, pairs[i].second);
      all = all && ok;
      std::cout << kind << ' ' << i << ": " << (ok ? "match" : "differ") << '\n';
      if (a.print) std::cout << nlohmann::json(out.rows()).dump() << '\n';
    }
  };
  check("train", inst.demos);
  check("test", inst.tests);
  return all ? kExitOk : kExitNotFound;
}

struct ServeArgs {
  std::string guidance = "oracle";
  std::uint64_t seed = 0;
  bool stdio = false;
  int port = -1;
  bool once = false;
};

int cmd_serve(const ServeArgs& a) {
  const GuidanceSpec spec = GuidanceSpec::parse(a.guidance);
  if (spec.kind == GuidanceSpec::Kind::kRemote)
    throw std::invalid_argument("serve needs a local guidance model");
  auto model = make_model(spec, ground_truths(all_tasks()), a.seed);
  if (a.stdio) {
    FdStream stream(STDIN_FILENO, STDOUT_FILENO, false);
    serve_guidance(*model, stream);
    return kExitOk;
  }
  if (a.port < 0) throw std::invalid_argument("serve needs --stdio or --port");
  const auto [fd, port] = listen_tcp(a.port);
  std::cerr << "listening on 127.0.0.1:" << port << std::endl;
  do {
    auto conn = accept_one(fd);
    try {
      serve_guidance(*model, *conn);
    } catch (const GuidanceError& e) {
      std::cerr << "connection ended: " << e.what() << '\n';
    }
  } while (!a.once);
  ::close(fd);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stepsynth: execution-guided program synthesis for grid puzzles"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Search for a program solving one task");
  s->add_option("task", solve.task, "Task id (Train1..Train14, OOD1..OOD7) or ARC JSON file")
      ->required();
  s->add_option("--solver", solve.solver, "search | greedy");
  s->add_option("--trace", solve.trace, "Write a JSON-lines search trace here");
  s->add_option("--out", solve.out, "Also write the program text here");
  solve.flags.add_to(s);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Success rates over fresh instances per task");
  b->add_option("--suite", bench.suite, "train | ood | all | directory of ARC JSON files");
  b->add_option("--solvers,--solver", bench.solvers, "Solvers to compare")->delimiter(',');
  b->add_option("--n-samples", bench.n_samples, "Instances per task")->check(CLI::NonNegativeNumber);
  b->add_option("--out", bench.out, "Write the JSON report here");
  b->add_flag("--quiet", bench.quiet, "No per-task progress on stderr");
  bench.flags.add_to(b);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Emit a JSON-lines training dataset");
  g->add_option("--n", gen.n, "Number of single-pair examples")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Sampling seed");
  g->add_option("--out", gen.out, "Output path")->required();
  g->add_option("--suite", gen.suite, "train | ood | all");

  std::string manifest_out;
  auto* m = app.add_subcommand("manifest", "Print the vocabulary manifest");
  m->add_option("--out", manifest_out, "Write the manifest here instead of stdout");

  RunArgs runa;
  auto* r = app.add_subcommand("run", "Execute a program file on every pair of an ARC JSON task");
  r->add_option("program", runa.program, "Program text file")->required();
  r->add_option("task", runa.task, "ARC JSON file")->required();
  r->add_flag("--print", runa.print, "Print each output grid as JSON rows");

  ServeArgs serve;
  auto* sv = app.add_subcommand("serve", "Serve a local guidance model over the wire protocol");
  sv->add_option("--guidance", serve.guidance, "oracle | uniform | noisy:<eps>");
  sv->add_option("--seed", serve.seed, "Noise seed");
  sv->add_flag("--stdio", serve.stdio, "Speak on stdin/stdout");
  sv->add_option("--port", serve.port, "Listen on 127.0.0.1:<port> (0 picks one)");
  sv->add_flag("--once", serve.once, "Exit after the first connection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }

  try {
    if (s->parsed()) return cmd_solve(solve);
    if (b->parsed()) return cmd_bench(bench);
    if (g->parsed()) return cmd_gen_data(gen);
    if (m->parsed()) return cmd_manifest(manifest_out);
    if (r->parsed()) return cmd_run(runa);
    if (sv->parsed()) return cmd_serve(serve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
