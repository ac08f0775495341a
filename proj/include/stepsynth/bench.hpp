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

// Benchmark sweeps: fresh instances per task, one or more solvers, a
// success-rate table and a JSON report.

#ifndef STEPSYNTH_BENCH_HPP_
#define STEPSYNTH_BENCH_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepsynth/oracle.hpp"
#include "stepsynth/remote_guidance.hpp"
#include "stepsynth/search.hpp"
#include "stepsynth/tasks.hpp"

namespace stepsynth {

inline constexpr const char* kBenchSchema = "stepsynth.bench/1";

/// Which guidance model to build: "oracle", "uniform", "noisy:<eps>" or
/// "remote:<endpoint>".
struct GuidanceSpec {
  enum class Kind { kOracle, kNoisy, kUniform, kRemote };
  Kind kind = Kind::kOracle;
  double epsilon = 0.0;
  std::string endpoint;

  static GuidanceSpec parse(const std::string& s) {
    GuidanceSpec g;
    if (s == "oracle") return g;
    if (s == "uniform") {
      g.kind = Kind::kUniform;
      return g;
    }
    if (s.rfind("noisy:", 0) == 0) {
      g.kind = Kind::kNoisy;
      std::size_t used = 0;
      try {
        g.epsilon = std::stod(s.substr(6), &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != s.size() - 6 || !(g.epsilon >= 0.0 && g.epsilon < 1.0))
        throw std::invalid_argument("noise must be a number in [0, 1): '" + s + "'");
      return g;
    }
    if (s.rfind("remote:", 0) == 0 && s.size() > 7) {
      g.kind = Kind::kRemote;
      g.endpoint = s.substr(7);
      return g;
    }
    throw std::invalid_argument("unknown guidance '" + s + "'");
  }

  std::string str() const {
    switch (kind) {
      case Kind::kOracle: return "oracle";
      case Kind::kUniform: return "uniform";
      case Kind::kRemote: return "remote:" + endpoint;
      case Kind::kNoisy: {
        std::ostringstream os;
        os << "noisy:" << epsilon;
        return os.str();
      }
    }
    return "?";
  }
};

inline std::unique_ptr<GuidanceModel> make_model(const GuidanceSpec& g,
                                                 const std::vector<NamedProgram>& suite,
                                                 std::uint64_t seed, const Vocabulary& v = {},
                                                 int remote_timeout_ms = kDefaultRemoteTimeoutMs) {
  switch (g.kind) {
    case GuidanceSpec::Kind::kOracle: return build_oracle(suite, v);
    case GuidanceSpec::Kind::kNoisy: return build_noisy_oracle(suite, g.epsilon, seed, v);
    case GuidanceSpec::Kind::kUniform: return std::make_unique<UniformModel>(v);
    case GuidanceSpec::Kind::kRemote: return RemoteModel::connect(g.endpoint, v, remote_timeout_ms);
  }
  throw std::logic_error("unreachable");
}

enum class Solver { kSearch, kGreedy };

inline Solver parse_solver(const std::string& s) {
  if (s == "search") return Solver::kSearch;
  if (s == "greedy") return Solver::kGreedy;
  throw std::invalid_argument("unknown solver '" + s + "'");
}

inline const char* solver_name(Solver s) { return s == Solver::kSearch ? "search" : "greedy"; }

inline SearchResult run_solver(Solver s, const TaskInstance& inst, GuidanceModel& model,
                               const SearchConfig& cfg) {
  return s == Solver::kSearch
             ? tree_search(inst.demo_inputs(), inst.demo_targets(), model, cfg)
             : greedy_rollout(inst.demo_inputs(), inst.demo_targets(), model, cfg);
}

/// A returned program counts only if it re-executes to every demo target
/// and maps every test input to its test target.
inline bool counts_as_success(const SearchResult& r, const TaskInstance& inst) {
  return r.program &&
         verify_program(*r.program, inst.demo_inputs(), inst.demo_targets()) &&
         (inst.tests.empty() || verify_program(*r.program, inst.test_inputs(), inst.test_targets()));
}

/// Seed for one (task, sample) cell, independent of sweep order.
inline std::uint64_t cell_seed(std::uint64_t seed, const std::string& task, int sample) {
  std::uint64_t h = detail::mix64(seed);
  for (char c : task) h = detail::mix64(h ^ static_cast<unsigned char>(c));
  return detail::mix64(h ^ static_cast<std::uint64_t>(sample));
}

struct BenchOptions {
  /// "train", "ood", "all", or a directory of ARC JSON files.
  std::string suite = "ood";
  std::vector<Solver> solvers = {Solver::kSearch, Solver::kGreedy};
  GuidanceSpec guidance;
  int n_samples = 10;
  SearchConfig search;
  std::uint64_t seed = 0;
  int remote_timeout_ms = kDefaultRemoteTimeoutMs;
};

struct CellResult {
  int successes = 0;
  int runs = 0;
  std::vector<double> seconds;
  std::vector<std::string> errors;
};

struct BenchRow {
  std::string task;
  std::map<std::string, CellResult> cells;  // by solver name
};

struct BenchReport {
  BenchOptions options;
  std::vector<BenchRow> rows;

  /// Wall-clock figures only appear when the budget is wall-clock, so
  /// node-budgeted reports are reproducible byte for byte.
  nlohmann::json to_json() const {
    const bool times = options.search.budget_nodes == 0;
    nlohmann::json cfg = {{"suite", options.suite},
                          {"guidance", options.guidance.str()},
                          {"n_samples", options.n_samples},
                          {"budget_seconds", options.search.budget_seconds},
                          {"budget_nodes", options.search.budget_nodes},
                          {"max_depth", options.search.max_depth},
                          {"floor", options.search.floor},
                          {"entropy", options.search.entropy},
                          {"entropy_boost", options.search.entropy_boost},
                          {"entropy_fraction", options.search.entropy_fraction},
                          {"seed", options.seed}};
    nlohmann::json solvers = nlohmann::json::array();
    for (Solver s : options.solvers) solvers.push_back(solver_name(s));
    cfg["solvers"] = solvers;
    nlohmann::json tasks = nlohmann::json::array();
    std::map<std::string, std::pair<int, int>> totals;
    for (const auto& row : rows) {
      nlohmann::json cells = nlohmann::json::object();
      for (const auto& [name, c] : row.cells) {
        nlohmann::json cell = {{"successes", c.successes}, {"runs", c.runs}, {"errors", c.errors}};
        if (times) cell["seconds"] = c.seconds;
        cells[name] = cell;
        totals[name].first += c.successes;
        totals[name].second += c.runs;
      }
      tasks.push_back({{"task", row.task}, {"cells", cells}});
    }
    nlohmann::json tot = nlohmann::json::object();
    for (const auto& [name, t] : totals) tot[name] = {{"successes", t.first}, {"runs", t.second}};
    return {{"schema", kBenchSchema}, {"config", cfg}, {"tasks", tasks}, {"totals", tot}};
  }

  /// Success rates per task and solver, with a totals row.
  std::string table() const {
    std::ostringstream os;
    std::size_t w = 5;
    for (const auto& r : rows) w = std::max(w, r.task.size());
    auto pad = [](std::string s, std::size_t n) {
      s.resize(std::max(n, s.size()), ' ');
      return s;
    };
    auto rate = [](int k, int n) {
      if (n == 0) return std::string("-");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%d%% (%d/%d)", (100 * k + n / 2) / n, k, n);
      return std::string(buf);
    };
    os << pad("task", w);
    for (Solver s : options.solvers) os << "  " << pad(solver_name(s), 14);
    os << '\n';
    std::map<std::string, std::pair<int, int>> totals;
    for (const auto& r : rows) {
      os << pad(r.task, w);
      for (Solver s : options.solvers) {
        const auto it = r.cells.find(solver_name(s));
        const CellResult c = it == r.cells.end() ? CellResult{} : it->second;
        os << "  " << pad(rate(c.successes, c.runs) + (c.errors.empty() ? "" : " !"), 14);
        totals[solver_name(s)].first += c.successes;
        totals[solver_name(s)].second += c.runs;
      }
      os << '\n';
    }
    os << pad("total", w);
    for (Solver s : options.solvers) {
      const auto t = totals[solver_name(s)];
      os << "  " << pad(rate(t.first, t.second), 14);
    }
    os << '\n';
    return os.str();
  }
};

struct BenchTask {
  std::string id;
  std::optional<TaskSpec> spec;     // sampled afresh per sample
  std::optional<TaskInstance> fixed;  // loaded from disk
};

inline std::vector<BenchTask> bench_tasks(const std::string& suite) {
  std::vector<BenchTask> out;
  auto add = [&](const std::vector<TaskSpec>& specs) {
    for (const auto& s : specs) out.push_back({s.id, s, std::nullopt});
  };
  if (suite == "train") {
    add(training_tasks());
  } else if (suite == "ood") {
    add(ood_tasks());
  } else if (suite == "all") {
    add(all_tasks());
  } else if (std::filesystem::is_directory(suite)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(suite))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back({f.stem().string(), std::nullopt, load_arc_task(f.string())});
  } else {
    throw std::invalid_argument("unknown suite '" + suite + "' (train, ood, all, or a directory)");
  }
  return out;
}

/// Runs every (task, sample, solver) cell. Per-cell failures are recorded
/// and the sweep continues.
inline BenchReport run_bench(const BenchOptions& opts, std::ostream* progress = nullptr) {
  BenchReport report;
  report.options = opts;
  const auto suite = ground_truths(all_tasks());
  for (const auto& task : bench_tasks(opts.suite)) {
    BenchRow row;
    row.task = task.id;
    for (Solver s : opts.solvers) row.cells[solver_name(s)];
    const int samples = task.fixed ? 1 : opts.n_samples;
    for (int k = 0; k < samples; ++k) {
      const std::uint64_t seed = cell_seed(opts.seed, task.id, k);
      std::optional<TaskInstance> inst = task.fixed;
      std::string sample_error;
      if (!inst) {
        try {
          std::mt19937_64 rng(seed);
          inst = sample_instance(*task.spec, rng);
        } catch (const std::exception& e) {
          sample_error = e.what();
        }
      }
      for (Solver s : opts.solvers) {
        CellResult& cell = row.cells[solver_name(s)];
        ++cell.runs;
        if (!inst) {
          cell.errors.push_back(sample_error);
          continue;
        }
        try {
          auto model = make_model(opts.guidance, suite, seed, Vocabulary{}, opts.remote_timeout_ms);
          SearchConfig cfg = opts.search;
          cfg.seed = seed;
          const SearchResult r = run_solver(s, *inst, *model, cfg);
          cell.seconds.push_back(r.stats.elapsed_seconds);
          cell.successes += counts_as_success(r, *inst);
        } catch (const std::exception& e) {
          cell.errors.push_back(e.what());
        }
      }
    }
    if (progress) {
      *progress << row.task;
      for (const auto& [name, c] : row.cells) *progress << ' ' << name << ' ' << c.successes << '/' << c.runs;
      *progress << '\n';
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace stepsynth

#endif  // STEPSYNTH_BENCH_HPP_
