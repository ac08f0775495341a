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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stepsynth/stepsynth.hpp"
#include "test_util.hpp"

namespace {

using namespace stepsynth;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

TaskInstance instance_of(const TaskSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_instance(spec, rng);
}

// Re-executes with the interpreter and compares grids directly.
bool reexecutes(const Program& p, const std::vector<Grid>& inputs,
                const std::vector<Grid>& targets) {
  try {
    const auto out = run_program(p, inputs);
    if (out.size() != targets.size()) return false;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!grids_equal(out[i], targets[i])) return false;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

bool solves_instance(const Program& p, const TaskInstance& inst) {
  return reexecutes(p, inst.demo_inputs(), inst.demo_targets()) &&
         reexecutes(p, inst.test_inputs(), inst.test_targets());
}

struct Verdict {
  bool pass;
  std::string detail;
};

// ---------------------------------------------------------------------------

Verdict oracle_solvability() {
  const auto start = Clock::now();
  auto oracle = build_oracle(ground_truths(all_tasks()));
  int solved = 0, total = 0;
  double worst = 0;
  std::string missed;
  for (const auto& spec : all_tasks()) {
    for (int k = 0; k < 10; ++k) {
      const auto inst = instance_of(spec, cell_seed(1, spec.id, k));
      SearchConfig cfg;
      cfg.budget_seconds = 10.0;
      cfg.budget_nodes = 10000;
      const auto r = tree_search(inst.demo_inputs(), inst.demo_targets(), *oracle, cfg);
      worst = std::max(worst, r.stats.elapsed_seconds);
      ++total;
      if (r.program && solves_instance(*r.program, inst))
        ++solved;
      else
        missed += " " + spec.id + "#" + std::to_string(k);
    }
  }
  const double elapsed = seconds_since(start);
  std::ostringstream os;
  os << solved << "/" << total << " solved, slowest run " << worst << " s, total " << elapsed
     << " s" << (missed.empty() ? "" : ", missed:" + missed);
  return {solved == total && total == 210 && elapsed < 300.0, os.str()};
}

// ---------------------------------------------------------------------------

std::vector<Arg> all_args(std::size_t nslots) {
  std::vector<Arg> out;
  for (int c = 0; c <= 9; ++c) out.push_back(Arg::constant(c));
  for (std::size_t r = 0; r < nslots; ++r) {
    out.push_back(Arg::ref(static_cast<int>(r)));
    for (Attribute a : kAllAttributes) out.push_back(Arg::ref_attr(static_cast<int>(r), a));
  }
  return out;
}

// Every program of up to `depth` steps over `prims` that executes without
// error, built by nested loops over argument tuples.
struct Enumerated {
  std::set<std::string> executable;
  // Programs whose last step outputs grids, with those grids.
  std::map<std::string, std::vector<Grid>> grid_outputs;
};

void brute_force(const std::vector<PrimitiveId>& prims, const ProgramState& state,
                 Program& prefix, int depth, Enumerated& out) {
  if (depth == 0) return;
  for (PrimitiveId id : prims) {
    const std::size_t arity = signature(id).arity;
    const auto args = all_args(state.size());
    std::vector<std::size_t> idx(arity, 0);
    while (true) {
      InstructionStep step{id, {}};
      for (std::size_t i = 0; i < arity; ++i) step.args.push_back(args[idx[i]]);
      prefix.steps.push_back(step);
      try {
        auto o = exec_step(state, step);
        const std::string text = format_program(prefix);
        out.executable.insert(text);
        if (o.output && o.output->kind == ValueKind::kGrid)
          out.grid_outputs[text] = slot_grids(*o.output);
        brute_force(prims, o.state, prefix, depth - 1, out);
      } catch (const DslError&) {
      }
      prefix.steps.pop_back();
      std::size_t i = 0;
      while (i < arity && ++idx[i] == args.size()) idx[i++] = 0;
      if (i == arity) break;
    }
  }
}

Verdict brute_force_equivalence() {
  const std::vector<PrimitiveId> prims = {PrimitiveId::kCrop, PrimitiveId::kColorOf,
                                          PrimitiveId::kDel};
  const int max_refs = 4;
  const Vocabulary v(prims, max_refs);
  UniformModel uniform(v);
  std::mt19937 rng(2026);
  int tasks = 0, agreed = 0, with_solutions = 0;
  std::string first_diff;
  for (int attempt = 0; tasks < 20 && attempt < 1000; ++attempt) {
    // A micro-task: random inputs, targets from a random executable program.
    std::uniform_int_distribution<int> side(2, 4), color(0, 9), n_examples(1, 2);
    std::vector<Grid> inputs;
    for (int e = n_examples(rng); e > 0; --e) {
      const int w = side(rng), h = side(rng);
      std::vector<Color> cells(static_cast<std::size_t>(w) * h);
      for (auto& c : cells) c = static_cast<Color>(color(rng));
      inputs.push_back(Grid(w, h, std::move(cells)));
    }
    Enumerated all;
    Program scratch;
    brute_force(prims, ProgramState::initial(inputs, max_refs), scratch, 2, all);
    std::vector<const std::vector<Grid>*> outputs;
    for (const auto& [text, grids] : all.grid_outputs)
      if (grids != inputs) outputs.push_back(&grids);
    if (outputs.empty()) continue;
    const std::vector<Grid> targets =
        *outputs[std::uniform_int_distribution<std::size_t>(0, outputs.size() - 1)(rng)];
    std::set<std::string> expected_solutions;
    for (const auto& [text, grids] : all.grid_outputs)
      if (grids == targets) expected_solutions.insert(text);

    std::set<std::string> alive, dead, found;
    SearchConfig cfg;
    cfg.collect_all = true;
    cfg.max_depth = 2;
    cfg.floor = 0.0;
    cfg.cap = std::numeric_limits<std::size_t>::max();
    cfg.budget_seconds = std::numeric_limits<double>::infinity();
    cfg.observer = [&](const SearchTree& tree, std::size_t i) {
      if (i == 0) return;
      (tree.node(i).dead ? dead : alive).insert(format_program(tree.path(i)));
    };
    const auto r = tree_search(inputs, targets, uniform, cfg);
    for (const auto& p : r.solutions) found.insert(format_program(p));

    ++tasks;
    with_solutions += !expected_solutions.empty();
    bool dead_ok = true;
    for (const auto& text : dead) {
      try {
        ProgramState st = ProgramState::initial(inputs, max_refs);
        for (const auto& step : parse_program(text).steps) st = exec_step(st, step).state;
        dead_ok = false;
      } catch (const DslError&) {
      }
    }
    if (alive == all.executable && found == expected_solutions && dead_ok &&
        r.stop == SearchResult::Stop::kExhausted) {
      ++agreed;
    } else if (first_diff.empty()) {
      std::ostringstream os;
      os << " first mismatch on task " << tasks << ": alive " << alive.size() << " vs "
         << all.executable.size() << ", solutions " << found.size() << " vs "
         << expected_solutions.size();
      first_diff = os.str();
    }
  }
  std::ostringstream os;
  os << agreed << "/" << tasks << " micro-tasks agree (" << with_solutions
     << " with solutions)" << first_diff;
  return {tasks == 20 && agreed == 20, os.str()};
}

// ---------------------------------------------------------------------------

Verdict search_beats_greedy() {
  BenchOptions o;
  o.suite = "ood";
  o.guidance = GuidanceSpec::parse("noisy:0.3");
  o.n_samples = 10;
  o.search.budget_nodes = 10000;
  o.search.budget_seconds = 10.0;
  o.seed = 3;
  const BenchReport report = run_bench(o);
  const auto totals = report.to_json()["totals"];
  const int s = totals["search"]["successes"], g = totals["greedy"]["successes"];
  const int n = totals["search"]["runs"];
  std::ostringstream os;
  os << "search " << s << "/" << n << ", greedy " << g << "/" << n;
  return {n == 70 && (s - g) * 100 >= 30 * n, os.str()};
}

// ---------------------------------------------------------------------------

Verdict shorter_solutions() {
  const TaskSpec spec = *find_task("OOD2");
  const auto suite = ground_truths(all_tasks());
  int found = 0;
  std::ostringstream os;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TaskInstance inst = instance_of(spec, 500 + seed);
    // Zero the last column, which the flip moves to the left edge.
    for (auto* pairs : {&inst.demos, &inst.tests}) {
      for (auto& pair : *pairs) {
        auto rows = pair.first.rows();
        for (auto& row : rows) row.back() = 0;
        pair.first = Grid::from_rows(rows);
        pair.second = run_program(spec.ground_truth, {pair.first}).front();
      }
    }
    auto model = build_noisy_oracle(suite, 0.3, seed);
    SearchConfig cfg;
    cfg.budget_seconds = 60.0;
    cfg.entropy = true;
    cfg.seed = seed;
    const auto r = tree_search(inst.demo_inputs(), inst.demo_targets(), *model, cfg);
    const bool ok = r.program && r.program->size() < spec.ground_truth.size() &&
                    solves_instance(*r.program, inst);
    found += ok;
    os << (seed > 1 ? ", " : "") << "seed " << seed << ": "
       << (r.program ? std::to_string(r.program->size()) + " steps" : std::string("none"));
  }
  return {found >= 3, std::to_string(found) + "/5 shorter than " +
                          std::to_string(spec.ground_truth.size()) + " (" + os.str() + ")"};
}

// ---------------------------------------------------------------------------

Verdict del_semantics() {
  const Program p = parse_program(
      "equal(N0.c, 0)\n"
      "switch(N1, 0, 2)\n"
      "del(N1)\n"
      "set_pixels(N0, N0.x, N0.y, N1)\n");
  const Program q = eliminate_dels(p);
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> side(1, 30), color(0, 9);
  int recolored = 0, identical = 0;
  std::vector<Grid> batch;
  for (int i = 0; i < 50; ++i) {
    const int w = side(rng), h = side(rng);
    std::vector<Color> cells(static_cast<std::size_t>(w) * h);
    for (auto& c : cells) c = static_cast<Color>(color(rng));
    const Grid g(w, h, std::move(cells));
    batch.push_back(g);
    const Grid out = run_program(p, {g}).front();
    bool ok = out.width() == w && out.height() == h;
    for (int y = 0; ok && y < h; ++y)
      for (int x = 0; ok && x < w; ++x) ok = out.at(x, y) == (g.at(x, y) != 0 ? 2 : 0);
    recolored += ok;
    identical += grids_equal(run_program(q, {g}).front(), out);
  }
  const bool batch_ok = run_program(p, batch) == run_program(q, batch);
  const bool no_dels = q.size() == p.non_del_size() && q.non_del_size() == q.size();
  std::ostringstream os;
  os << recolored << "/50 recolored exactly, " << identical << "/50 identical after del elimination"
     << (batch_ok ? "" : ", batch differs") << (no_dels ? "" : ", dels remain");
  return {recolored == 50 && identical == 50 && batch_ok && no_dels, os.str()};
}

// ---------------------------------------------------------------------------

// Independent grammar check: token classes as letters, then a regex.
bool grammatical(const TokenSeq& t, const Vocabulary& v) {
  std::string s;
  for (Token tok : t) {
    switch (v.classify(tok)) {
      case TokenClass::kInt: s += 'i'; break;
      case TokenClass::kPrimitive: s += 'p'; break;
      case TokenClass::kAttribute: s += 'a'; break;
      case TokenClass::kSep: s += 's'; break;
      case TokenClass::kArgSep: s += ','; break;
      case TokenClass::kEos: s += 'e'; break;
      case TokenClass::kRef: s += 'r'; break;
      default: s += '?';
    }
  }
  static const std::regex shape("ps(i|ra?)(,(i|ra?))*e");
  if (!std::regex_match(s, shape)) return false;
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), ',')) + 1 ==
         signature(v.primitive_of(t[0])).arity;
}

Verdict codec_round_trip() {
  const Vocabulary v;
  std::mt19937 rng(6);
  int round_trips = 0, steps = 0;
  std::vector<TokenSeq> valid;
  std::uniform_int_distribution<int> side(1, 5), color(0, 9), len(0, 12), which(0, 3);
  while (steps < 10000) {
    std::vector<Grid> inputs;
    const int w = side(rng), h = side(rng);
    inputs.push_back(Grid(w, h, std::vector<Color>(static_cast<std::size_t>(w) * h, 1)));
    ProgramState state = ProgramState::initial(inputs, v.max_refs());
    for (int d = 0; d < 6 && steps < 10000; ++d) {
      const auto step = stepsynth::testing::random_typed_step(rng, state);
      if (!step) break;
      ++steps;
      const TokenSeq t = encode_instruction(*step, v);
      try {
        round_trips += decode_instruction(t, v) == *step;
      } catch (const TokenParseError&) {
      }
      valid.push_back(t);
      try {
        state = exec_step(state, *step).state;
      } catch (const DslError&) {
        break;
      }
    }
  }

  int decoded = 0, rejected = 0, wrong = 0;
  std::uniform_int_distribution<Token> token(0, static_cast<Token>(v.size() - 1));
  for (int i = 0; i < 10000; ++i) {
    TokenSeq t;
    switch (which(rng)) {
      case 0:
        for (int k = len(rng); k > 0; --k) t.push_back(token(rng));
        break;
      default: {
        // Mutate a well-formed step: substitute, insert or drop a token.
        t = valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)];
        const int edits = 1 + which(rng) % 2;
        for (int e = 0; e < edits; ++e) {
          const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, t.size())(rng);
          const int op = which(rng) % 3;
          if (op == 0 && pos < t.size()) t[pos] = token(rng);
          else if (op == 1) t.insert(t.begin() + static_cast<long>(pos), token(rng));
          else if (pos < t.size()) t.erase(t.begin() + static_cast<long>(pos));
        }
      }
    }
    const bool expect_ok = !t.empty() && grammatical(t, v);
    try {
      const auto step = decode_instruction(t, v);
      ++decoded;
      if (!expect_ok || encode_instruction(step, v) != t) ++wrong;
    } catch (const TokenParseError&) {
      ++rejected;
      if (expect_ok) ++wrong;
    } catch (const std::exception&) {
      ++wrong;
    }
  }
  std::ostringstream os;
  os << round_trips << "/" << steps << " steps round-trip; fuzz: " << decoded << " decoded, "
     << rejected << " rejected, " << wrong << " disagree with the grammar";
  return {round_trips == 10000 && steps == 10000 && wrong == 0 && decoded > 0 && rejected > 0,
          os.str()};
}

// ---------------------------------------------------------------------------

Verdict entropy_superset() {
  const auto suite = ground_truths(all_tasks());
  int failing = 0, examined = 0, reduced = 0, not_superset = 0, rescued = 0;
  std::set<std::pair<int, Token>> union_off, union_on;
  for (std::uint64_t seed = 0; failing < 20 && seed < 50; ++seed) {
    for (const auto& spec : ood_tasks()) {
      if (failing == 20) break;
      const auto inst = instance_of(spec, cell_seed(7, spec.id, static_cast<int>(seed)));
      auto model = build_noisy_oracle(suite, 0.3, seed);
      SearchConfig cfg;
      cfg.floor = 0.16;
      cfg.budget_nodes = 2000;
      cfg.budget_seconds = std::numeric_limits<double>::infinity();
      cfg.seed = seed;
      const auto off = tree_search(inst.demo_inputs(), inst.demo_targets(), *model, cfg);
      cfg.entropy = true;
      cfg.entropy_boost = 0.05;
      const auto on = tree_search(inst.demo_inputs(), inst.demo_targets(), *model, cfg);
      ++examined;
      reduced += off.solved() && !on.solved();
      if (off.solved()) continue;
      not_superset += !std::includes(on.root_tokens.begin(), on.root_tokens.end(),
                                     off.root_tokens.begin(), off.root_tokens.end());
      rescued += on.solved();
      for (Token t : off.root_tokens) union_off.insert({failing, t});
      for (Token t : on.root_tokens) union_on.insert({failing, t});
      ++failing;
    }
  }
  const bool grew = std::includes(union_on.begin(), union_on.end(), union_off.begin(),
                                  union_off.end()) &&
                    union_on.size() > union_off.size();
  std::ostringstream os;
  os << failing << " failing runs (of " << examined << "): root tokens " << union_off.size()
     << " -> " << union_on.size() << ", rescued " << rescued << ", solved count reduced in "
     << reduced << ", non-superset runs " << not_superset;
  return {failing == 20 && reduced == 0 && not_superset == 0 && grew, os.str()};
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STEPSYNTH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict bench_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "stepsynth_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string args =
      "bench --suite all --n-samples 2 --guidance oracle --budget-nodes 2000 --seed 17 --quiet";
  const int a = run_cli(args + " --out " + (dir / "a.json").string());
  const int b = run_cli(args + " --out " + (dir / "b.json").string());
  const std::string ja = slurp(dir / "a.json"), jb = slurp(dir / "b.json");
  fs::remove_all(dir);
  const bool same = a == 0 && b == 0 && !ja.empty() && ja == jb;
  return {same, "exit codes " + std::to_string(a) + "/" + std::to_string(b) + ", " +
                    std::to_string(ja.size()) + " bytes, " + (ja == jb ? "identical" : "differ")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "oracle solves every task", oracle_solvability},
      {2, "search matches brute force", brute_force_equivalence},
      {3, "search beats greedy under noise", search_beats_greedy},
      {4, "shorter solutions than the ground truth", shorter_solutions},
      {5, "del semantics", del_semantics},
      {6, "codec round-trip and fuzzing", codec_round_trip},
      {7, "entropy only adds root tokens", entropy_superset},
      {9, "bench report is deterministic", bench_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
