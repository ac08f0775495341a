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

// Execution-guided best-first search over partial programs.
//
// Each tree node holds one instruction step and the program state reached
// by executing its path. Expanding a node enumerates the steps the model
// considers possible there; every (node, step) pair becomes a queue entry
// keyed by the joint log-probability of the whole path. The globally best
// entry is materialized next, executed, and checked against the targets.
//
// The queue holds one entry per parent: the parent's best step not yet
// materialized. Since enumerate_steps() returns steps in descending order,
// popping that entry and pushing the parent's next step reproduces the
// order of a queue holding every child at once, FIFO ties included.

#ifndef STEPSYNTH_SEARCH_HPP_
#define STEPSYNTH_SEARCH_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stepsynth/dsl.hpp"
#include "stepsynth/guidance.hpp"
#include "stepsynth/program_text.hpp"

namespace stepsynth {

class SearchTree;

struct SearchConfig {
  /// Wall-clock budget in seconds.
  double budget_seconds = 180.0;
  /// Materialized-node budget; 0 means unlimited.
  std::size_t budget_nodes = 0;
  int max_depth = 16;
  double floor = 1e-4;
  std::size_t cap = 4096;
  bool entropy = false;
  double entropy_boost = 0.05;
  double entropy_fraction = 0.15;
  std::uint64_t seed = 0;
  /// Keep going after a solution and record every solution found.
  bool collect_all = false;
  /// Called after each node is materialized and executed.
  std::function<void(const SearchTree&, std::size_t)> observer;
  /// JSON-lines trace sink.
  std::ostream* trace = nullptr;
};

struct SearchNode {
  static constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

  std::size_t parent = kNoParent;
  InstructionStep step;
  int depth = 0;
  /// Joint log-probability of the path.
  double log_prob = 0.0;
  /// Priority-queue order of materialization.
  std::uint64_t order = 0;
  bool dead = false;
  bool solved = false;
  /// Released once every child has been materialized.
  std::optional<ProgramState> state;
  /// The answer this path proposes: the latest non-del output.
  SlotPtr output;
};

class SearchTree {
 public:
  const SearchNode& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

  Program path(std::size_t i) const {
    Program p;
    for (; nodes_[i].parent != SearchNode::kNoParent; i = nodes_[i].parent)
      p.steps.push_back(nodes_[i].step);
    std::reverse(p.steps.begin(), p.steps.end());
    return p;
  }

 private:
  friend class TreeSearcher;
  std::vector<SearchNode> nodes_;
};

struct SearchStats {
  std::size_t nodes = 0;
  std::size_t dead = 0;
  std::size_t expansions = 0;
  std::size_t truncated_expansions = 0;
  std::size_t model_queries = 0;
  std::size_t restarts = 0;
  double elapsed_seconds = 0.0;
};

struct SearchResult {
  enum class Stop { kSolved, kBudget, kExhausted };

  std::optional<Program> program;
  double log_prob = 0.0;
  /// Every solution, in discovery order (collect_all mode).
  std::vector<Program> solutions;
  Stop stop = Stop::kExhausted;
  SearchStats stats;
  /// Distinct head tokens of depth-1 nodes materialized, over all launches.
  std::set<Token> root_tokens;

  bool solved() const { return program.has_value(); }
};

inline const char* stop_name(SearchResult::Stop s) {
  switch (s) {
    case SearchResult::Stop::kSolved: return "solved";
    case SearchResult::Stop::kBudget: return "budget";
    case SearchResult::Stop::kExhausted: return "exhausted";
  }
  return "?";
}

/// Sum of per-step log-probabilities.
inline double joint_log_prob(const std::vector<StepCandidate>& path) {
  double s = 0.0;
  for (const auto& c : path) s += c.log_prob;
  return s;
}

inline bool outputs_match(const SlotPtr& out, const std::vector<Grid>& targets) {
  if (!out || out->kind != ValueKind::kGrid || out->values.size() != targets.size())
    return false;
  for (std::size_t e = 0; e < targets.size(); ++e)
    if (!grids_equal(std::get<Grid>(out->values[e]), targets[e])) return false;
  return true;
}

/// True iff `p` run on `inputs` yields `targets`, by fresh execution.
inline bool verify_program(const Program& p, const std::vector<Grid>& inputs,
                           const std::vector<Grid>& targets,
                           int max_refs = kDefaultMaxRefs) {
  try {
    const auto out = run_program(p, inputs, max_refs);
    if (out.size() != targets.size()) return false;
    for (std::size_t e = 0; e < out.size(); ++e)
      if (!grids_equal(out[e], targets[e])) return false;
    return true;
  } catch (const DslError&) {
    return false;
  }
}

/// Wraps a model for a restarted search: at root contexts (depth 0) a
/// fraction of the legal tokens, picked by `seed` and the prefix, gain
/// `boost` before renormalization by 1 + m * boost. Other contexts pass
/// through unchanged.
class EntropyModel : public GuidanceModel {
 public:
  EntropyModel(GuidanceModel& base, double boost, double fraction, std::uint64_t seed)
      : base_(base), boost_(boost), fraction_(fraction), seed_(seed) {
    if (!(boost >= 0.0 && boost < 1.0)) throw std::invalid_argument("boost must lie in [0, 1)");
    if (!(fraction >= 0.0 && fraction <= 1.0))
      throw std::invalid_argument("fraction must lie in [0, 1]");
  }

  GuidanceDistribution next_token_dist(const GuidanceContext& ctx) override {
    GuidanceDistribution d = base_.next_token_dist(ctx);
    if (ctx.depth != 0 || boost_ == 0.0) return d;
    const auto chosen = boosted_tokens(ctx);
    if (chosen.empty()) return d;
    for (Token t : chosen) d.add(t, boost_);
    const double norm = 1.0 + boost_ * static_cast<double>(chosen.size());
    for (auto& e : d.probs) e.second /= norm;
    return d;
  }

  /// Legal tokens that receive the boost at this context.
  std::vector<Token> boosted_tokens(const GuidanceContext& ctx) const {
    auto legal = legal_next_tokens(base_.vocabulary(), ctx.shape, ctx.step_prefix);
    const auto m = static_cast<std::size_t>(std::ceil(fraction_ * legal.size() - 1e-9));
    const std::uint64_t salt = detail::mix64(seed_ ^ fingerprint(ctx.step_prefix));
    std::sort(legal.begin(), legal.end(), [&](Token a, Token b) {
      const auto ha = detail::mix64(salt ^ a), hb = detail::mix64(salt ^ b);
      return ha != hb ? ha < hb : a < b;
    });
    legal.resize(std::min(m, legal.size()));
    return legal;
  }

  const Vocabulary& vocabulary() const override { return base_.vocabulary(); }
  bool deterministic() const override { return base_.deterministic(); }

 private:
  GuidanceModel& base_;
  double boost_;
  double fraction_;
  std::uint64_t seed_;
};

class TreeSearcher {
 public:
  TreeSearcher(const std::vector<Grid>& inputs, const std::vector<Grid>& targets,
               const SearchConfig& cfg)
      : inputs_(inputs), targets_(targets), cfg_(cfg) {
    if (inputs.empty() || inputs.size() != targets.size())
      throw std::invalid_argument("need matching, non-empty input and target tuples");
    if (cfg.max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  }

  SearchResult run(GuidanceModel& model) {
    start_ = std::chrono::steady_clock::now();
    SearchResult result;
    std::mt19937_64 rng(cfg_.seed);
    launch(model, result);
    while (!result.solved() && result.stop == SearchResult::Stop::kExhausted && cfg_.entropy &&
           !out_of_budget(result.stats)) {
      ++result.stats.restarts;
      const std::uint64_t draw = rng();
      trace({{"event", "restart"}, {"n", result.stats.restarts}, {"seed", draw}});
      EntropyModel boosted(model, cfg_.entropy_boost, cfg_.entropy_fraction, draw);
      launch(boosted, result);
    }
    if (result.stop == SearchResult::Stop::kExhausted && cfg_.entropy && !result.solved() &&
        out_of_budget(result.stats))
      result.stop = SearchResult::Stop::kBudget;
    result.stats.elapsed_seconds = elapsed();
    return result;
  }

  /// The tree of the most recent launch.
  const SearchTree& tree() const { return tree_; }

 private:
  struct Pending {
    Enumeration children;
    std::uint64_t seq_base = 0;
    std::size_t next = 0;
  };
  struct QueueEntry {
    double log_prob;
    std::uint64_t seq;
    std::size_t parent;
  };
  struct Worse {
    bool operator()(const QueueEntry& a, const QueueEntry& b) const {
      if (a.log_prob != b.log_prob) return a.log_prob < b.log_prob;
      return a.seq > b.seq;
    }
  };

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  bool out_of_budget(const SearchStats& s) const {
    if (cfg_.budget_nodes && s.nodes >= cfg_.budget_nodes) return true;
    return elapsed() >= cfg_.budget_seconds;
  }

  void trace(const nlohmann::json& j) {
    if (cfg_.trace) *cfg_.trace << j.dump() << '\n';
  }

  void launch(GuidanceModel& model, SearchResult& result) {
    tree_.nodes_.clear();
    pending_.clear();
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, Worse> queue;
    std::uint64_t seq = 0;
    std::uint64_t order = 0;

    SearchNode root;
    root.state = ProgramState::initial(inputs_, model.vocabulary().max_refs());
    root.output = root.state->slot(0);
    tree_.nodes_.push_back(std::move(root));
    std::size_t selected = 0;

    while (true) {
      if (out_of_budget(result.stats)) {
        result.stop = SearchResult::Stop::kBudget;
        return;
      }
      if (selected != 0) materialize(selected);
      SearchNode& node = tree_.nodes_[selected];
      node.order = order++;
      ++result.stats.nodes;
      if (node.dead) ++result.stats.dead;
      if (node.depth == 1) result.root_tokens.insert(head_token(model.vocabulary(), node.step));
      if (!node.dead && !node.step.is_del() && outputs_match(node.output, targets_)) {
        node.solved = true;
        Program p = tree_.path(selected);
        trace({{"event", "solution"}, {"node", selected}, {"log_prob", node.log_prob},
               {"program", format_program(p)}});
        result.solutions.push_back(p);
        if (!result.program) {
          result.program = p;
          result.log_prob = node.log_prob;
        }
        if (!cfg_.collect_all) {
          if (cfg_.observer) cfg_.observer(tree_, selected);
          result.stop = SearchResult::Stop::kSolved;
          return;
        }
      }
      if (cfg_.trace)
        trace({{"event", "node"}, {"node", selected},
               {"parent", node.parent == SearchNode::kNoParent ? -1 : static_cast<long long>(node.parent)},
               {"depth", node.depth}, {"log_prob", node.log_prob}, {"dead", node.dead},
               {"step", selected ? format_step(node.step) : std::string()}});

      if (!node.dead && node.depth < cfg_.max_depth) {
        GuidanceContext ctx = GuidanceContext::make(*node.state, targets_, node.depth);
        EnumerateOptions eo;
        eo.floor = cfg_.floor;
        eo.cap = cfg_.cap;
        Pending p;
        p.children = enumerate_steps(model, std::move(ctx), eo);
        ++result.stats.expansions;
        result.stats.model_queries += p.children.queries;
        if (p.children.truncated) ++result.stats.truncated_expansions;
        if (!p.children.candidates.empty()) {
          p.seq_base = seq;
          seq += p.children.candidates.size();
          queue.push({node.log_prob + p.children.candidates[0].log_prob, p.seq_base, selected});
          pending_[selected] = std::move(p);
        }
      }
      if (cfg_.observer) cfg_.observer(tree_, selected);
      if (!pending_.count(selected)) tree_.nodes_[selected].state.reset();

      if (queue.empty()) {
        result.stop = SearchResult::Stop::kExhausted;
        return;
      }
      const QueueEntry top = queue.top();
      queue.pop();
      Pending& p = pending_[top.parent];
      StepCandidate& c = p.children.candidates[p.next];
      SearchNode child;
      child.parent = top.parent;
      child.step = std::move(c.step);
      child.depth = tree_.nodes_[top.parent].depth + 1;
      child.log_prob = top.log_prob;
      c.tokens = {};
      ++p.next;
      if (p.next < p.children.candidates.size()) {
        queue.push({tree_.nodes_[top.parent].log_prob + p.children.candidates[p.next].log_prob,
                    p.seq_base + p.next, top.parent});
      }
      tree_.nodes_.push_back(std::move(child));
      selected = tree_.nodes_.size() - 1;
    }
  }

  static Token head_token(const Vocabulary& v, const InstructionStep& s) {
    return v.primitive_token(s.primitive);
  }

  /// Executes a fresh node's step on its parent's cached state.
  void materialize(std::size_t i) {
    SearchNode& node = tree_.nodes_[i];
    const std::size_t parent = node.parent;
    const ProgramState& ps = *tree_.nodes_[parent].state;
    try {
      StepOutcome o = exec_step(ps, node.step);
      node.state = std::move(o.state);
      node.output = o.output ? o.output : tree_.nodes_[parent].output;
    } catch (const DslError&) {
      node.dead = true;
    }
    auto it = pending_.find(parent);
    if (it != pending_.end() && it->second.next >= it->second.children.candidates.size()) {
      pending_.erase(it);
      tree_.nodes_[parent].state.reset();
    }
  }

  const std::vector<Grid>& inputs_;
  const std::vector<Grid>& targets_;
  const SearchConfig& cfg_;
  std::chrono::steady_clock::time_point start_;
  SearchTree tree_;
  std::unordered_map<std::size_t, Pending> pending_;
};

/// Best-first search for a program mapping every input to its target.
inline SearchResult tree_search(const std::vector<Grid>& inputs,
                                const std::vector<Grid>& targets, GuidanceModel& model,
                                const SearchConfig& cfg = {}) {
  TreeSearcher s(inputs, targets, cfg);
  return s.run(model);
}

/// Token-by-token argmax decoding with no queue and no backtracking. Ties
/// go to the lowest token ID.
inline SearchResult greedy_rollout(const std::vector<Grid>& inputs,
                                   const std::vector<Grid>& targets, GuidanceModel& model,
                                   const SearchConfig& cfg = {}) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw std::invalid_argument("need matching, non-empty input and target tuples");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const Vocabulary& v = model.vocabulary();
  SearchResult result;
  ProgramState state = ProgramState::initial(inputs, v.max_refs());
  SlotPtr output = state.slot(0);
  Program program;
  double log_prob = 0.0;
  result.stop = SearchResult::Stop::kExhausted;

  auto finish = [&](SearchResult::Stop stop) {
    result.stop = stop;
    result.stats.elapsed_seconds = elapsed();
    return result;
  };

  for (int depth = 0;; ++depth) {
    ++result.stats.nodes;
    if ((depth == 0 || !program.steps.back().is_del()) && outputs_match(output, targets)) {
      result.program = program;
      result.log_prob = log_prob;
      result.solutions.push_back(program);
      return finish(SearchResult::Stop::kSolved);
    }
    if (depth >= cfg.max_depth) return finish(SearchResult::Stop::kExhausted);
    if (elapsed() >= cfg.budget_seconds ||
        (cfg.budget_nodes && result.stats.nodes >= cfg.budget_nodes))
      return finish(SearchResult::Stop::kBudget);

    GuidanceContext ctx = GuidanceContext::make(state, targets, depth);
    while (ctx.step_prefix.empty() || ctx.step_prefix.back() != v.eos()) {
      const GuidanceDistribution d = model.next_token_dist(ctx);
      ++result.stats.model_queries;
      auto legal = legal_next_tokens(v, ctx.shape, ctx.step_prefix);
      std::sort(legal.begin(), legal.end());
      std::optional<Token> best;
      double best_p = cfg.floor;
      for (const auto& [t, p] : d.probs) {
        if (!(p > cfg.floor) || !std::binary_search(legal.begin(), legal.end(), t)) continue;
        if (!best || p > best_p || (p == best_p && t < *best)) {
          best = t;
          best_p = p;
        }
      }
      if (!best) return finish(SearchResult::Stop::kExhausted);
      ctx.step_prefix.push_back(*best);
      log_prob += std::log(std::min(best_p, 1.0));
    }
    const InstructionStep step = decode_instruction(ctx.step_prefix, v);
    if (depth == 0) result.root_tokens.insert(ctx.step_prefix.front());
    program.steps.push_back(step);
    try {
      StepOutcome o = exec_step(state, step);
      state = std::move(o.state);
      if (o.output) output = o.output;
    } catch (const DslError&) {
      ++result.stats.dead;
      return finish(SearchResult::Stop::kExhausted);
    }
  }
}

}  // namespace stepsynth

#endif  // STEPSYNTH_SEARCH_HPP_
