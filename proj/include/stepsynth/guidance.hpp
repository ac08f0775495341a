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

// Guidance models map (serialized state, decoded prefix) to a next-token
// distribution. enumerate_steps() turns a model into the list of complete
// instruction steps it considers possible at a state.

#ifndef STEPSYNTH_GUIDANCE_HPP_
#define STEPSYNTH_GUIDANCE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stepsynth/dsl.hpp"
#include "stepsynth/token_codec.hpp"
#include "stepsynth/vocabulary.hpp"

namespace stepsynth {

class GuidanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What a model sees when asked for the next token.
struct GuidanceContext {
  std::shared_ptr<const TokenSeq> state_tokens;
  /// fingerprint(*state_tokens), cached.
  std::uint64_t state_fingerprint = 0;
  /// Slot kinds of the state, for grammar legality.
  StateShape shape;
  /// Number of steps already executed (0 at the root).
  int depth = 0;
  /// Tokens of the instruction step decoded so far.
  TokenSeq step_prefix;

  static GuidanceContext make(const ProgramState& state,
                              const std::vector<Grid>& targets, int depth) {
    GuidanceContext ctx;
    auto tokens = std::make_shared<TokenSeq>(encode_state(state, targets));
    ctx.state_fingerprint = fingerprint(*tokens);
    ctx.state_tokens = std::move(tokens);
    ctx.shape = StateShape::of(state);
    ctx.depth = depth;
    return ctx;
  }
};

/// Sparse next-token distribution. Absent tokens have probability 0; the
/// total may be below 1.
struct GuidanceDistribution {
  std::vector<std::pair<Token, double>> probs;

  double prob(Token t) const {
    for (const auto& [tok, p] : probs)
      if (tok == t) return p;
    return 0.0;
  }
  double total() const {
    double s = 0;
    for (const auto& e : probs) s += e.second;
    return s;
  }
  void add(Token t, double p) {
    for (auto& e : probs)
      if (e.first == t) {
        e.second += p;
        return;
      }
    probs.emplace_back(t, p);
  }
};

class GuidanceModel {
 public:
  virtual ~GuidanceModel() = default;
  virtual GuidanceDistribution next_token_dist(const GuidanceContext& ctx) = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  /// False if repeated queries may return different distributions.
  virtual bool deterministic() const { return true; }
};

/// Uniform over the grammar-legal next tokens.
class UniformModel : public GuidanceModel {
 public:
  explicit UniformModel(Vocabulary v) : vocab_(std::move(v)) {}

  GuidanceDistribution next_token_dist(const GuidanceContext& ctx) override {
    GuidanceDistribution d;
    const auto legal = legal_next_tokens(vocab_, ctx.shape, ctx.step_prefix);
    for (Token t : legal) d.probs.emplace_back(t, 1.0 / legal.size());
    return d;
  }
  const Vocabulary& vocabulary() const override { return vocab_; }

 private:
  Vocabulary vocab_;
};

namespace detail {

/// splitmix64 finalizer, for seeded deterministic choices.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Step enumeration

struct StepCandidate {
  TokenSeq tokens;
  /// Natural log of the product of the token probabilities.
  double log_prob = 0.0;
  InstructionStep step;
};

struct EnumerateOptions {
  /// Tokens with conditional probability <= floor are not extended.
  double floor = 1e-4;
  std::size_t cap = 4096;
  /// Bound on model queries per enumeration; 0 means 64 * cap.
  std::size_t max_queries = 0;
};

struct Enumeration {
  /// Sorted by descending log_prob; ties in discovery order.
  std::vector<StepCandidate> candidates;
  /// True if the cap or the query bound cut the expansion short.
  bool truncated = false;
  std::size_t queries = 0;
};

/// Expands the model's token tree at `ctx` best-first and returns the
/// complete steps whose every token clears the floor. Illegal tokens are
/// dropped. Because extending a prefix never raises its probability,
/// candidates come out in descending order and a truncated list holds
/// exactly the top `cap` steps.
inline Enumeration enumerate_steps(GuidanceModel& model, GuidanceContext ctx,
                                   const EnumerateOptions& opts = {}) {
  if (!(opts.floor >= 0.0 && opts.floor < 1.0))
    throw std::invalid_argument("floor must lie in [0, 1)");
  const Vocabulary& v = model.vocabulary();
  const std::size_t max_queries = opts.max_queries ? opts.max_queries : 64 * opts.cap;

  struct Entry {
    double log_prob;
    std::uint64_t seq;
    TokenSeq tokens;
    bool complete;
  };
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.log_prob != b.log_prob) return a.log_prob < b.log_prob;
    return a.seq > b.seq;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  std::uint64_t seq = 0;
  heap.push({0.0, seq++, {}, false});

  Enumeration out;
  std::vector<Token> legal;
  while (!heap.empty()) {
    if (out.candidates.size() >= opts.cap || out.queries >= max_queries) {
      out.truncated = true;
      break;
    }
    Entry e = heap.top();
    heap.pop();
    if (e.complete) {
      StepCandidate c;
      c.step = decode_instruction(e.tokens, v);
      c.tokens = std::move(e.tokens);
      c.log_prob = e.log_prob;
      out.candidates.push_back(std::move(c));
      continue;
    }
    ctx.step_prefix = e.tokens;
    const GuidanceDistribution d = model.next_token_dist(ctx);
    ++out.queries;
    legal = legal_next_tokens(v, ctx.shape, e.tokens);
    std::sort(legal.begin(), legal.end());
    auto probs = d.probs;
    std::sort(probs.begin(), probs.end());
    for (const auto& [t, p] : probs) {
      if (!(p > opts.floor)) continue;
      if (!std::binary_search(legal.begin(), legal.end(), t)) continue;
      TokenSeq next = e.tokens;
      next.push_back(t);
      heap.push({e.log_prob + std::log(std::min(p, 1.0)), seq++, std::move(next),
                 t == v.eos()});
    }
  }
  return out;
}

}  // namespace stepsynth

#endif  // STEPSYNTH_GUIDANCE_HPP_
