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

// Ground-truth oracles: test doubles for a trained guidance model.
//
// The oracle only looks at the serialized state. When it first sees an
// initial state (a single slot) it replays every known ground-truth program
// on it; each program that reproduces the targets registers the
// fingerprints of all its intermediate states together with the step to
// take next. A state whose fingerprint is registered is "on path".

#ifndef STEPSYNTH_ORACLE_HPP_
#define STEPSYNTH_ORACLE_HPP_

#include <algorithm>
#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stepsynth/guidance.hpp"

namespace stepsynth {

struct NamedProgram {
  std::string id;
  Program program;
};

/// Fingerprint -> ground-truth next steps, filled lazily.
class OracleRegistry {
 public:
  OracleRegistry(std::vector<NamedProgram> suite, Vocabulary v)
      : suite_(std::move(suite)), vocab_(std::move(v)) {}

  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t ambiguities() const { return ambiguous_.size(); }
  void set_log(std::ostream* log) { log_ = log; }

  /// Ground-truth next steps at this state, or null when off path.
  const std::vector<TokenSeq>* lookup(const GuidanceContext& ctx) {
    auto it = next_.find(ctx.state_fingerprint);
    if (it != next_.end()) return &it->second;
    if (ctx.shape.size() == 1 && !probed_.count(ctx.state_fingerprint)) {
      probed_.insert(ctx.state_fingerprint);
      probe(*ctx.state_tokens);
      it = next_.find(ctx.state_fingerprint);
      if (it != next_.end()) return &it->second;
    }
    return nullptr;
  }

 private:
  void probe(const TokenSeq& state_tokens) {
    DecodedState d;
    try {
      d = decode_state(state_tokens, vocab_.max_refs());
    } catch (const TokenParseError&) {
      return;
    }
    std::vector<Grid> inputs;
    try {
      inputs = slot_grids(*d.state.slot(0));
    } catch (const DslError&) {
      return;
    }
    for (const auto& gt : suite_) {
      std::vector<std::uint64_t> fps;
      std::vector<TokenSeq> steps;
      ProgramState s = ProgramState::initial(inputs, vocab_.max_refs());
      SlotPtr result = s.slot(0);
      try {
        for (const auto& step : gt.program.steps) {
          fps.push_back(fingerprint(encode_state(s, d.targets)));
          steps.push_back(encode_instruction(step, vocab_));
          auto o = exec_step(s, step);
          s = std::move(o.state);
          if (o.output) result = o.output;
        }
        const auto out = slot_grids(*result);
        bool solved = true;
        for (std::size_t e = 0; e < out.size(); ++e)
          solved = solved && grids_equal(out[e], d.targets[e]);
        if (!solved) continue;
      } catch (const DslError&) {
        continue;
      } catch (const VocabularyError&) {
        continue;  // program uses primitives this vocabulary lacks
      }
      for (std::size_t k = 0; k < fps.size(); ++k) register_step(fps[k], steps[k], gt.id);
    }
  }

  void register_step(std::uint64_t fp, const TokenSeq& step, const std::string& id) {
    auto& v = next_[fp];
    if (std::find(v.begin(), v.end(), step) != v.end()) return;
    v.push_back(step);
    if (v.size() > 1 && ambiguous_.insert(fp).second && log_)
      *log_ << "oracle: ambiguous next step at state " << fp << " (" << id << ")\n";
  }

  std::vector<NamedProgram> suite_;
  Vocabulary vocab_;
  std::unordered_map<std::uint64_t, std::vector<TokenSeq>> next_;
  std::unordered_set<std::uint64_t> probed_;
  std::unordered_set<std::uint64_t> ambiguous_;
  std::ostream* log_ = nullptr;
};

namespace detail {

/// Ground-truth steps that extend the prefix.
inline std::vector<const TokenSeq*> consistent_steps(const std::vector<TokenSeq>& steps,
                                                     const TokenSeq& prefix) {
  std::vector<const TokenSeq*> out;
  for (const auto& s : steps)
    if (s.size() > prefix.size() && std::equal(prefix.begin(), prefix.end(), s.begin()))
      out.push_back(&s);
  return out;
}

inline GuidanceDistribution uniform_over(const std::vector<Token>& legal, double mass) {
  GuidanceDistribution d;
  for (Token t : legal) d.probs.emplace_back(t, mass / legal.size());
  return d;
}

}  // namespace detail

/// Point mass on the ground-truth next token on path; uniform over the
/// legal tokens off path. Ambiguous states split mass equally.
class OracleModel : public GuidanceModel {
 public:
  explicit OracleModel(std::shared_ptr<OracleRegistry> registry)
      : registry_(std::move(registry)) {}

  GuidanceDistribution next_token_dist(const GuidanceContext& ctx) override {
    const Vocabulary& v = registry_->vocabulary();
    if (const auto* steps = registry_->lookup(ctx)) {
      const auto hits = detail::consistent_steps(*steps, ctx.step_prefix);
      if (!hits.empty()) {
        GuidanceDistribution d;
        for (const TokenSeq* s : hits) d.add((*s)[ctx.step_prefix.size()], 1.0 / hits.size());
        return d;
      }
    }
    return detail::uniform_over(legal_next_tokens(v, ctx.shape, ctx.step_prefix), 1.0);
  }
  const Vocabulary& vocabulary() const override { return registry_->vocabulary(); }
  const OracleRegistry& registry() const { return *registry_; }

 private:
  std::shared_ptr<OracleRegistry> registry_;
};

inline std::unique_ptr<OracleModel> build_oracle(std::vector<NamedProgram> suite,
                                                 Vocabulary v = {}) {
  return std::make_unique<OracleModel>(
      std::make_shared<OracleRegistry>(std::move(suite), std::move(v)));
}

/// An oracle whose instruction heads are corrupted by noise epsilon.
///
/// On path, at the head token of a step: the ground-truth head gets
/// 1 - epsilon and the other legal heads share epsilon. With probability
/// epsilon (a deterministic function of seed and state) the state is
/// "confused": a decoy head gets 1 - epsilon, the ground truth epsilon / 2,
/// and the rest share epsilon / 2. Argument tokens of a ground-truth head
/// stay point masses. Everything off path is epsilon times uniform.
class NoisyOracleModel : public GuidanceModel {
 public:
  NoisyOracleModel(std::shared_ptr<OracleRegistry> registry, double epsilon,
                   std::uint64_t seed)
      : registry_(std::move(registry)), epsilon_(epsilon), seed_(seed) {
    if (!(epsilon >= 0.0 && epsilon < 1.0))
      throw std::invalid_argument("noise must lie in [0, 1)");
  }

  GuidanceDistribution next_token_dist(const GuidanceContext& ctx) override {
    const Vocabulary& v = registry_->vocabulary();
    const auto legal = legal_next_tokens(v, ctx.shape, ctx.step_prefix);
    const auto* steps = registry_->lookup(ctx);
    if (!steps) return detail::uniform_over(legal, epsilon_);
    const auto hits = detail::consistent_steps(*steps, ctx.step_prefix);
    if (hits.empty()) return detail::uniform_over(legal, epsilon_);
    const std::size_t pos = ctx.step_prefix.size();
    if (pos > 0) {
      GuidanceDistribution d;
      for (const TokenSeq* s : hits) d.add((*s)[pos], 1.0 / hits.size());
      return d;
    }

    std::vector<Token> truth;
    for (const TokenSeq* s : hits)
      if (std::find(truth.begin(), truth.end(), s->front()) == truth.end())
        truth.push_back(s->front());
    std::vector<Token> others;
    for (Token t : legal)
      if (std::find(truth.begin(), truth.end(), t) == truth.end()) others.push_back(t);

    GuidanceDistribution d;
    if (others.empty()) {
      for (Token t : truth) d.probs.emplace_back(t, 1.0 / truth.size());
      return d;
    }
    if (!confused(ctx.state_fingerprint)) {
      for (Token t : truth) d.probs.emplace_back(t, (1.0 - epsilon_) / truth.size());
      for (Token t : others) d.probs.emplace_back(t, epsilon_ / others.size());
      return d;
    }
    const std::size_t decoy =
        detail::mix64(seed_ ^ ctx.state_fingerprint ^ 0x5bd1e995ULL) % others.size();
    d.probs.emplace_back(others[decoy], 1.0 - epsilon_);
    for (Token t : truth) d.probs.emplace_back(t, epsilon_ / 2 / truth.size());
    if (others.size() > 1)
      for (std::size_t i = 0; i < others.size(); ++i)
        if (i != decoy) d.probs.emplace_back(others[i], epsilon_ / 2 / (others.size() - 1));
    return d;
  }

  const Vocabulary& vocabulary() const override { return registry_->vocabulary(); }
  double epsilon() const { return epsilon_; }

  bool confused(std::uint64_t state_fingerprint) const {
    const double u = static_cast<double>(detail::mix64(seed_ ^ detail::mix64(state_fingerprint)) >> 11) *
                     0x1.0p-53;
    return u < epsilon_;
  }

 private:
  std::shared_ptr<OracleRegistry> registry_;
  double epsilon_;
  std::uint64_t seed_;
};

inline std::unique_ptr<NoisyOracleModel> build_noisy_oracle(std::vector<NamedProgram> suite,
                                                            double epsilon, std::uint64_t seed,
                                                            Vocabulary v = {}) {
  return std::make_unique<NoisyOracleModel>(
      std::make_shared<OracleRegistry>(std::move(suite), std::move(v)), epsilon, seed);
}

}  // namespace stepsynth

#endif  // STEPSYNTH_ORACLE_HPP_
