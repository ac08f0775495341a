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

#include "stepsynth/token_codec.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "stepsynth/program_text.hpp"
#include "stepsynth/vocabulary.hpp"
#include "test_util.hpp"

namespace stepsynth {
namespace {

const Vocabulary& vocab() {
  static const Vocabulary v;
  return v;
}

Token prim(PrimitiveId id) { return vocab().primitive_token(id); }
Token ref(int i) { return vocab().ref_token(i); }
Token attr_tok(Attribute a) { return vocab().attribute_token(a); }

// ---------------------------------------------------------------------------
// Vocabulary

TEST(VocabularyTest, StandardLayout) {
  const Vocabulary& v = vocab();
  EXPECT_EQ(prim(PrimitiveId::kIdentity), 10);
  EXPECT_EQ(prim(PrimitiveId::kDel), 24);
  EXPECT_EQ(attr_tok(Attribute::kX), 25);
  EXPECT_EQ(attr_tok(Attribute::kUlY), 33);
  EXPECT_EQ(v.sep(), 34);
  EXPECT_EQ(v.argsep(), 35);
  EXPECT_EQ(v.eos(), 36);
  EXPECT_EQ(v.ref_base(), 37);
  EXPECT_EQ(v.size(), 47u);
}

TEST(VocabularyTest, DenseAndDistinct) {
  for (const Vocabulary& v :
       {vocab(), Vocabulary({PrimitiveId::kCrop, PrimitiveId::kDel}, 3)}) {
    std::set<std::string> names;
    for (Token t = 0; t < v.size(); ++t) {
      EXPECT_NE(v.classify(t), TokenClass::kInvalid) << t;
      names.insert(v.token_name(t));
    }
    EXPECT_EQ(names.size(), v.size());
    EXPECT_EQ(v.classify(static_cast<Token>(v.size())), TokenClass::kInvalid);
  }
}

TEST(VocabularyTest, RefOverflow) {
  EXPECT_THROW(vocab().ref_token(10), RefOverflow);
  const InstructionStep s{PrimitiveId::kColorOf, {Arg::ref(12)}};
  EXPECT_THROW(encode_instruction(s, vocab()), RefOverflow);
}

TEST(VocabularyTest, MissingPrimitive) {
  const Vocabulary small({PrimitiveId::kCrop}, 2);
  EXPECT_FALSE(small.has_primitive(PrimitiveId::kDel));
  EXPECT_THROW(small.primitive_token(PrimitiveId::kDel), VocabularyError);
  EXPECT_THROW(Vocabulary({PrimitiveId::kCrop, PrimitiveId::kCrop}, 2), VocabularyError);
}

TEST(VocabularyTest, ManifestRoundTrip) {
  for (const Vocabulary& v :
       {vocab(), Vocabulary({PrimitiveId::kColorOf, PrimitiveId::kCrop}, 4)}) {
    const std::string m = v.manifest();
    const Vocabulary back = Vocabulary::from_manifest(m);
    EXPECT_EQ(back.manifest(), m);
    EXPECT_EQ(back.primitives(), v.primitives());
    EXPECT_EQ(back.manifest_hash(), v.manifest_hash());
  }
  EXPECT_NE(vocab().manifest_hash(), Vocabulary(Vocabulary::standard_catalog(), 9).manifest_hash());
}

TEST(VocabularyTest, ManifestRejectsTampering) {
  std::string m = vocab().manifest();
  EXPECT_THROW(Vocabulary::from_manifest("hello"), VocabularyError);
  const auto pos = m.find("control SEP");
  m.replace(pos, 11, "control XEP");
  EXPECT_THROW(Vocabulary::from_manifest(m), VocabularyError);
}

TEST(VocabularyTest, Sha256KnownAnswer) {
  EXPECT_EQ(Vocabulary::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

// ---------------------------------------------------------------------------
// Instructions

TEST(InstructionCodecTest, EncodesAttributeReadAsTwoTokens) {
  const TokenSeq t = encode_instruction(parse_step("equal(N0.c, 0)"), vocab());
  EXPECT_EQ(t, (TokenSeq{prim(PrimitiveId::kEqual), vocab().sep(), ref(0),
                         attr_tok(Attribute::kC), vocab().argsep(), 0, vocab().eos()}));
}

TEST(InstructionCodecTest, EncodesDel) {
  EXPECT_EQ(encode_instruction(parse_step("del(N1)"), vocab()),
            (TokenSeq{prim(PrimitiveId::kDel), vocab().sep(), ref(1), vocab().eos()}));
}

TEST(InstructionCodecTest, DecodesSwitch) {
  const TokenSeq t = {prim(PrimitiveId::kSwitch), vocab().sep(), ref(1), vocab().argsep(),
                      0, vocab().argsep(), 2, vocab().eos()};
  EXPECT_EQ(decode_instruction(t, vocab()), parse_step("switch(N1, 0, 2)"));
}

std::size_t parse_error_position(const TokenSeq& t) {
  try {
    decode_instruction(t, vocab());
  } catch (const TokenParseError& e) {
    return e.position();
  }
  ADD_FAILURE() << "sequence accepted";
  return 0;
}

TEST(InstructionCodecTest, ParseErrors) {
  const Vocabulary& v = vocab();
  const Token eq = prim(PrimitiveId::kEqual);
  EXPECT_EQ(parse_error_position({v.sep()}), 0u);
  EXPECT_EQ(parse_error_position({}), 0u);
  EXPECT_EQ(parse_error_position({eq, v.sep(), attr_tok(Attribute::kC), v.eos()}), 2u);
  // Missing EOS.
  EXPECT_EQ(parse_error_position({eq, v.sep(), ref(0), v.argsep(), 0}), 5u);
  // Dangling ARGSEP.
  EXPECT_EQ(parse_error_position({eq, v.sep(), ref(0), v.argsep(), v.eos()}), 4u);
  // Unknown token ID.
  EXPECT_EQ(parse_error_position({eq, v.sep(), 200, v.eos()}), 2u);
  // Wrong arity is reported at the EOS.
  EXPECT_EQ(parse_error_position({eq, v.sep(), ref(0), v.eos()}), 3u);
  // Trailing tokens.
  EXPECT_EQ(parse_error_position({prim(PrimitiveId::kColorOf), v.sep(), ref(0), v.eos(), 1}), 4u);
  // Double attribute.
  EXPECT_EQ(parse_error_position({prim(PrimitiveId::kColorOf), v.sep(), ref(0),
                                  attr_tok(Attribute::kC), attr_tok(Attribute::kC), v.eos()}),
            4u);
}

TEST(InstructionCodecPropertyTest, RoundTripRandomTypedSteps) {
  std::mt19937 rng(11);
  for (int i = 0; i < 3000; ++i) {
    const std::vector<Grid> inputs = {testing::random_grid(rng, 1, 4)};
    const Program p = testing::random_program(rng, inputs, 6);
    ProgramState s = ProgramState::initial(inputs);
    for (const auto& step : p.steps) s = exec_step(s, step).state;
    auto step = testing::random_typed_step(rng, s);
    if (!step) continue;
    const TokenSeq t = encode_instruction(*step, vocab());
    EXPECT_EQ(decode_instruction(t, vocab()), *step);
    EXPECT_EQ(encode_instruction(decode_instruction(t, vocab()), vocab()), t);
  }
}

// No valid sequence is a proper prefix of another: EOS appears once, last.
TEST(InstructionCodecPropertyTest, PrefixFree) {
  std::mt19937 rng(12);
  for (int i = 0; i < 500; ++i) {
    const std::vector<Grid> inputs = {testing::random_grid(rng, 1, 4)};
    auto step = testing::random_typed_step(rng, ProgramState::initial(inputs));
    ASSERT_TRUE(step);
    const TokenSeq t = encode_instruction(*step, vocab());
    EXPECT_EQ(std::count(t.begin(), t.end(), vocab().eos()), 1);
    for (std::size_t k = 1; k < t.size(); ++k)
      EXPECT_THROW(decode_instruction(TokenSeq(t.begin(), t.begin() + k), vocab()),
                   TokenParseError);
  }
}

// ---------------------------------------------------------------------------
// Legal next tokens, checked against a trie of brute-force enumerated steps.

struct Trie {
  std::map<Token, Trie> next;
};

std::vector<Arg> all_args(std::size_t nslots) {
  std::vector<Arg> out;
  for (int d = 0; d < 10; ++d) out.push_back(Arg::constant(d));
  for (std::size_t r = 0; r < nslots; ++r) {
    out.push_back(Arg::ref(static_cast<int>(r)));
    for (Attribute a : kAllAttributes) out.push_back(Arg::ref_attr(static_cast<int>(r), a));
  }
  return out;
}

// A step is legal if it type-checks and the reference budget allows it.
bool step_is_legal(const ProgramState& s, const InstructionStep& step) {
  try {
    type_check(s, step);
  } catch (const DslError&) {
    return false;
  }
  if (step.is_del()) return s.size() >= 2;
  return static_cast<int>(s.size()) < s.max_refs();
}

// Kind of an argument, read straight off the state; nullopt if malformed.
std::optional<ValueKind> arg_kind_of(const ProgramState& s, const Arg& a) {
  if (a.kind == Arg::Kind::kConst) return ValueKind::kInt;
  const ValueKind k = s.slot(static_cast<std::size_t>(a.value))->kind;
  if (a.kind == Arg::Kind::kRef) return k;
  if (k != ValueKind::kGrid) return std::nullopt;
  return attribute_is_list(a.attribute) ? ValueKind::kIntList : ValueKind::kInt;
}

void enumerate_steps_into(const ProgramState& s, const Vocabulary& v, Trie& root,
                          std::size_t& count) {
  const std::vector<Arg> args = all_args(s.size());
  for (PrimitiveId id : v.primitives()) {
    const Signature& sig = signature(id);
    // Per-parameter candidates, so the product stays small.
    std::vector<std::vector<Arg>> options(sig.arity);
    for (std::size_t i = 0; i < sig.arity; ++i)
      for (const Arg& a : args) {
        auto k = arg_kind_of(s, a);
        if (k && accepts(sig.params[i], *k)) options[i].push_back(a);
      }
    std::vector<std::size_t> idx(sig.arity, 0);
    bool empty = false;
    for (const auto& o : options) empty |= o.empty();
    while (!empty) {
      InstructionStep step{id, {}};
      for (std::size_t i = 0; i < sig.arity; ++i) step.args.push_back(options[i][idx[i]]);
      if (step_is_legal(s, step)) {
        Trie* node = &root;
        for (Token t : encode_instruction(step, v)) node = &node->next[t];
        ++count;
      }
      std::size_t pos = 0;
      while (pos < sig.arity && ++idx[pos] == options[pos].size()) idx[pos++] = 0;
      if (pos == sig.arity) break;
    }
  }
}

ProgramState state_of_kinds(const std::vector<ValueKind>& kinds, int max_refs) {
  std::vector<SlotPtr> slots;
  for (ValueKind k : kinds) {
    auto slot = std::make_shared<VarSlot>();
    slot->kind = k;
    switch (k) {
      case ValueKind::kInt: slot->values = {Value{1}}; break;
      case ValueKind::kBool: slot->values = {Value{true}}; break;
      case ValueKind::kIntList: slot->values = {Value{IntList{1}}}; break;
      case ValueKind::kBoolList: slot->values = {Value{BoolList{true}}}; break;
      case ValueKind::kGrid: slot->values = {Value{Grid(1, 1)}}; break;
    }
    slots.push_back(std::move(slot));
  }
  return ProgramState::from_slots(std::move(slots), 1, max_refs);
}

void check_trie(const Vocabulary& v, const StateShape& shape, const Trie& node,
                TokenSeq& prefix, std::size_t& visited) {
  std::vector<Token> expected;
  for (const auto& [t, child] : node.next) expected.push_back(t);
  std::vector<Token> got = legal_next_tokens(v, shape, prefix);
  std::sort(got.begin(), got.end());
  ASSERT_EQ(got, expected) << "prefix length " << prefix.size();
  ++visited;
  for (const auto& [t, child] : node.next) {
    prefix.push_back(t);
    check_trie(v, shape, child, prefix, visited);
    prefix.pop_back();
  }
}

TEST(LegalNextTokensTest, MatchesBruteForceEnumeration) {
  const std::vector<std::vector<ValueKind>> shapes = {
      {ValueKind::kGrid},
      {ValueKind::kGrid, ValueKind::kBoolList},
      {ValueKind::kGrid, ValueKind::kIntList, ValueKind::kInt},
      {ValueKind::kBool, ValueKind::kGrid},
      {ValueKind::kIntList, ValueKind::kBoolList},
      {ValueKind::kGrid, ValueKind::kGrid},
      {ValueKind::kGrid, ValueKind::kGrid, ValueKind::kGrid},
  };
  for (int max_refs : {3, 10}) {
    const Vocabulary v(Vocabulary::standard_catalog(), max_refs);
    for (const auto& kinds : shapes) {
      const ProgramState s = state_of_kinds(kinds, max_refs);
      Trie root;
      std::size_t count = 0;
      enumerate_steps_into(s, v, root, count);
      TokenSeq prefix;
      std::size_t visited = 0;
      check_trie(v, StateShape::of(s), root, prefix, visited);
      EXPECT_GT(visited, count);
    }
  }
}

TEST(LegalNextTokensTest, DelNeedsTwoSlotsAndBudgetBlocksOthers) {
  const Vocabulary v(Vocabulary::standard_catalog(), 2);
  const auto one = legal_next_tokens(v, {{ValueKind::kGrid}}, {});
  EXPECT_EQ(std::count(one.begin(), one.end(), prim(PrimitiveId::kDel)), 0);
  const auto full = legal_next_tokens(v, {{ValueKind::kGrid, ValueKind::kGrid}}, {});
  EXPECT_EQ(full, std::vector<Token>{prim(PrimitiveId::kDel)});
}

TEST(LegalNextTokensTest, InvalidPrefixHasNoContinuation) {
  const StateShape shape{{ValueKind::kGrid}};
  const Vocabulary& v = vocab();
  EXPECT_TRUE(legal_next_tokens(v, shape, {v.sep()}).empty());
  EXPECT_TRUE(legal_next_tokens(v, shape, {prim(PrimitiveId::kSwitch)}).empty());
  EXPECT_TRUE(legal_next_tokens(v, shape, {prim(PrimitiveId::kColorOf), v.sep(), ref(3)}).empty());
  EXPECT_TRUE(legal_next_tokens(
                  v, shape, {prim(PrimitiveId::kColorOf), v.sep(), ref(0), v.eos()})
                  .empty());
}

// ---------------------------------------------------------------------------
// State serialization

TEST(StateCodecTest, SmallestGridLayout) {
  const auto s = ProgramState::initial({Grid::from_rows({{3}})});
  const TokenSeq t = encode_state(s, {Grid::from_rows({{3}})});
  const Token grid = st(StateToken::kGrid), row = st(StateToken::kRowSep);
  EXPECT_EQ(t, (TokenSeq{grid, 1, 1, 3, row, st(StateToken::kTarget), grid, 1, 1, 3, row}));
}

TEST(StateCodecTest, Deterministic) {
  std::mt19937 rng(13);
  const std::vector<Grid> in = {testing::random_grid(rng, 3, 9)};
  const auto s = ProgramState::initial(in);
  EXPECT_EQ(encode_state(s, in), encode_state(s, in));
}

TEST(StateCodecTest, LayoutOfEveryValueKind) {
  const Token g = st(StateToken::kGrid), row = st(StateToken::kRowSep);
  auto s = state_of_kinds({ValueKind::kGrid}, 10);
  auto push = [&](Value v) {
    auto slot = std::make_shared<VarSlot>();
    slot->kind = kind_of(v);
    slot->values = {std::move(v)};
    s.push(slot);
  };
  push(-3);
  push(true);
  push(IntList{4, 12});
  push(BoolList{false, true});
  const TokenSeq t = encode_state(s, {Grid::from_rows({{1, 2}})});
  const Token big = st(StateToken::kBigNum), end = st(StateToken::kNumEnd);
  EXPECT_EQ(t, (TokenSeq{g, 1, 1, 0, row,
                         st(StateToken::kInt), big, st(StateToken::kNeg), 3, end,
                         st(StateToken::kBool), 1,
                         st(StateToken::kIntList), 2, 4, big, 1, 2, end,
                         st(StateToken::kBoolList), 2, 0, 1,
                         st(StateToken::kTarget), g, 1, 2, 1, 2, row}));
  const DecodedState back = decode_state(t);
  EXPECT_EQ(back.state, s);
}

TEST(StateCodecTest, DelRemovesTheSlotBlock) {
  const Grid in = Grid::from_rows({{0, 1}, {3, 0}});
  const Program p = parse_program(
      "equal(N0.c, 0)\n"
      "switch(N1, 0, 2)\n"
      "del(N1)\n");
  ProgramState s = ProgramState::initial({in});
  std::vector<std::size_t> blocks;
  for (const auto& step : p.steps) {
    s = exec_step(s, step).state;
    const TokenSeq t = encode_state(s, {in});
    const TokenSeq before(t.begin(), std::find(t.begin(), t.end(), st(StateToken::kTarget)));
    const auto tags = std::count_if(before.begin(), before.end(), [](Token x) {
      return x == st(StateToken::kGrid) || x == st(StateToken::kBoolList) ||
             x == st(StateToken::kIntList);
    });
    blocks.push_back(static_cast<std::size_t>(tags));
  }
  EXPECT_EQ(blocks, (std::vector<std::size_t>{2, 3, 2}));
  // The remaining non-input block is the switch output, an IntList.
  const TokenSeq t = encode_state(s, {in});
  EXPECT_EQ(std::count(t.begin(), t.end(), st(StateToken::kBoolList)), 0);
  EXPECT_EQ(std::count(t.begin(), t.end(), st(StateToken::kIntList)), 1);
}

TEST(StateCodecTest, MultipleExamplesAreSeparated) {
  const std::vector<Grid> in = {Grid::from_rows({{1}}), Grid::from_rows({{2, 2}})};
  const auto s = ProgramState::initial(in);
  const TokenSeq t = encode_state(s, in);
  EXPECT_EQ(std::count(t.begin(), t.end(), st(StateToken::kExampleSep)), 1);
  EXPECT_EQ(std::count(t.begin(), t.end(), st(StateToken::kTarget)), 2);
  EXPECT_THROW(encode_state(s, {in[0]}), std::invalid_argument);
}

TEST(StateCodecPropertyTest, RoundTripRandomStates) {
  std::mt19937 rng(14);
  for (int i = 0; i < 300; ++i) {
    std::vector<Grid> in, out;
    for (int e = 0; e < 3; ++e) {
      in.push_back(testing::random_grid(rng, 1, 12));
      out.push_back(testing::random_grid(rng, 1, 12));
    }
    const Program p = testing::random_program(rng, in, 6);
    ProgramState s = ProgramState::initial(in);
    for (const auto& step : p.steps) s = exec_step(s, step).state;
    const TokenSeq t = encode_state(s, out);
    for (Token x : t) ASSERT_LT(x, kStateVocabularySize);
    const DecodedState back = decode_state(t);
    EXPECT_EQ(back.state, s);
    EXPECT_EQ(back.targets, out);
    EXPECT_EQ(encode_state(back.state, back.targets), t);
  }
}

TEST(StateCodecTest, DecodeRejectsGarbage) {
  EXPECT_THROW(decode_state({}), TokenParseError);
  EXPECT_THROW(decode_state({st(StateToken::kGrid), 1, 1}), TokenParseError);
  EXPECT_THROW(decode_state({st(StateToken::kTarget), st(StateToken::kInt), 3}),
               TokenParseError);
  std::mt19937 rng(15);
  for (int i = 0; i < 2000; ++i) {
    TokenSeq t(rng() % 20);
    for (auto& x : t) x = static_cast<Token>(rng() % kStateVocabularySize);
    try {
      const DecodedState d = decode_state(t);
      EXPECT_EQ(encode_state(d.state, d.targets), t);
    } catch (const TokenParseError&) {
    }
  }
}

TEST(FingerprintTest, DistinguishesSequences) {
  EXPECT_EQ(fingerprint({1, 2, 3}), fingerprint({1, 2, 3}));
  EXPECT_NE(fingerprint({1, 2, 3}), fingerprint({1, 3, 2}));
  EXPECT_NE(fingerprint({}), fingerprint({0}));
}

}  // namespace
}  // namespace stepsynth
