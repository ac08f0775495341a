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

// Instruction <-> token conversion, the typed next-token grammar, and the
// program-state serialization consumed by guidance models.
//
// Instruction grammar:
//
//   step := primitive SEP arg (ARGSEP arg)* EOS
//   arg  := int | ref | ref attribute
//
// State serialization, per example:
//
//   block(slot 0) block(slot 1) ... TARGET block(target)
//
// with examples joined by EXSEP. Blocks:
//
//   GRID h w (cell* ROWSEP){h}
//   INT n | BOOL 0|1
//   INTLIST len n* | BOOLLIST len (0|1)*
//
// Numbers 0-9 are a single digit token; anything else is
// BIGNUM [NEG] digit+ NUMEND.

#ifndef STEPSYNTH_TOKEN_CODEC_HPP_
#define STEPSYNTH_TOKEN_CODEC_HPP_

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stepsynth/dsl.hpp"
#include "stepsynth/vocabulary.hpp"

namespace stepsynth {

class TokenParseError : public std::runtime_error {
 public:
  TokenParseError(std::size_t position, const std::string& what)
      : std::runtime_error("token " + std::to_string(position) + ": " + what),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// ---------------------------------------------------------------------------
// Instructions

inline TokenSeq encode_instruction(const InstructionStep& step,
                                   const Vocabulary& v) {
  TokenSeq out;
  out.reserve(2 + 3 * step.args.size());
  out.push_back(v.primitive_token(step.primitive));
  out.push_back(v.sep());
  for (std::size_t i = 0; i < step.args.size(); ++i) {
    if (i) out.push_back(v.argsep());
    const Arg& a = step.args[i];
    switch (a.kind) {
      case Arg::Kind::kConst:
        out.push_back(v.int_token(a.value));
        break;
      case Arg::Kind::kRef:
        out.push_back(v.ref_token(a.value));
        break;
      case Arg::Kind::kRefAttr:
        out.push_back(v.ref_token(a.value));
        out.push_back(v.attribute_token(a.attribute));
        break;
    }
  }
  out.push_back(v.eos());
  return out;
}

/// Parses one EOS-terminated instruction. Checks the grammar and the
/// primitive's arity; argument kinds are checked at execution time.
inline InstructionStep decode_instruction(const TokenSeq& t,
                                          const Vocabulary& v) {
  std::size_t pos = 0;
  auto cls = [&](std::size_t i) {
    return i < t.size() ? v.classify(t[i]) : TokenClass::kInvalid;
  };
  auto expect = [&](TokenClass c, const char* what) {
    if (pos >= t.size()) throw TokenParseError(pos, std::string("missing ") + what);
    if (cls(pos) != c) throw TokenParseError(pos, std::string("expected ") + what);
    ++pos;
  };
  if (cls(0) != TokenClass::kPrimitive)
    throw TokenParseError(0, t.empty() ? "empty sequence" : "expected primitive");
  InstructionStep step{v.primitive_of(t[0]), {}};
  pos = 1;
  expect(TokenClass::kSep, "<SEP>");
  while (true) {
    if (pos >= t.size()) throw TokenParseError(pos, "missing argument");
    switch (cls(pos)) {
      case TokenClass::kInt:
        step.args.push_back(Arg::constant(t[pos++]));
        break;
      case TokenClass::kRef: {
        const int r = v.ref_of(t[pos++]);
        if (cls(pos) == TokenClass::kAttribute)
          step.args.push_back(Arg::ref_attr(r, v.attribute_of(t[pos++])));
        else
          step.args.push_back(Arg::ref(r));
        break;
      }
      case TokenClass::kAttribute:
        throw TokenParseError(pos, "attribute without a preceding reference");
      default:
        throw TokenParseError(pos, "expected argument");
    }
    if (cls(pos) == TokenClass::kArgSep) {
      ++pos;
      continue;
    }
    break;
  }
  const std::size_t eos_pos = pos;
  expect(TokenClass::kEos, "<EOS>");
  if (pos != t.size()) throw TokenParseError(pos, "trailing tokens after <EOS>");
  if (step.args.size() != signature(step.primitive).arity)
    throw TokenParseError(eos_pos, "wrong number of arguments for " +
                                       std::string(signature(step.primitive).name));
  return step;
}

// ---------------------------------------------------------------------------
// Typed next-token grammar

/// What the grammar needs to know about a state: the kind of each slot.
struct StateShape {
  std::vector<ValueKind> kinds;

  static StateShape of(const ProgramState& s) { return {s.kinds()}; }
  std::size_t size() const { return kinds.size(); }
};

namespace detail {

inline bool param_has_option(KindSet param, bool ref_only,
                             const StateShape& shape) {
  if (!ref_only && accepts(param, ValueKind::kInt)) return true;
  for (ValueKind k : shape.kinds) {
    if (accepts(param, k)) return true;
    if (!ref_only && k == ValueKind::kGrid && (param & kIntLike)) return true;
  }
  return false;
}

inline bool head_is_legal(PrimitiveId id, const StateShape& shape,
                          int max_refs) {
  const Signature& sig = signature(id);
  if (id == PrimitiveId::kDel) return shape.size() >= 2;
  if (static_cast<int>(shape.size()) >= max_refs) return false;
  for (std::size_t i = 0; i < sig.arity; ++i)
    if (!param_has_option(sig.params[i], sig.ref_only, shape)) return false;
  return true;
}

}  // namespace detail

/// Tokens that may legally follow `prefix` in an instruction executed on a
/// state of the given shape. Legal complete sequences are exactly the
/// steps that pass type checking and respect the reference budget.
/// Returns an empty list for an invalid or complete prefix.
inline std::vector<Token> legal_next_tokens(const Vocabulary& v,
                                            const StateShape& shape,
                                            const TokenSeq& prefix) {
  std::vector<Token> out;
  if (prefix.empty()) {
    for (PrimitiveId id : v.primitives())
      if (detail::head_is_legal(id, shape, v.max_refs()))
        out.push_back(v.primitive_token(id));
    return out;
  }
  if (v.classify(prefix[0]) != TokenClass::kPrimitive) return out;
  const PrimitiveId prim = v.primitive_of(prefix[0]);
  if (!detail::head_is_legal(prim, shape, v.max_refs())) return out;
  const Signature& sig = signature(prim);
  if (prefix.size() == 1) return {v.sep()};
  if (v.classify(prefix[1]) != TokenClass::kSep) return out;

  std::size_t param = 0;
  enum class At { kArgStart, kAfterRef, kAfterArg } at = At::kArgStart;
  int last_ref = -1;
  for (std::size_t i = 2; i < prefix.size(); ++i) {
    const Token t = prefix[i];
    const TokenClass c = v.classify(t);
    const KindSet want = sig.params[param];
    switch (at) {
      case At::kArgStart:
        if (c == TokenClass::kInt && !sig.ref_only && accepts(want, ValueKind::kInt)) {
          at = At::kAfterArg;
        } else if (c == TokenClass::kRef &&
                   static_cast<std::size_t>(v.ref_of(t)) < shape.size()) {
          last_ref = v.ref_of(t);
          at = At::kAfterRef;
        } else {
          return out;
        }
        break;
      case At::kAfterRef: {
        const ValueKind k = shape.kinds[static_cast<std::size_t>(last_ref)];
        if (c == TokenClass::kAttribute && !sig.ref_only && k == ValueKind::kGrid) {
          const Attribute a = v.attribute_of(t);
          const ValueKind ak = attribute_is_list(a) ? ValueKind::kIntList : ValueKind::kInt;
          if (!accepts(want, ak)) return out;
          at = At::kAfterArg;
          break;
        }
        if (!accepts(want, k)) return out;
        [[fallthrough]];
      }
      case At::kAfterArg:
        if (param + 1 < sig.arity && c == TokenClass::kArgSep) {
          ++param;
          at = At::kArgStart;
        } else {
          return out;  // EOS (complete) or junk
        }
        break;
    }
  }

  const KindSet want = sig.params[param];
  const Token terminator = param + 1 < sig.arity ? v.argsep() : v.eos();
  switch (at) {
    case At::kArgStart:
      if (!sig.ref_only && accepts(want, ValueKind::kInt))
        for (Token d = 0; d < Vocabulary::kNumIntTokens; ++d) out.push_back(d);
      for (std::size_t r = 0; r < shape.size(); ++r) {
        const ValueKind k = shape.kinds[r];
        if (accepts(want, k) ||
            (!sig.ref_only && k == ValueKind::kGrid && (want & kIntLike)))
          out.push_back(v.ref_token(static_cast<int>(r)));
      }
      break;
    case At::kAfterRef: {
      const ValueKind k = shape.kinds[static_cast<std::size_t>(last_ref)];
      if (!sig.ref_only && k == ValueKind::kGrid)
        for (Attribute a : kAllAttributes)
          if (accepts(want, attribute_is_list(a) ? ValueKind::kIntList : ValueKind::kInt))
            out.push_back(v.attribute_token(a));
      if (accepts(want, k)) out.push_back(terminator);
      break;
    }
    case At::kAfterArg:
      out.push_back(terminator);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// State serialization

namespace detail {

inline void put_number(TokenSeq& out, long long n) {
  if (n >= 0 && n <= 9) {
    out.push_back(static_cast<Token>(n));
    return;
  }
  out.push_back(st(StateToken::kBigNum));
  if (n < 0) {
    out.push_back(st(StateToken::kNeg));
    n = -n;
  }
  const std::string digits = std::to_string(n);
  for (char c : digits) out.push_back(static_cast<Token>(c - '0'));
  out.push_back(st(StateToken::kNumEnd));
}

inline void put_grid(TokenSeq& out, const Grid& g) {
  out.push_back(st(StateToken::kGrid));
  put_number(out, g.height());
  put_number(out, g.width());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) out.push_back(g.at(x, y));
    out.push_back(st(StateToken::kRowSep));
  }
}

inline void put_value(TokenSeq& out, const Value& v) {
  switch (kind_of(v)) {
    case ValueKind::kInt:
      out.push_back(st(StateToken::kInt));
      put_number(out, std::get<int>(v));
      break;
    case ValueKind::kBool:
      out.push_back(st(StateToken::kBool));
      out.push_back(std::get<bool>(v) ? 1 : 0);
      break;
    case ValueKind::kIntList: {
      const auto& l = std::get<IntList>(v);
      out.push_back(st(StateToken::kIntList));
      put_number(out, static_cast<long long>(l.size()));
      for (int x : l) put_number(out, x);
      break;
    }
    case ValueKind::kBoolList: {
      const auto& l = std::get<BoolList>(v);
      out.push_back(st(StateToken::kBoolList));
      put_number(out, static_cast<long long>(l.size()));
      for (bool b : l) out.push_back(b ? 1 : 0);
      break;
    }
    case ValueKind::kGrid:
      put_grid(out, std::get<Grid>(v));
      break;
  }
}

class StateReader {
 public:
  explicit StateReader(const TokenSeq& t) : t_(t) {}

  bool done() const { return pos_ >= t_.size(); }
  Token peek() const {
    if (done()) fail("unexpected end of state tokens");
    return t_[pos_];
  }
  Token next() {
    Token x = peek();
    ++pos_;
    return x;
  }
  void expect(StateToken s) {
    if (next() != st(s)) fail("unexpected state token");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw TokenParseError(pos_, what);
  }

  long long number() {
    Token x = next();
    if (x <= 9) return x;
    if (x != st(StateToken::kBigNum)) fail("expected number");
    bool neg = false;
    if (peek() == st(StateToken::kNeg)) {
      neg = true;
      ++pos_;
    }
    long long n = 0;
    int digits = 0;
    bool leading_zero = false;
    while (peek() != st(StateToken::kNumEnd)) {
      Token d = next();
      if (d > 9 || ++digits > 10) fail("bad number digit");
      if (digits == 1) leading_zero = d == 0;
      n = n * 10 + d;
    }
    ++pos_;
    if (digits == 0) fail("empty number");
    // Only the canonical spelling is accepted, so decoding is injective.
    if ((leading_zero && digits > 1) || (!neg && n <= 9) || (neg && n == 0) ||
        n > 1'000'000'000LL)
      fail("non-canonical number");
    return neg ? -n : n;
  }

  Value value() {
    const Token tag = next();
    switch (static_cast<StateToken>(tag)) {
      case StateToken::kInt:
        return static_cast<int>(number());
      case StateToken::kBool: {
        Token b = next();
        if (b > 1) fail("bad bool");
        return b == 1;
      }
      case StateToken::kIntList: {
        const long long n = number();
        if (n < 0 || n > 1'000'000) fail("bad list length");
        IntList l;
        l.reserve(static_cast<std::size_t>(n));
        for (long long i = 0; i < n; ++i) l.push_back(static_cast<int>(number()));
        return l;
      }
      case StateToken::kBoolList: {
        const long long n = number();
        if (n < 0 || n > 1'000'000) fail("bad list length");
        BoolList l(static_cast<std::size_t>(n));
        for (long long i = 0; i < n; ++i) {
          Token b = next();
          if (b > 1) fail("bad bool");
          l[static_cast<std::size_t>(i)] = b == 1;
        }
        return l;
      }
      case StateToken::kGrid: {
        const long long h = number();
        const long long w = number();
        if (h < 1 || w < 1 || h > kMaxGridSide || w > kMaxGridSide)
          fail("bad grid dimensions");
        std::vector<Color> cells;
        cells.reserve(static_cast<std::size_t>(w * h));
        for (long long y = 0; y < h; ++y) {
          for (long long x = 0; x < w; ++x) {
            Token c = next();
            if (c > 9) fail("bad cell color");
            cells.push_back(static_cast<Color>(c));
          }
          expect(StateToken::kRowSep);
        }
        return Grid(static_cast<int>(w), static_cast<int>(h), std::move(cells));
      }
      default:
        --pos_;
        fail("expected a value block");
    }
  }

 private:
  const TokenSeq& t_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Serializes a state together with the target grids. Deterministic.
inline TokenSeq encode_state(const ProgramState& state,
                             const std::vector<Grid>& targets) {
  if (targets.size() != state.num_examples())
    throw std::invalid_argument("one target per example required");
  TokenSeq out;
  std::size_t estimate = 0;
  for (const auto& g : targets) estimate += g.size() + g.height() + 8;
  out.reserve(estimate * (state.size() + 2));
  for (std::size_t e = 0; e < targets.size(); ++e) {
    if (e) out.push_back(st(StateToken::kExampleSep));
    for (const auto& slot : state.slots()) detail::put_value(out, slot->values[e]);
    out.push_back(st(StateToken::kTarget));
    detail::put_grid(out, targets[e]);
  }
  return out;
}

struct DecodedState {
  ProgramState state;
  std::vector<Grid> targets;
};

/// Inverse of encode_state.
inline DecodedState decode_state(const TokenSeq& tokens,
                                 int max_refs = kDefaultMaxRefs) {
  detail::StateReader r(tokens);
  std::vector<std::vector<Value>> per_example;
  std::vector<Grid> targets;
  while (true) {
    std::vector<Value> values;
    while (r.peek() != st(StateToken::kTarget)) values.push_back(r.value());
    r.next();
    Value t = r.value();
    if (kind_of(t) != ValueKind::kGrid) r.fail("target must be a grid");
    targets.push_back(std::get<Grid>(std::move(t)));
    per_example.push_back(std::move(values));
    if (r.done()) break;
    r.expect(StateToken::kExampleSep);
  }
  const std::size_t nslots = per_example.front().size();
  std::vector<SlotPtr> slots;
  for (std::size_t s = 0; s < nslots; ++s) {
    auto slot = std::make_shared<VarSlot>();
    for (auto& ex : per_example) {
      if (ex.size() != nslots) r.fail("examples disagree on slot count");
      slot->values.push_back(std::move(ex[s]));
    }
    slot->kind = kind_of(slot->values.front());
    for (const auto& v : slot->values)
      if (kind_of(v) != slot->kind) r.fail("examples disagree on slot kind");
    slots.push_back(std::move(slot));
  }
  return {ProgramState::from_slots(std::move(slots), targets.size(), max_refs),
          std::move(targets)};
}

/// 64-bit FNV-1a over a token sequence.
inline std::uint64_t fingerprint(const TokenSeq& t) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Token x : t) {
    h ^= static_cast<std::uint64_t>(x);
    h *= 1099511628211ULL;
    h ^= static_cast<std::uint64_t>(x >> 8);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace stepsynth

#endif  // STEPSYNTH_TOKEN_CODEC_HPP_
