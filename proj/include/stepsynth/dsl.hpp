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

// The instruction-step DSL.
//
// A program is a straight-line sequence of instruction steps. Each step
// applies one primitive to arguments drawn from the program state and
// appends exactly one new variable, except `del`, which removes a variable
// and shifts every later variable down by one index. Every primitive is
// applied independently to each demonstration example (broadcast over
// the example tuple).

#ifndef STEPSYNTH_DSL_HPP_
#define STEPSYNTH_DSL_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stepsynth/grid.hpp"

namespace stepsynth {

using IntList = std::vector<int>;
using BoolList = std::vector<bool>;
using Value = std::variant<int, bool, IntList, BoolList, Grid>;

enum class ValueKind : std::uint8_t { kInt, kBool, kIntList, kBoolList, kGrid };

inline constexpr std::string_view kind_name(ValueKind k) {
  constexpr std::array<std::string_view, 5> names = {"Int", "Bool", "IntList",
                                                     "BoolList", "Grid"};
  return names[static_cast<std::size_t>(k)];
}

inline ValueKind kind_of(const Value& v) {
  return static_cast<ValueKind>(v.index());
}

/// Bit set over ValueKind.
using KindSet = std::uint8_t;
inline constexpr KindSet kind_bit(ValueKind k) {
  return static_cast<KindSet>(1u << static_cast<unsigned>(k));
}
inline constexpr KindSet kIntLike =
    kind_bit(ValueKind::kInt) | kind_bit(ValueKind::kIntList);
inline constexpr KindSet kBoolListOnly = kind_bit(ValueKind::kBoolList);
inline constexpr KindSet kIntOnly = kind_bit(ValueKind::kInt);
inline constexpr KindSet kGridOnly = kind_bit(ValueKind::kGrid);
inline constexpr KindSet kAnyKind = 0x1f;

inline constexpr bool accepts(KindSet set, ValueKind k) {
  return (set & kind_bit(k)) != 0;
}

// ---------------------------------------------------------------------------
// Errors

enum class DslErrorKind : std::uint8_t {
  kBadRef,
  kArityMismatch,
  kTypeMismatch,
  kExecError,
  kNonGridResult,
};

inline constexpr std::string_view error_kind_name(DslErrorKind k) {
  constexpr std::array<std::string_view, 5> names = {
      "BadRef", "ArityMismatch", "TypeMismatch", "ExecError", "NonGridResult"};
  return names[static_cast<std::size_t>(k)];
}

/// Raised by execution. The search treats any of these as a dead branch.
class DslError : public std::runtime_error {
 public:
  DslError(DslErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what),
        kind_(kind) {}
  DslErrorKind kind() const { return kind_; }

 private:
  DslErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Primitive catalog

enum class PrimitiveId : std::uint8_t {
  kIdentity,
  kEqual,
  kNotEqual,
  kGreaterThan,
  kLessThan,
  kSwitch,
  kAdd,
  kSub,
  kMul,
  kSetPixels,
  kColorOf,
  kCrop,
  kConstList,
  kNewGrid,
  kDel,
};

inline constexpr std::size_t kNumPrimitives = 15;

struct Signature {
  PrimitiveId id;
  std::string_view name;
  /// Accepted kinds per parameter.
  std::array<KindSet, 4> params;
  std::uint8_t arity;
  /// Parameter must be a bare reference (used by `del`).
  bool ref_only = false;
};

inline constexpr std::array<Signature, kNumPrimitives> kSignatures = {{
    {PrimitiveId::kIdentity, "identity", {kAnyKind}, 1},
    {PrimitiveId::kEqual, "equal", {kIntLike, kIntLike}, 2},
    {PrimitiveId::kNotEqual, "not_equal", {kIntLike, kIntLike}, 2},
    {PrimitiveId::kGreaterThan, "greater_than", {kIntLike, kIntLike}, 2},
    {PrimitiveId::kLessThan, "less_than", {kIntLike, kIntLike}, 2},
    {PrimitiveId::kSwitch, "switch", {kBoolListOnly, kIntLike, kIntLike}, 3},
    {PrimitiveId::kAdd, "add", {kIntLike, kIntLike}, 2},
    {PrimitiveId::kSub, "sub", {kIntLike, kIntLike}, 2},
    {PrimitiveId::kMul, "mul", {kIntLike, kIntLike}, 2},
    {PrimitiveId::kSetPixels,
     "set_pixels",
     {kGridOnly, kIntLike, kIntLike, kIntLike},
     4},
    {PrimitiveId::kColorOf, "colorOf", {kGridOnly}, 1},
    {PrimitiveId::kCrop, "crop", {kGridOnly, kIntOnly, kIntOnly}, 3},
    {PrimitiveId::kConstList, "const_list", {kIntOnly, kIntOnly}, 2},
    {PrimitiveId::kNewGrid, "new_grid", {kIntOnly, kIntOnly, kIntOnly}, 3},
    {PrimitiveId::kDel, "del", {kAnyKind}, 1, true},
}};

inline constexpr const Signature& signature(PrimitiveId id) {
  return kSignatures[static_cast<std::size_t>(id)];
}

inline std::optional<PrimitiveId> primitive_from_name(std::string_view name) {
  for (const auto& s : kSignatures)
    if (s.name == name) return s.id;
  return std::nullopt;
}

inline constexpr std::array<PrimitiveId, kNumPrimitives> kAllPrimitives = {
    PrimitiveId::kIdentity,  PrimitiveId::kEqual,     PrimitiveId::kNotEqual,
    PrimitiveId::kGreaterThan, PrimitiveId::kLessThan, PrimitiveId::kSwitch,
    PrimitiveId::kAdd,       PrimitiveId::kSub,       PrimitiveId::kMul,
    PrimitiveId::kSetPixels, PrimitiveId::kColorOf,   PrimitiveId::kCrop,
    PrimitiveId::kConstList, PrimitiveId::kNewGrid,   PrimitiveId::kDel};

// ---------------------------------------------------------------------------
// Programs

/// An argument: a constant 0-9, a state reference, or a grid attribute read
/// through a state reference.
struct Arg {
  enum class Kind : std::uint8_t { kConst, kRef, kRefAttr };

  Kind kind = Kind::kConst;
  int value = 0;  // constant, or reference index
  Attribute attribute = Attribute::kX;

  static Arg constant(int v) { return {Kind::kConst, v, Attribute::kX}; }
  static Arg ref(int index) { return {Kind::kRef, index, Attribute::kX}; }
  static Arg ref_attr(int index, Attribute a) {
    return {Kind::kRefAttr, index, a};
  }

  bool is_ref() const { return kind != Kind::kConst; }

  friend bool operator==(const Arg& a, const Arg& b) {
    if (a.kind != b.kind || a.value != b.value) return false;
    return a.kind != Kind::kRefAttr || a.attribute == b.attribute;
  }
};

struct InstructionStep {
  PrimitiveId primitive = PrimitiveId::kIdentity;
  std::vector<Arg> args;

  bool is_del() const { return primitive == PrimitiveId::kDel; }
  friend bool operator==(const InstructionStep&,
                         const InstructionStep&) = default;
};

struct Program {
  std::vector<InstructionStep> steps;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  std::size_t non_del_size() const {
    return static_cast<std::size_t>(std::count_if(
        steps.begin(), steps.end(), [](const auto& s) { return !s.is_del(); }));
  }
  friend bool operator==(const Program&, const Program&) = default;
};

// ---------------------------------------------------------------------------
// Program state

/// One state variable: a value per demonstration example, all of one kind.
struct VarSlot {
  ValueKind kind = ValueKind::kGrid;
  std::vector<Value> values;
};

using SlotPtr = std::shared_ptr<const VarSlot>;

inline constexpr int kDefaultMaxRefs = 10;

/// Ordered list of live variables. Slots are shared between states, so
/// copying a state and appending one slot costs one pointer per slot.
class ProgramState {
 public:
  ProgramState() = default;

  static ProgramState initial(const std::vector<Grid>& inputs,
                              int max_refs = kDefaultMaxRefs) {
    if (inputs.empty())
      throw std::invalid_argument("program state needs at least one example");
    auto slot = std::make_shared<VarSlot>();
    slot->kind = ValueKind::kGrid;
    slot->values.assign(inputs.begin(), inputs.end());
    ProgramState s;
    s.slots_.push_back(std::move(slot));
    s.num_examples_ = inputs.size();
    s.max_refs_ = max_refs;
    return s;
  }

  static ProgramState from_slots(std::vector<SlotPtr> slots,
                                 std::size_t num_examples,
                                 int max_refs = kDefaultMaxRefs) {
    ProgramState s;
    s.slots_ = std::move(slots);
    s.num_examples_ = num_examples;
    s.max_refs_ = max_refs;
    return s;
  }

  std::size_t size() const { return slots_.size(); }
  std::size_t num_examples() const { return num_examples_; }
  int max_refs() const { return max_refs_; }
  const SlotPtr& slot(std::size_t i) const { return slots_[i]; }
  const std::vector<SlotPtr>& slots() const { return slots_; }

  std::vector<ValueKind> kinds() const {
    std::vector<ValueKind> out;
    out.reserve(slots_.size());
    for (const auto& s : slots_) out.push_back(s->kind);
    return out;
  }

  void push(SlotPtr slot) { slots_.push_back(std::move(slot)); }
  void erase(std::size_t i) {
    slots_.erase(slots_.begin() + static_cast<std::ptrdiff_t>(i));
  }

  /// Value-level equality (slot pointers may differ).
  friend bool operator==(const ProgramState& a, const ProgramState& b) {
    if (a.num_examples_ != b.num_examples_ || a.slots_.size() != b.slots_.size())
      return false;
    for (std::size_t i = 0; i < a.slots_.size(); ++i) {
      if (a.slots_[i] == b.slots_[i]) continue;
      if (a.slots_[i]->kind != b.slots_[i]->kind ||
          a.slots_[i]->values != b.slots_[i]->values)
        return false;
    }
    return true;
  }

 private:
  std::vector<SlotPtr> slots_;
  std::size_t num_examples_ = 0;
  int max_refs_ = kDefaultMaxRefs;
};

// ---------------------------------------------------------------------------
// Interpretation

namespace detail {

inline ValueKind arg_kind(const ProgramState& state, const Arg& a) {
  switch (a.kind) {
    case Arg::Kind::kConst:
      return ValueKind::kInt;
    case Arg::Kind::kRef:
    case Arg::Kind::kRefAttr: {
      if (a.value < 0 || static_cast<std::size_t>(a.value) >= state.size())
        throw DslError(DslErrorKind::kBadRef,
                       "reference N" + std::to_string(a.value) +
                           " out of range for " +
                           std::to_string(state.size()) + " slots");
      const ValueKind k = state.slot(a.value)->kind;
      if (a.kind == Arg::Kind::kRef) return k;
      if (k != ValueKind::kGrid)
        throw DslError(DslErrorKind::kTypeMismatch,
                       "attribute read on a non-grid value");
      return attribute_is_list(a.attribute) ? ValueKind::kIntList
                                            : ValueKind::kInt;
    }
  }
  return ValueKind::kInt;
}

inline Value eval_arg(const ProgramState& state, const Arg& a,
                      std::size_t example) {
  switch (a.kind) {
    case Arg::Kind::kConst:
      return a.value;
    case Arg::Kind::kRef:
      return state.slot(a.value)->values[example];
    case Arg::Kind::kRefAttr: {
      const auto& g = std::get<Grid>(state.slot(a.value)->values[example]);
      auto v = attr(g, a.attribute);
      if (auto* i = std::get_if<int>(&v)) return *i;
      return std::get<std::vector<int>>(std::move(v));
    }
  }
  return 0;
}

/// Broadcast view over an Int or IntList operand.
struct IntOperand {
  const Value* v;
  bool is_list() const { return std::holds_alternative<IntList>(*v); }
  std::size_t size() const { return std::get<IntList>(*v).size(); }
  int operator[](std::size_t i) const {
    if (const auto* l = std::get_if<IntList>(v)) return (*l)[i];
    return std::get<int>(*v);
  }
};

/// Common length of the list operands, or nullopt if all are scalars.
template <typename... Ls>
std::optional<std::size_t> broadcast_length(const Ls&... lens) {
  std::optional<std::size_t> n;
  auto visit = [&](std::optional<std::size_t> len) {
    if (!len) return;
    if (n && *n != *len)
      throw DslError(DslErrorKind::kExecError, "list length mismatch");
    n = len;
  };
  (visit(lens), ...);
  return n;
}

inline std::optional<std::size_t> list_len(const Value& v) {
  if (const auto* l = std::get_if<IntList>(&v)) return l->size();
  if (const auto* l = std::get_if<BoolList>(&v)) return l->size();
  return std::nullopt;
}

inline int checked(long long v) {
  if (v > 1'000'000'000LL || v < -1'000'000'000LL)
    throw DslError(DslErrorKind::kExecError, "integer overflow");
  return static_cast<int>(v);
}

template <typename F>
Value compare(const Value& a, const Value& b, F f) {
  IntOperand x{&a}, y{&b};
  auto n = broadcast_length(list_len(a), list_len(b));
  if (!n) return f(x[0], y[0]);
  BoolList out(*n);
  for (std::size_t i = 0; i < *n; ++i) out[i] = f(x[i], y[i]);
  return out;
}

template <typename F>
Value arith(const Value& a, const Value& b, F f) {
  IntOperand x{&a}, y{&b};
  auto n = broadcast_length(list_len(a), list_len(b));
  if (!n) return checked(f(static_cast<long long>(x[0]), y[0]));
  IntList out(*n);
  for (std::size_t i = 0; i < *n; ++i)
    out[i] = checked(f(static_cast<long long>(x[i]), y[i]));
  return out;
}

inline Value do_switch(const Value& cond, const Value& a, const Value& b) {
  const auto& c = std::get<BoolList>(cond);
  broadcast_length(std::optional<std::size_t>(c.size()), list_len(a),
                   list_len(b));
  IntOperand x{&a}, y{&b};
  IntList out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] ? x[i] : y[i];
  return out;
}

inline Value set_pixels(const Grid& g, const Value& xs_v, const Value& ys_v,
                        const Value& cs_v) {
  IntOperand xs{&xs_v}, ys{&ys_v}, cs{&cs_v};
  const std::size_t n =
      broadcast_length(list_len(xs_v), list_len(ys_v), list_len(cs_v))
          .value_or(1);
  int w = g.width();
  int h = g.height();
  for (std::size_t i = 0; i < n; ++i) {
    if (xs[i] < 0 || ys[i] < 0) continue;
    w = std::max(w, xs[i] + 1);
    h = std::max(h, ys[i] + 1);
  }
  if (w > kMaxGridSide || h > kMaxGridSide)
    throw DslError(DslErrorKind::kExecError, "grid would exceed the size cap");
  std::vector<Color> cells(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      cells[static_cast<std::size_t>(y) * w + x] = g.at(x, y);
  for (std::size_t i = 0; i < n; ++i) {
    const int x = xs[i];
    const int y = ys[i];
    if (x < 0 || y < 0) continue;  // off-grid to the left/top: dropped
    const int c = cs[i];
    if (c < 0 || c >= kNumColors)
      throw DslError(DslErrorKind::kExecError, "color out of range");
    cells[static_cast<std::size_t>(y) * w + x] = static_cast<Color>(c);
  }
  return Grid(w, h, std::move(cells), g.ul_x(), g.ul_y());
}

inline Value crop(const Grid& g, int w, int h) {
  if (w < 1 || h < 1 || w > g.width() || h > g.height())
    throw DslError(DslErrorKind::kExecError, "crop size out of range");
  std::vector<Color> cells;
  cells.reserve(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) cells.push_back(g.at(x, y));
  return Grid(w, h, std::move(cells), g.ul_x(), g.ul_y());
}

inline Value apply(PrimitiveId id, const std::vector<Value>& a) {
  switch (id) {
    case PrimitiveId::kIdentity:
      return a[0];
    case PrimitiveId::kEqual:
      return compare(a[0], a[1], [](int x, int y) { return x == y; });
    case PrimitiveId::kNotEqual:
      return compare(a[0], a[1], [](int x, int y) { return x != y; });
    case PrimitiveId::kGreaterThan:
      return compare(a[0], a[1], [](int x, int y) { return x > y; });
    case PrimitiveId::kLessThan:
      return compare(a[0], a[1], [](int x, int y) { return x < y; });
    case PrimitiveId::kSwitch:
      return do_switch(a[0], a[1], a[2]);
    case PrimitiveId::kAdd:
      return arith(a[0], a[1], [](long long x, long long y) { return x + y; });
    case PrimitiveId::kSub:
      return arith(a[0], a[1], [](long long x, long long y) { return x - y; });
    case PrimitiveId::kMul:
      return arith(a[0], a[1], [](long long x, long long y) { return x * y; });
    case PrimitiveId::kSetPixels:
      return set_pixels(std::get<Grid>(a[0]), a[1], a[2], a[3]);
    case PrimitiveId::kColorOf:
      return std::get<IntList>(attr(std::get<Grid>(a[0]), Attribute::kC));
    case PrimitiveId::kCrop:
      return crop(std::get<Grid>(a[0]), std::get<int>(a[1]),
                  std::get<int>(a[2]));
    case PrimitiveId::kConstList: {
      const int k = std::get<int>(a[0]);
      const int n = std::get<int>(a[1]);
      if (n < 0 || n > kMaxGridSide * kMaxGridSide)
        throw DslError(DslErrorKind::kExecError, "const_list length out of range");
      return IntList(static_cast<std::size_t>(n), k);
    }
    case PrimitiveId::kNewGrid: {
      const int w = std::get<int>(a[0]);
      const int h = std::get<int>(a[1]);
      const int fill = std::get<int>(a[2]);
      if (w < 1 || h < 1 || w > kMaxGridSide || h > kMaxGridSide ||
          fill < 0 || fill >= kNumColors)
        throw DslError(DslErrorKind::kExecError, "new_grid argument out of range");
      return Grid(w, h, static_cast<Color>(fill));
    }
    case PrimitiveId::kDel:
      break;
  }
  throw DslError(DslErrorKind::kExecError, "del has no value");
}

}  // namespace detail

/// Checks arity and argument kinds against the current state without
/// executing anything. Throws DslError on violation.
inline void type_check(const ProgramState& state, const InstructionStep& step) {
  const Signature& sig = signature(step.primitive);
  if (step.args.size() != sig.arity)
    throw DslError(DslErrorKind::kArityMismatch,
                   std::string(sig.name) + " expects " +
                       std::to_string(sig.arity) + " arguments, got " +
                       std::to_string(step.args.size()));
  for (std::size_t i = 0; i < step.args.size(); ++i) {
    const Arg& a = step.args[i];
    if (sig.ref_only && a.kind != Arg::Kind::kRef)
      throw DslError(DslErrorKind::kTypeMismatch,
                     std::string(sig.name) + " takes a bare reference");
    if (a.kind == Arg::Kind::kConst && (a.value < 0 || a.value > 9))
      throw DslError(DslErrorKind::kTypeMismatch, "constant out of range 0-9");
    const ValueKind k = detail::arg_kind(state, a);
    if (!accepts(sig.params[i], k))
      throw DslError(DslErrorKind::kTypeMismatch,
                     std::string(sig.name) + " argument " + std::to_string(i) +
                         " does not accept " + std::string(kind_name(k)));
  }
}

struct StepOutcome {
  ProgramState state;
  /// The slot appended by the step; null for `del`.
  SlotPtr output;
};

/// Executes one step. `del` removes the referenced slot and renumbers the
/// later ones; every other primitive appends one slot computed example by
/// example.
inline StepOutcome exec_step(const ProgramState& state,
                             const InstructionStep& step) {
  type_check(state, step);
  StepOutcome out{state, nullptr};
  if (step.is_del()) {
    if (state.size() < 2)
      throw DslError(DslErrorKind::kExecError, "cannot delete the last variable");
    out.state.erase(static_cast<std::size_t>(step.args[0].value));
    return out;
  }
  if (static_cast<int>(state.size()) >= state.max_refs())
    throw DslError(DslErrorKind::kExecError, "reference budget exhausted");

  auto slot = std::make_shared<VarSlot>();
  slot->values.reserve(state.num_examples());
  std::vector<Value> args(step.args.size());
  for (std::size_t e = 0; e < state.num_examples(); ++e) {
    for (std::size_t i = 0; i < step.args.size(); ++i)
      args[i] = detail::eval_arg(state, step.args[i], e);
    slot->values.push_back(detail::apply(step.primitive, args));
  }
  slot->kind = kind_of(slot->values.front());
  for (const auto& v : slot->values)
    if (kind_of(v) != slot->kind)
      throw DslError(DslErrorKind::kExecError, "examples disagree on result kind");
  out.output = slot;
  out.state.push(std::move(slot));
  return out;
}

inline std::vector<Grid> slot_grids(const VarSlot& slot) {
  if (slot.kind != ValueKind::kGrid)
    throw DslError(DslErrorKind::kNonGridResult,
                   "result is a " + std::string(kind_name(slot.kind)));
  std::vector<Grid> out;
  out.reserve(slot.values.size());
  for (const auto& v : slot.values) out.push_back(std::get<Grid>(v));
  return out;
}

/// Runs a whole program. The result is the output of the last non-del
/// step; a program without such a step returns its inputs.
inline std::vector<Grid> run_program(const Program& p,
                                     const std::vector<Grid>& inputs,
                                     int max_refs = kDefaultMaxRefs) {
  ProgramState state = ProgramState::initial(inputs, max_refs);
  SlotPtr result = state.slot(0);
  for (const auto& step : p.steps) {
    auto o = exec_step(state, step);
    state = std::move(o.state);
    if (o.output) result = std::move(o.output);
  }
  return slot_grids(*result);
}

/// Rewrites a program into an equivalent one with no `del` steps: each
/// reference is mapped to the creation index of the value it names.
/// The result may need more reference slots than the original.
inline Program eliminate_dels(const Program& p) {
  std::vector<int> live = {0};  // current index -> creation index
  int created = 1;
  Program out;
  for (const auto& step : p.steps) {
    auto resolve = [&](int i) {
      if (i < 0 || static_cast<std::size_t>(i) >= live.size())
        throw DslError(DslErrorKind::kBadRef, "reference out of range");
      return live[static_cast<std::size_t>(i)];
    };
    if (step.is_del()) {
      const int i = step.args.at(0).value;
      resolve(i);
      live.erase(live.begin() + i);
      continue;
    }
    InstructionStep s = step;
    for (auto& a : s.args)
      if (a.is_ref()) a.value = resolve(a.value);
    out.steps.push_back(std::move(s));
    live.push_back(created++);
  }
  return out;
}

}  // namespace stepsynth

#endif  // STEPSYNTH_DSL_HPP_
