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

// The task suite: 14 training tasks and 7 out-of-distribution tasks built
// from flips, shifts and a recolor, with ground-truth programs, an instance
// sampler, training-data emission and ARC JSON I/O.

#ifndef STEPSYNTH_TASKS_HPP_
#define STEPSYNTH_TASKS_HPP_

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stepsynth/dsl.hpp"
#include "stepsynth/oracle.hpp"
#include "stepsynth/program_text.hpp"
#include "stepsynth/token_codec.hpp"
#include "stepsynth/vocabulary.hpp"

namespace stepsynth {

/// The color the recolor tasks paint foreground pixels with.
inline constexpr int kGreen = 3;

// ---------------------------------------------------------------------------
// Ground-truth composition

enum class Subroutine : std::uint8_t {
  kFlipH,
  kFlipV,
  kRecolor,
  kShiftRight,
  kShiftLeft,
  kShiftUp,
  kShiftDown,
};

/// Builds straight-line programs out of subroutines. Each subroutine reads
/// the current grid and leaves its result as the new current grid. Slots
/// left behind are deleted, oldest first, only when the next subroutine
/// would otherwise overflow the reference budget.
class ProgramComposer {
 public:
  explicit ProgramComposer(int max_refs = kDefaultMaxRefs) : max_refs_(max_refs) {}

  ProgramComposer& then(Subroutine s) {
    make_room(peak_slots(s));
    const int in = current_;
    switch (s) {
      case Subroutine::kFlipH: {
        const int m = emit(PrimitiveId::kSub, {attr(in, Attribute::kMaxX), attr(in, Attribute::kX)});
        const int k = emit(PrimitiveId::kColorOf, {Arg::ref(in)});
        current_ = emit(PrimitiveId::kSetPixels,
                        {Arg::ref(in), Arg::ref(m), attr(in, Attribute::kY), Arg::ref(k)});
        break;
      }
      case Subroutine::kFlipV: {
        const int m = emit(PrimitiveId::kSub, {attr(in, Attribute::kMaxY), attr(in, Attribute::kY)});
        const int k = emit(PrimitiveId::kColorOf, {Arg::ref(in)});
        current_ = emit(PrimitiveId::kSetPixels,
                        {Arg::ref(in), attr(in, Attribute::kX), Arg::ref(m), Arg::ref(k)});
        break;
      }
      case Subroutine::kRecolor: {
        const int e = emit(PrimitiveId::kEqual, {attr(in, Attribute::kC), Arg::constant(0)});
        int w = emit(PrimitiveId::kSwitch, {Arg::ref(e), Arg::constant(0), Arg::constant(kGreen)});
        del(e);
        --w;
        current_ = emit(PrimitiveId::kSetPixels, {Arg::ref(in), attr(in, Attribute::kX),
                                                  attr(in, Attribute::kY), Arg::ref(w)});
        break;
      }
      case Subroutine::kShiftRight:
        shift(in, Attribute::kX, PrimitiveId::kAdd, Arg::constant(0));
        break;
      case Subroutine::kShiftLeft:
        shift(in, Attribute::kX, PrimitiveId::kSub, attr(in, Attribute::kMaxX));
        break;
      case Subroutine::kShiftUp:
        shift(in, Attribute::kY, PrimitiveId::kSub, attr(in, Attribute::kMaxY));
        break;
      case Subroutine::kShiftDown:
        shift(in, Attribute::kY, PrimitiveId::kAdd, Arg::constant(0));
        break;
    }
    return *this;
  }

  Program build() const { return program_; }

  /// New slots a subroutine needs at its peak.
  static int peak_slots(Subroutine s) {
    switch (s) {
      case Subroutine::kFlipH:
      case Subroutine::kFlipV: return 3;
      case Subroutine::kRecolor: return 2;
      default: return 4;
    }
  }

 private:
  static Arg attr(int ref, Attribute a) { return Arg::ref_attr(ref, a); }

  int emit(PrimitiveId id, std::vector<Arg> args) {
    program_.steps.push_back({id, std::move(args)});
    return slots_++;
  }

  void del(int ref) {
    program_.steps.push_back({PrimitiveId::kDel, {Arg::ref(ref)}});
    --slots_;
  }

  // Moves the grid one cell along `axis`, crops back to the input size and
  // clears the vacated line (at coordinate `vacated`).
  void shift(int in, Attribute axis, PrimitiveId op, Arg vacated) {
    const bool horizontal = axis == Attribute::kX;
    const int a = emit(op, {attr(in, axis), Arg::constant(1)});
    const int b = emit(PrimitiveId::kSetPixels,
                       {Arg::ref(in), horizontal ? Arg::ref(a) : attr(in, Attribute::kX),
                        horizontal ? attr(in, Attribute::kY) : Arg::ref(a),
                        attr(in, Attribute::kC)});
    const int c = emit(PrimitiveId::kCrop,
                       {Arg::ref(b), attr(in, Attribute::kWidth), attr(in, Attribute::kHeight)});
    current_ = emit(PrimitiveId::kSetPixels,
                    {Arg::ref(c), horizontal ? vacated : attr(in, Attribute::kX),
                     horizontal ? attr(in, Attribute::kY) : vacated, Arg::constant(0)});
  }

  void make_room(int needed) {
    // Every slot but the current grid is dead at a subroutine boundary.
    while (slots_ + needed > max_refs_) {
      const int victim = current_ == 0 ? 1 : 0;
      if (victim >= slots_) throw std::logic_error("subroutine exceeds the reference budget");
      del(victim);
      if (current_ > victim) --current_;
    }
  }

  int max_refs_;
  int slots_ = 1;
  int current_ = 0;
  Program program_;
};

inline Program compose(std::initializer_list<Subroutine> parts, int max_refs = kDefaultMaxRefs) {
  ProgramComposer c(max_refs);
  for (Subroutine s : parts) c.then(s);
  return c.build();
}

// ---------------------------------------------------------------------------
// Task specs

struct SamplerParams {
  int min_side = 3;
  int max_side = 30;
  /// Probability that a cell is background (0).
  double zero_fraction = 0.6;
  int n_demos = 3;
  int n_tests = 1;
  int max_rejections = 1000;
};

struct TaskSpec {
  std::string id;
  std::string description;
  Program ground_truth;
  bool ood = false;
  SamplerParams sampler;
};

inline std::vector<TaskSpec> training_tasks() {
  using S = Subroutine;
  auto t = [](int n, const char* d, std::initializer_list<S> parts) {
    return TaskSpec{"Train" + std::to_string(n), d, compose(parts), false, {}};
  };
  return {
      t(1, "Flip horizontally", {S::kFlipH}),
      t(2, "Flip vertically", {S::kFlipV}),
      t(3, "Recolor foreground to green", {S::kRecolor}),
      t(4, "Flip horizontally, recolor to green", {S::kFlipH, S::kRecolor}),
      t(5, "Flip vertically, recolor to green", {S::kFlipV, S::kRecolor}),
      t(6, "Shift right", {S::kShiftRight}),
      t(7, "Shift up", {S::kShiftUp}),
      t(8, "Shift down", {S::kShiftDown}),
      t(9, "Shift right, then flip horizontally", {S::kShiftRight, S::kFlipH}),
      t(10, "Flip vertically, then shift right", {S::kFlipV, S::kShiftRight}),
      t(11, "Flip horizontally, then shift up", {S::kFlipH, S::kShiftUp}),
      t(12, "Shift down, then flip horizontally", {S::kShiftDown, S::kFlipH}),
      t(13, "Shift up, then flip vertically", {S::kShiftUp, S::kFlipV}),
      t(14, "Flip vertically, then shift up", {S::kFlipV, S::kShiftUp}),
  };
}

inline std::vector<TaskSpec> ood_tasks() {
  using S = Subroutine;
  auto t = [](int n, const char* d, std::initializer_list<S> parts) {
    return TaskSpec{"OOD" + std::to_string(n), d, compose(parts), true, {}};
  };
  return {
      t(1, "Shift right, recolor to green", {S::kShiftRight, S::kRecolor}),
      t(2, "Flip horizontally, then shift right", {S::kFlipH, S::kShiftRight}),
      t(3, "Shift diagonally up and right", {S::kShiftUp, S::kShiftRight}),
      t(4, "Rotate 180 degrees", {S::kFlipV, S::kFlipH}),
      t(5, "Flip horizontally, shift right, flip vertically",
        {S::kFlipH, S::kShiftRight, S::kFlipV}),
      t(6, "Recolor to green, shift diagonally up and right",
        {S::kRecolor, S::kShiftUp, S::kShiftRight}),
      t(7, "Shift left", {S::kShiftLeft}),
  };
}

inline std::vector<TaskSpec> all_tasks() {
  auto out = training_tasks();
  for (auto& t : ood_tasks()) out.push_back(std::move(t));
  return out;
}

inline std::optional<TaskSpec> find_task(const std::string& id) {
  for (auto& t : all_tasks())
    if (t.id == id) return t;
  return std::nullopt;
}

inline std::vector<NamedProgram> ground_truths(const std::vector<TaskSpec>& specs) {
  std::vector<NamedProgram> out;
  for (const auto& s : specs) out.push_back({s.id, s.ground_truth});
  return out;
}

// ---------------------------------------------------------------------------
// Instances

struct TaskInstance {
  std::vector<std::pair<Grid, Grid>> demos;
  std::vector<std::pair<Grid, Grid>> tests;

  std::vector<Grid> demo_inputs() const { return column(demos, true); }
  std::vector<Grid> demo_targets() const { return column(demos, false); }
  std::vector<Grid> test_inputs() const { return column(tests, true); }
  std::vector<Grid> test_targets() const { return column(tests, false); }

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;

 private:
  static std::vector<Grid> column(const std::vector<std::pair<Grid, Grid>>& v, bool first) {
    std::vector<Grid> out;
    for (const auto& p : v) out.push_back(first ? p.first : p.second);
    return out;
  }
};

class SamplerExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Grid sample_grid(std::mt19937_64& rng, const SamplerParams& p) {
  std::uniform_int_distribution<int> side(p.min_side, p.max_side);
  std::uniform_int_distribution<int> color(1, kNumColors - 1);
  std::bernoulli_distribution zero(p.zero_fraction);
  const int w = side(rng), h = side(rng);
  std::vector<Color> cells(static_cast<std::size_t>(w) * h);
  for (auto& c : cells) c = zero(rng) ? 0 : static_cast<Color>(color(rng));
  return Grid(w, h, std::move(cells));
}

namespace detail {

// Calls f on every legal single step at `state`, stopping when f returns true.
inline bool for_each_legal_step(const Vocabulary& v, const StateShape& shape, TokenSeq& prefix,
                                const std::function<bool(const TokenSeq&)>& f) {
  for (Token t : legal_next_tokens(v, shape, prefix)) {
    prefix.push_back(t);
    const bool stop = t == v.eos() ? f(prefix) : for_each_legal_step(v, shape, prefix, f);
    prefix.pop_back();
    if (stop) return true;
  }
  return false;
}

}  // namespace detail

/// True if the empty program or any single step maps every input to its
/// target.
inline bool solvable_within_one_step(const std::vector<Grid>& inputs,
                                     const std::vector<Grid>& targets,
                                     const Vocabulary& v = {}) {
  bool identity = true;
  for (std::size_t e = 0; e < inputs.size(); ++e)
    identity = identity && grids_equal(inputs[e], targets[e]);
  if (identity) return true;
  const ProgramState full = ProgramState::initial(inputs, v.max_refs());
  const ProgramState first = ProgramState::initial({inputs.front()}, v.max_refs());
  const std::vector<Grid> first_target = {targets.front()};
  TokenSeq prefix;
  return detail::for_each_legal_step(v, StateShape::of(full), prefix, [&](const TokenSeq& t) {
    const InstructionStep step = decode_instruction(t, v);
    if (step.is_del()) return false;
    const auto produces = [&](const ProgramState& s, const std::vector<Grid>& want) {
      try {
        const SlotPtr out = exec_step(s, step).output;
        if (out->kind != ValueKind::kGrid) return false;
        for (std::size_t e = 0; e < want.size(); ++e)
          if (!grids_equal(std::get<Grid>(out->values[e]), want[e])) return false;
        return true;
      } catch (const DslError&) {
        return false;
      }
    };
    // Screen on the first example before paying for all of them.
    return produces(first, first_target) && produces(full, targets);
  });
}

/// Samples demo and test pairs for a task. Rejects instances where some
/// input equals its target or where a program of at most one step already
/// explains the demonstrations.
inline TaskInstance sample_instance(const TaskSpec& spec, std::mt19937_64& rng,
                                    std::optional<int> n_demos = std::nullopt,
                                    std::optional<int> n_tests = std::nullopt) {
  const SamplerParams& p = spec.sampler;
  const int demos = n_demos.value_or(p.n_demos);
  const int tests = n_tests.value_or(p.n_tests);
  if (demos < 1) throw std::invalid_argument("need at least one demonstration");
  for (int attempt = 0; attempt < p.max_rejections; ++attempt) {
    std::vector<Grid> inputs;
    for (int i = 0; i < demos + tests; ++i) inputs.push_back(sample_grid(rng, p));
    std::vector<Grid> targets;
    try {
      targets = run_program(spec.ground_truth, inputs);
    } catch (const DslError&) {
      continue;
    }
    bool trivial = false;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      trivial = trivial || grids_equal(inputs[i], targets[i]);
    if (trivial) continue;
    const std::vector<Grid> din(inputs.begin(), inputs.begin() + demos);
    const std::vector<Grid> dout(targets.begin(), targets.begin() + demos);
    if (solvable_within_one_step(din, dout)) continue;
    TaskInstance inst;
    for (int i = 0; i < demos + tests; ++i)
      (i < demos ? inst.demos : inst.tests).emplace_back(inputs[i], targets[i]);
    return inst;
  }
  throw SamplerExhausted("no acceptable instance of " + spec.id + " after " +
                         std::to_string(p.max_rejections) + " draws");
}

// ---------------------------------------------------------------------------
// Training data

struct TrainingSample {
  TokenSeq state_tokens;
  TokenSeq target_tokens;
};

/// Decomposes the ground truth of a single-pair instance into one sample
/// per step: the state before the step and the step itself.
inline std::vector<TrainingSample> decompose(const Program& gt, const std::vector<Grid>& inputs,
                                             const std::vector<Grid>& targets,
                                             const Vocabulary& v = {}) {
  std::vector<TrainingSample> out;
  ProgramState s = ProgramState::initial(inputs, v.max_refs());
  for (const auto& step : gt.steps) {
    out.push_back({encode_state(s, targets), encode_instruction(step, v)});
    s = exec_step(s, step).state;
  }
  return out;
}

inline std::string sample_json(const TrainingSample& s) {
  nlohmann::json j;
  j["state_tokens"] = s.state_tokens;
  j["target_tokens"] = s.target_tokens;
  return j.dump();
}

/// Writes `n_examples` single-pair instances, drawn uniformly from `specs`,
/// as JSON lines. Returns the number of lines written.
inline std::size_t emit_dataset(const std::vector<TaskSpec>& specs, std::size_t n_examples,
                                std::uint64_t seed, std::ostream& out,
                                const Vocabulary& v = {}) {
  if (specs.empty()) throw std::invalid_argument("no task specs");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, specs.size() - 1);
  std::size_t lines = 0;
  for (std::size_t n = 0; n < n_examples; ++n) {
    const TaskSpec& spec = specs[pick(rng)];
    const TaskInstance inst = sample_instance(spec, rng, 1, 0);
    for (const auto& s : decompose(spec.ground_truth, inst.demo_inputs(), inst.demo_targets(), v)) {
      out << sample_json(s) << '\n';
      ++lines;
    }
  }
  return lines;
}

// ---------------------------------------------------------------------------
// ARC JSON

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace detail {

inline Grid grid_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw FormatError(path, "expected a non-empty array of rows");
  std::vector<std::vector<int>> rows;
  for (std::size_t y = 0; y < j.size(); ++y) {
    const std::string rp = path + "/" + std::to_string(y);
    if (!j[y].is_array() || j[y].empty()) throw FormatError(rp, "expected a non-empty row");
    if (j[y].size() != j[0].size()) throw FormatError(rp, "ragged row");
    std::vector<int> row;
    for (std::size_t x = 0; x < j[y].size(); ++x) {
      const auto& c = j[y][x];
      const std::string cp = rp + "/" + std::to_string(x);
      if (!c.is_number_integer()) throw FormatError(cp, "expected an integer color");
      const auto v = c.get<long long>();
      if (v < 0 || v >= kNumColors) throw FormatError(cp, "color out of range 0-9");
      row.push_back(static_cast<int>(v));
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() > kMaxTaskGridSide || rows[0].size() > kMaxTaskGridSide)
    throw FormatError(path, "grid larger than 30x30");
  return Grid::from_rows(rows);
}

inline std::vector<std::pair<Grid, Grid>> pairs_from_json(const nlohmann::json& j,
                                                          const std::string& key,
                                                          bool required) {
  const std::string path = "/" + key;
  if (!j.contains(key)) {
    if (required) throw FormatError(path, "missing");
    return {};
  }
  const auto& arr = j[key];
  if (!arr.is_array()) throw FormatError(path, "expected an array");
  std::vector<std::pair<Grid, Grid>> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    if (!arr[i].is_object()) throw FormatError(p, "expected an object");
    for (const char* k : {"input", "output"})
      if (!arr[i].contains(k)) throw FormatError(p + "/" + k, "missing");
    Grid in = grid_from_json(arr[i]["input"], p + "/input");
    out.emplace_back(std::move(in), grid_from_json(arr[i]["output"], p + "/output"));
  }
  return out;
}

}  // namespace detail

inline TaskInstance parse_arc_task(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("", e.what());
  }
  if (!j.is_object()) throw FormatError("", "expected an object");
  TaskInstance inst;
  inst.demos = detail::pairs_from_json(j, "train", true);
  inst.tests = detail::pairs_from_json(j, "test", false);
  if (inst.demos.empty()) throw FormatError("/train", "no demonstration pairs");
  return inst;
}

inline TaskInstance load_arc_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_arc_task(ss.str());
}

inline std::string arc_task_json(const TaskInstance& inst) {
  auto pairs = [](const std::vector<std::pair<Grid, Grid>>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [in, out] : v) arr.push_back({{"input", in.rows()}, {"output", out.rows()}});
    return arr;
  };
  nlohmann::json j;
  j["train"] = pairs(inst.demos);
  j["test"] = pairs(inst.tests);
  return j.dump();
}

inline void write_arc_task(const TaskInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path, "cannot open file for writing");
  out << arc_task_json(inst) << '\n';
}

}  // namespace stepsynth

#endif  // STEPSYNTH_TASKS_HPP_
