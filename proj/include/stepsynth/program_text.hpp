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

// Line-oriented program text:
//
//   equal(N0.c, 0)
//   switch(N1, 0, 2)
//   del(N1)
//   set_pixels(N0, N0.x, N0.y, N1)
//
// format_program() emits exactly this canonical form, one instruction
// per '\n'-terminated line; parse_program() accepts it back along with
// extra blanks, blank lines and '#' comments.

#ifndef STEPSYNTH_PROGRAM_TEXT_HPP_
#define STEPSYNTH_PROGRAM_TEXT_HPP_

#include <cctype>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "stepsynth/dsl.hpp"

namespace stepsynth {

class ProgramParseError : public std::runtime_error {
 public:
  ProgramParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline std::string format_arg(const Arg& a) {
  switch (a.kind) {
    case Arg::Kind::kConst:
      return std::to_string(a.value);
    case Arg::Kind::kRef:
      return "N" + std::to_string(a.value);
    case Arg::Kind::kRefAttr:
      return "N" + std::to_string(a.value) + "." +
             std::string(attribute_name(a.attribute));
  }
  return {};
}

inline std::string format_step(const InstructionStep& s) {
  std::string out(signature(s.primitive).name);
  out += '(';
  for (std::size_t i = 0; i < s.args.size(); ++i) {
    if (i) out += ", ";
    out += format_arg(s.args[i]);
  }
  out += ')';
  return out;
}

inline std::string format_program(const Program& p) {
  std::string out;
  for (const auto& s : p.steps) {
    out += format_step(s);
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

inline bool parse_uint(std::string_view s, int& out) {
  if (s.empty() || s.size() > 6) return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

inline Arg parse_arg(std::string_view text, std::size_t line) {
  text = trim(text);
  int v = 0;
  if (parse_uint(text, v)) {
    if (v > 9) throw ProgramParseError(line, "constant out of range 0-9");
    return Arg::constant(v);
  }
  if (text.empty() || text.front() != 'N')
    throw ProgramParseError(line, "bad argument '" + std::string(text) + "'");
  text.remove_prefix(1);
  const auto dot = text.find('.');
  if (!parse_uint(text.substr(0, dot), v))
    throw ProgramParseError(line, "bad reference");
  if (dot == std::string_view::npos) return Arg::ref(v);
  auto a = attribute_from_name(text.substr(dot + 1));
  if (!a) throw ProgramParseError(line, "unknown attribute");
  return Arg::ref_attr(v, *a);
}

}  // namespace detail

inline InstructionStep parse_step(std::string_view text, std::size_t line = 1) {
  text = detail::trim(text);
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')')
    throw ProgramParseError(line, "expected name(args)");
  auto id = primitive_from_name(detail::trim(text.substr(0, open)));
  if (!id) throw ProgramParseError(line, "unknown primitive");
  InstructionStep step{*id, {}};
  std::string_view body = text.substr(open + 1, text.size() - open - 2);
  if (!detail::trim(body).empty()) {
    std::size_t start = 0;
    while (true) {
      const auto comma = body.find(',', start);
      step.args.push_back(detail::parse_arg(
          body.substr(start, comma == std::string_view::npos
                                 ? std::string_view::npos
                                 : comma - start),
          line));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }
  if (step.args.size() != signature(*id).arity)
    throw ProgramParseError(line, "wrong number of arguments");
  return step;
}

inline Program parse_program(std::string_view text) {
  Program p;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    p.steps.push_back(parse_step(line, line_no));
  }
  return p;
}

}  // namespace stepsynth

#endif  // STEPSYNTH_PROGRAM_TEXT_HPP_
