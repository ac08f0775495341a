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

#ifndef STEPSYNTH_GRID_HPP_
#define STEPSYNTH_GRID_HPP_

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stepsynth {

using Color = std::uint8_t;

inline constexpr int kNumColors = 10;
/// Largest side of a task input/output grid.
inline constexpr int kMaxTaskGridSide = 30;
/// Largest side any intermediate grid may reach during execution.
inline constexpr int kMaxGridSide = 64;

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Immutable 2D array of colors with an upper-left offset.
///
/// Cells are stored row-major. The offset is only meaningful for
/// sub-grids cut out of a larger grid; task grids carry (0, 0).
class Grid {
 public:
  Grid() : Grid(1, 1) {}

  /// A width x height grid filled with `fill`.
  Grid(int width, int height, Color fill = 0, int ul_x = 0, int ul_y = 0)
      : width_(width), height_(height), ul_x_(ul_x), ul_y_(ul_y) {
    check_shape(width, height, ul_x, ul_y);
    if (fill >= kNumColors) throw GridError("color out of range");
    cells_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  Grid(int width, int height, std::vector<Color> cells, int ul_x = 0,
       int ul_y = 0)
      : width_(width), height_(height), ul_x_(ul_x), ul_y_(ul_y),
        cells_(std::move(cells)) {
    check_shape(width, height, ul_x, ul_y);
    if (cells_.size() != static_cast<std::size_t>(width) * height)
      throw GridError("cell count does not match dimensions");
    for (Color c : cells_)
      if (c >= kNumColors) throw GridError("color out of range");
  }

  /// Builds a grid from rows; all rows must have equal length.
  static Grid from_rows(const std::vector<std::vector<int>>& rows) {
    if (rows.empty() || rows.front().empty()) throw GridError("empty grid");
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows.front().size());
    std::vector<Color> cells;
    cells.reserve(static_cast<std::size_t>(w) * h);
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != w) throw GridError("ragged rows");
      for (int v : row) {
        if (v < 0 || v >= kNumColors) throw GridError("color out of range");
        cells.push_back(static_cast<Color>(v));
      }
    }
    return Grid(w, h, std::move(cells));
  }

  static Grid from_rows(std::initializer_list<std::initializer_list<int>> rows) {
    std::vector<std::vector<int>> v;
    for (const auto& r : rows) v.emplace_back(r);
    return from_rows(v);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int ul_x() const { return ul_x_; }
  int ul_y() const { return ul_y_; }
  std::size_t size() const { return cells_.size(); }

  Color at(int x, int y) const {
    return cells_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<Color>& cells() const { return cells_; }

  std::vector<std::vector<int>> rows() const {
    std::vector<std::vector<int>> out(height_, std::vector<int>(width_));
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) out[y][x] = at(x, y);
    return out;
  }

  bool is_task_sized() const {
    return width_ <= kMaxTaskGridSide && height_ <= kMaxTaskGridSide;
  }

  /// Exact structural equality, offsets included.
  friend bool operator==(const Grid& a, const Grid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ &&
           a.ul_x_ == b.ul_x_ && a.ul_y_ == b.ul_y_ && a.cells_ == b.cells_;
  }

 private:
  static void check_shape(int w, int h, int ul_x, int ul_y) {
    if (w < 1 || h < 1) throw GridError("grid dimensions must be positive");
    if (w > kMaxGridSide || h > kMaxGridSide)
      throw GridError("grid exceeds the hard size cap");
    if (ul_x < 0 || ul_y < 0) throw GridError("negative grid offset");
  }

  int width_;
  int height_;
  int ul_x_;
  int ul_y_;
  std::vector<Color> cells_;
};

inline std::ostream& operator<<(std::ostream& os, const Grid& g) {
  os << "[";
  for (int y = 0; y < g.height(); ++y) {
    os << (y ? ",[" : "[");
    for (int x = 0; x < g.width(); ++x) os << (x ? "," : "") << int(g.at(x, y));
    os << "]";
  }
  return os << "]";
}

/// Solution-check equality: same dimensions and cells, offsets ignored.
inline bool grids_equal(const Grid& a, const Grid& b) {
  return a.width() == b.width() && a.height() == b.height() &&
         a.cells() == b.cells();
}

enum class Attribute : std::uint8_t {
  kX,
  kY,
  kC,
  kWidth,
  kHeight,
  kMaxX,
  kMaxY,
  kUlX,
  kUlY,
};

inline constexpr std::array<Attribute, 9> kAllAttributes = {
    Attribute::kX,      Attribute::kY,    Attribute::kC,
    Attribute::kWidth,  Attribute::kHeight, Attribute::kMaxX,
    Attribute::kMaxY,   Attribute::kUlX,  Attribute::kUlY};

inline constexpr std::string_view attribute_name(Attribute a) {
  constexpr std::array<std::string_view, 9> names = {
      "x", "y", "c", "width", "height", "max_x", "max_y", "ul_x", "ul_y"};
  return names[static_cast<std::size_t>(a)];
}

inline std::optional<Attribute> attribute_from_name(std::string_view name) {
  for (Attribute a : kAllAttributes)
    if (attribute_name(a) == name) return a;
  return std::nullopt;
}

/// True for the per-cell list attributes (.x, .y, .c).
inline constexpr bool attribute_is_list(Attribute a) {
  return a == Attribute::kX || a == Attribute::kY || a == Attribute::kC;
}

/// Result of reading an attribute: a per-cell list or a scalar.
using AttrValue = std::variant<int, std::vector<int>>;

/// Reads an attribute. List attributes enumerate cells row-major
/// (left to right, top down).
inline AttrValue attr(const Grid& g, Attribute a) {
  const int w = g.width();
  const int h = g.height();
  switch (a) {
    case Attribute::kX:
    case Attribute::kY:
    case Attribute::kC: {
      std::vector<int> out;
      out.reserve(g.size());
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out.push_back(a == Attribute::kX   ? x
                        : a == Attribute::kY ? y
                                             : int(g.at(x, y)));
      return out;
    }
    case Attribute::kWidth: return w;
    case Attribute::kHeight: return h;
    case Attribute::kMaxX: return w - 1;
    case Attribute::kMaxY: return h - 1;
    case Attribute::kUlX: return g.ul_x();
    case Attribute::kUlY: return g.ul_y();
  }
  return 0;
}

}  // namespace stepsynth

#endif  // STEPSYNTH_GRID_HPP_
