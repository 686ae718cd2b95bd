#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "treepoly/error.hpp"

namespace treepoly {

/// A finite +-1 path from the root of the binary tree.
///
/// Encoded as (bits, depth): step j (1-based) is bit depth-j of `bits`, a set
/// bit meaning -1. Numeric order of `bits` at fixed depth is therefore the
/// canonical vertex order (lexicographic with +1 before -1), and `bits` is
/// the vertex's index in every depth-m array.
class Vertex {
 public:
  static constexpr int kMaxDepth = 62;

  constexpr Vertex() = default;

  constexpr Vertex(std::uint64_t bits, int depth) : bits_(bits), depth_(depth) {
    if (depth < 0 || depth > kMaxDepth) throw ConfigError("vertex depth out of range");
    if (depth < 64 && (bits >> depth) != 0) throw ConfigError("vertex bits exceed depth");
  }

  static constexpr Vertex root() { return {}; }

  /// No range checks; for traversal loops that construct valid encodings.
  static constexpr Vertex unchecked(std::uint64_t bits, int depth) {
    Vertex v;
    v.bits_ = bits;
    v.depth_ = depth;
    return v;
  }

  static Vertex from_steps(const std::vector<int>& steps) {
    Vertex v;
    for (int s : steps) v = v.child(s);
    return v;
  }

  /// Parses "+-+" (also accepts "0" or "" for the root).
  static Vertex parse(std::string_view text) {
    Vertex v;
    if (text == "0") return v;
    for (char c : text) {
      if (c == '+') v = v.child(+1);
      else if (c == '-') v = v.child(-1);
      else throw ConfigError("vertex string may contain only '+' and '-'");
    }
    return v;
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr int depth() const { return depth_; }
  constexpr std::uint64_t index() const { return bits_; }
  constexpr bool is_root() const { return depth_ == 0; }

  /// Step j in {+1,-1}, j = 1..depth.
  constexpr int step(int j) const { return ((bits_ >> (depth_ - j)) & 1u) ? -1 : +1; }

  constexpr Vertex child(int step) const {
    if (depth_ >= kMaxDepth) throw ConfigError("vertex depth out of range");
    return {(bits_ << 1) | (step < 0 ? 1u : 0u), depth_ + 1};
  }

  constexpr Vertex parent() const { return {bits_ >> 1, depth_ - 1}; }

  /// The restriction v|j.
  constexpr Vertex prefix(int j) const { return {bits_ >> (depth_ - j), j}; }

  /// Concatenation v * t.
  constexpr Vertex concat(const Vertex& t) const {
    if (depth_ + t.depth_ > kMaxDepth) throw ConfigError("vertex depth out of range");
    return {(bits_ << t.depth_) | t.bits_, depth_ + t.depth_};
  }

  /// Sum of the steps, the polygonal position (v)_m.
  constexpr int position() const {
    return depth_ - 2 * static_cast<int>(std::popcount(bits_));
  }

  std::vector<int> steps() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(depth_));
    for (int j = 1; j <= depth_; ++j) out.push_back(step(j));
    return out;
  }

  std::string to_string() const {
    if (depth_ == 0) return "0";
    std::string out;
    out.reserve(static_cast<std::size_t>(depth_));
    for (int j = 1; j <= depth_; ++j) out.push_back(step(j) > 0 ? '+' : '-');
    return out;
  }

  friend constexpr bool operator==(const Vertex&, const Vertex&) = default;

 private:
  std::uint64_t bits_ = 0;
  int depth_ = 0;
};

}  // namespace treepoly
