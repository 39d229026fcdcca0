#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "cloudatelier/geometry.hpp"

namespace cloudatelier {

/// Path address of an octree cell: "r" for the root, then one octant digit per
/// level. Octant bits: 4 = x-high, 2 = y-high, 1 = z-high.
class NodeCode {
 public:
  NodeCode() : path_("r") {}

  static NodeCode root() { return NodeCode(); }
  /// Parses "r", "r0", "r07"...; nullopt on anything else.
  static std::optional<NodeCode> parse(std::string_view text);

  const std::string& str() const { return path_; }
  std::size_t level() const { return path_.size() - 1; }
  bool is_root() const { return path_.size() == 1; }

  NodeCode child(int octant) const;
  NodeCode parent() const;
  /// Octant digit of the last step (root has none).
  int octant() const { return path_.back() - '0'; }

  /// Box of this cell inside the cubic root box.
  Aabb bounds(const Aabb& root) const;

  friend auto operator<=>(const NodeCode&, const NodeCode&) = default;
  friend bool operator==(const NodeCode&, const NodeCode&) = default;

 private:
  explicit NodeCode(std::string path) : path_(std::move(path)) {}

  std::string path_;
};

/// Octant of `p` relative to the center of `box`.
int octant_of(const Vec3& p, const Aabb& box);

/// Child box of `box` for `octant`, split at the center.
Aabb child_bounds(const Aabb& box, int octant);

/// Breadth-first order: by level, then lexicographic. Parents sort before children.
inline bool breadth_first_less(const NodeCode& a, const NodeCode& b) {
  if (a.level() != b.level()) return a.level() < b.level();
  return a.str() < b.str();
}

}  // namespace cloudatelier
