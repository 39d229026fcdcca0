#include "cloudatelier/node_code.hpp"

#include <stdexcept>

namespace cloudatelier {

std::optional<NodeCode> NodeCode::parse(std::string_view text) {
  if (text.empty() || text.front() != 'r') return std::nullopt;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '7') return std::nullopt;
  }
  return NodeCode(std::string(text));
}

NodeCode NodeCode::child(int octant) const {
  if (octant < 0 || octant > 7) throw std::out_of_range("octant out of range");
  return NodeCode(path_ + static_cast<char>('0' + octant));
}

NodeCode NodeCode::parent() const {
  if (is_root()) return *this;
  return NodeCode(path_.substr(0, path_.size() - 1));
}

Aabb NodeCode::bounds(const Aabb& root) const {
  Aabb box = root;
  for (std::size_t i = 1; i < path_.size(); ++i) {
    box = child_bounds(box, path_[i] - '0');
  }
  return box;
}

int octant_of(const Vec3& p, const Aabb& box) {
  const Vec3 c = box.center();
  return (p.x >= c.x ? 4 : 0) | (p.y >= c.y ? 2 : 0) | (p.z >= c.z ? 1 : 0);
}

Aabb child_bounds(const Aabb& box, int octant) {
  const Vec3 c = box.center();
  Aabb child;
  const bool high[3] = {(octant & 4) != 0, (octant & 2) != 0, (octant & 1) != 0};
  for (int i = 0; i < 3; ++i) {
    child.min[i] = high[i] ? c[i] : box.min[i];
    child.max[i] = high[i] ? box.max[i] : c[i];
  }
  return child;
}

}  // namespace cloudatelier
