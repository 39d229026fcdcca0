#include "cloudatelier/geometry.hpp"

#include <algorithm>

#include "cloudatelier/error.hpp"

namespace cloudatelier {

namespace {

constexpr double kFallbackEdge = 1.0;

}  // namespace

Aabb cubify(const Aabb& box) {
  if (box.empty()) {
    throw Error(ErrorCode::kDegenerateExtent, "cannot cubify an empty box");
  }
  const Vec3 e = box.extent();
  double edge = std::max({e.x, e.y, e.z});
  if (edge <= 0.0) {
    edge = kFallbackEdge;
  }
  Aabb cube;
  cube.min = box.min;
  cube.max = box.min + Vec3{edge, edge, edge};
  // min + edge can round below the original max on a non-dominant axis.
  for (int i = 0; i < 3; ++i) {
    while (cube.max[i] < box.max[i]) {
      edge = std::nextafter(edge, std::numeric_limits<double>::infinity());
      cube.max = box.min + Vec3{edge, edge, edge};
    }
  }
  return cube;
}

Aabb cubify(const Aabb& box, std::uint64_t point_count) {
  if (!box.empty() && point_count > 1) {
    const Vec3 e = box.extent();
    if (e.x == 0.0 && e.y == 0.0 && e.z == 0.0) {
      throw Error(ErrorCode::kDegenerateExtent,
                  "all " + std::to_string(point_count) + " points share one position");
    }
  }
  return cubify(box);
}

}  // namespace cloudatelier
