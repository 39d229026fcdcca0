#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cloudatelier/geometry.hpp"
#include "cloudatelier/ingest.hpp"
#include "cloudatelier/measure.hpp"
#include "cloudatelier/uuid.hpp"

namespace cloudatelier {

/// Plane {p : normal . p = offset}, normal unit length, offset >= 0.
struct Plane {
  Uuid id;
  Vec3 normal{0, 0, 1};
  double offset = 0.0;
  std::uint32_t inlier_count = 0;
  Aabb inlier_aabb;
  double rms_residual = 0.0;

  double signed_distance(const Vec3& p) const { return dot(normal, p) - offset; }

  friend bool operator==(const Plane&, const Plane&) = default;
};

struct SegmentConfig {
  double epsilon = 0.01;
  std::uint32_t min_inliers = 500;
  std::uint32_t max_planes = 16;
  std::uint32_t iterations_per_plane = 300;
  std::uint64_t seed = 1;
};

struct SegmentationResult {
  std::vector<PointRecord> points;
  /// Per point: 0 when unassigned, else 1-based index into `planes`.
  std::vector<std::uint32_t> plane_index;
  /// Descending inlier count.
  std::vector<Plane> planes;
  std::uint64_t seed = 0;
};

SegmentationResult segment_planes(std::vector<PointRecord> points, const SegmentConfig& cfg);

/// Least-squares plane through `points` (centroid + smallest-eigenvalue
/// eigenvector of the scatter matrix), oriented so offset >= 0.
std::pair<Vec3, double> fit_plane(std::span<const Vec3> points);

/// Root mean square of signed distances from `points` to the plane.
double rms_residual(const Vec3& normal, double offset, std::span<const Vec3> points);

/// Nearest plane within max_dist (ties: lower id) and the orthogonal projection
/// of `vertex` onto it.
std::optional<std::pair<Uuid, Vertex3>> anchor_to_plane(const Vertex3& vertex, const std::vector<Plane>& planes,
                                                        double max_dist);

/// `<dir>/byproduct.json` + `<dir>/byproduct.bin` (18-byte tile records relative
/// to `origin` followed by a u16 plane index).
void write_byproduct(const std::filesystem::path& dir, const SegmentationResult& result, const Vec3& origin,
                     const SegmentConfig& cfg);
SegmentationResult read_byproduct(const std::filesystem::path& dir);

}  // namespace cloudatelier
