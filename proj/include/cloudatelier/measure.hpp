#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cloudatelier/geometry.hpp"
#include "cloudatelier/ingest.hpp"
#include "cloudatelier/node_code.hpp"
#include "cloudatelier/uuid.hpp"

namespace cloudatelier {

class PointIndex;

struct Vertex3 {
  Vec3 position;
  bool snapped = false;
  std::optional<NodeCode> snap_node;
  /// Unrecognized interchange fields, re-emitted verbatim.
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const Vertex3&, const Vertex3&) = default;
};

enum class SeriesKind { kDistance, kHeight, kAngle, kArea, kVolume, kProfile, kPolygon, kAnnotation };

std::string_view series_kind_name(SeriesKind kind);          // "distance", ...
std::optional<SeriesKind> series_kind_from_name(std::string_view name);
std::string_view series_kind_title(SeriesKind kind);         // "Distance", ...

struct Rgb {
  std::uint8_t r = 255;
  std::uint8_t g = 255;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Oriented box of a Volume measurement: center vertex + full extents + yaw (radians about z).
struct VolumeBox {
  Vec3 extent;
  double yaw = 0.0;

  friend bool operator==(const VolumeBox&, const VolumeBox&) = default;
};

struct MeasurementSeries {
  Uuid id;
  SeriesKind kind = SeriesKind::kDistance;
  std::vector<Vertex3> vertices;
  std::string label;
  Rgb color;
  std::optional<double> profile_width;
  std::optional<VolumeBox> box;
  std::uint64_t version = 1;
  std::string author;
  std::optional<Uuid> imported_from;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const MeasurementSeries&, const MeasurementSeries&) = default;
};

struct LayerDocument {
  Uuid id;
  std::string name;
  std::uint64_t base_version = 0;
  std::vector<MeasurementSeries> series;
  std::vector<Uuid> plane_refs;
  std::optional<Uuid> imported_from;
  nlohmann::json extra = nlohmann::json::object();

  const MeasurementSeries* find(const Uuid& series_id) const;
  MeasurementSeries* find(const Uuid& series_id);

  friend bool operator==(const LayerDocument&, const LayerDocument&) = default;
};

/// Throws ValidationFailed naming the violated invariant ("Angle requires 3 vertices").
void validate(const MeasurementSeries& series);
void validate(const LayerDocument& doc);

struct MeasurementResult {
  SeriesKind kind = SeriesKind::kDistance;
  /// Distance: {total}; Height: {dz}; Angle: {A, B, C} degrees; Area: {area};
  /// Volume: {volume}; Profile: {horizontal length}; Polygon/Annotation: {}.
  std::vector<double> values;
  /// Per-segment lengths (Distance: 3D, Profile: horizontal).
  std::vector<double> segments;
};

MeasurementResult evaluate(const MeasurementSeries& series);

/// Newell-vector area of a closed polygon (cyclic), |sum v_i x v_{i+1}| / 2.
double polygon_area(const std::vector<Vec3>& ring);

/// Nearest stored point within `radius` of `query`. Ties: distance, then node
/// code, then in-node index. Misses return the raw query with snapped=false.
Vertex3 snap(const Vec3& query, double radius, const PointIndex& index);

struct ProfileSample {
  double mileage = 0.0;
  double elevation = 0.0;
  double lateral = 0.0;
  PointRecord point;
  NodeCode node;
  std::uint32_t index_in_node = 0;
};

/// Points within width/2 (horizontally) of the polyline, from nodes down to
/// `depth_limit`, sorted by mileage along the XY projection. Lateral offsets
/// are positive to the left of the direction of travel.
std::vector<ProfileSample> extract_profile(const std::vector<Vertex3>& polyline, double width, const PointIndex& index,
                                           std::size_t depth_limit);

}  // namespace cloudatelier
