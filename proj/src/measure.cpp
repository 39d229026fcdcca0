#include "cloudatelier/measure.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <tuple>

#include "cloudatelier/error.hpp"
#include "cloudatelier/octree.hpp"

namespace cloudatelier {

namespace {

constexpr double kRadToDeg = 57.295779513082320876798;

struct KindInfo {
  SeriesKind kind;
  std::string_view name;
  std::string_view title;
};

constexpr std::array<KindInfo, 8> kKinds = {{
    {SeriesKind::kDistance, "distance", "Distance"},
    {SeriesKind::kHeight, "height", "Height"},
    {SeriesKind::kAngle, "angle", "Angle"},
    {SeriesKind::kArea, "area", "Area"},
    {SeriesKind::kVolume, "volume", "Volume"},
    {SeriesKind::kProfile, "profile", "Profile"},
    {SeriesKind::kPolygon, "polygon", "Polygon"},
    {SeriesKind::kAnnotation, "annotation", "Annotation"},
}};

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kValidationFailed, what); }

void require_count(const MeasurementSeries& s, std::size_t min, std::size_t max) {
  const std::size_t n = s.vertices.size();
  if (n >= min && n <= max) return;
  const std::string title(series_kind_title(s.kind));
  if (min == max) {
    invalid(title + " requires " + std::to_string(min) + (min == 1 ? " vertex" : " vertices"));
  }
  invalid(title + " requires at least " + std::to_string(min) + " vertices");
}

double interior_angle(const Vec3& at, const Vec3& a, const Vec3& b) {
  const Vec3 u = a - at;
  const Vec3 v = b - at;
  double c = dot(u, v) / (norm(u) * norm(v));
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

double horizontal_length(const Vec3& a, const Vec3& b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace

std::string_view series_kind_name(SeriesKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "?";
}

std::string_view series_kind_title(SeriesKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.title;
  }
  return "?";
}

std::optional<SeriesKind> series_kind_from_name(std::string_view name) {
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  return std::nullopt;
}

const MeasurementSeries* LayerDocument::find(const Uuid& series_id) const {
  for (const auto& s : series) {
    if (s.id == series_id) return &s;
  }
  return nullptr;
}

MeasurementSeries* LayerDocument::find(const Uuid& series_id) {
  for (auto& s : series) {
    if (s.id == series_id) return &s;
  }
  return nullptr;
}

void validate(const MeasurementSeries& s) {
  constexpr std::size_t kUnbounded = static_cast<std::size_t>(-1);
  switch (s.kind) {
    case SeriesKind::kDistance: require_count(s, 2, kUnbounded); break;
    case SeriesKind::kHeight: require_count(s, 2, 2); break;
    case SeriesKind::kAngle: require_count(s, 3, 3); break;
    case SeriesKind::kArea: require_count(s, 3, kUnbounded); break;
    case SeriesKind::kProfile: require_count(s, 2, kUnbounded); break;
    case SeriesKind::kPolygon: require_count(s, 3, kUnbounded); break;
    case SeriesKind::kAnnotation: require_count(s, 1, 1); break;
    case SeriesKind::kVolume: require_count(s, 1, 1); break;
  }
  for (const auto& v : s.vertices) {
    if (!is_finite(v.position)) invalid("vertex coordinates must be finite");
  }
  if (s.version < 1) invalid("series version must be >= 1");
  if (s.kind == SeriesKind::kProfile) {
    if (!s.profile_width || !(*s.profile_width > 0.0) || !std::isfinite(*s.profile_width)) {
      invalid("Profile requires a positive profileWidth");
    }
  } else if (s.profile_width) {
    invalid("profileWidth is only allowed on Profile");
  }
  if (s.kind == SeriesKind::kVolume) {
    if (!s.box) invalid("Volume requires a box");
    if (!is_finite(s.box->extent) || !std::isfinite(s.box->yaw)) invalid("Volume box must be finite");
    if (s.box->extent.x < 0.0 || s.box->extent.y < 0.0 || s.box->extent.z < 0.0) {
      invalid("Volume box extents must be non-negative");
    }
  } else if (s.box) {
    invalid("box is only allowed on Volume");
  }
}

void validate(const LayerDocument& doc) {
  std::set<Uuid> seen;
  for (const auto& s : doc.series) {
    validate(s);
    if (!seen.insert(s.id).second) invalid("series ids must be unique within a layer (" + s.id.str() + ")");
  }
}

double polygon_area(const std::vector<Vec3>& ring) {
  if (ring.size() < 3) return 0.0;
  // Relative to the first vertex; same Newell sum, better conditioned far from the origin.
  const Vec3 o = ring.front();
  Vec3 sum;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Vec3 a = ring[i] - o;
    const Vec3 b = ring[(i + 1) % ring.size()] - o;
    sum = sum + cross(a, b);
  }
  return 0.5 * norm(sum);
}

MeasurementResult evaluate(const MeasurementSeries& s) {
  validate(s);
  MeasurementResult r;
  r.kind = s.kind;
  const auto& v = s.vertices;
  switch (s.kind) {
    case SeriesKind::kDistance: {
      double total = 0.0;
      for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const double d = distance(v[i].position, v[i + 1].position);
        r.segments.push_back(d);
        total += d;
      }
      r.values = {total};
      break;
    }
    case SeriesKind::kHeight:
      r.values = {std::abs(v[1].position.z - v[0].position.z)};
      break;
    case SeriesKind::kAngle: {
      const Vec3& a = v[0].position;
      const Vec3& b = v[1].position;
      const Vec3& c = v[2].position;
      if (a == b || b == c || c == a) {
        throw Error(ErrorCode::kDegenerateGeometry, "Angle has repeated consecutive vertices");
      }
      r.values = {interior_angle(a, b, c), interior_angle(b, c, a), interior_angle(c, a, b)};
      break;
    }
    case SeriesKind::kArea: {
      std::vector<Vec3> ring;
      for (const auto& x : v) ring.push_back(x.position);
      r.values = {polygon_area(ring)};
      break;
    }
    case SeriesKind::kVolume: {
      const Vec3& e = s.box->extent;
      const double volume = e.x * e.y * e.z;
      if (volume == 0.0) throw Error(ErrorCode::kDegenerateGeometry, "Volume box has a zero extent");
      r.values = {volume};
      break;
    }
    case SeriesKind::kProfile: {
      double total = 0.0;
      for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const double d = horizontal_length(v[i].position, v[i + 1].position);
        r.segments.push_back(d);
        total += d;
      }
      r.values = {total};
      break;
    }
    case SeriesKind::kPolygon:
    case SeriesKind::kAnnotation:
      break;
  }
  return r;
}

Vertex3 snap(const Vec3& query, double radius, const PointIndex& index) {
  if (!(radius > 0.0)) throw Error(ErrorCode::kUsage, "snap radius must be > 0");
  const double r2 = radius * radius;
  const auto& nodes = index.manifest().nodes;

  using Key = std::tuple<double, std::string, std::uint32_t>;
  std::optional<Key> best;
  Vec3 best_position;
  // deepest level first; the tie-break makes the result independent of scan order
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (it->aabb.squared_distance_to(query) > r2) continue;
    const auto points = index.read_node(it->code);
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      const double d2 = squared_distance(points[i].position, query);
      if (d2 > r2) continue;
      Key key{d2, it->code.str(), i};
      if (!best || key < *best) {
        best = std::move(key);
        best_position = points[i].position;
      }
    }
  }
  Vertex3 out;
  if (!best) {
    out.position = query;
    return out;
  }
  out.position = best_position;
  out.snapped = true;
  out.snap_node = NodeCode::parse(std::get<1>(*best));
  return out;
}

std::vector<ProfileSample> extract_profile(const std::vector<Vertex3>& polyline, double width, const PointIndex& index,
                                           std::size_t depth_limit) {
  if (!(width > 0.0)) throw Error(ErrorCode::kUsage, "profile width must be > 0");
  if (polyline.size() < 2) throw Error(ErrorCode::kValidationFailed, "Profile requires at least 2 vertices");

  struct Segment {
    double ax, ay, dx, dy, length, start;
  };
  std::vector<Segment> segments;
  double total = 0.0;
  double min_x = polyline.front().position.x, max_x = min_x;
  double min_y = polyline.front().position.y, max_y = min_y;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Vec3& a = polyline[i].position;
    const Vec3& b = polyline[i + 1].position;
    const double len = horizontal_length(a, b);
    min_x = std::min(min_x, b.x);
    max_x = std::max(max_x, b.x);
    min_y = std::min(min_y, b.y);
    max_y = std::max(max_y, b.y);
    if (len > 0.0) segments.push_back({a.x, a.y, b.x - a.x, b.y - a.y, len, total});
    total += len;
  }
  if (segments.empty()) throw Error(ErrorCode::kDegenerateGeometry, "profile polyline has zero horizontal length");
  const double half = width / 2.0;

  std::vector<ProfileSample> out;
  for (const auto& node : index.manifest().nodes) {
    if (node.code.level() > depth_limit) continue;
    // decoded positions may sit a float32 step outside the node box
    const double pad = half + (node.aabb.max.x - node.aabb.min.x) * 1e-6;
    if (node.aabb.max.x < min_x - pad || node.aabb.min.x > max_x + pad || node.aabb.max.y < min_y - pad ||
        node.aabb.min.y > max_y + pad) {
      continue;
    }
    const auto points = index.read_node(node.code);
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      const Vec3& p = points[i].position;
      double best = std::numeric_limits<double>::infinity();
      double mileage = 0.0;
      double side = 0.0;
      for (const auto& s : segments) {
        const double px = p.x - s.ax;
        const double py = p.y - s.ay;
        const double t = std::clamp((px * s.dx + py * s.dy) / (s.length * s.length), 0.0, 1.0);
        const double d = std::hypot(px - t * s.dx, py - t * s.dy);
        if (d < best) {
          best = d;
          mileage = s.start + t * s.length;
          side = s.dx * py - s.dy * px;
        }
      }
      if (best > half) continue;
      ProfileSample sample;
      sample.mileage = mileage;
      sample.elevation = p.z;
      sample.lateral = side < 0.0 ? -best : best;
      sample.point = points[i];
      sample.node = node.code;
      sample.index_in_node = i;
      out.push_back(sample);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ProfileSample& a, const ProfileSample& b) { return a.mileage < b.mileage; });
  return out;
}

}  // namespace cloudatelier
