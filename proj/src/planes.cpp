#include "cloudatelier/planes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "cloudatelier/error.hpp"
#include "cloudatelier/io.hpp"
#include "cloudatelier/octree.hpp"
#include "cloudatelier/random.hpp"

namespace cloudatelier {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kByproductRecordSize = kTileRecordSize + 2;
constexpr std::uint32_t kMaxPlanes = 65535;

// d >= 0; for planes through the origin the first non-zero normal component is positive.
void orient(Vec3& n, double& d) {
  bool flip = d < 0.0;
  if (d == 0.0) {
    for (int i = 0; i < 3; ++i) {
      if (n[i] != 0.0) {
        flip = n[i] < 0.0;
        break;
      }
    }
  }
  if (flip) {
    n = n * -1.0;
    d = -d;
  }
  if (d == 0.0) d = 0.0;  // drop a negative zero
}

struct Cloud {
  std::vector<double> x, y, z;
  std::vector<std::uint32_t> original;

  std::size_t size() const { return x.size(); }
  Vec3 at(std::size_t i) const { return {x[i], y[i], z[i]}; }
};

std::size_t count_inliers(const Cloud& c, const Vec3& n, double d, double eps) {
  std::size_t count = 0;
  const std::size_t m = c.size();
  const double* xs = c.x.data();
  const double* ys = c.y.data();
  const double* zs = c.z.data();
  for (std::size_t j = 0; j < m; ++j) {
    count += std::abs(n.x * xs[j] + n.y * ys[j] + n.z * zs[j] - d) <= eps ? 1 : 0;
  }
  return count;
}

std::vector<std::size_t> collect_inliers(const Cloud& c, const Vec3& n, double d, double eps) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (std::abs(n.x * c.x[j] + n.y * c.y[j] + n.z * c.z[j] - d) <= eps) out.push_back(j);
  }
  return out;
}

std::vector<Vec3> gather(const Cloud& c, const std::vector<std::size_t>& idx) {
  std::vector<Vec3> pts;
  pts.reserve(idx.size());
  for (std::size_t j : idx) pts.push_back(c.at(j));
  return pts;
}

struct Found {
  Vec3 normal;
  double offset = 0.0;  // local frame
  std::vector<std::uint32_t> members;
  std::size_t discovery = 0;
};

}  // namespace

std::pair<Vec3, double> fit_plane(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error(ErrorCode::kTooFewPoints, "plane fit needs at least 3 points");
  Vec3 centroid;
  for (const auto& p : points) centroid = centroid + p;
  centroid = centroid * (1.0 / static_cast<double>(points.size()));
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d(p.x - centroid.x, p.y - centroid.y, p.z - centroid.z);
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(scatter);
  const Eigen::Vector3d e = solver.eigenvectors().col(0).normalized();
  Vec3 n{e.x(), e.y(), e.z()};
  double d = dot(n, centroid);
  orient(n, d);
  return {n, d};
}

double rms_residual(const Vec3& normal, double offset, std::span<const Vec3> points) {
  if (points.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : points) {
    const double r = dot(normal, p) - offset;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(points.size()));
}

SegmentationResult segment_planes(std::vector<PointRecord> points, const SegmentConfig& cfg) {
  if (points.size() < 3) {
    throw Error(ErrorCode::kTooFewPoints, "plane segmentation needs at least 3 points, got " + std::to_string(points.size()));
  }
  if (!(cfg.epsilon > 0.0)) throw Error(ErrorCode::kUsage, "epsilon must be > 0");
  if (cfg.max_planes > kMaxPlanes) throw Error(ErrorCode::kUsage, "max planes must be <= 65535");
  if (points.size() > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorCode::kUsage, "too many points");

  // Work in a frame centered on the cloud so georeferenced coordinates keep precision.
  Aabb box;
  for (const auto& p : points) box.expand(p.position);
  const Vec3 origin = box.center();

  Cloud cloud;
  const std::size_t n_points = points.size();
  cloud.x.reserve(n_points);
  cloud.y.reserve(n_points);
  cloud.z.reserve(n_points);
  cloud.original.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const Vec3 q = points[i].position - origin;
    cloud.x.push_back(q.x);
    cloud.y.push_back(q.y);
    cloud.z.push_back(q.z);
    cloud.original.push_back(static_cast<std::uint32_t>(i));
  }

  Rng rng(cfg.seed);
  std::vector<Found> found;
  const std::size_t min_inliers = std::max<std::size_t>(cfg.min_inliers, 1);
  while (found.size() < cfg.max_planes) {
    const std::size_t m = cloud.size();
    if (m < 3 || m < min_inliers) break;

    std::size_t best_count = 0;
    Vec3 best_n;
    double best_d = 0.0;
    for (std::uint32_t trial = 0; trial < cfg.iterations_per_plane; ++trial) {
      std::size_t i0 = rng.below(m);
      std::size_t i1 = rng.below(m - 1);
      std::size_t i2 = rng.below(m - 2);
      if (i1 >= i0) ++i1;
      const std::size_t lo = std::min(i0, i1);
      const std::size_t hi = std::max(i0, i1);
      if (i2 >= lo) ++i2;
      if (i2 >= hi) ++i2;
      const Vec3 a = cloud.at(i0);
      const Vec3 u = cloud.at(i1) - a;
      const Vec3 v = cloud.at(i2) - a;
      Vec3 n = cross(u, v);
      const double len = norm(n);
      if (!(len > 1e-12 * norm(u) * norm(v))) continue;  // collinear sample
      n = n * (1.0 / len);
      const double d = dot(n, a);
      const std::size_t count = count_inliers(cloud, n, d, cfg.epsilon);
      if (count > best_count) {
        best_count = count;
        best_n = n;
        best_d = d;
      }
    }
    if (best_count < min_inliers) break;

    std::vector<std::size_t> members = collect_inliers(cloud, best_n, best_d, cfg.epsilon);
    Vec3 plane_n = best_n;
    double plane_d = best_d;
    if (members.size() >= 3) {
      const auto candidate_points = gather(cloud, members);
      const auto [rn, rd] = fit_plane(candidate_points);
      auto refit_members = collect_inliers(cloud, rn, rd, cfg.epsilon);
      if (refit_members.size() >= min_inliers) {
        plane_n = rn;
        plane_d = rd;
        members = std::move(refit_members);
      }
    }

    Found f;
    f.normal = plane_n;
    f.offset = plane_d;
    f.discovery = found.size();
    f.members.reserve(members.size());
    for (std::size_t j : members) f.members.push_back(cloud.original[j]);

    // compact the remaining cloud
    std::vector<bool> taken(cloud.size(), false);
    for (std::size_t j : members) taken[j] = true;
    std::size_t w = 0;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      if (taken[j]) continue;
      cloud.x[w] = cloud.x[j];
      cloud.y[w] = cloud.y[j];
      cloud.z[w] = cloud.z[j];
      cloud.original[w] = cloud.original[j];
      ++w;
    }
    cloud.x.resize(w);
    cloud.y.resize(w);
    cloud.z.resize(w);
    cloud.original.resize(w);
    found.push_back(std::move(f));
  }

  std::stable_sort(found.begin(), found.end(),
                   [](const Found& a, const Found& b) { return a.members.size() > b.members.size(); });

  SegmentationResult result;
  result.seed = cfg.seed;
  result.plane_index.assign(n_points, 0);
  for (std::size_t k = 0; k < found.size(); ++k) {
    const Found& f = found[k];
    Plane plane;
    plane.id = Uuid::derived("plane", std::to_string(cfg.seed) + ":" + std::to_string(f.discovery));
    std::vector<Vec3> local;
    local.reserve(f.members.size());
    for (std::uint32_t i : f.members) {
      result.plane_index[i] = static_cast<std::uint32_t>(k + 1);
      plane.inlier_aabb.expand(points[i].position);
      local.push_back(points[i].position - origin);
    }
    plane.rms_residual = rms_residual(f.normal, f.offset, local);
    plane.normal = f.normal;
    plane.offset = f.offset + dot(f.normal, origin);
    orient(plane.normal, plane.offset);
    plane.inlier_count = static_cast<std::uint32_t>(f.members.size());
    result.planes.push_back(plane);
  }
  result.points = std::move(points);
  return result;
}

std::optional<std::pair<Uuid, Vertex3>> anchor_to_plane(const Vertex3& vertex, const std::vector<Plane>& planes,
                                                        double max_dist) {
  if (!(max_dist > 0.0)) throw Error(ErrorCode::kUsage, "max_dist must be > 0");
  const Plane* best = nullptr;
  double best_dist = 0.0;
  for (const auto& plane : planes) {
    const double dist = std::abs(plane.signed_distance(vertex.position));
    if (dist > max_dist) continue;
    if (!best || dist < best_dist || (dist == best_dist && plane.id < best->id)) {
      best = &plane;
      best_dist = dist;
    }
  }
  if (!best) return std::nullopt;

  const Vec3& p = vertex.position;
  const double r = best->signed_distance(p);
  Vertex3 out = vertex;
  // Residuals at rounding level mean the vertex already lies on the plane.
  const double tolerance = 8.0 * std::numeric_limits<double>::epsilon() *
                           (std::abs(best->offset) + std::abs(p.x) + std::abs(p.y) + std::abs(p.z));
  if (std::abs(r) > tolerance) {
    out.position = p - best->normal * r;
    out.snapped = false;
    out.snap_node.reset();
  }
  return std::make_pair(best->id, out);
}

void write_byproduct(const fs::path& dir, const SegmentationResult& result, const Vec3& origin, const SegmentConfig& cfg) {
  std::vector<std::uint8_t> bytes(result.points.size() * kByproductRecordSize);
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    std::uint8_t* rec = bytes.data() + i * kByproductRecordSize;
    encode_tile_record(result.points[i], origin, rec);
    const auto idx = static_cast<std::uint16_t>(result.plane_index[i]);
    std::memcpy(rec + kTileRecordSize, &idx, sizeof(idx));
  }
  json planes = json::array();
  for (std::size_t k = 0; k < result.planes.size(); ++k) {
    const Plane& p = result.planes[k];
    planes.push_back({{"index", k + 1},
                      {"id", p.id.str()},
                      {"normal", {p.normal.x, p.normal.y, p.normal.z}},
                      {"offset", p.offset},
                      {"inlierCount", p.inlier_count},
                      {"aabb",
                       {{"min", {p.inlier_aabb.min.x, p.inlier_aabb.min.y, p.inlier_aabb.min.z}},
                        {"max", {p.inlier_aabb.max.x, p.inlier_aabb.max.y, p.inlier_aabb.max.z}}}},
                      {"rmsResidual", p.rms_residual}});
  }
  json doc{{"version", "1"},
           {"origin", {origin.x, origin.y, origin.z}},
           {"pointCount", result.points.size()},
           {"recordSize", kByproductRecordSize},
           {"seed", result.seed},
           {"epsilon", cfg.epsilon},
           {"minInliers", cfg.min_inliers},
           {"planes", planes}};
  {
    OutputFile out(dir / "byproduct.bin.tmp");
    out.write(bytes);
    out.close();
    std::error_code ec;
    fs::rename(dir / "byproduct.bin.tmp", dir / "byproduct.bin", ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot write byproduct.bin: " + ec.message());
  }
  write_file_atomic(dir / "byproduct.json", doc.dump(1) + "\n");
}

SegmentationResult read_byproduct(const fs::path& dir) {
  SegmentationResult result;
  json doc;
  try {
    doc = json::parse(read_file_text(dir / "byproduct.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kTileCorrupt, std::string("invalid byproduct.json: ") + e.what());
  }
  const auto bytes = read_file_bytes(dir / "byproduct.bin");
  try {
    const Vec3 origin{doc.at("origin")[0].get<double>(), doc.at("origin")[1].get<double>(), doc.at("origin")[2].get<double>()};
    const auto count = doc.at("pointCount").get<std::uint64_t>();
    if (bytes.size() != count * kByproductRecordSize) {
      throw Error(ErrorCode::kTileCorrupt, "byproduct.bin size does not match pointCount");
    }
    result.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& p : doc.at("planes")) {
      Plane plane;
      auto id = Uuid::parse(p.at("id").get<std::string>());
      if (!id) throw Error(ErrorCode::kTileCorrupt, "bad plane id");
      plane.id = *id;
      plane.normal = {p.at("normal")[0].get<double>(), p.at("normal")[1].get<double>(), p.at("normal")[2].get<double>()};
      plane.offset = p.at("offset").get<double>();
      plane.inlier_count = p.at("inlierCount").get<std::uint32_t>();
      for (int i = 0; i < 3; ++i) {
        plane.inlier_aabb.min[i] = p.at("aabb").at("min")[static_cast<std::size_t>(i)].get<double>();
        plane.inlier_aabb.max[i] = p.at("aabb").at("max")[static_cast<std::size_t>(i)].get<double>();
      }
      plane.rms_residual = p.at("rmsResidual").get<double>();
      result.planes.push_back(plane);
    }
    result.points.reserve(static_cast<std::size_t>(count));
    result.plane_index.reserve(static_cast<std::size_t>(count));
    for (std::size_t off = 0; off < bytes.size(); off += kByproductRecordSize) {
      result.points.push_back(decode_tile_record(bytes.data() + off, origin));
      std::uint16_t idx = 0;
      std::memcpy(&idx, bytes.data() + off + kTileRecordSize, sizeof(idx));
      if (idx > result.planes.size()) throw Error(ErrorCode::kTileCorrupt, "byproduct point references unknown plane");
      result.plane_index.push_back(idx);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kTileCorrupt, std::string("invalid byproduct.json: ") + e.what());
  }
  return result;
}

}  // namespace cloudatelier
