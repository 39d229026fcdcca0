#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cloudatelier/geometry.hpp"
#include "cloudatelier/ingest.hpp"
#include "cloudatelier/octree.hpp"

// Independent reference computations the tests compare the library against.
namespace oracles {

using cloudatelier::PointRecord;
using cloudatelier::Vec3;

/// One float32 ulp at the magnitude of `edge`: the decode error bound for
/// positions stored relative to a node corner inside a root of that edge.
double f32_tolerance(double edge);

/// Greedy matching of two point multisets: equal attributes and positions
/// within `tol` per axis. `why` receives the first mismatch.
bool multiset_equal(const std::vector<PointRecord>& expected, const std::vector<PointRecord>& actual, double tol,
                    std::string* why = nullptr);

/// Order-independent key of a point whose coordinates lie on a 1 mm grid
/// (decoded positions are rounded back to the grid first).
using GridKey = std::pair<std::uint64_t, std::uint64_t>;
GridKey grid_key(const PointRecord& p);
/// Distance from `p` to its nearest 1 mm grid position (max over axes).
double grid_residual(const PointRecord& p);

/// Structural checks of a built index: conservation, parents present,
/// containment, per-node grid uniqueness (non-overflow nodes) and tile
/// sizes. Returns an empty string when everything holds.
std::string check_index(const std::filesystem::path& dir, std::uint64_t expected_points);

/// Area by summing triangle-fan areas around the first vertex.
double fan_area(const std::vector<Vec3>& ring);

/// Angle between u and v in degrees via atan2(|u x v|, u . v).
double angle_deg(const Vec3& u, const Vec3& v);

/// Indices of points whose XY distance to the polyline is <= width/2,
/// computed by sampling-free closed form per segment.
std::vector<std::size_t> corridor(const std::vector<PointRecord>& points, const std::vector<Vec3>& polyline,
                                  double width);

}  // namespace oracles
