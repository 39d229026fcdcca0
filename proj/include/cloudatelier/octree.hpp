#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cloudatelier/geometry.hpp"
#include "cloudatelier/ingest.hpp"
#include "cloudatelier/node_code.hpp"

namespace cloudatelier {

struct BuildConfig {
  /// root spacing = cubified root diagonal / divisor
  double root_spacing_divisor = 250.0;
  /// Explicit root spacing in meters; takes precedence over the divisor.
  std::optional<double> root_spacing;
  /// Maximum points one node accepts.
  std::uint32_t node_capacity = 20'000;
  /// Nodes at this level take every residual point and are flagged overflow.
  std::uint32_t max_depth = 16;
  /// Above this many points the build pre-partitions into spatial chunks first.
  std::uint64_t chunk_threshold = 100'000'000;
  /// Rejected points buffered in memory (per pass) before spilling to disk.
  std::size_t flush_threshold = 1u << 18;
  /// Worker threads for independent subtrees; output does not depend on it.
  unsigned threads = 1;
};

/// Checks the build preconditions (divisor > 0, capacity >= 1000...).
void validate(const BuildConfig& cfg);

struct AttributeDescriptor {
  std::string name;
  std::string type;
  std::uint32_t size = 0;

  friend bool operator==(const AttributeDescriptor&, const AttributeDescriptor&) = default;
};

struct NodeEntry {
  NodeCode code;
  Aabb aabb;
  double spacing = 0.0;
  std::uint32_t point_count = 0;
  /// Set on nodes at max depth that accepted points without the grid test.
  bool overflow = false;

  friend bool operator==(const NodeEntry&, const NodeEntry&) = default;
};

struct IndexManifest {
  std::string version = "1";
  Aabb aabb;
  double root_spacing = 0.0;
  std::uint64_t total_points = 0;
  std::vector<AttributeDescriptor> attributes;
  bool entwine_mode = false;
  /// Breadth-first order (parents precede children).
  std::vector<NodeEntry> nodes;

  const NodeEntry* find(const NodeCode& code) const;
};

/// Fixed tile attribute layout: 18 bytes per point.
std::vector<AttributeDescriptor> tile_attributes();
inline constexpr std::size_t kTileRecordSize = 18;

/// Encodes one point relative to `origin` (node min corner).
void encode_tile_record(const PointRecord& p, const Vec3& origin, std::uint8_t* out);
PointRecord decode_tile_record(const std::uint8_t* in, const Vec3& origin);

std::string manifest_to_json(const IndexManifest& manifest);
IndexManifest manifest_from_json(const std::string& text);

/// Relative path of a node tile inside an index directory.
std::filesystem::path node_file(const NodeCode& code);

/// Builds the additive octree from `source` into `out_dir` (nodes/ and
/// manifest.json). The source is read from its current position to the end.
IndexManifest build_index(PointReader& source, const BuildConfig& cfg, const std::filesystem::path& out_dir);

/// Chunk level used by the pre-partition pass for `point_count` points.
std::uint32_t chunk_level_for(std::uint64_t point_count, const BuildConfig& cfg);

/// Reservoir sample of min(target_count, n) points, returned in input order.
std::vector<PointRecord> decimate(PointReader& source, std::uint64_t target_count, std::uint64_t seed);

/// Read-only view of a built index. Safe for concurrent readers.
class PointIndex {
 public:
  static PointIndex open(const std::filesystem::path& dir);

  const IndexManifest& manifest() const { return manifest_; }
  const std::filesystem::path& directory() const { return dir_; }

  std::vector<PointRecord> read_node(const NodeCode& code) const;

 private:
  PointIndex(std::filesystem::path dir, IndexManifest manifest)
      : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

  std::filesystem::path dir_;
  IndexManifest manifest_;
};

/// Decodes the tile of `code`; UnknownNode if absent, TileCorrupt on size mismatch.
std::vector<PointRecord> read_node(const IndexManifest& manifest, const std::filesystem::path& dir,
                                   const NodeCode& code);

}  // namespace cloudatelier
