#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cloudatelier/geometry.hpp"

namespace cloudatelier {

/// One survey point with coordinates in meters (source scale and offset applied).
struct PointRecord {
  Vec3 position;
  std::uint8_t r = 128;
  std::uint8_t g = 128;
  std::uint8_t b = 128;
  std::uint16_t intensity = 0;
  std::uint8_t classification = 0;

  friend bool operator==(const PointRecord&, const PointRecord&) = default;
};

enum class SourceFormat { kLas, kPly, kXyz };

std::string_view source_format_name(SourceFormat format);

struct SourceSummary {
  std::uint64_t point_count = 0;
  Aabb aabb;
  bool has_color = false;
  bool has_intensity = false;
  SourceFormat source_format = SourceFormat::kXyz;
  /// Opaque coordinate reference system string (LAS WKT record), empty if unknown.
  std::string crs;
};

/// Single-consumer stream over the records of one file, in file order.
class PointReader {
 public:
  virtual ~PointReader() = default;

  /// Fills `out` from the front and returns the number of records written.
  /// Zero means the stream is exhausted.
  virtual std::size_t read(std::span<PointRecord> out) = 0;

  /// Restarts the stream at the first record.
  virtual void rewind() = 0;

  const SourceSummary& summary() const { return summary_; }

 protected:
  SourceSummary summary_;
};

/// Opens a LAS, PLY or XYZ file. The summary is computed by a full scan, so
/// malformed records anywhere in the file are reported here.
std::unique_ptr<PointReader> open_source(const std::filesystem::path& path);

/// In-memory stream, used for pipelines fed by generated data.
class VectorPointReader final : public PointReader {
 public:
  explicit VectorPointReader(std::vector<PointRecord> points, SourceFormat format = SourceFormat::kXyz);

  std::size_t read(std::span<PointRecord> out) override;
  void rewind() override { cursor_ = 0; }

 private:
  std::vector<PointRecord> points_;
  std::size_t cursor_ = 0;
};

/// Drains a reader into memory from its current position.
std::vector<PointRecord> read_all(PointReader& reader);

}  // namespace cloudatelier
