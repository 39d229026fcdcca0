#pragma once

#include <cstdint>
#include <filesystem>

#include "cloudatelier/ingest.hpp"
#include "cloudatelier/octree.hpp"
#include "cloudatelier/planes.hpp"

namespace cloudatelier {

struct ConvertOptions {
  BuildConfig build;
  /// Size of the low-density byproduct cloud.
  std::uint64_t byproduct_target = 500'000;
  std::uint64_t decimate_seed = 1;
  SegmentConfig segment;
};

struct ConvertReport {
  SourceSummary summary;
  IndexManifest manifest;
  std::uint64_t byproduct_points = 0;
  std::size_t planes = 0;
};

/// Index + byproduct for one source file. Output is a pure function of the
/// input bytes and options (thread count excluded).
ConvertReport convert(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                      const ConvertOptions& options);

/// Same pipeline over an already opened stream.
ConvertReport convert(PointReader& source, const std::filesystem::path& out_dir, const ConvertOptions& options);

/// Re-runs plane segmentation on an existing byproduct and rewrites it.
SegmentationResult resegment(const std::filesystem::path& index_dir, const SegmentConfig& cfg);

}  // namespace cloudatelier
