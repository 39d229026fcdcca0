#include "cloudatelier/convert.hpp"

#include "cloudatelier/error.hpp"
#include "cloudatelier/log.hpp"

namespace cloudatelier {

namespace fs = std::filesystem;

namespace {

SegmentationResult segment_or_empty(std::vector<PointRecord> points, const SegmentConfig& cfg) {
  if (points.size() >= 3) return segment_planes(std::move(points), cfg);
  SegmentationResult r;
  r.seed = cfg.seed;
  r.plane_index.assign(points.size(), 0);
  r.points = std::move(points);
  return r;
}

}  // namespace

ConvertReport convert(PointReader& source, const fs::path& out_dir, const ConvertOptions& options) {
  ConvertReport report;
  report.summary = source.summary();
  log::info("indexing", {{"points", report.summary.point_count}, {"format", source_format_name(report.summary.source_format)}});
  report.manifest = build_index(source, options.build, out_dir);
  log::info("index written", {{"nodes", report.manifest.nodes.size()}, {"entwine", report.manifest.entwine_mode}});

  source.rewind();
  auto sample = decimate(source, options.byproduct_target, options.decimate_seed);
  report.byproduct_points = sample.size();
  // Plane search on a 1-2 point byproduct is meaningless; such clouds get an empty plane list.
  auto seg = segment_or_empty(std::move(sample), options.segment);
  report.planes = seg.planes.size();
  write_byproduct(out_dir, seg, report.manifest.aabb.min, options.segment);
  log::info("byproduct written", {{"points", report.byproduct_points}, {"planes", report.planes}});
  return report;
}

ConvertReport convert(const fs::path& input, const fs::path& out_dir, const ConvertOptions& options) {
  auto source = open_source(input);
  return convert(*source, out_dir, options);
}

SegmentationResult resegment(const fs::path& index_dir, const SegmentConfig& cfg) {
  const auto index = PointIndex::open(index_dir);
  auto previous = read_byproduct(index_dir);
  auto seg = segment_planes(std::move(previous.points), cfg);
  write_byproduct(index_dir, seg, index.manifest().aabb.min, cfg);
  return seg;
}

}  // namespace cloudatelier
