#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cloudatelier/geometry.hpp"
#include "cloudatelier/ingest.hpp"
#include "cloudatelier/random.hpp"

namespace fixtures {

using cloudatelier::PointRecord;
using cloudatelier::Vec3;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Test-only LAS 1.2 writer (point formats 0-3), streaming: the header is
/// patched with count and bounds on close().
class LasWriter {
 public:
  LasWriter(const std::filesystem::path& path, std::uint8_t format, Vec3 scale, Vec3 offset);
  ~LasWriter();
  /// Colors are written as 16-bit values (c * 257).
  void add(const PointRecord& p);
  /// Raw integer coordinates, bypassing scale/offset.
  void add_raw(std::int32_t x, std::int32_t y, std::int32_t z);
  void close();

 private:
  void put(std::int32_t x, std::int32_t y, std::int32_t z, const PointRecord& p);

  std::FILE* file_ = nullptr;
  std::uint8_t format_;
  Vec3 scale_;
  Vec3 offset_;
  std::uint32_t count_ = 0;
  cloudatelier::Aabb box_;
  std::vector<std::uint8_t> buffer_;
};

void write_las(const std::filesystem::path& path, const std::vector<PointRecord>& points,
               Vec3 scale = {0.001, 0.001, 0.001}, Vec3 offset = {0, 0, 0}, std::uint8_t format = 2);
void write_xyz(const std::filesystem::path& path, const std::vector<PointRecord>& points);
void write_ply(const std::filesystem::path& path, const std::vector<PointRecord>& points, bool binary);

// Generators. Positions are on a 1 mm grid so LAS round trips are exact.
std::vector<PointRecord> uniform_cube(std::size_t n, std::uint64_t seed, double edge = 100.0);
std::vector<PointRecord> clustered_gaussian(std::size_t n, std::uint64_t seed);
/// n points alternating between two positions.
std::vector<PointRecord> duplicate_pairs(std::size_t n);
PointRecord uniform_cube_point(cloudatelier::Rng& rng, double edge);

/// Unit-cube shell, `per_face` points on each of the six faces, with jitter
/// of at most `jitter` along the face normal.
std::vector<PointRecord> cube_shell(std::size_t per_face, std::uint64_t seed, double jitter);
/// Uniform points in a ball of radius `radius`.
std::vector<PointRecord> ball_noise(std::size_t n, std::uint64_t seed, double radius = 1.0);

/// Relative path -> SHA-256 hex of every regular file under `dir`.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir);

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
  long max_rss_kb = 0;
  double seconds = 0.0;
};

/// Runs `args` (args[0] is the executable path) and waits for it. The peak
/// RSS is measured by a small launcher so the caller's memory does not leak in.
ProcessResult run_process(const std::vector<std::string>& args, const std::map<std::string, std::string>& env = {});

/// Path of the built command-line tool (set at configure time).
std::filesystem::path cli_path();

}  // namespace fixtures
