#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cloudatelier/collab.hpp"
#include "cloudatelier/octree.hpp"

namespace cloudatelier {

struct UserEntry {
  std::string name;
  std::string token;
  Role role = Role::kViewer;
};

/// One JSON file per project:
/// {"projectId", "dataDir", "users":[{"name","token","role"}], "maxCurators"?,
///  "build"?:{"spacingDivisor","nodeCapacity","maxDepth"}, "chunkThreshold"?}
struct ProjectConfig {
  std::string project_id;
  /// Absolute; relative paths in the file resolve against the file's directory.
  std::filesystem::path data_dir;
  std::vector<UserEntry> users;
  std::uint32_t max_curators = 3;
  BuildConfig build;

  std::filesystem::path index_dir() const { return data_dir / "index"; }
  std::filesystem::path collab_dir() const { return data_dir / "collab"; }

  std::optional<Principal> authenticate(const std::string& token) const;
};

/// Throws Config naming the violated rule (curator count, duplicate tokens...).
void validate(const ProjectConfig& cfg);

ProjectConfig project_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ProjectConfig load_project_config(const std::filesystem::path& path);

/// Explicit path if given, else $CLOUDATELIER_CONFIG; Usage error when neither is set.
std::filesystem::path resolve_config_path(const std::optional<std::string>& arg);

/// Creates the data, index and collab directories.
void init_project(const ProjectConfig& cfg);

}  // namespace cloudatelier
