#include "cloudatelier/project_config.hpp"

#include <cstdlib>
#include <set>

#include "cloudatelier/io.hpp"

namespace cloudatelier {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

}  // namespace

std::optional<Principal> ProjectConfig::authenticate(const std::string& token) const {
  if (token.empty()) return std::nullopt;
  for (const auto& u : users) {
    if (u.token == token) return Principal{u.name, u.role};
  }
  return std::nullopt;
}

void validate(const ProjectConfig& cfg) {
  if (cfg.project_id.empty()) bad("projectId must not be empty");
  if (cfg.project_id.find_first_of("/\\") != std::string::npos) bad("projectId must not contain path separators");
  if (cfg.data_dir.empty()) bad("dataDir must not be empty");
  std::size_t curators = 0;
  std::set<std::string> tokens;
  std::set<std::string> names;
  for (const auto& u : cfg.users) {
    if (u.name.empty()) bad("user names must not be empty");
    if (u.token.empty()) bad("user " + u.name + " has an empty token");
    if (!tokens.insert(u.token).second) bad("duplicate token for user " + u.name);
    if (!names.insert(u.name).second) bad("duplicate user " + u.name);
    if (u.role == Role::kCurator) ++curators;
  }
  if (curators < 1) bad("a project needs at least one curator");
  if (curators > cfg.max_curators) {
    bad("a project allows at most " + std::to_string(cfg.max_curators) + " curators, config has " + std::to_string(curators));
  }
  try {
    validate(cfg.build);
  } catch (const Error& e) {
    bad(e.detail());
  }
}

ProjectConfig project_config_from_json(const json& j, const fs::path& base_dir) {
  ProjectConfig cfg;
  try {
    cfg.project_id = j.at("projectId").get<std::string>();
    fs::path data = j.at("dataDir").get<std::string>();
    cfg.data_dir = data.is_absolute() ? data : (base_dir / data).lexically_normal();
    for (const auto& u : j.at("users")) {
      const auto role = role_from_name(u.at("role").get<std::string>());
      if (!role) bad("unknown role " + u.at("role").get<std::string>());
      cfg.users.push_back({u.at("name").get<std::string>(), u.at("token").get<std::string>(), *role});
    }
    cfg.max_curators = j.value("maxCurators", 3u);
    if (auto it = j.find("build"); it != j.end()) {
      cfg.build.root_spacing_divisor = it->value("spacingDivisor", cfg.build.root_spacing_divisor);
      cfg.build.node_capacity = it->value("nodeCapacity", cfg.build.node_capacity);
      cfg.build.max_depth = it->value("maxDepth", cfg.build.max_depth);
    }
    cfg.build.chunk_threshold = j.value("chunkThreshold", cfg.build.chunk_threshold);
  } catch (const json::exception& e) {
    bad(std::string("invalid project config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ProjectConfig load_project_config(const fs::path& path) {
  const std::string text = read_file_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("project config is not JSON: ") + e.what());
  }
  return project_config_from_json(j, fs::absolute(path).parent_path());
}

fs::path resolve_config_path(const std::optional<std::string>& arg) {
  if (arg && !arg->empty()) return *arg;
  if (const char* env = std::getenv("CLOUDATELIER_CONFIG"); env && *env) return env;
  throw Error(ErrorCode::kUsage, "no project config given and CLOUDATELIER_CONFIG is not set");
}

void init_project(const ProjectConfig& cfg) {
  for (const auto& dir : {cfg.data_dir, cfg.index_dir(), cfg.collab_dir()}) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  }
}

}  // namespace cloudatelier
