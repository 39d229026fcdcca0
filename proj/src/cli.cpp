#include "cloudatelier/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <array>
#include <charconv>
#include <filesystem>
#include <thread>

#include <CLI11.hpp>

#include "cloudatelier/collab_store.hpp"
#include "cloudatelier/convert.hpp"
#include "cloudatelier/io.hpp"
#include "cloudatelier/log.hpp"
#include "cloudatelier/project_config.hpp"
#include "cloudatelier/server.hpp"

namespace cloudatelier::cli {

namespace fs = std::filesystem;

namespace {

std::string shortest(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

// `[config] <arg>`: with one positional the config comes from the environment.
std::pair<fs::path, std::string> config_and_arg(const std::vector<std::string>& positionals, const char* what) {
  if (positionals.size() == 2) return {positionals[0], positionals[1]};
  if (positionals.size() == 1) return {resolve_config_path(std::nullopt), positionals[0]};
  throw Error(ErrorCode::kUsage, std::string("expected [config] <") + what + ">");
}

LayerFormat parse_format(const std::string& name) {
  if (name == "json") return LayerFormat::kJson;
  if (name == "dxf") return LayerFormat::kDxf;
  throw Error(ErrorCode::kUsage, "unknown format " + name + " (json or dxf)");
}

int wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point-cloud indexing, measurement and collaboration tool", "cloudatelier"};
  app.require_subcommand(1);
  app.fallthrough();
  bool json_logs = false;
  bool quiet = false;
  app.add_flag("--json-logs", json_logs, "Log as NDJSON on stderr");
  app.add_flag("-q,--quiet", quiet, "Suppress progress logs");

  // convert
  auto* convert_cmd = app.add_subcommand("convert", "Build the octree index and the plane byproduct");
  std::string convert_in;
  std::string convert_out;
  ConvertOptions copt;
  double spacing_div = copt.build.root_spacing_divisor;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 1;
  convert_cmd->add_option("input", convert_in, "LAS, PLY or XYZ file")->required();
  convert_cmd->add_option("-o,--out", convert_out, "Output directory")->required();
  convert_cmd->add_option("--spacing-div", spacing_div, "Root spacing = root diagonal / N");
  convert_cmd->add_option("--node-capacity", copt.build.node_capacity, "Maximum points per node");
  convert_cmd->add_option("--chunk-threshold", copt.build.chunk_threshold, "Point count above which the build pre-partitions");
  convert_cmd->add_option("--threads", threads, "Worker threads (output does not depend on it)");
  convert_cmd->add_option("--seed", seed, "Seed for decimation and plane search");
  convert_cmd->add_option("--epsilon", copt.segment.epsilon, "Plane inlier distance (m)");
  convert_cmd->add_option("--min-inliers", copt.segment.min_inliers, "Minimum plane support");

  // info
  auto* info_cmd = app.add_subcommand("info", "Print the manifest summary of an index");
  std::string info_dir;
  info_cmd->add_option("dir", info_dir, "Index directory")->required();

  // segment
  auto* segment_cmd = app.add_subcommand("segment", "Re-run plane segmentation on the byproduct");
  std::string segment_dir;
  SegmentConfig sopt;
  segment_cmd->add_option("dir", segment_dir, "Index directory")->required();
  segment_cmd->add_option("--epsilon", sopt.epsilon, "Plane inlier distance (m)");
  segment_cmd->add_option("--min-inliers", sopt.min_inliers, "Minimum plane support");
  segment_cmd->add_option("--max-planes", sopt.max_planes, "Maximum number of planes");
  segment_cmd->add_option("--iterations", sopt.iterations_per_plane, "RANSAC trials per plane");
  segment_cmd->add_option("--seed", sopt.seed, "Sampling seed");

  // init
  auto* init_cmd = app.add_subcommand("init", "Validate a project config and create its directories");
  std::string init_config;
  init_cmd->add_option("config", init_config, "Project config (default: $CLOUDATELIER_CONFIG)");

  // export-layer
  auto* export_cmd = app.add_subcommand("export-layer", "Export a live or committed layer");
  std::vector<std::string> export_pos;
  std::string export_format = "json";
  std::string export_out;
  export_cmd->add_option("args", export_pos, "[config] <layer-id>")->required()->expected(1, 2);
  export_cmd->add_option("--format", export_format, "json or dxf");
  export_cmd->add_option("-o,--out", export_out, "Output file (default: stdout)");

  // import-layer
  auto* import_cmd = app.add_subcommand("import-layer", "Import a layer document as a new live layer");
  std::vector<std::string> import_pos;
  std::string import_token;
  import_cmd->add_option("args", import_pos, "[config] <file>")->required()->expected(1, 2);
  import_cmd->add_option("--token", import_token, "Bearer token of the importing user")->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve tiles over HTTP and the collaboration protocol over TCP");
  std::string serve_config;
  std::string host = "0.0.0.0";
  int http_port = 8080;
  int collab_port = 9090;
  serve_cmd->add_option("config", serve_config, "Project config (default: $CLOUDATELIER_CONFIG)");
  serve_cmd->add_option("--http", http_port, "HTTP port");
  serve_cmd->add_option("--collab", collab_port, "Collaboration port");
  serve_cmd->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "ERROR " << error_code_name(ErrorCode::kUsage) << ": " << e.what() << "\n";
    return 1;
  }

  log::set_json(json_logs);
  log::set_quiet(quiet);

  try {
    if (*convert_cmd) {
      copt.build.root_spacing_divisor = spacing_div;
      copt.build.threads = threads;
      copt.decimate_seed = seed;
      copt.segment.seed = seed;
      validate(copt.build);
      if (!(copt.segment.epsilon > 0.0)) throw Error(ErrorCode::kUsage, "--epsilon must be > 0");
      const auto report = convert(convert_in, convert_out, copt);
      out << "converted " << report.manifest.total_points << " points into " << report.manifest.nodes.size()
          << " nodes; byproduct " << report.byproduct_points << " points, " << report.planes << " planes\n";
      return 0;
    }
    if (*info_cmd) {
      const auto manifest = manifest_from_json(read_file_text(fs::path(info_dir) / "manifest.json"));
      out << "points: " << manifest.total_points << ", nodes: " << manifest.nodes.size()
          << ", spacing: " << shortest(manifest.root_spacing) << "\n";
      return 0;
    }
    if (*segment_cmd) {
      const auto result = resegment(segment_dir, sopt);
      std::size_t assigned = 0;
      for (auto idx : result.plane_index) assigned += idx != 0 ? 1 : 0;
      out << "planes: " << result.planes.size() << ", assigned: " << assigned << "/" << result.points.size() << "\n";
      for (std::size_t k = 0; k < result.planes.size(); ++k) {
        const auto& p = result.planes[k];
        out << "  " << (k + 1) << " " << p.id.str() << " n=(" << shortest(p.normal.x) << "," << shortest(p.normal.y) << ","
            << shortest(p.normal.z) << ") d=" << shortest(p.offset) << " inliers=" << p.inlier_count << "\n";
      }
      return 0;
    }
    if (*init_cmd) {
      const auto cfg = load_project_config(resolve_config_path(init_config));
      init_project(cfg);
      out << "initialized project " << cfg.project_id << " at " << cfg.data_dir.string() << "\n";
      return 0;
    }
    if (*export_cmd) {
      const auto [config_path, layer_text] = config_and_arg(export_pos, "layer-id");
      const auto layer_id = Uuid::parse(layer_text);
      if (!layer_id) throw Error(ErrorCode::kUsage, "not a layer id: " + layer_text);
      const auto cfg = load_project_config(config_path);
      FileOpStore store(cfg.collab_dir(), FileOpStore::Mode::kReadOnly);
      const auto state = recover(store, cfg.project_id);
      const std::string bytes = export_session_layer(state, *layer_id, parse_format(export_format));
      if (export_out.empty()) {
        out << bytes;
        if (!bytes.empty() && bytes.back() != '\n') out << "\n";
      } else {
        write_file_atomic(export_out, bytes);
      }
      return 0;
    }
    if (*import_cmd) {
      const auto [config_path, file] = config_and_arg(import_pos, "file");
      const auto cfg = load_project_config(config_path);
      const auto principal = cfg.authenticate(import_token);
      if (!principal) throw Error(ErrorCode::kUnauthorized, "unknown token");
      const std::string text = read_file_text(file);
      nlohmann::json payload;
      try {
        payload = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::kValidationFailed, std::string("malformed JSON: ") + e.what());
      }
      init_project(cfg);
      Project project(cfg.project_id, std::make_unique<FileOpStore>(cfg.collab_dir()));
      SessionOp op;
      op.action = OpAction::kImportLayer;
      op.payload = std::move(payload);
      op.id.client = "cli:" + principal->user;
      project.with_state([&](const SessionState& s) {
        auto it = s.client_seq.find(op.id.client);
        op.id.seq = it == s.client_seq.end() ? 1 : it->second + 1;
      });
      const auto outcome = project.submit(*principal, op);
      if (outcome.rejection) throw Error(outcome.rejection->code, outcome.rejection->detail);
      out << "imported layer " << outcome.created_layer->str() << " at seq " << outcome.seq << "\n";
      return 0;
    }
    if (*serve_cmd) {
      const auto cfg = load_project_config(resolve_config_path(serve_config));
      init_project(cfg);
      // Signals are taken synchronously by this thread only.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      auto project = std::make_shared<Project>(cfg.project_id, std::make_unique<FileOpStore>(cfg.collab_dir()));
      TileServer http(cfg, project);
      CollabServer collab(cfg, project);
      const int hp = http.start(host, http_port);
      const int cp = collab.start(host, collab_port);
      out << "serving project " << cfg.project_id << " http: " << hp << " collab: " << cp << std::endl;
      log::info("serving", {{"project", cfg.project_id}, {"http", hp}, {"collab", cp}});
      wait_for_signal();
      collab.stop();
      http.stop();
      // Leave a snapshot so the next start replays nothing.
      project->checkpoint();
      return 0;
    }
  } catch (const Error& e) {
    err << "ERROR " << error_code_name(e.code()) << ": " << e.detail() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "ERROR " << error_code_name(ErrorCode::kIo) << ": " << e.what() << "\n";
    return 3;
  } catch (const std::bad_alloc&) {
    err << "ERROR " << error_code_name(ErrorCode::kIo) << ": out of memory\n";
    return 3;
  }
  return 1;
}

}  // namespace cloudatelier::cli
