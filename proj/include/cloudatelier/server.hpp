#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cloudatelier/collab_store.hpp"
#include "cloudatelier/project_config.hpp"

namespace httplib {
class Server;
}

namespace cloudatelier {

/// NDJSON collaboration endpoint over TCP, one thread per connection.
class CollabServer {
 public:
  CollabServer(ProjectConfig config, std::shared_ptr<Project> project);
  ~CollabServer();
  CollabServer(const CollabServer&) = delete;
  CollabServer& operator=(const CollabServer&) = delete;

  /// Binds and starts accepting in the background. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Connection;

  void accept_loop();
  void serve(const std::shared_ptr<Connection>& conn);
  void handle(const std::shared_ptr<Connection>& conn, const nlohmann::json& msg);
  void broadcast(const Event& event);

  ProjectConfig config_;
  std::shared_ptr<Project> project_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conns_mutex_;
  std::vector<std::shared_ptr<Connection>> conns_;
  std::vector<std::thread> workers_;
  std::mutex subs_mutex_;
  std::list<std::shared_ptr<Connection>> subscribers_;
};

/// Static tile + byproduct serving and layer export over HTTP:
///   GET /projects/<id>/manifest.json
///   GET /projects/<id>/nodes/<code>.bin
///   GET /projects/<id>/byproduct.json | byproduct.bin
///   GET /projects/<id>/layers/<layer-id>.json | .dxf
/// Never writes to the index directory.
class TileServer {
 public:
  TileServer(ProjectConfig config, std::shared_ptr<Project> project);
  ~TileServer();
  TileServer(const TileServer&) = delete;
  TileServer& operator=(const TileServer&) = delete;

  int start(const std::string& host, int port);
  void stop();

 private:
  ProjectConfig config_;
  std::shared_ptr<Project> project_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
};

/// Headless protocol client (tests, scripts).
class CollabClient {
 public:
  CollabClient(const std::string& host, int port);
  ~CollabClient();
  CollabClient(const CollabClient&) = delete;
  CollabClient& operator=(const CollabClient&) = delete;

  void send(const nlohmann::json& message);
  /// Next message, or nullopt on timeout / closed stream.
  std::optional<nlohmann::json> receive(std::chrono::milliseconds timeout = std::chrono::seconds(5));
  void close();

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace cloudatelier
