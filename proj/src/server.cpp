#include "cloudatelier/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <httplib.h>

#include "cloudatelier/io.hpp"
#include "cloudatelier/log.hpp"
#include "cloudatelier/protocol.hpp"

namespace cloudatelier {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxLine = 64u << 20;

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

int open_listener(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::kIo, "cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + service + ": " + std::strerror(errno));
  return fd;
}

int bound_port(int fd) {
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

}  // namespace

struct CollabServer::Connection {
  int fd = -1;
  std::mutex write_mutex;
  std::optional<Principal> principal;
  std::string client_id;
  std::atomic<bool> open{true};

  bool write(const json& message) {
    if (!open) return false;
    std::lock_guard lock(write_mutex);
    if (!send_all(fd, protocol::encode(message))) {
      open = false;
      return false;
    }
    return true;
  }
};

CollabServer::CollabServer(ProjectConfig config, std::shared_ptr<Project> project)
    : config_(std::move(config)), project_(std::move(project)) {}

CollabServer::~CollabServer() { stop(); }

int CollabServer::start(const std::string& host, int port) {
  listen_fd_ = open_listener(host, port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return bound_port(listen_fd_);
}

void CollabServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(conns_mutex_);
    for (auto& c : conns_) ::shutdown(c->fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  std::lock_guard lock(conns_mutex_);
  for (auto& c : conns_) ::close(c->fd);
  conns_.clear();
}

void CollabServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      if (!running_) break;
      continue;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    timeval tv{5, 0};  // a stalled reader must not hold the project lock forever
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    std::lock_guard lock(conns_mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    conns_.push_back(conn);
    workers_.emplace_back([this, conn] { serve(conn); });
  }
}

void CollabServer::serve(const std::shared_ptr<Connection>& conn) {
  std::string buffer;
  char chunk[65536];
  while (conn->open) {
    const ssize_t n = ::recv(conn->fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl = buffer.find('\n', start); nl != std::string::npos; nl = buffer.find('\n', start)) {
      const std::string line = buffer.substr(start, nl - start);
      start = nl + 1;
      if (line.empty()) continue;
      try {
        handle(conn, protocol::decode(line));
      } catch (const Error& e) {
        conn->write(protocol::error_message(config_.project_id, e.code(), e.detail()));
      }
      if (!conn->open) break;
    }
    buffer.erase(0, start);
    if (buffer.size() > kMaxLine) {
      conn->write(protocol::error_message(config_.project_id, ErrorCode::kInvalidOp, "message too long"));
      break;
    }
  }
  conn->open = false;
  std::lock_guard lock(subs_mutex_);
  subscribers_.remove(conn);
}

void CollabServer::handle(const std::shared_ptr<Connection>& conn, const json& msg) {
  const std::string type = msg["type"].get<std::string>();
  const std::string& pid = config_.project_id;
  if (msg.contains("projectId") && msg["projectId"] != pid) {
    conn->write(protocol::error_message(pid, ErrorCode::kUnknownTarget, "unknown project"));
    return;
  }
  if (type == "hello") {
    if (conn->principal) throw Error(ErrorCode::kInvalidOp, "already greeted");
    const auto principal = config_.authenticate(msg.value("token", std::string()));
    if (!principal) {
      conn->write(protocol::error_message(pid, ErrorCode::kUnauthorized, "unknown token"));
      conn->open = false;
      return;
    }
    const std::string client_id = msg.value("clientId", std::string());
    if (client_id.empty()) throw Error(ErrorCode::kInvalidOp, "hello needs a clientId");
    conn->principal = principal;
    conn->client_id = client_id;
    // Snapshot and subscription under the project lock: no event is missed or seen twice.
    project_->with_state([&](const SessionState& state) {
      conn->write(protocol::welcome(pid, snapshot(state), *principal));
      std::lock_guard lock(subs_mutex_);
      subscribers_.push_back(conn);
    });
    log::info("client joined", {{"user", principal->user}, {"client", client_id}});
    return;
  }
  if (type == "bye") {
    conn->write(protocol::bye(pid));
    conn->open = false;
    return;
  }
  if (type != "op") throw Error(ErrorCode::kInvalidOp, "unexpected message type " + type);
  if (!conn->principal) {
    conn->write(protocol::error_message(pid, ErrorCode::kUnauthorized, "send hello first"));
    return;
  }
  if (!msg.contains("op")) throw Error(ErrorCode::kInvalidOp, "op message without op");
  const SessionOp op = protocol::op_from_json(msg["op"]);
  if (op.id.client != conn->client_id) {
    conn->write(protocol::error_message(pid, ErrorCode::kInvalidOp, "op client id differs from hello", nullptr, op.id));
    return;
  }
  try {
    const ApplyOutcome out = project_->submit(*conn->principal, op, [this](const Event& e) { broadcast(e); });
    if (out.rejection) {
      conn->write(protocol::error_message(pid, out.rejection->code, out.rejection->detail, out.rejection->current, op.id));
    } else {
      conn->write(protocol::ack(pid, op.id, out));
    }
  } catch (const Error& e) {
    conn->write(protocol::error_message(pid, e.code(), e.detail(), nullptr, op.id));
  }
}

void CollabServer::broadcast(const Event& event) {
  const json msg = protocol::event_message(config_.project_id, event);
  std::lock_guard lock(subs_mutex_);
  for (auto it = subscribers_.begin(); it != subscribers_.end();) {
    if ((*it)->write(msg)) {
      ++it;
    } else {
      ::shutdown((*it)->fd, SHUT_RDWR);
      it = subscribers_.erase(it);
    }
  }
}

TileServer::TileServer(ProjectConfig config, std::shared_ptr<Project> project)
    : config_(std::move(config)), project_(std::move(project)), http_(std::make_unique<httplib::Server>()) {
  auto serve_file = [](const fs::path& path, const char* type, httplib::Response& res) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
      res.status = 404;
      return;
    }
    try {
      const auto bytes = read_file_bytes(path);
      res.set_content(std::string(bytes.begin(), bytes.end()), type);
    } catch (const Error&) {
      res.status = 500;
    }
  };
  auto project_ok = [this](const httplib::Request& req, httplib::Response& res) {
    if (req.matches[1] != config_.project_id) {
      res.status = 404;
      return false;
    }
    res.set_header("Access-Control-Allow-Origin", "*");
    return true;
  };

  http_->Get(R"(/projects/([^/]+)/manifest\.json)", [=, this](const httplib::Request& req, httplib::Response& res) {
    if (project_ok(req, res)) serve_file(config_.index_dir() / "manifest.json", "application/json", res);
  });
  http_->Get(R"(/projects/([^/]+)/nodes/(r[0-7]*)\.bin)", [=, this](const httplib::Request& req, httplib::Response& res) {
    if (!project_ok(req, res)) return;
    const auto code = NodeCode::parse(req.matches[2].str());
    if (!code) {
      res.status = 404;
      return;
    }
    serve_file(config_.index_dir() / node_file(*code), "application/octet-stream", res);
  });
  http_->Get(R"(/projects/([^/]+)/byproduct\.(json|bin))", [=, this](const httplib::Request& req, httplib::Response& res) {
    if (!project_ok(req, res)) return;
    const bool is_json = req.matches[2] == "json";
    serve_file(config_.index_dir() / (is_json ? "byproduct.json" : "byproduct.bin"),
               is_json ? "application/json" : "application/octet-stream", res);
  });
  http_->Get(R"(/projects/([^/]+)/layers/([0-9a-fA-F-]+)\.(json|dxf))",
             [=, this](const httplib::Request& req, httplib::Response& res) {
               if (!project_ok(req, res)) return;
               const auto id = Uuid::parse(req.matches[2].str());
               if (!id) {
                 res.status = 404;
                 return;
               }
               const bool dxf = req.matches[3] == "dxf";
               try {
                 res.set_content(project_->export_layer(*id, dxf ? LayerFormat::kDxf : LayerFormat::kJson),
                                 dxf ? "application/dxf" : "application/json");
               } catch (const Error& e) {
                 res.status = e.code() == ErrorCode::kUnknownTarget ? 404 : 500;
               }
             });
}

TileServer::~TileServer() { stop(); }

int TileServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = http_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind HTTP server on " + host);
  } else if (!http_->bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind HTTP server on " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return bound;
}

void TileServer::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

CollabClient::CollabClient(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::kIo, "cannot resolve " + host);
  }
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw Error(ErrorCode::kIo, "cannot connect to " + host + ":" + service);
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

CollabClient::~CollabClient() { close(); }

void CollabClient::send(const json& message) {
  if (fd_ < 0 || !send_all(fd_, protocol::encode(message))) throw Error(ErrorCode::kIo, "connection closed");
}

std::optional<json> CollabClient::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      const std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return json::parse(line);
    }
    if (fd_ < 0) return std::nullopt;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return std::nullopt;
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) {
      close();
      continue;  // drain what is buffered
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void CollabClient::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace cloudatelier
