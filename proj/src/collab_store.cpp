#include "cloudatelier/collab_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cloudatelier/io.hpp"
#include "cloudatelier/protocol.hpp"

namespace cloudatelier {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Event> MemoryOpStore::events_after(std::uint64_t seq) {
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.seq > seq) out.push_back(e);
  }
  return out;
}

namespace {

bool parses_as_event(const std::string& line) {
  try {
    protocol::event_from_json(json::parse(line));
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

FileOpStore::FileOpStore(fs::path dir, Mode mode) : dir_(std::move(dir)), mode_(mode) {
  const fs::path log_path = dir_ / "oplog.ndjson";
  if (mode_ == Mode::kReadOnly) {
    if (!fs::is_directory(dir_)) throw Error(ErrorCode::kIo, "no collaboration data at " + dir_.string());
    return;
  }
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir_.string() + ": " + ec.message());
  lock_fd_ = ::open((dir_ / "lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw Error(ErrorCode::kIo, "cannot open " + (dir_ / "lock").string() + ": " + std::strerror(errno));
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error(ErrorCode::kIo, "project data at " + dir_.string() + " is in use by another process");
  }
  if (fs::exists(log_path)) {
    // Keep only complete, parseable lines; anything after the first bad one is a torn write.
    const std::string text = read_file_text(log_path);
    std::size_t good = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos || !parses_as_event(text.substr(pos, nl - pos))) break;
      pos = nl + 1;
      good = pos;
    }
    if (good != text.size()) {
      fs::resize_file(log_path, good, ec);
      if (ec) throw Error(ErrorCode::kIo, "cannot truncate " + log_path.string() + ": " + ec.message());
    }
  }
  log_ = std::fopen(log_path.c_str(), "ab");
  if (!log_) throw Error(ErrorCode::kIo, "cannot open " + log_path.string() + ": " + std::strerror(errno));
}

FileOpStore::~FileOpStore() {
  if (log_) std::fclose(log_);
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void FileOpStore::append(const Event& event) {
  if (!log_) throw Error(ErrorCode::kIo, "op store is read-only");
  const std::string line = canonical_dump(protocol::event_to_json(event)) + "\n";
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() || std::fflush(log_) != 0) {
    const int err = errno;
    throw Error(err == ENOSPC ? ErrorCode::kOutOfDiskSpace : ErrorCode::kIo,
                std::string("cannot append to op log: ") + std::strerror(err));
  }
}

std::vector<Event> FileOpStore::events_after(std::uint64_t seq) {
  std::vector<Event> out;
  const fs::path log_path = dir_ / "oplog.ndjson";
  if (!fs::exists(log_path)) return out;
  const std::string text = read_file_text(log_path);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    // A reader may race the writer: an unterminated last line is not yet part of the log.
    if (nl == std::string::npos) break;
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    try {
      Event e = protocol::event_from_json(json::parse(line));
      if (e.seq > seq) out.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kValidationFailed, std::string("corrupt op log: ") + e.what());
    }
  }
  return out;
}

void FileOpStore::save_snapshot(const json& snapshot) {
  if (mode_ == Mode::kReadOnly) throw Error(ErrorCode::kIo, "op store is read-only");
  write_file_atomic(dir_ / "snapshot.json", canonical_dump(snapshot) + "\n");
}

std::optional<json> FileOpStore::load_snapshot() {
  const fs::path p = dir_ / "snapshot.json";
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file_text(p));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kValidationFailed, std::string("corrupt snapshot.json: ") + e.what());
  }
}

SessionState recover(OpStore& store, const std::string& project_id) {
  SessionState state = genesis(project_id);
  if (auto snap = store.load_snapshot()) {
    state = restore(*snap);
    if (state.project_id != project_id) {
      throw Error(ErrorCode::kConfig, "snapshot belongs to project " + state.project_id + ", not " + project_id);
    }
  }
  for (const auto& e : store.events_after(state.server_seq)) apply_event(state, e);
  return state;
}

Project::Project(std::string project_id, std::unique_ptr<OpStore> store, std::uint64_t snapshot_every)
    : id_(std::move(project_id)),
      store_(std::move(store)),
      snapshot_every_(snapshot_every == 0 ? 1 : snapshot_every),
      state_(recover(*store_, id_)) {}

ApplyOutcome Project::submit(const Principal& principal, const SessionOp& op,
                             const std::function<void(const Event&)>& on_event) {
  std::lock_guard lock(mutex_);
  ApplyOutcome out = apply(state_, principal, op);
  if (!out.event) return out;
  try {
    store_->append(*out.event);
    if (out.seq % snapshot_every_ == 0) store_->save_snapshot(cloudatelier::snapshot(state_));
  } catch (...) {
    // The op is not durable; fall back to what the store holds.
    state_ = recover(*store_, id_);
    throw;
  }
  if (on_event) on_event(*out.event);
  return out;
}

json Project::snapshot() const {
  std::lock_guard lock(mutex_);
  return cloudatelier::snapshot(state_);
}

void Project::checkpoint() {
  std::lock_guard lock(mutex_);
  store_->save_snapshot(cloudatelier::snapshot(state_));
}

Sha256Digest Project::hash() const {
  std::lock_guard lock(mutex_);
  return state_hash(state_);
}

std::string Project::export_layer(const Uuid& layer_id, LayerFormat format) const {
  std::lock_guard lock(mutex_);
  return export_session_layer(state_, layer_id, format);
}

void Project::with_state(const std::function<void(const SessionState&)>& fn) const {
  std::lock_guard lock(mutex_);
  fn(state_);
}

}  // namespace cloudatelier
