#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cloudatelier/collab.hpp"

namespace cloudatelier {

/// Durable op history of one project. Recovery = latest snapshot + replay of
/// later events. A database-backed store would implement this interface.
class OpStore {
 public:
  virtual ~OpStore() = default;
  virtual void append(const Event& event) = 0;
  virtual std::vector<Event> events_after(std::uint64_t seq) = 0;
  virtual void save_snapshot(const nlohmann::json& snapshot) = 0;
  virtual std::optional<nlohmann::json> load_snapshot() = 0;
};

class MemoryOpStore final : public OpStore {
 public:
  void append(const Event& event) override { events_.push_back(event); }
  std::vector<Event> events_after(std::uint64_t seq) override;
  void save_snapshot(const nlohmann::json& snapshot) override { snapshot_ = snapshot; }
  std::optional<nlohmann::json> load_snapshot() override { return snapshot_; }

 private:
  std::vector<Event> events_;
  std::optional<nlohmann::json> snapshot_;
};

/// `<dir>/oplog.ndjson` (one event per line, appended) and `<dir>/snapshot.json`
/// (replaced atomically). A writable store holds an exclusive lock on the
/// directory and drops a torn final log line on open; a read-only one ignores it.
class FileOpStore final : public OpStore {
 public:
  enum class Mode { kWritable, kReadOnly };

  explicit FileOpStore(std::filesystem::path dir, Mode mode = Mode::kWritable);
  ~FileOpStore() override;
  FileOpStore(const FileOpStore&) = delete;
  FileOpStore& operator=(const FileOpStore&) = delete;

  void append(const Event& event) override;
  std::vector<Event> events_after(std::uint64_t seq) override;
  void save_snapshot(const nlohmann::json& snapshot) override;
  std::optional<nlohmann::json> load_snapshot() override;

 private:
  std::filesystem::path dir_;
  Mode mode_;
  std::FILE* log_ = nullptr;
  int lock_fd_ = -1;
};

SessionState recover(OpStore& store, const std::string& project_id);

/// The per-project serializer: every op goes through one mutex, so all
/// replicas see a single total order.
class Project {
 public:
  Project(std::string project_id, std::unique_ptr<OpStore> store, std::uint64_t snapshot_every = 256);

  const std::string& id() const { return id_; }

  /// Applies, persists, then calls `on_event` (still under the lock, so
  /// broadcasts leave in sequence order).
  ApplyOutcome submit(const Principal& principal, const SessionOp& op,
                      const std::function<void(const Event&)>& on_event = {});

  nlohmann::json snapshot() const;
  Sha256Digest hash() const;
  /// Persists a snapshot of the current state.
  void checkpoint();
  std::string export_layer(const Uuid& layer_id, LayerFormat format) const;

  /// Runs `fn` under the project lock (e.g. register a subscriber together with its welcome snapshot).
  void with_state(const std::function<void(const SessionState&)>& fn) const;

 private:
  std::string id_;
  std::unique_ptr<OpStore> store_;
  std::uint64_t snapshot_every_;
  mutable std::mutex mutex_;
  SessionState state_;
};

}  // namespace cloudatelier
