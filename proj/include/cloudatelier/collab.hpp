#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cloudatelier/error.hpp"
#include "cloudatelier/hash.hpp"
#include "cloudatelier/interchange.hpp"
#include "cloudatelier/measure.hpp"
#include "cloudatelier/uuid.hpp"

namespace cloudatelier {

enum class Role { kCurator, kContributor, kViewer };

std::string_view role_name(Role role);  // "curator", "contributor", "viewer"
std::optional<Role> role_from_name(std::string_view name);

struct Principal {
  std::string user;
  Role role = Role::kViewer;

  friend bool operator==(const Principal&, const Principal&) = default;
};

enum class OpAction { kCreateLayer, kCreateSeries, kUpdateSeries, kDeleteSeries, kDeleteLayer, kCommitLayer, kImportLayer };

std::string_view op_action_name(OpAction action);  // "createLayer", ...
std::optional<OpAction> op_action_from_name(std::string_view name);

struct OpId {
  std::string client;
  std::uint64_t seq = 0;

  friend auto operator<=>(const OpId&, const OpId&) = default;
  friend bool operator==(const OpId&, const OpId&) = default;
};

/// One client request. Payloads:
///   CreateLayer  {"name", "planeRefs"?}
///   CreateSeries / UpdateSeries  a series object (measure/1)
///   ImportLayer  a layer document (measure/1)
///   others  ignored
/// base_version is the series version the client observed (DeleteSeries).
struct SessionOp {
  OpId id;
  OpAction action = OpAction::kCreateSeries;
  Uuid layer_id;
  std::optional<Uuid> series_id;
  nlohmann::json payload = nlohmann::json::object();
  std::uint64_t base_version = 0;

  friend bool operator==(const SessionOp&, const SessionOp&) = default;
};

/// An accepted op as broadcast to every replica.
struct Event {
  std::uint64_t seq = 0;
  SessionOp op;
  Principal principal;

  friend bool operator==(const Event&, const Event&) = default;
};

struct LiveLayer {
  std::string owner;
  LayerDocument doc;
  std::set<Uuid> tombstones;
};

struct BaselineLayer {
  std::string owner;
  std::string committed_by;
  std::uint64_t committed_seq = 0;
  LayerDocument doc;
};

struct SessionState {
  std::string project_id;
  std::uint64_t server_seq = 0;
  /// Committed layers in commit order. Frozen.
  std::vector<BaselineLayer> baseline;
  std::map<Uuid, LiveLayer> live;
  std::set<Uuid> deleted_layers;
  /// Last applied client sequence per client id.
  std::map<std::string, std::uint64_t> client_seq;
  /// Every applied op id and the server sequence it received.
  std::map<OpId, std::uint64_t> applied;

  const LayerDocument* find_layer(const Uuid& id) const;
  const BaselineLayer* find_baseline(const Uuid& id) const;
};

struct Rejection {
  ErrorCode code = ErrorCode::kInvalidOp;
  std::string detail;
  /// StaleVersion: the stored series, so the client can rebase.
  nlohmann::json current;
};

struct ApplyOutcome {
  /// Assigned sequence, or the original one for a duplicate.
  std::uint64_t seq = 0;
  bool duplicate = false;
  std::optional<Event> event;
  std::optional<Rejection> rejection;
  /// Id of a layer created by ImportLayer.
  std::optional<Uuid> created_layer;

  bool ok() const { return !rejection.has_value(); }
};

SessionState genesis(std::string project_id);

/// Server-side apply: on acceptance the op receives server_seq + 1 and the
/// returned event is what every replica must apply. A rejection leaves the
/// state untouched.
ApplyOutcome apply(SessionState& state, const Principal& principal, const SessionOp& op);

/// Replica-side apply of a broadcast event. Throws InvalidOp when the event
/// is out of sequence or does not apply (replica diverged).
void apply_event(SessionState& state, const Event& event);

nlohmann::json snapshot(const SessionState& state);
SessionState restore(const nlohmann::json& snapshot);

/// SHA-256 of the canonical snapshot.
Sha256Digest state_hash(const SessionState& state);

/// Canonical export of a live or baseline layer; UnknownTarget otherwise.
std::string export_session_layer(const SessionState& state, const Uuid& layer_id, LayerFormat format);

/// Events applied in server order; buffers out-of-order deliveries.
class Replica {
 public:
  explicit Replica(SessionState state) : state_(std::move(state)) {}

  void deliver(const Event& event);
  const SessionState& state() const { return state_; }
  std::size_t pending() const { return pending_.size(); }

 private:
  SessionState state_;
  std::map<std::uint64_t, Event> pending_;
};

}  // namespace cloudatelier
