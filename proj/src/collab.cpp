#include "cloudatelier/collab.hpp"

#include <algorithm>
#include <array>
#include <variant>

namespace cloudatelier {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<OpAction, std::string_view>, 7> kActions = {{
    {OpAction::kCreateLayer, "createLayer"},
    {OpAction::kCreateSeries, "createSeries"},
    {OpAction::kUpdateSeries, "updateSeries"},
    {OpAction::kDeleteSeries, "deleteSeries"},
    {OpAction::kDeleteLayer, "deleteLayer"},
    {OpAction::kCommitLayer, "commitLayer"},
    {OpAction::kImportLayer, "importLayer"},
}};

Rejection reject(ErrorCode code, std::string detail, json current = nullptr) {
  return Rejection{code, std::move(detail), std::move(current)};
}

struct Step {
  std::optional<Rejection> rejection;
  std::optional<Uuid> created_layer;
};

// Resolves a live layer the principal may write to.
std::variant<LiveLayer*, Rejection> writable_layer(SessionState& state, const Principal& who, const Uuid& layer_id) {
  if (state.find_baseline(layer_id)) return reject(ErrorCode::kUnauthorized, "layer is frozen");
  auto it = state.live.find(layer_id);
  if (it == state.live.end()) return reject(ErrorCode::kUnknownTarget, "no live layer " + layer_id.str());
  if (who.role != Role::kCurator && it->second.owner != who.user) {
    return reject(ErrorCode::kUnauthorized, "layer " + layer_id.str() + " belongs to " + it->second.owner);
  }
  return &it->second;
}

std::variant<MeasurementSeries, Rejection> parse_series(const json& payload) {
  try {
    return series_from_json(payload);
  } catch (const Error& e) {
    return reject(e.code(), e.detail());
  }
}

// Checks, then mutates. Nothing is modified when a rejection is returned.
Step execute(SessionState& state, const Principal& who, const SessionOp& op, std::uint64_t seq) {
  Step step;
  if (who.role == Role::kViewer) {
    step.rejection = reject(ErrorCode::kUnauthorized, "viewers cannot modify the session");
    return step;
  }
  switch (op.action) {
    case OpAction::kCreateLayer: {
      if (op.layer_id.is_nil()) {
        step.rejection = reject(ErrorCode::kInvalidOp, "createLayer needs a layer id");
        return step;
      }
      if (state.live.count(op.layer_id) || state.find_baseline(op.layer_id) || state.deleted_layers.count(op.layer_id)) {
        step.rejection = reject(ErrorCode::kInvalidOp, "layer id already used: " + op.layer_id.str());
        return step;
      }
      LayerDocument doc;
      doc.id = op.layer_id;
      doc.base_version = state.baseline.size();
      if (op.payload.is_object()) {
        if (auto it = op.payload.find("name"); it != op.payload.end()) {
          if (!it->is_string()) {
            step.rejection = reject(ErrorCode::kValidationFailed, "layer name must be a string");
            return step;
          }
          doc.name = it->get<std::string>();
        }
        if (auto it = op.payload.find("planeRefs"); it != op.payload.end()) {
          if (!it->is_array()) {
            step.rejection = reject(ErrorCode::kValidationFailed, "planeRefs must be an array");
            return step;
          }
          for (const auto& p : *it) {
            auto id = p.is_string() ? Uuid::parse(p.get<std::string>()) : std::nullopt;
            if (!id) {
              step.rejection = reject(ErrorCode::kValidationFailed, "planeRefs entries must be UUIDs");
              return step;
            }
            doc.plane_refs.push_back(*id);
          }
        }
      }
      state.live[op.layer_id] = LiveLayer{who.user, std::move(doc), {}};
      return step;
    }

    case OpAction::kCreateSeries: {
      auto target = writable_layer(state, who, op.layer_id);
      if (auto* r = std::get_if<Rejection>(&target)) {
        step.rejection = *r;
        return step;
      }
      LiveLayer& layer = *std::get<LiveLayer*>(target);
      auto parsed = parse_series(op.payload);
      if (auto* r = std::get_if<Rejection>(&parsed)) {
        step.rejection = *r;
        return step;
      }
      auto series = std::get<MeasurementSeries>(std::move(parsed));
      if (op.series_id && *op.series_id != series.id) {
        step.rejection = reject(ErrorCode::kInvalidOp, "series id does not match payload");
        return step;
      }
      if (layer.doc.find(series.id) || layer.tombstones.count(series.id)) {
        step.rejection = reject(ErrorCode::kInvalidOp, "series id already used: " + series.id.str());
        return step;
      }
      series.version = 1;
      series.author = who.user;
      layer.doc.series.push_back(std::move(series));
      return step;
    }

    case OpAction::kUpdateSeries: {
      auto target = writable_layer(state, who, op.layer_id);
      if (auto* r = std::get_if<Rejection>(&target)) {
        step.rejection = *r;
        return step;
      }
      LiveLayer& layer = *std::get<LiveLayer*>(target);
      auto parsed = parse_series(op.payload);
      if (auto* r = std::get_if<Rejection>(&parsed)) {
        step.rejection = *r;
        return step;
      }
      auto series = std::get<MeasurementSeries>(std::move(parsed));
      if (op.series_id && *op.series_id != series.id) {
        step.rejection = reject(ErrorCode::kInvalidOp, "series id does not match payload");
        return step;
      }
      MeasurementSeries* stored = layer.doc.find(series.id);
      if (!stored) {
        const bool deleted = layer.tombstones.count(series.id) > 0;
        step.rejection = reject(ErrorCode::kUnknownTarget, (deleted ? "series was deleted: " : "no series ") + series.id.str());
        return step;
      }
      if (series.version != stored->version + 1) {
        step.rejection = reject(ErrorCode::kStaleVersion,
                                "series " + series.id.str() + " is at version " + std::to_string(stored->version) +
                                    ", update carries " + std::to_string(series.version),
                                series_to_json(*stored));
        return step;
      }
      if (series.kind != stored->kind) {
        step.rejection = reject(ErrorCode::kValidationFailed, "series kind is immutable");
        return step;
      }
      series.author = who.user;
      *stored = std::move(series);
      return step;
    }

    case OpAction::kDeleteSeries: {
      auto target = writable_layer(state, who, op.layer_id);
      if (auto* r = std::get_if<Rejection>(&target)) {
        step.rejection = *r;
        return step;
      }
      LiveLayer& layer = *std::get<LiveLayer*>(target);
      if (!op.series_id) {
        step.rejection = reject(ErrorCode::kInvalidOp, "deleteSeries needs a series id");
        return step;
      }
      if (layer.tombstones.count(*op.series_id)) return step;  // already deleted: accepted, nothing to do
      const MeasurementSeries* stored = layer.doc.find(*op.series_id);
      if (!stored) {
        step.rejection = reject(ErrorCode::kUnknownTarget, "no series " + op.series_id->str());
        return step;
      }
      if (op.base_version != stored->version) {
        step.rejection = reject(ErrorCode::kStaleVersion,
                                "series " + stored->id.str() + " is at version " + std::to_string(stored->version),
                                series_to_json(*stored));
        return step;
      }
      auto& list = layer.doc.series;
      list.erase(std::remove_if(list.begin(), list.end(), [&](const MeasurementSeries& s) { return s.id == *op.series_id; }),
                 list.end());
      layer.tombstones.insert(*op.series_id);
      return step;
    }

    case OpAction::kDeleteLayer: {
      auto target = writable_layer(state, who, op.layer_id);
      if (auto* r = std::get_if<Rejection>(&target)) {
        step.rejection = *r;
        return step;
      }
      state.live.erase(op.layer_id);
      state.deleted_layers.insert(op.layer_id);
      return step;
    }

    case OpAction::kCommitLayer: {
      if (who.role != Role::kCurator) {
        step.rejection = reject(ErrorCode::kUnauthorized, "only curators can commit layers");
        return step;
      }
      if (state.find_baseline(op.layer_id)) {
        step.rejection = reject(ErrorCode::kUnauthorized, "layer is frozen");
        return step;
      }
      auto it = state.live.find(op.layer_id);
      if (it == state.live.end()) {
        step.rejection = reject(ErrorCode::kUnknownTarget, "no live layer " + op.layer_id.str());
        return step;
      }
      state.baseline.push_back(BaselineLayer{it->second.owner, who.user, seq, std::move(it->second.doc)});
      state.live.erase(it);
      return step;
    }

    case OpAction::kImportLayer: {
      LayerDocument doc;
      try {
        doc = layer_from_json(op.payload);
      } catch (const Error& e) {
        step.rejection = reject(e.code(), e.detail());
        return step;
      }
      // Fresh ids derive from the server sequence so every replica computes the same ones.
      const std::string tag = std::to_string(seq) + ":";
      const Uuid original = doc.id;
      doc.id = Uuid::derived(state.project_id, "layer:" + tag + original.str());
      doc.imported_from = original;
      doc.base_version = state.baseline.size();
      for (auto& s : doc.series) {
        const Uuid from = s.id;
        s.id = Uuid::derived(state.project_id, "series:" + tag + original.str() + ":" + from.str());
        s.imported_from = from;
        s.version = 1;
        s.author = who.user;
      }
      if (state.live.count(doc.id) || state.find_baseline(doc.id) || state.deleted_layers.count(doc.id)) {
        step.rejection = reject(ErrorCode::kInvalidOp, "derived layer id collides");
        return step;
      }
      step.created_layer = doc.id;
      state.live[doc.id] = LiveLayer{who.user, std::move(doc), {}};
      return step;
    }
  }
  step.rejection = reject(ErrorCode::kInvalidOp, "unknown action");
  return step;
}

void record(SessionState& state, const SessionOp& op, std::uint64_t seq) {
  state.server_seq = seq;
  state.client_seq[op.id.client] = op.id.seq;
  state.applied[op.id] = seq;
}

json uuid_list(const std::set<Uuid>& ids) {
  json out = json::array();
  for (const auto& id : ids) out.push_back(id.str());
  return out;
}

Uuid uuid_field(const json& v) {
  auto id = v.is_string() ? Uuid::parse(v.get<std::string>()) : std::nullopt;
  if (!id) throw Error(ErrorCode::kValidationFailed, "snapshot holds an invalid UUID");
  return *id;
}

}  // namespace

std::string_view role_name(Role role) {
  switch (role) {
    case Role::kCurator: return "curator";
    case Role::kContributor: return "contributor";
    case Role::kViewer: return "viewer";
  }
  return "viewer";
}

std::optional<Role> role_from_name(std::string_view name) {
  if (name == "curator") return Role::kCurator;
  if (name == "contributor") return Role::kContributor;
  if (name == "viewer") return Role::kViewer;
  return std::nullopt;
}

std::string_view op_action_name(OpAction action) {
  for (const auto& [a, name] : kActions) {
    if (a == action) return name;
  }
  return "?";
}

std::optional<OpAction> op_action_from_name(std::string_view name) {
  for (const auto& [a, n] : kActions) {
    if (n == name) return a;
  }
  return std::nullopt;
}

const LayerDocument* SessionState::find_layer(const Uuid& id) const {
  if (auto it = live.find(id); it != live.end()) return &it->second.doc;
  if (const auto* b = find_baseline(id)) return &b->doc;
  return nullptr;
}

const BaselineLayer* SessionState::find_baseline(const Uuid& id) const {
  for (const auto& b : baseline) {
    if (b.doc.id == id) return &b;
  }
  return nullptr;
}

SessionState genesis(std::string project_id) {
  SessionState s;
  s.project_id = std::move(project_id);
  return s;
}

ApplyOutcome apply(SessionState& state, const Principal& principal, const SessionOp& op) {
  ApplyOutcome out;
  if (auto it = state.applied.find(op.id); it != state.applied.end()) {
    out.seq = it->second;
    out.duplicate = true;
    return out;
  }
  if (op.id.client.empty()) {
    out.rejection = reject(ErrorCode::kInvalidOp, "op id has no client");
    return out;
  }
  if (auto it = state.client_seq.find(op.id.client); it != state.client_seq.end() && op.id.seq <= it->second) {
    out.rejection = reject(ErrorCode::kInvalidOp, "client sequence " + std::to_string(op.id.seq) +
                                                      " does not follow " + std::to_string(it->second));
    return out;
  }
  const std::uint64_t seq = state.server_seq + 1;
  Step step = execute(state, principal, op, seq);
  if (step.rejection) {
    out.rejection = std::move(step.rejection);
    return out;
  }
  record(state, op, seq);
  out.seq = seq;
  out.created_layer = step.created_layer;
  out.event = Event{seq, op, principal};
  return out;
}

void apply_event(SessionState& state, const Event& event) {
  if (event.seq != state.server_seq + 1) {
    throw Error(ErrorCode::kInvalidOp, "event " + std::to_string(event.seq) + " does not follow " +
                                           std::to_string(state.server_seq));
  }
  Step step = execute(state, event.principal, event.op, event.seq);
  if (step.rejection) {
    throw Error(ErrorCode::kInvalidOp, "event " + std::to_string(event.seq) + " does not apply: " + step.rejection->detail);
  }
  record(state, event.op, event.seq);
}

json snapshot(const SessionState& state) {
  json baseline = json::array();
  for (const auto& b : state.baseline) {
    baseline.push_back({{"owner", b.owner},
                        {"committedBy", b.committed_by},
                        {"committedSeq", b.committed_seq},
                        {"layer", layer_to_json(b.doc)}});
  }
  json live = json::array();
  for (const auto& [id, l] : state.live) {
    live.push_back({{"owner", l.owner}, {"tombstones", uuid_list(l.tombstones)}, {"layer", layer_to_json(l.doc)}});
  }
  json clients = json::object();
  for (const auto& [client, seq] : state.client_seq) clients[client] = seq;
  json applied = json::array();
  for (const auto& [id, seq] : state.applied) applied.push_back(json::array({id.client, id.seq, seq}));
  return {{"projectId", state.project_id},
          {"serverSeq", state.server_seq},
          {"baseline", baseline},
          {"live", live},
          {"deletedLayers", uuid_list(state.deleted_layers)},
          {"clients", clients},
          {"applied", applied}};
}

SessionState restore(const json& snap) {
  SessionState s;
  try {
    s.project_id = snap.at("projectId").get<std::string>();
    s.server_seq = snap.at("serverSeq").get<std::uint64_t>();
    for (const auto& b : snap.at("baseline")) {
      s.baseline.push_back(BaselineLayer{b.at("owner").get<std::string>(), b.at("committedBy").get<std::string>(),
                                         b.at("committedSeq").get<std::uint64_t>(), layer_from_json(b.at("layer"))});
    }
    for (const auto& l : snap.at("live")) {
      LiveLayer layer{l.at("owner").get<std::string>(), layer_from_json(l.at("layer")), {}};
      for (const auto& t : l.at("tombstones")) layer.tombstones.insert(uuid_field(t));
      const Uuid id = layer.doc.id;
      s.live[id] = std::move(layer);
    }
    for (const auto& d : snap.at("deletedLayers")) s.deleted_layers.insert(uuid_field(d));
    for (auto it = snap.at("clients").begin(); it != snap.at("clients").end(); ++it) {
      s.client_seq[it.key()] = it->get<std::uint64_t>();
    }
    for (const auto& a : snap.at("applied")) {
      s.applied[OpId{a.at(0).get<std::string>(), a.at(1).get<std::uint64_t>()}] = a.at(2).get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidationFailed, std::string("malformed snapshot: ") + e.what());
  }
  return s;
}

Sha256Digest state_hash(const SessionState& state) { return sha256(canonical_dump(snapshot(state))); }

std::string export_session_layer(const SessionState& state, const Uuid& layer_id, LayerFormat format) {
  const LayerDocument* doc = state.find_layer(layer_id);
  if (!doc) throw Error(ErrorCode::kUnknownTarget, "no layer " + layer_id.str());
  return export_layer(*doc, format);
}

void Replica::deliver(const Event& event) {
  if (event.seq <= state_.server_seq) return;  // redelivery
  pending_.emplace(event.seq, event);
  for (auto it = pending_.find(state_.server_seq + 1); it != pending_.end(); it = pending_.find(state_.server_seq + 1)) {
    apply_event(state_, it->second);
    pending_.erase(it);
  }
}

}  // namespace cloudatelier
