#include "cloudatelier/protocol.hpp"

namespace cloudatelier::protocol {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::kInvalidOp, what); }

Uuid uuid_of(const json& v, const char* what) {
  auto id = v.is_string() ? Uuid::parse(v.get<std::string>()) : std::nullopt;
  if (!id) bad(std::string(what) + " must be a UUID string");
  return *id;
}

json op_id_json(const OpId& id) { return {{"client", id.client}, {"seq", id.seq}}; }

json envelope(const char* type, const std::string& project_id) { return {{"type", type}, {"projectId", project_id}}; }

}  // namespace

json op_to_json(const SessionOp& op) {
  json j{{"client", op.id.client},
         {"clientSeq", op.id.seq},
         {"action", std::string(op_action_name(op.action))},
         {"layerId", op.layer_id.str()},
         {"payload", op.payload},
         {"baseVersion", op.base_version}};
  if (op.series_id) j["seriesId"] = op.series_id->str();
  return j;
}

SessionOp op_from_json(const json& j) {
  if (!j.is_object()) bad("op must be an object");
  SessionOp op;
  try {
    op.id.client = j.at("client").get<std::string>();
    op.id.seq = j.at("clientSeq").get<std::uint64_t>();
    const auto action = op_action_from_name(j.at("action").get<std::string>());
    if (!action) bad("unknown action " + j.at("action").get<std::string>());
    op.action = *action;
    op.layer_id = j.contains("layerId") ? uuid_of(j.at("layerId"), "layerId") : Uuid{};
    if (j.contains("seriesId")) op.series_id = uuid_of(j.at("seriesId"), "seriesId");
    if (j.contains("payload")) op.payload = j.at("payload");
    if (j.contains("baseVersion")) op.base_version = j.at("baseVersion").get<std::uint64_t>();
  } catch (const json::exception& e) {
    bad(std::string("malformed op: ") + e.what());
  }
  return op;
}

json event_to_json(const Event& event) {
  return {{"seq", event.seq},
          {"op", op_to_json(event.op)},
          {"principal", {{"user", event.principal.user}, {"role", std::string(role_name(event.principal.role))}}}};
}

Event event_from_json(const json& j) {
  Event ev;
  try {
    ev.seq = j.at("seq").get<std::uint64_t>();
    ev.op = op_from_json(j.at("op"));
    ev.principal.user = j.at("principal").at("user").get<std::string>();
    const auto role = role_from_name(j.at("principal").at("role").get<std::string>());
    if (!role) bad("unknown role");
    ev.principal.role = *role;
  } catch (const json::exception& e) {
    bad(std::string("malformed event: ") + e.what());
  }
  return ev;
}

json hello(const std::string& project_id, const std::string& token, const std::string& client_id) {
  json j = envelope("hello", project_id);
  j["token"] = token;
  j["clientId"] = client_id;
  return j;
}

json welcome(const std::string& project_id, const json& snapshot, const Principal& principal) {
  json j = envelope("welcome", project_id);
  j["snapshot"] = snapshot;
  j["seq"] = snapshot.value("serverSeq", std::uint64_t{0});
  j["user"] = principal.user;
  j["role"] = std::string(role_name(principal.role));
  return j;
}

json op_message(const std::string& project_id, const SessionOp& op) {
  json j = envelope("op", project_id);
  j["op"] = op_to_json(op);
  return j;
}

json ack(const std::string& project_id, const OpId& id, const ApplyOutcome& outcome) {
  json j = envelope("ack", project_id);
  j["seq"] = outcome.seq;
  j["opId"] = op_id_json(id);
  j["duplicate"] = outcome.duplicate;
  if (outcome.created_layer) j["layerId"] = outcome.created_layer->str();
  return j;
}

json event_message(const std::string& project_id, const Event& event) {
  json j = envelope("event", project_id);
  j["seq"] = event.seq;
  j["op"] = op_to_json(event.op);
  j["principal"] = {{"user", event.principal.user}, {"role", std::string(role_name(event.principal.role))}};
  return j;
}

json error_message(const std::string& project_id, ErrorCode code, const std::string& detail, const json& current,
                   const std::optional<OpId>& op_id) {
  json j = envelope("error", project_id);
  json err{{"code", std::string(error_code_name(code))}, {"detail", detail}};
  if (!current.is_null()) err["current"] = current;
  j["error"] = err;
  if (op_id) j["opId"] = op_id_json(*op_id);
  return j;
}

json bye(const std::string& project_id) { return envelope("bye", project_id); }

std::string encode(const json& message) { return canonical_dump(message) + "\n"; }

json decode(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    bad(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) bad("message needs a string \"type\"");
  return j;
}

}  // namespace cloudatelier::protocol
