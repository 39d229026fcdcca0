#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cloudatelier/collab.hpp"

namespace cloudatelier::protocol {

// Newline-delimited JSON envelopes: {"type", "projectId", ...}
//   hello   {token, clientId}                client -> server
//   welcome {snapshot, user, role}           server -> client
//   op      {op}                             client -> server
//   ack     {seq, opId, duplicate, layerId?} server -> sender
//   event   {seq, op, principal}             server -> all clients
//   error   {error:{code, detail, current?}, opId?}
//   bye     {}

nlohmann::json op_to_json(const SessionOp& op);
/// Throws InvalidOp on a malformed op object.
SessionOp op_from_json(const nlohmann::json& j);

nlohmann::json event_to_json(const Event& event);
Event event_from_json(const nlohmann::json& j);

nlohmann::json hello(const std::string& project_id, const std::string& token, const std::string& client_id);
nlohmann::json welcome(const std::string& project_id, const nlohmann::json& snapshot, const Principal& principal);
nlohmann::json op_message(const std::string& project_id, const SessionOp& op);
nlohmann::json ack(const std::string& project_id, const OpId& id, const ApplyOutcome& outcome);
nlohmann::json event_message(const std::string& project_id, const Event& event);
nlohmann::json error_message(const std::string& project_id, ErrorCode code, const std::string& detail,
                             const nlohmann::json& current = nullptr, const std::optional<OpId>& op_id = std::nullopt);
nlohmann::json bye(const std::string& project_id);

/// One wire line (canonical JSON + '\n').
std::string encode(const nlohmann::json& message);
/// Parses one line; InvalidOp when it is not a JSON object with a string "type".
nlohmann::json decode(const std::string& line);

}  // namespace cloudatelier::protocol
