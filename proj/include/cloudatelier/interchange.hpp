#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cloudatelier/measure.hpp"

namespace cloudatelier {

inline constexpr std::string_view kLayerSchema = "measure/1";

enum class LayerFormat { kJson, kDxf };

/// Canonical JSON (sorted keys, shortest round-trip numbers) or R12 ASCII DXF.
std::string export_layer(const LayerDocument& doc, LayerFormat format);

/// JSON only; DXF import is rejected with UnsupportedFormat.
LayerDocument import_layer(std::string_view bytes, LayerFormat format = LayerFormat::kJson);

nlohmann::json layer_to_json(const LayerDocument& doc);
/// Throws SchemaVersionUnsupported or ValidationFailed.
LayerDocument layer_from_json(const nlohmann::json& j);

nlohmann::json series_to_json(const MeasurementSeries& series);
/// Parses and validates one series object.
MeasurementSeries series_from_json(const nlohmann::json& j);

/// Compact dump with sorted keys; the form every export and hash uses.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace cloudatelier
