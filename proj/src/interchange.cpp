#include "cloudatelier/interchange.hpp"

#include <array>
#include <charconv>
#include <map>
#include <set>

#include "cloudatelier/error.hpp"

namespace cloudatelier {

using nlohmann::json;

namespace {

const std::set<std::string> kLayerKeys = {"schema", "id", "name", "baseVersion", "series", "planeRefs", "importedFrom"};
const std::set<std::string> kSeriesKeys = {"id",      "kind",   "vertices",     "label", "color",       "profileWidth",
                                           "box",     "version", "author",      "importedFrom"};
const std::set<std::string> kVertexKeys = {"position", "snapped", "snapNode"};

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kValidationFailed, what); }

const json& field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) invalid(where + ": missing \"" + key + "\"");
  return *it;
}

std::string get_string(const json& j, const char* key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_string()) invalid(where + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

std::uint64_t get_unsigned(const json& j, const char* key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number_unsigned()) invalid(where + ": \"" + key + "\" must be a non-negative integer");
  return v.get<std::uint64_t>();
}

double get_number(const json& v, const std::string& what) {
  if (!v.is_number()) invalid(what + " must be a number");
  return v.get<double>();
}

Uuid get_uuid(const json& v, const std::string& what) {
  if (!v.is_string()) invalid(what + " must be a UUID string");
  auto id = Uuid::parse(v.get<std::string>());
  if (!id) invalid(what + " is not a valid UUID: " + v.get<std::string>());
  return *id;
}

Vec3 get_vec3(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 3) invalid(what + " must be an array of 3 numbers");
  return {get_number(v[0], what), get_number(v[1], what), get_number(v[2], what)};
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

json extras_of(const json& j, const std::set<std::string>& known) {
  json extra = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) extra[it.key()] = it.value();
  }
  return extra;
}

void merge_extras(json& j, const json& extra) {
  if (!extra.is_object()) return;
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    if (!j.contains(it.key())) j[it.key()] = it.value();
  }
}

Vertex3 vertex_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) invalid(where + " must be an object");
  Vertex3 v;
  v.position = get_vec3(field(j, "position", where), where + ".position");
  if (auto it = j.find("snapped"); it != j.end()) {
    if (!it->is_boolean()) invalid(where + ".snapped must be a boolean");
    v.snapped = it->get<bool>();
  }
  if (auto it = j.find("snapNode"); it != j.end()) {
    if (!it->is_string()) invalid(where + ".snapNode must be a string");
    v.snap_node = NodeCode::parse(it->get<std::string>());
    if (!v.snap_node) invalid(where + ".snapNode is not a node code: " + it->get<std::string>());
  }
  if (v.snap_node && !v.snapped) invalid(where + ": snapNode requires snapped=true");
  v.extra = extras_of(j, kVertexKeys);
  return v;
}

json vertex_to_json(const Vertex3& v) {
  json j{{"position", vec3_json(v.position)}, {"snapped", v.snapped}};
  if (v.snap_node) j["snapNode"] = v.snap_node->str();
  merge_extras(j, v.extra);
  return j;
}

// --- DXF ------------------------------------------------------------------

std::string number(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

// Nearest of the first nine AutoCAD color indices.
int aci_for(const Rgb& c) {
  static constexpr std::array<std::array<int, 4>, 9> kPalette = {{
      {1, 255, 0, 0}, {2, 255, 255, 0}, {3, 0, 255, 0}, {4, 0, 255, 255}, {5, 0, 0, 255},
      {6, 255, 0, 255}, {7, 255, 255, 255}, {8, 128, 128, 128}, {9, 192, 192, 192},
  }};
  int best = 7;
  long best_d = -1;
  for (const auto& p : kPalette) {
    const long dr = c.r - p[1], dg = c.g - p[2], db = c.b - p[3];
    const long d = dr * dr + dg * dg + db * db;
    if (best_d < 0 || d < best_d) {
      best_d = d;
      best = p[0];
    }
  }
  return best;
}

class DxfWriter {
 public:
  void pair(int code, const std::string& value) {
    out_ += std::to_string(code);
    out_ += '\n';
    out_ += value;
    out_ += '\n';
  }
  void pair(int code, double value) { pair(code, number(value)); }
  void pair(int code, int value) { pair(code, std::to_string(value)); }

  void point(int base, const Vec3& p) {
    pair(base, p.x);
    pair(base + 10, p.y);
    pair(base + 20, p.z);
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

std::string layer_name(SeriesKind kind) {
  std::string name(series_kind_title(kind));
  for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

void dxf_polyline(DxfWriter& w, const std::string& layer, int color, const std::vector<Vec3>& pts, bool closed) {
  w.pair(0, std::string("POLYLINE"));
  w.pair(8, layer);
  w.pair(62, color);
  w.pair(66, 1);
  w.point(10, Vec3{});
  w.pair(70, closed ? 9 : 8);
  for (const auto& p : pts) {
    w.pair(0, std::string("VERTEX"));
    w.pair(8, layer);
    w.point(10, p);
    w.pair(70, 32);
  }
  w.pair(0, std::string("SEQEND"));
  w.pair(8, layer);
}

void dxf_text(DxfWriter& w, const std::string& layer, int color, const Vec3& at, const std::string& text) {
  w.pair(0, std::string("TEXT"));
  w.pair(8, layer);
  w.pair(62, color);
  w.point(10, at);
  w.pair(40, 0.25);
  std::string line = text;
  for (auto& ch : line) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  w.pair(1, line);
}

std::string export_dxf(const LayerDocument& doc) {
  std::set<SeriesKind> kinds;
  for (const auto& s : doc.series) kinds.insert(s.kind);

  DxfWriter w;
  w.pair(0, std::string("SECTION"));
  w.pair(2, std::string("HEADER"));
  w.pair(9, std::string("$ACADVER"));
  w.pair(1, std::string("AC1009"));
  w.pair(0, std::string("ENDSEC"));

  w.pair(0, std::string("SECTION"));
  w.pair(2, std::string("TABLES"));
  w.pair(0, std::string("TABLE"));
  w.pair(2, std::string("LTYPE"));
  w.pair(70, 1);
  w.pair(0, std::string("LTYPE"));
  w.pair(2, std::string("CONTINUOUS"));
  w.pair(70, 0);
  w.pair(3, std::string("Solid line"));
  w.pair(72, 65);
  w.pair(73, 0);
  w.pair(40, 0.0);
  w.pair(0, std::string("ENDTAB"));
  w.pair(0, std::string("TABLE"));
  w.pair(2, std::string("LAYER"));
  w.pair(70, static_cast<int>(kinds.size() + 1));
  w.pair(0, std::string("LAYER"));
  w.pair(2, std::string("0"));
  w.pair(70, 0);
  w.pair(62, 7);
  w.pair(6, std::string("CONTINUOUS"));
  for (SeriesKind k : kinds) {
    w.pair(0, std::string("LAYER"));
    w.pair(2, layer_name(k));
    w.pair(70, 0);
    w.pair(62, 7);
    w.pair(6, std::string("CONTINUOUS"));
  }
  w.pair(0, std::string("ENDTAB"));
  w.pair(0, std::string("ENDSEC"));

  w.pair(0, std::string("SECTION"));
  w.pair(2, std::string("ENTITIES"));
  for (const auto& s : doc.series) {
    const std::string layer = layer_name(s.kind);
    const int color = aci_for(s.color);
    std::vector<Vec3> pts;
    for (const auto& v : s.vertices) pts.push_back(v.position);
    switch (s.kind) {
      case SeriesKind::kDistance:
      case SeriesKind::kHeight:
      case SeriesKind::kAngle:
      case SeriesKind::kProfile:
        dxf_polyline(w, layer, color, pts, false);
        break;
      case SeriesKind::kPolygon:
        dxf_polyline(w, layer, color, pts, true);
        break;
      case SeriesKind::kArea:
        for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
          w.pair(0, std::string("3DFACE"));
          w.pair(8, layer);
          w.pair(62, color);
          w.point(10, pts[0]);
          w.point(11, pts[i]);
          w.point(12, pts[i + 1]);
          w.point(13, pts[i + 1]);
        }
        break;
      case SeriesKind::kVolume: {
        if (!s.box || pts.empty()) break;
        const Vec3 c = pts.front();
        const double hx = s.box->extent.x / 2, hy = s.box->extent.y / 2, hz = s.box->extent.z / 2;
        const double cs = std::cos(s.box->yaw), sn = std::sin(s.box->yaw);
        for (double z : {c.z - hz, c.z + hz}) {
          std::vector<Vec3> ring;
          for (auto [sx, sy] : std::array<std::pair<double, double>, 4>{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}}) {
            const double lx = sx * hx, ly = sy * hy;
            ring.push_back({c.x + lx * cs - ly * sn, c.y + lx * sn + ly * cs, z});
          }
          dxf_polyline(w, layer, color, ring, true);
        }
        break;
      }
      case SeriesKind::kAnnotation:
        break;
    }
    if (!s.label.empty() && !pts.empty()) dxf_text(w, layer, color, pts.front(), s.label);
  }
  w.pair(0, std::string("ENDSEC"));
  w.pair(0, std::string("EOF"));
  return w.take();
}

}  // namespace

std::string canonical_dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

json series_to_json(const MeasurementSeries& s) {
  json vertices = json::array();
  for (const auto& v : s.vertices) vertices.push_back(vertex_to_json(v));
  json j{{"id", s.id.str()},
         {"kind", std::string(series_kind_name(s.kind))},
         {"vertices", vertices},
         {"label", s.label},
         {"color", json::array({s.color.r, s.color.g, s.color.b})},
         {"version", s.version},
         {"author", s.author}};
  if (s.profile_width) j["profileWidth"] = *s.profile_width;
  if (s.box) j["box"] = json{{"extent", vec3_json(s.box->extent)}, {"yaw", s.box->yaw}};
  if (s.imported_from) j["importedFrom"] = s.imported_from->str();
  merge_extras(j, s.extra);
  return j;
}

MeasurementSeries series_from_json(const json& j) {
  if (!j.is_object()) invalid("series must be an object");
  MeasurementSeries s;
  s.id = get_uuid(field(j, "id", "series"), "series.id");
  const std::string where = "series " + s.id.str();
  const std::string kind = get_string(j, "kind", where);
  auto k = series_kind_from_name(kind);
  if (!k) invalid(where + ": unknown kind \"" + kind + "\"");
  s.kind = *k;
  const json& verts = field(j, "vertices", where);
  if (!verts.is_array()) invalid(where + ": \"vertices\" must be an array");
  for (std::size_t i = 0; i < verts.size(); ++i) {
    s.vertices.push_back(vertex_from_json(verts[i], where + ".vertices[" + std::to_string(i) + "]"));
  }
  if (j.contains("label")) s.label = get_string(j, "label", where);
  if (auto it = j.find("color"); it != j.end()) {
    if (!it->is_array() || it->size() != 3) invalid(where + ": color must be [r, g, b]");
    std::array<std::uint8_t, 3> c{};
    for (std::size_t i = 0; i < 3; ++i) {
      const json& ch = (*it)[i];
      if (!ch.is_number_unsigned() || ch.get<std::uint64_t>() > 255) invalid(where + ": color channels must be 0-255");
      c[i] = static_cast<std::uint8_t>(ch.get<std::uint64_t>());
    }
    s.color = {c[0], c[1], c[2]};
  }
  s.version = get_unsigned(j, "version", where);
  if (j.contains("author")) s.author = get_string(j, "author", where);
  if (auto it = j.find("profileWidth"); it != j.end()) s.profile_width = get_number(*it, where + ".profileWidth");
  if (auto it = j.find("box"); it != j.end()) {
    if (!it->is_object()) invalid(where + ": box must be an object");
    VolumeBox box;
    box.extent = get_vec3(field(*it, "extent", where + ".box"), where + ".box.extent");
    box.yaw = it->contains("yaw") ? get_number(it->at("yaw"), where + ".box.yaw") : 0.0;
    s.box = box;
  }
  if (auto it = j.find("importedFrom"); it != j.end()) s.imported_from = get_uuid(*it, where + ".importedFrom");
  s.extra = extras_of(j, kSeriesKeys);
  validate(s);
  return s;
}

json layer_to_json(const LayerDocument& doc) {
  json series = json::array();
  for (const auto& s : doc.series) series.push_back(series_to_json(s));
  json planes = json::array();
  for (const auto& p : doc.plane_refs) planes.push_back(p.str());
  json j{{"schema", std::string(kLayerSchema)},
         {"id", doc.id.str()},
         {"name", doc.name},
         {"baseVersion", doc.base_version},
         {"series", series},
         {"planeRefs", planes}};
  if (doc.imported_from) j["importedFrom"] = doc.imported_from->str();
  merge_extras(j, doc.extra);
  return j;
}

LayerDocument layer_from_json(const json& j) {
  if (!j.is_object()) invalid("layer document must be a JSON object");
  auto schema = j.find("schema");
  if (schema == j.end() || !schema->is_string()) {
    throw Error(ErrorCode::kSchemaVersionUnsupported, "layer document has no schema tag");
  }
  if (schema->get<std::string>() != kLayerSchema) {
    throw Error(ErrorCode::kSchemaVersionUnsupported, "unsupported layer schema \"" + schema->get<std::string>() + "\"");
  }
  LayerDocument doc;
  doc.id = get_uuid(field(j, "id", "layer"), "layer.id");
  doc.name = get_string(j, "name", "layer");
  doc.base_version = j.contains("baseVersion") ? get_unsigned(j, "baseVersion", "layer") : 0;
  const json& series = field(j, "series", "layer");
  if (!series.is_array()) invalid("layer: \"series\" must be an array");
  for (const auto& s : series) doc.series.push_back(series_from_json(s));
  if (auto it = j.find("planeRefs"); it != j.end()) {
    if (!it->is_array()) invalid("layer: \"planeRefs\" must be an array");
    for (const auto& p : *it) doc.plane_refs.push_back(get_uuid(p, "layer.planeRefs[]"));
  }
  if (auto it = j.find("importedFrom"); it != j.end()) doc.imported_from = get_uuid(*it, "layer.importedFrom");
  doc.extra = extras_of(j, kLayerKeys);
  validate(doc);
  return doc;
}

std::string export_layer(const LayerDocument& doc, LayerFormat format) {
  if (format == LayerFormat::kDxf) return export_dxf(doc);
  return canonical_dump(layer_to_json(doc));
}

LayerDocument import_layer(std::string_view bytes, LayerFormat format) {
  if (format == LayerFormat::kDxf) {
    throw Error(ErrorCode::kUnsupportedFormat, "DXF import is not supported; layers import from JSON");
  }
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kValidationFailed, std::string("malformed JSON: ") + e.what());
  }
  return layer_from_json(j);
}

}  // namespace cloudatelier
