#include "cloudatelier/ingest.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <optional>
#include <sstream>

#include "cloudatelier/error.hpp"
#include "cloudatelier/io.hpp"

namespace cloudatelier {

static_assert(std::endian::native == std::endian::little, "readers assume a little-endian host");

namespace {

constexpr std::size_t kColorSniffCount = 1000;
constexpr std::size_t kBatch = 8192;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

template <typename T>
T load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

std::uint8_t clamp_u8(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

std::uint16_t clamp_u16(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 65535.0) return 65535;
  return static_cast<std::uint16_t>(std::lround(v));
}

// Formats emit colors as wide values; the base decides the 8-bit shift once
// from a sniff pass over the first records, then scans for the summary.
class ScanningReader : public PointReader {
 public:
  std::size_t read(std::span<PointRecord> out) override {
    std::size_t n = 0;
    while (n < out.size()) {
      if (!next_raw(raw_)) break;
      out[n++] = finish(raw_);
    }
    return n;
  }

  void rewind() override { restart(); }

 protected:
  struct RawPoint {
    Vec3 position;
    double r = 128, g = 128, b = 128;
    double intensity = 0;
    std::uint8_t classification = 0;
  };

  virtual bool next_raw(RawPoint& p) = 0;
  virtual void restart() = 0;

  void initialize(SourceFormat format, bool has_color, bool has_intensity) {
    summary_.source_format = format;
    summary_.has_color = has_color;
    summary_.has_intensity = has_intensity;

    RawPoint p;
    if (has_color) {
      for (std::size_t i = 0; i < kColorSniffCount && next_raw(p); ++i) {
        if (p.r > 255.0 || p.g > 255.0 || p.b > 255.0) {
          color_shift_ = true;
          break;
        }
      }
      restart();
    }
    std::uint64_t count = 0;
    while (next_raw(p)) {
      summary_.aabb.expand(p.position);
      ++count;
    }
    summary_.point_count = count;
    restart();
  }

 private:
  PointRecord finish(const RawPoint& raw) const {
    PointRecord rec;
    rec.position = raw.position;
    if (summary_.has_color) {
      const double scale = color_shift_ ? 1.0 / 256.0 : 1.0;
      rec.r = clamp_u8(std::floor(raw.r * scale));
      rec.g = clamp_u8(std::floor(raw.g * scale));
      rec.b = clamp_u8(std::floor(raw.b * scale));
    }
    rec.intensity = clamp_u16(raw.intensity);
    rec.classification = raw.classification;
    return rec;
  }

  bool color_shift_ = false;
  RawPoint raw_;
};

// ---------------------------------------------------------------------------
// LAS 1.2 - 1.4, point formats 0-3, uncompressed.

class LasReader final : public ScanningReader {
 public:
  explicit LasReader(const std::filesystem::path& path) : file_(path) {
    const std::uint64_t file_size = file_.size();
    std::array<std::uint8_t, 375> h{};
    if (file_size < 227) {
      throw Error(ErrorCode::kCorruptHeader, "LAS header truncated (" + std::to_string(file_size) + " bytes)");
    }
    const std::size_t header_bytes = static_cast<std::size_t>(std::min<std::uint64_t>(file_size, h.size()));
    file_.read_exact(h.data(), header_bytes);
    if (std::memcmp(h.data(), "LASF", 4) != 0) {
      throw Error(ErrorCode::kCorruptHeader, "LAS signature is not \"LASF\"");
    }
    const std::uint8_t major = h[24];
    const std::uint8_t minor = h[25];
    if (major != 1 || minor > 4) {
      throw Error(ErrorCode::kUnsupportedFormat,
                  "LAS version " + std::to_string(major) + "." + std::to_string(minor) + " is not supported");
    }
    const auto header_size = load<std::uint16_t>(&h[94]);
    offset_to_points_ = load<std::uint32_t>(&h[96]);
    const auto vlr_count = load<std::uint32_t>(&h[100]);
    const std::uint8_t raw_format = h[104];
    record_length_ = load<std::uint16_t>(&h[105]);
    std::uint64_t count = load<std::uint32_t>(&h[107]);
    for (int i = 0; i < 3; ++i) {
      scale_[i] = load<double>(&h[131 + 8 * i]);
      offset_[i] = load<double>(&h[155 + 8 * i]);
    }
    if (minor >= 4 && header_bytes >= 255 && header_size >= 375) {
      const auto extended = load<std::uint64_t>(&h[247]);
      if (count == 0) count = extended;
    }

    if (raw_format & 0xC0) {
      throw Error(ErrorCode::kUnsupportedFormat,
                  "LAZ-compressed point data is not supported; decompress to uncompressed LAS first "
                  "(e.g. `laszip -i in.laz -o out.las`)");
    }
    format_ = raw_format & 0x3F;
    if (format_ > 3) {
      throw Error(ErrorCode::kUnsupportedFormat,
                  "LAS point format " + std::to_string(format_) + " is not supported (formats 0-3 only)");
    }
    static constexpr std::array<std::uint16_t, 4> kMinLength = {20, 28, 26, 34};
    if (record_length_ < kMinLength[format_]) {
      throw Error(ErrorCode::kCorruptHeader, "point record length " + std::to_string(record_length_) +
                                                 " is too short for format " + std::to_string(format_));
    }
    if (header_size < 227 || offset_to_points_ < header_size || offset_to_points_ > file_size) {
      throw Error(ErrorCode::kCorruptHeader, "inconsistent header size / point data offset");
    }
    if (count > (file_size - offset_to_points_) / record_length_) {
      throw Error(ErrorCode::kCorruptHeader, "header claims " + std::to_string(count) + " points of " +
                                                 std::to_string(record_length_) + " bytes but file holds " +
                                                 std::to_string(file_size - offset_to_points_) + " bytes of point data");
    }
    for (int i = 0; i < 3; ++i) {
      if (!std::isfinite(scale_[i]) || scale_[i] == 0.0 || !std::isfinite(offset_[i])) {
        throw Error(ErrorCode::kCorruptHeader, "invalid scale or offset");
      }
    }
    total_ = count;
    summary_.crs = read_wkt(header_size, vlr_count);
    restart();
    initialize(SourceFormat::kLas, format_ >= 2, true);
  }

 protected:
  bool next_raw(RawPoint& p) override {
    if (index_ >= total_) return false;
    if (buffer_pos_ >= buffer_count_) {
      const std::uint64_t n = std::min<std::uint64_t>(kBatch, total_ - index_);
      buffer_.resize(static_cast<std::size_t>(n) * record_length_);
      file_.read_exact(buffer_.data(), buffer_.size());
      buffer_count_ = static_cast<std::size_t>(n);
      buffer_pos_ = 0;
    }
    const std::uint8_t* rec = buffer_.data() + buffer_pos_ * record_length_;
    for (int i = 0; i < 3; ++i) {
      p.position[i] = static_cast<double>(load<std::int32_t>(rec + 4 * i)) * scale_[i] + offset_[i];
    }
    p.intensity = load<std::uint16_t>(rec + 12);
    p.classification = rec[15] & 0x1F;
    if (format_ >= 2) {
      const std::size_t color_at = format_ == 2 ? 20 : 28;
      p.r = load<std::uint16_t>(rec + color_at);
      p.g = load<std::uint16_t>(rec + color_at + 2);
      p.b = load<std::uint16_t>(rec + color_at + 4);
    }
    ++buffer_pos_;
    ++index_;
    return true;
  }

  void restart() override {
    file_.seek(offset_to_points_);
    index_ = 0;
    buffer_pos_ = 0;
    buffer_count_ = 0;
  }

 private:
  std::string read_wkt(std::uint16_t header_size, std::uint32_t vlr_count) {
    std::uint64_t at = header_size;
    for (std::uint32_t i = 0; i < vlr_count && at + 54 <= offset_to_points_; ++i) {
      std::array<std::uint8_t, 54> vh{};
      file_.seek(at);
      file_.read_exact(vh.data(), vh.size());
      const std::string user_id(reinterpret_cast<const char*>(&vh[2]), strnlen(reinterpret_cast<const char*>(&vh[2]), 16));
      const auto record_id = load<std::uint16_t>(&vh[18]);
      const auto length = load<std::uint16_t>(&vh[20]);
      if (user_id == "LASF_Projection" && record_id == 2112 && at + 54 + length <= offset_to_points_) {
        std::string wkt(length, '\0');
        file_.read_exact(reinterpret_cast<std::uint8_t*>(wkt.data()), length);
        wkt.resize(strnlen(wkt.c_str(), wkt.size()));
        return wkt;
      }
      at += 54 + length;
    }
    return {};
  }

  InputFile file_;
  std::uint32_t offset_to_points_ = 0;
  std::uint16_t record_length_ = 0;
  std::uint8_t format_ = 0;
  std::array<double, 3> scale_{};
  std::array<double, 3> offset_{};
  std::uint64_t total_ = 0;
  std::uint64_t index_ = 0;
  std::vector<std::uint8_t> buffer_;
  std::size_t buffer_pos_ = 0;
  std::size_t buffer_count_ = 0;
};

// ---------------------------------------------------------------------------
// PLY, ascii and binary_little_endian.

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<PlyType> parse_ply_type(const std::string& name) {
  if (name == "char" || name == "int8") return PlyType::kInt8;
  if (name == "uchar" || name == "uint8") return PlyType::kUint8;
  if (name == "short" || name == "int16") return PlyType::kInt16;
  if (name == "ushort" || name == "uint16") return PlyType::kUint16;
  if (name == "int" || name == "int32") return PlyType::kInt32;
  if (name == "uint" || name == "uint32") return PlyType::kUint32;
  if (name == "float" || name == "float32") return PlyType::kFloat32;
  if (name == "double" || name == "float64") return PlyType::kFloat64;
  return std::nullopt;
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUint8:
      return 1;
    case PlyType::kInt16:
    case PlyType::kUint16:
      return 2;
    case PlyType::kInt32:
    case PlyType::kUint32:
    case PlyType::kFloat32:
      return 4;
    case PlyType::kFloat64:
      return 8;
  }
  return 0;
}

double decode_ply(PlyType t, const std::uint8_t* p) {
  switch (t) {
    case PlyType::kInt8: return load<std::int8_t>(p);
    case PlyType::kUint8: return load<std::uint8_t>(p);
    case PlyType::kInt16: return load<std::int16_t>(p);
    case PlyType::kUint16: return load<std::uint16_t>(p);
    case PlyType::kInt32: return load<std::int32_t>(p);
    case PlyType::kUint32: return load<std::uint32_t>(p);
    case PlyType::kFloat32: return load<float>(p);
    case PlyType::kFloat64: return load<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
  std::string name;
  std::uint64_t count = 0;
  std::vector<PlyProperty> properties;
};

class PlyReader final : public ScanningReader {
 public:
  explicit PlyReader(const std::filesystem::path& path) : file_(path) {
    parse_header();
    restart();
    initialize(SourceFormat::kPly, has_color_, slot_intensity_ >= 0);
  }

 protected:
  bool next_raw(RawPoint& p) override {
    if (index_ >= vertex_count_) return false;
    values_.assign(vertex_.properties.size(), 0.0);
    if (binary_) {
      for (std::size_t i = 0; i < vertex_.properties.size(); ++i) {
        const auto& prop = vertex_.properties[i];
        if (prop.is_list) {
          skip_binary_list(prop);
          continue;
        }
        std::array<std::uint8_t, 8> buf{};
        read_or_truncated(buf.data(), ply_type_size(prop.type));
        values_[i] = decode_ply(prop.type, buf.data());
      }
    } else {
      std::string line;
      do {
        if (!file_.read_line(line)) {
          throw Error(ErrorCode::kMalformedRecord, "PLY vertex " + std::to_string(index_) + " missing");
        }
      } while (line.find_first_not_of(" \t\r") == std::string::npos);
      std::istringstream in(line);
      for (std::size_t i = 0; i < vertex_.properties.size(); ++i) {
        std::string token;
        if (!(in >> token)) {
          throw Error(ErrorCode::kMalformedRecord, "PLY vertex " + std::to_string(index_) + " has too few values");
        }
        if (vertex_.properties[i].is_list) {
          // list count followed by items
          double n = 0;
          parse_number(token, n);
          for (long k = 0; k < static_cast<long>(n); ++k) in >> token;
          continue;
        }
        parse_number(token, values_[i]);
      }
    }
    p.position = {values_[slot_x_], values_[slot_y_], values_[slot_z_]};
    if (!is_finite(p.position)) {
      throw Error(ErrorCode::kMalformedRecord, "PLY vertex " + std::to_string(index_) + " is not finite");
    }
    if (has_color_) {
      p.r = values_[slot_r_];
      p.g = values_[slot_g_];
      p.b = values_[slot_b_];
    }
    p.intensity = slot_intensity_ >= 0 ? values_[slot_intensity_] : 0.0;
    p.classification = slot_class_ >= 0 ? clamp_u8(values_[slot_class_]) : 0;
    ++index_;
    return true;
  }

  void restart() override {
    file_.seek(data_offset_);
    index_ = 0;
    skip_leading_elements();
  }

 private:
  void parse_number(const std::string& token, double& out) const {
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
      throw Error(ErrorCode::kMalformedRecord, "PLY vertex " + std::to_string(index_) + ": bad number '" + token + "'");
    }
  }

  void read_or_truncated(std::uint8_t* dst, std::size_t n) {
    if (file_.read_some(dst, n) != n) {
      throw Error(ErrorCode::kMalformedRecord, "PLY data truncated at vertex " + std::to_string(index_));
    }
  }

  void skip_binary_list(const PlyProperty& prop) {
    std::array<std::uint8_t, 8> buf{};
    read_or_truncated(buf.data(), ply_type_size(prop.count_type));
    const auto n = static_cast<std::uint64_t>(decode_ply(prop.count_type, buf.data()));
    for (std::uint64_t k = 0; k < n; ++k) read_or_truncated(buf.data(), ply_type_size(prop.type));
  }

  void skip_leading_elements() {
    for (const auto& el : leading_) {
      for (std::uint64_t i = 0; i < el.count; ++i) {
        if (!binary_) {
          std::string line;
          if (!file_.read_line(line)) throw Error(ErrorCode::kMalformedRecord, "PLY element '" + el.name + "' truncated");
          continue;
        }
        for (const auto& prop : el.properties) {
          if (prop.is_list) {
            skip_binary_list(prop);
          } else {
            std::array<std::uint8_t, 8> buf{};
            read_or_truncated(buf.data(), ply_type_size(prop.type));
          }
        }
      }
    }
  }

  void parse_header() {
    std::string line;
    const bool got = file_.read_line(line);
    if (got && !line.empty() && line.back() == '\r') line.pop_back();
    if (!got || line != "ply") {
      throw Error(ErrorCode::kCorruptHeader, "missing 'ply' magic line");
    }
    std::vector<PlyElement> elements;
    bool have_format = false;
    bool ended = false;
    while (file_.read_line(line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream in(line);
      std::string keyword;
      in >> keyword;
      if (keyword == "format") {
        std::string fmt, version;
        in >> fmt >> version;
        if (fmt == "ascii") binary_ = false;
        else if (fmt == "binary_little_endian") binary_ = true;
        else throw Error(ErrorCode::kUnsupportedFormat, "PLY format '" + fmt + "' is not supported");
        have_format = true;
      } else if (keyword == "element") {
        PlyElement el;
        in >> el.name >> el.count;
        if (!in) throw Error(ErrorCode::kCorruptHeader, "bad PLY element line: " + line);
        elements.push_back(el);
      } else if (keyword == "property") {
        if (elements.empty()) throw Error(ErrorCode::kCorruptHeader, "PLY property before any element");
        PlyProperty prop;
        std::string type;
        in >> type;
        if (type == "list") {
          std::string count_type, item_type;
          in >> count_type >> item_type >> prop.name;
          auto ct = parse_ply_type(count_type);
          auto it = parse_ply_type(item_type);
          if (!ct || !it) throw Error(ErrorCode::kCorruptHeader, "bad PLY list property: " + line);
          prop.is_list = true;
          prop.count_type = *ct;
          prop.type = *it;
        } else {
          auto t = parse_ply_type(type);
          if (!t) throw Error(ErrorCode::kCorruptHeader, "unknown PLY property type '" + type + "'");
          prop.type = *t;
          in >> prop.name;
        }
        elements.back().properties.push_back(prop);
      } else if (keyword == "end_header") {
        ended = true;
        break;
      }
      // comment / obj_info lines are ignored
    }
    if (!ended || !have_format) {
      throw Error(ErrorCode::kCorruptHeader, "PLY header incomplete");
    }
    data_offset_ = file_.tell();

    bool found = false;
    for (const auto& el : elements) {
      if (el.name == "vertex") {
        vertex_ = el;
        found = true;
        break;
      }
      leading_.push_back(el);
    }
    if (!found) throw Error(ErrorCode::kCorruptHeader, "PLY file has no vertex element");
    vertex_count_ = vertex_.count;

    auto slot = [&](std::initializer_list<const char*> names) {
      for (std::size_t i = 0; i < vertex_.properties.size(); ++i) {
        if (vertex_.properties[i].is_list) continue;
        for (const char* n : names) {
          if (vertex_.properties[i].name == n) return static_cast<int>(i);
        }
      }
      return -1;
    };
    slot_x_ = slot({"x"});
    slot_y_ = slot({"y"});
    slot_z_ = slot({"z"});
    if (slot_x_ < 0 || slot_y_ < 0 || slot_z_ < 0) {
      throw Error(ErrorCode::kCorruptHeader, "PLY vertex element lacks x, y, z");
    }
    slot_r_ = slot({"red", "r", "diffuse_red"});
    slot_g_ = slot({"green", "g", "diffuse_green"});
    slot_b_ = slot({"blue", "b", "diffuse_blue"});
    has_color_ = slot_r_ >= 0 && slot_g_ >= 0 && slot_b_ >= 0;
    slot_intensity_ = slot({"intensity", "scalar_intensity", "scalar_Intensity"});
    slot_class_ = slot({"classification", "scalar_classification", "scalar_Classification"});

    if (binary_) {
      bool fixed = true;
      std::uint64_t stride = 0;
      for (const auto& prop : vertex_.properties) {
        if (prop.is_list) fixed = false;
        else stride += ply_type_size(prop.type);
      }
      std::uint64_t leading_fixed = 0;
      for (const auto& el : leading_) {
        for (const auto& prop : el.properties) {
          if (prop.is_list) fixed = false;
          else leading_fixed += el.count * ply_type_size(prop.type);
        }
      }
      if (fixed && data_offset_ + leading_fixed + vertex_count_ * stride > file_.size()) {
        throw Error(ErrorCode::kCorruptHeader, "PLY header claims " + std::to_string(vertex_count_) +
                                                   " vertices but the file is too short");
      }
    }
  }

  InputFile file_;
  bool binary_ = false;
  std::uint64_t data_offset_ = 0;
  std::vector<PlyElement> leading_;
  PlyElement vertex_;
  std::uint64_t vertex_count_ = 0;
  std::uint64_t index_ = 0;
  std::vector<double> values_;
  int slot_x_ = -1, slot_y_ = -1, slot_z_ = -1;
  int slot_r_ = -1, slot_g_ = -1, slot_b_ = -1;
  int slot_intensity_ = -1, slot_class_ = -1;
  bool has_color_ = false;
};

// ---------------------------------------------------------------------------
// XYZ text: x y z [i] [r g b], '#' comments.

class XyzReader final : public ScanningReader {
 public:
  explicit XyzReader(const std::filesystem::path& path) : file_(path) {
    if (file_.size() == 0) {
      throw Error(ErrorCode::kCorruptHeader, "empty XYZ file");
    }
    // Column layout is discovered during the scan; probe it first.
    RawPoint p;
    while (next_raw(p)) {
    }
    restart();
    initialize(SourceFormat::kXyz, saw_color_, saw_intensity_);
  }

 protected:
  bool next_raw(RawPoint& p) override {
    std::string line;
    while (file_.read_line(line)) {
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::array<double, 8> v{};
      std::size_t n = 0;
      const char* c = line.data();
      const char* end = c + line.size();
      while (true) {
        while (c < end && (*c == ' ' || *c == '\t' || *c == '\r' || *c == ',')) ++c;
        if (c >= end) break;
        const char* tok = c;
        while (c < end && !(*c == ' ' || *c == '\t' || *c == '\r' || *c == ',')) ++c;
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(tok, c, value);
        if (ec != std::errc() || ptr != c) {
          throw Error(ErrorCode::kMalformedRecord, "XYZ line " + std::to_string(line_no_) + ": non-numeric field '" +
                                                       std::string(tok, c) + "'");
        }
        if (n == v.size()) {
          throw Error(ErrorCode::kMalformedRecord, "XYZ line " + std::to_string(line_no_) + ": more than 7 fields");
        }
        v[n++] = value;
      }
      if (n == 0) continue;
      if (n < 3) {
        throw Error(ErrorCode::kMalformedRecord,
                    "XYZ line " + std::to_string(line_no_) + ": expected at least 3 numeric fields, got " + std::to_string(n));
      }
      if (n == 5 || n > 7) {
        throw Error(ErrorCode::kMalformedRecord,
                    "XYZ line " + std::to_string(line_no_) + ": expected 3, 4, 6 or 7 fields, got " + std::to_string(n));
      }
      p.position = {v[0], v[1], v[2]};
      if (!is_finite(p.position)) {
        throw Error(ErrorCode::kMalformedRecord, "XYZ line " + std::to_string(line_no_) + ": non-finite coordinate");
      }
      p.intensity = 0;
      p.r = p.g = p.b = 128;
      if (n == 4 || n == 7) {
        p.intensity = v[3];
        saw_intensity_ = true;
      }
      if (n >= 6) {
        const std::size_t c0 = n == 7 ? 4 : 3;
        p.r = v[c0];
        p.g = v[c0 + 1];
        p.b = v[c0 + 2];
        saw_color_ = true;
      }
      p.classification = 0;
      return true;
    }
    return false;
  }

  void restart() override {
    file_.seek(0);
    line_no_ = 0;
  }

 private:
  InputFile file_;
  std::uint64_t line_no_ = 0;
  bool saw_color_ = false;
  bool saw_intensity_ = false;
};

}  // namespace

std::string_view source_format_name(SourceFormat format) {
  switch (format) {
    case SourceFormat::kLas: return "LAS";
    case SourceFormat::kPly: return "PLY";
    case SourceFormat::kXyz: return "XYZ";
  }
  return "?";
}

std::unique_ptr<PointReader> open_source(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string() + ": no such file");
  }
  const std::string ext = lower(path.extension().string());
  if (ext == ".laz") {
    throw Error(ErrorCode::kUnsupportedFormat,
                "LAZ-compressed input is not supported; decompress to uncompressed LAS first "
                "(e.g. `laszip -i in.laz -o out.las`)");
  }
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot stat " + path.string());
  if (size == 0) throw Error(ErrorCode::kCorruptHeader, path.string() + " is empty");

  std::array<char, 4> magic{};
  {
    InputFile probe(path);
    probe.read_some(reinterpret_cast<std::uint8_t*>(magic.data()), std::min<std::uint64_t>(size, 4));
  }
  const bool las_magic = std::memcmp(magic.data(), "LASF", 4) == 0;
  const bool ply_magic = std::memcmp(magic.data(), "ply", 3) == 0 && (size == 3 || magic[3] == '\n' || magic[3] == '\r');

  if (las_magic) return std::make_unique<LasReader>(path);
  if (ply_magic) return std::make_unique<PlyReader>(path);
  if (ext == ".las") throw Error(ErrorCode::kCorruptHeader, "LAS signature is not \"LASF\"");
  if (ext == ".ply") throw Error(ErrorCode::kCorruptHeader, "missing 'ply' magic line");
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts" || ext == ".asc" || ext == ".csv") {
    return std::make_unique<XyzReader>(path);
  }
  throw Error(ErrorCode::kUnsupportedFormat, "unrecognized point cloud format: " + path.string());
}

VectorPointReader::VectorPointReader(std::vector<PointRecord> points, SourceFormat format)
    : points_(std::move(points)) {
  summary_.source_format = format;
  summary_.point_count = points_.size();
  for (const auto& p : points_) summary_.aabb.expand(p.position);
}

std::size_t VectorPointReader::read(std::span<PointRecord> out) {
  const std::size_t n = std::min(out.size(), points_.size() - cursor_);
  std::copy_n(points_.begin() + static_cast<std::ptrdiff_t>(cursor_), n, out.begin());
  cursor_ += n;
  return n;
}

std::vector<PointRecord> read_all(PointReader& reader) {
  std::vector<PointRecord> all;
  std::vector<PointRecord> batch(kBatch);
  while (std::size_t n = reader.read(batch)) {
    all.insert(all.end(), batch.begin(), batch.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return all;
}

}  // namespace cloudatelier
