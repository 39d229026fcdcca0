#include "cloudatelier/octree.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "cloudatelier/error.hpp"
#include "cloudatelier/io.hpp"
#include "cloudatelier/random.hpp"

namespace cloudatelier {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kShardRecordSize = 30;
constexpr std::size_t kReadBatch = 1u << 14;
constexpr std::size_t kTileFlushBytes = 1u << 20;
constexpr std::uint32_t kMaxSupportedDepth = 30;
// Expected points per pre-partition chunk before the chunk level deepens.
constexpr double kTargetChunkPoints = 4'000'000.0;
constexpr std::uint32_t kMaxChunkLevel = 6;  // 8^6 = 64^3 chunks

template <typename T>
void store(std::uint8_t*& out, T v) {
  std::memcpy(out, &v, sizeof(T));
  out += sizeof(T);
}

template <typename T>
T fetch(const std::uint8_t*& in) {
  T v;
  std::memcpy(&v, in, sizeof(T));
  in += sizeof(T);
  return v;
}

void encode_shard(const PointRecord& p, std::uint8_t* out) {
  store(out, p.position.x);
  store(out, p.position.y);
  store(out, p.position.z);
  store(out, p.r);
  store(out, p.g);
  store(out, p.b);
  store(out, p.intensity);
  store(out, p.classification);
}

PointRecord decode_shard(const std::uint8_t* in) {
  PointRecord p;
  p.position.x = fetch<double>(in);
  p.position.y = fetch<double>(in);
  p.position.z = fetch<double>(in);
  p.r = fetch<std::uint8_t>(in);
  p.g = fetch<std::uint8_t>(in);
  p.b = fetch<std::uint8_t>(in);
  p.intensity = fetch<std::uint16_t>(in);
  p.classification = fetch<std::uint8_t>(in);
  return p;
}

struct BuildContext {
  const BuildConfig& cfg;
  Aabb root;
  double root_spacing = 0.0;
  std::uint64_t grid_dims = 1;
  fs::path out_dir;
  fs::path scratch_dir;
};

// One node's acceptance state and its tile bytes.
class NodeBuilder {
 public:
  NodeBuilder(const BuildContext& ctx, NodeCode code, const Aabb& box)
      : ctx_(ctx), code_(std::move(code)), box_(box),
        spacing_(ctx.root_spacing / std::ldexp(1.0, static_cast<int>(code_.level()))),
        overflow_(code_.level() >= ctx.cfg.max_depth) {}

  const Aabb& box() const { return box_; }

  bool offer(const PointRecord& p) {
    if (!overflow_) {
      if (count_ >= ctx_.cfg.node_capacity) return false;
      if (!occupied_.insert(cell_of(p.position)).second) return false;
      if (count_ + 1 == ctx_.cfg.node_capacity) {
        // full nodes never test the grid again
        std::unordered_set<std::uint64_t>().swap(occupied_);
      }
    }
    const std::size_t at = bytes_.size();
    bytes_.resize(at + kTileRecordSize);
    encode_tile_record(p, box_.min, bytes_.data() + at);
    ++count_;
    if (bytes_.size() >= kTileFlushBytes) flush();
    return true;
  }

  std::optional<NodeEntry> finish() {
    flush();
    if (count_ == 0) return std::nullopt;
    NodeEntry entry;
    entry.code = code_;
    entry.aabb = box_;
    entry.spacing = spacing_;
    entry.point_count = count_;
    entry.overflow = overflow_;
    return entry;
  }

 private:
  std::uint64_t cell_of(const Vec3& p) const {
    std::uint64_t idx = 0;
    for (int i = 0; i < 3; ++i) {
      const double f = std::floor((p[i] - box_.min[i]) / spacing_);
      std::uint64_t c = f <= 0.0 ? 0 : static_cast<std::uint64_t>(f);
      if (c >= ctx_.grid_dims) c = ctx_.grid_dims - 1;
      idx = idx * ctx_.grid_dims + c;
    }
    return idx;
  }

  void flush() {
    if (bytes_.empty()) return;
    OutputFile out(ctx_.out_dir / node_file(code_), started_ ? OutputFile::Mode::kAppend : OutputFile::Mode::kTruncate);
    out.write(bytes_);
    out.close();
    started_ = true;
    bytes_.clear();
    if (bytes_.capacity() > kTileFlushBytes * 2) bytes_.shrink_to_fit();
  }

  const BuildContext& ctx_;
  NodeCode code_;
  Aabb box_;
  double spacing_;
  bool overflow_;
  std::uint32_t count_ = 0;
  std::unordered_set<std::uint64_t> occupied_;
  std::vector<std::uint8_t> bytes_;
  bool started_ = false;
};

// Rejected points waiting for their child (or chunk) pass, spilled to
// append-only shard files once the buffered count passes the threshold.
class SpillSet {
 public:
  SpillSet(const BuildContext& ctx, std::vector<NodeCode> targets)
      : ctx_(ctx), targets_(std::move(targets)), buffers_(targets_.size()), counts_(targets_.size(), 0),
        started_(targets_.size(), false) {}

  void add(std::size_t slot, const PointRecord& p) {
    auto& buf = buffers_[slot];
    const std::size_t at = buf.size();
    buf.resize(at + kShardRecordSize);
    encode_shard(p, buf.data() + at);
    ++counts_[slot];
    if (++buffered_ >= ctx_.cfg.flush_threshold) flush();
  }

  void flush() {
    for (std::size_t i = 0; i < buffers_.size(); ++i) {
      if (buffers_[i].empty()) continue;
      OutputFile out(path(i), started_[i] ? OutputFile::Mode::kAppend : OutputFile::Mode::kTruncate);
      out.write(buffers_[i]);
      out.close();
      started_[i] = true;
      std::vector<std::uint8_t>().swap(buffers_[i]);
    }
    buffered_ = 0;
  }

  std::size_t size() const { return targets_.size(); }
  std::uint64_t count(std::size_t slot) const { return counts_[slot]; }
  const NodeCode& target(std::size_t slot) const { return targets_[slot]; }
  fs::path path(std::size_t slot) const { return ctx_.scratch_dir / (targets_[slot].str() + ".shard"); }

 private:
  const BuildContext& ctx_;
  std::vector<NodeCode> targets_;
  std::vector<std::vector<std::uint8_t>> buffers_;
  std::vector<std::uint64_t> counts_;
  std::vector<bool> started_;
  std::size_t buffered_ = 0;
};

// Streams a shard file in batches of decoded records.
template <typename Fn>
void for_each_shard_record(const fs::path& path, Fn&& fn) {
  InputFile in(path);
  if (in.size() % kShardRecordSize != 0) {
    throw Error(ErrorCode::kIo, "scratch shard " + path.string() + " has a partial record");
  }
  std::vector<std::uint8_t> buf(kReadBatch * kShardRecordSize);
  while (true) {
    const std::size_t got = in.read_some(buf.data(), buf.size());
    if (got == 0) break;
    for (std::size_t off = 0; off + kShardRecordSize <= got; off += kShardRecordSize) {
      fn(decode_shard(buf.data() + off));
    }
  }
}

void build_subtree(const BuildContext& ctx, const NodeCode& code, const Aabb& box, const fs::path& shard,
                   std::vector<NodeEntry>& entries) {
  NodeBuilder node(ctx, code, box);
  std::vector<NodeCode> kids;
  for (int o = 0; o < 8; ++o) kids.push_back(code.child(o));
  SpillSet children(ctx, kids);

  for_each_shard_record(shard, [&](const PointRecord& p) {
    if (!node.offer(p)) children.add(static_cast<std::size_t>(octant_of(p.position, box)), p);
  });
  children.flush();
  fs::remove(shard);
  if (auto entry = node.finish()) entries.push_back(*entry);

  for (int o = 0; o < 8; ++o) {
    if (children.count(static_cast<std::size_t>(o)) == 0) continue;
    build_subtree(ctx, kids[static_cast<std::size_t>(o)], child_bounds(box, o), children.path(static_cast<std::size_t>(o)),
                  entries);
  }
}

std::uint64_t pow8(std::uint32_t k) { return std::uint64_t{1} << (3 * k); }

json aabb_to_json(const Aabb& box) {
  return json{{"min", {box.min.x, box.min.y, box.min.z}}, {"max", {box.max.x, box.max.y, box.max.z}}};
}

Aabb aabb_from_json(const json& j) {
  Aabb box;
  for (int i = 0; i < 3; ++i) {
    box.min[i] = j.at("min").at(static_cast<std::size_t>(i)).get<double>();
    box.max[i] = j.at("max").at(static_cast<std::size_t>(i)).get<double>();
  }
  return box;
}

}  // namespace

void validate(const BuildConfig& cfg) {
  if (!(cfg.root_spacing_divisor > 0.0) || !std::isfinite(cfg.root_spacing_divisor)) {
    throw Error(ErrorCode::kUsage, "root spacing divisor must be > 0");
  }
  if (cfg.root_spacing && !(*cfg.root_spacing > 0.0)) {
    throw Error(ErrorCode::kUsage, "root spacing must be > 0");
  }
  if (cfg.node_capacity < 1000) {
    throw Error(ErrorCode::kUsage, "node capacity must be >= 1000");
  }
  if (cfg.max_depth > kMaxSupportedDepth) {
    throw Error(ErrorCode::kUsage, "max depth must be <= " + std::to_string(kMaxSupportedDepth));
  }
  if (cfg.flush_threshold == 0) {
    throw Error(ErrorCode::kUsage, "flush threshold must be >= 1");
  }
}

const NodeEntry* IndexManifest::find(const NodeCode& code) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), code,
                             [](const NodeEntry& e, const NodeCode& c) { return breadth_first_less(e.code, c); });
  if (it != nodes.end() && it->code == code) return &*it;
  return nullptr;
}

std::vector<AttributeDescriptor> tile_attributes() {
  return {{"position", "float32[3]", 12}, {"rgb", "uint8[3]", 3}, {"intensity", "uint16", 2}, {"classification", "uint8", 1}};
}

void encode_tile_record(const PointRecord& p, const Vec3& origin, std::uint8_t* out) {
  store(out, static_cast<float>(p.position.x - origin.x));
  store(out, static_cast<float>(p.position.y - origin.y));
  store(out, static_cast<float>(p.position.z - origin.z));
  store(out, p.r);
  store(out, p.g);
  store(out, p.b);
  store(out, p.intensity);
  store(out, p.classification);
}

PointRecord decode_tile_record(const std::uint8_t* in, const Vec3& origin) {
  PointRecord p;
  p.position.x = origin.x + static_cast<double>(fetch<float>(in));
  p.position.y = origin.y + static_cast<double>(fetch<float>(in));
  p.position.z = origin.z + static_cast<double>(fetch<float>(in));
  p.r = fetch<std::uint8_t>(in);
  p.g = fetch<std::uint8_t>(in);
  p.b = fetch<std::uint8_t>(in);
  p.intensity = fetch<std::uint16_t>(in);
  p.classification = fetch<std::uint8_t>(in);
  return p;
}

std::string manifest_to_json(const IndexManifest& m) {
  json nodes = json::array();
  for (const auto& n : m.nodes) {
    json entry{{"code", n.code.str()}, {"count", n.point_count}, {"aabb", aabb_to_json(n.aabb)}, {"spacing", n.spacing}};
    if (n.overflow) entry["overflow"] = true;
    nodes.push_back(std::move(entry));
  }
  json attributes = json::array();
  for (const auto& a : m.attributes) attributes.push_back({{"name", a.name}, {"type", a.type}, {"size", a.size}});
  json j{{"version", m.version},
         {"aabb", aabb_to_json(m.aabb)},
         {"rootSpacing", m.root_spacing},
         {"totalPoints", m.total_points},
         {"attributes", attributes},
         {"entwineMode", m.entwine_mode},
         {"nodes", nodes}};
  return j.dump(1) + "\n";
}

IndexManifest manifest_from_json(const std::string& text) {
  IndexManifest m;
  try {
    const json j = json::parse(text);
    m.version = j.at("version").get<std::string>();
    if (m.version != "1") throw Error(ErrorCode::kSchemaVersionUnsupported, "manifest version " + m.version);
    m.aabb = aabb_from_json(j.at("aabb"));
    m.root_spacing = j.at("rootSpacing").get<double>();
    m.total_points = j.at("totalPoints").get<std::uint64_t>();
    m.entwine_mode = j.value("entwineMode", false);
    for (const auto& a : j.at("attributes")) {
      m.attributes.push_back({a.at("name").get<std::string>(), a.at("type").get<std::string>(), a.at("size").get<std::uint32_t>()});
    }
    for (const auto& n : j.at("nodes")) {
      NodeEntry e;
      auto code = NodeCode::parse(n.at("code").get<std::string>());
      if (!code) throw Error(ErrorCode::kTileCorrupt, "bad node code " + n.at("code").dump());
      e.code = *code;
      e.point_count = n.at("count").get<std::uint32_t>();
      e.aabb = aabb_from_json(n.at("aabb"));
      e.spacing = n.contains("spacing") ? n.at("spacing").get<double>()
                                        : m.root_spacing / std::ldexp(1.0, static_cast<int>(e.code.level()));
      e.overflow = n.value("overflow", false);
      m.nodes.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kTileCorrupt, std::string("invalid manifest: ") + e.what());
  }
  std::sort(m.nodes.begin(), m.nodes.end(), [](const NodeEntry& a, const NodeEntry& b) { return breadth_first_less(a.code, b.code); });
  return m;
}

fs::path node_file(const NodeCode& code) { return fs::path("nodes") / (code.str() + ".bin"); }

std::uint32_t chunk_level_for(std::uint64_t point_count, const BuildConfig& cfg) {
  std::uint32_t k = 1;
  while (k < kMaxChunkLevel && static_cast<double>(point_count) / static_cast<double>(pow8(k)) > kTargetChunkPoints) ++k;
  return std::min(k, cfg.max_depth);
}

IndexManifest build_index(PointReader& source, const BuildConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  const SourceSummary& summary = source.summary();
  if (summary.point_count == 0) {
    throw Error(ErrorCode::kCorruptHeader, "source contains no points");
  }

  IndexManifest manifest;
  manifest.aabb = cubify(summary.aabb);
  const double edge = manifest.aabb.max.x - manifest.aabb.min.x;
  manifest.root_spacing = cfg.root_spacing ? *cfg.root_spacing : edge * std::sqrt(3.0) / cfg.root_spacing_divisor;
  manifest.attributes = tile_attributes();
  manifest.entwine_mode = summary.point_count > cfg.chunk_threshold;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  fs::remove_all(out_dir / "nodes", ec);
  fs::create_directories(out_dir / "nodes", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + (out_dir / "nodes").string() + ": " + ec.message());
  const fs::path scratch = out_dir / ".scratch";
  fs::remove_all(scratch, ec);
  fs::create_directories(scratch, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + scratch.string() + ": " + ec.message());

  BuildContext ctx{cfg, manifest.aabb, manifest.root_spacing, 1, out_dir, scratch};
  const double dims = std::ceil(edge / manifest.root_spacing);
  ctx.grid_dims = dims < 1.0 ? 1 : (dims > 2'000'000.0 ? 2'000'000 : static_cast<std::uint64_t>(dims));

  // Top pass: levels [0, k) are filled straight from the source; what they
  // reject is partitioned into level-k chunk shards. k is 1 for ordinary
  // builds and the chunk level in massive-dataset mode; both yield the same tiles.
  const std::uint32_t k = manifest.entwine_mode ? chunk_level_for(summary.point_count, cfg) : std::min<std::uint32_t>(1, cfg.max_depth);
  std::vector<std::unique_ptr<NodeBuilder>> top;  // index: level offset + morton index
  std::vector<std::uint64_t> level_offset(k + 1, 0);
  for (std::uint32_t l = 1; l <= k; ++l) level_offset[l] = level_offset[l - 1] + pow8(l - 1);
  top.resize(static_cast<std::size_t>(level_offset[k]));

  std::vector<NodeCode> chunk_codes;
  chunk_codes.reserve(static_cast<std::size_t>(pow8(k)));
  for (std::uint64_t m = 0; m < pow8(k); ++m) {
    std::string path = "r";
    for (std::uint32_t l = 0; l < k; ++l) path += static_cast<char>('0' + ((m >> (3 * (k - 1 - l))) & 7));
    chunk_codes.push_back(*NodeCode::parse(path));
  }
  SpillSet chunks(ctx, chunk_codes);

  std::uint64_t seen = 0;
  std::vector<PointRecord> batch(kReadBatch);
  while (const std::size_t n = source.read(batch)) {
    for (std::size_t i = 0; i < n; ++i) {
      const PointRecord& p = batch[i];
      Aabb box = manifest.aabb;
      std::uint64_t morton = 0;
      std::string path = "r";
      bool placed = false;
      for (std::uint32_t l = 0; l < k; ++l) {
        auto& builder = top[static_cast<std::size_t>(level_offset[l] + morton)];
        if (!builder) builder = std::make_unique<NodeBuilder>(ctx, *NodeCode::parse(path), box);
        if (builder->offer(p)) {
          placed = true;
          break;
        }
        const int o = octant_of(p.position, box);
        box = child_bounds(box, o);
        morton = morton * 8 + static_cast<std::uint64_t>(o);
        path += static_cast<char>('0' + o);
      }
      if (!placed) chunks.add(static_cast<std::size_t>(morton), p);
    }
    seen += n;
  }
  chunks.flush();
  if (seen != summary.point_count) {
    throw Error(ErrorCode::kIo, "source yielded " + std::to_string(seen) + " points, summary claims " +
                                    std::to_string(summary.point_count));
  }
  manifest.total_points = seen;

  std::vector<NodeEntry> entries;
  for (auto& builder : top) {
    if (!builder) continue;
    if (auto e = builder->finish()) entries.push_back(*e);
    builder.reset();
  }

  std::vector<std::size_t> tasks;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (chunks.count(i) > 0) tasks.push_back(i);
  }
  std::mutex entries_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    try {
      while (true) {
        const std::size_t t = next.fetch_add(1);
        if (t >= tasks.size()) break;
        const std::size_t slot = tasks[t];
        std::vector<NodeEntry> local;
        const NodeCode& code = chunks.target(slot);
        build_subtree(ctx, code, code.bounds(manifest.aabb), chunks.path(slot), local);
        std::lock_guard lock(entries_mutex);
        entries.insert(entries.end(), local.begin(), local.end());
      }
    } catch (...) {
      std::lock_guard lock(entries_mutex);
      if (!failure) failure = std::current_exception();
      next = tasks.size();
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  fs::remove_all(scratch, ec);

  std::sort(entries.begin(), entries.end(), [](const NodeEntry& a, const NodeEntry& b) { return breadth_first_less(a.code, b.code); });
  manifest.nodes = std::move(entries);

  std::uint64_t stored = 0;
  for (const auto& e : manifest.nodes) stored += e.point_count;
  if (stored != manifest.total_points) {
    throw Error(ErrorCode::kIo, "stored " + std::to_string(stored) + " of " + std::to_string(manifest.total_points) + " points");
  }
  write_file_atomic(out_dir / "manifest.json", manifest_to_json(manifest));
  return manifest;
}

std::vector<PointRecord> decimate(PointReader& source, std::uint64_t target_count, std::uint64_t seed) {
  if (target_count == 0) throw Error(ErrorCode::kUsage, "decimation target must be >= 1");
  Rng rng(seed);
  std::vector<std::pair<std::uint64_t, PointRecord>> reservoir;
  std::uint64_t index = 0;
  std::vector<PointRecord> batch(kReadBatch);
  while (const std::size_t n = source.read(batch)) {
    for (std::size_t i = 0; i < n; ++i, ++index) {
      if (index < target_count) {
        reservoir.emplace_back(index, batch[i]);
        continue;
      }
      const std::uint64_t j = rng.below(index + 1);
      if (j < target_count) reservoir[static_cast<std::size_t>(j)] = {index, batch[i]};
    }
  }
  std::sort(reservoir.begin(), reservoir.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<PointRecord> out;
  out.reserve(reservoir.size());
  for (const auto& [_, p] : reservoir) out.push_back(p);
  return out;
}

PointIndex PointIndex::open(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::error_code ec;
  if (!fs::is_regular_file(manifest_path, ec)) {
    throw Error(ErrorCode::kIo, "no manifest.json in " + dir.string());
  }
  return PointIndex(dir, manifest_from_json(read_file_text(manifest_path)));
}

std::vector<PointRecord> PointIndex::read_node(const NodeCode& code) const {
  return cloudatelier::read_node(manifest_, dir_, code);
}

std::vector<PointRecord> read_node(const IndexManifest& manifest, const fs::path& dir, const NodeCode& code) {
  const NodeEntry* entry = manifest.find(code);
  if (entry == nullptr) throw Error(ErrorCode::kUnknownNode, "node " + code.str() + " is not in the index");
  const fs::path path = dir / node_file(code);
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  const std::uint64_t expected = std::uint64_t{entry->point_count} * kTileRecordSize;
  if (ec || size != expected) {
    throw Error(ErrorCode::kTileCorrupt, "tile " + code.str() + " holds " + (ec ? std::string("no") : std::to_string(size)) +
                                             " bytes, expected " + std::to_string(expected));
  }
  const auto bytes = read_file_bytes(path);
  std::vector<PointRecord> points;
  points.reserve(entry->point_count);
  for (std::size_t off = 0; off < bytes.size(); off += kTileRecordSize) {
    points.push_back(decode_tile_record(bytes.data() + off, entry->aabb.min));
  }
  return points;
}

}  // namespace cloudatelier
