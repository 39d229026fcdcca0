// Acceptance suite: one [PASS]/[FAIL] line per primary criterion.
// Exit status is non-zero when any criterion fails.
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "cloudatelier/collab_store.hpp"
#include "cloudatelier/convert.hpp"
#include "cloudatelier/error.hpp"
#include "cloudatelier/hash.hpp"
#include "cloudatelier/interchange.hpp"
#include "cloudatelier/io.hpp"
#include "cloudatelier/log.hpp"
#include "cloudatelier/measure.hpp"
#include "cloudatelier/octree.hpp"
#include "cloudatelier/planes.hpp"
#include "cloudatelier/protocol.hpp"
#include "cloudatelier/server.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "samples.hpp"
#include "sim.hpp"

using namespace cloudatelier;
using fixtures::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kMaxConvertSeconds = 300.0;       // 10^7 points
constexpr double kMaxRssRatio = 1.5;               // peak RSS 10^7 / 10^6
constexpr double kAngleTolDeg = 1e-9;
constexpr double kAreaTol = 1e-12;
constexpr std::size_t kCorridorPoints = 10'000;
constexpr std::size_t kInterchangeDocs = 1000;
constexpr double kPlaneAxisTolDeg = 2.0;
constexpr double kMinInlierShare = 0.95;
constexpr int kPlaneSeeds = 20;
constexpr int kMinCleanNoiseSeeds = 19;
constexpr int kCollabSeeds = 100;
constexpr std::size_t kCollabClients = 4;
constexpr std::size_t kCollabOps = 1000;
constexpr int kCutPoints = 50;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void fail(const std::string& why) {
    if (out_.pass) out_.detail = why;
    out_.pass = false;
  }
  void expect(bool ok, const std::string& why) {
    if (!ok) fail(why);
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail += (out_.detail.empty() ? "" : "; ") + s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

bool g_all = true;

void report(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g_all = g_all && o.pass;
  char t[32];
  std::snprintf(t, sizeof(t), "%.1fs", secs);
  std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail << " (" << t << ")" << std::endl;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

fixtures::ProcessResult cli(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) {
  args.insert(args.begin(), fixtures::cli_path().string());
  return fixtures::run_process(args, env);
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

// ---------------------------------------------------------------------------
// Octree fixtures

using Keys = std::vector<oracles::GridKey>;

// Writes the fixture as LAS and returns its sorted multiset keys.
Keys write_fixture(const std::string& kind, std::size_t n, const fs::path& path) {
  Keys keys;
  keys.reserve(n);
  if (kind == "uniform") {
    fixtures::LasWriter w(path, 2, {0.001, 0.001, 0.001}, {0, 0, 0});
    Rng rng(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = fixtures::uniform_cube_point(rng, 100.0);
      w.add(p);
      keys.push_back(oracles::grid_key(p));
    }
    w.close();
  } else {
    const auto pts = kind == "gaussian" ? fixtures::clustered_gaussian(n, n) : fixtures::duplicate_pairs(n);
    fixtures::write_las(path, pts);
    for (const auto& p : pts) keys.push_back(oracles::grid_key(p));
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

// Full traversal of every node; returns the first problem or "".
std::string compare_traversal(const fs::path& dir, const Keys& expected) {
  const auto index = PointIndex::open(dir);
  const auto& m = index.manifest();
  const double tol = oracles::f32_tolerance(m.aabb.max.x - m.aabb.min.x);
  Keys got;
  got.reserve(expected.size());
  for (const auto& node : m.nodes) {
    for (const auto& p : index.read_node(node.code)) {
      if (oracles::grid_residual(p) > tol) return "decoded point off its source position in " + node.code.str();
      got.push_back(oracles::grid_key(p));
    }
  }
  std::sort(got.begin(), got.end());
  if (got.size() != expected.size()) {
    return "traversal yields " + std::to_string(got.size()) + " points, expected " + std::to_string(expected.size());
  }
  if (got != expected) return "traversal multiset differs from input";
  return "";
}

struct ConvertRun {
  fixtures::ProcessResult proc;
  fs::path out;
};

ConvertRun convert_cli(const fs::path& input, const fs::path& out, const std::string& threads = "1") {
  return {cli({"convert", input.string(), "-o", out.string(), "--threads", threads, "-q"}), out};
}

struct OctreeFacts {
  long rss_1e6_kb = 0;
  long rss_1e7_kb = 0;
  bool determinism_1e7 = false;
  std::string determinism_detail;
};

Outcome octree_conservation(const fs::path& work, OctreeFacts& facts) {
  Check c;
  const std::vector<std::size_t> sizes{1, 1'000, 100'000, 10'000'000};
  double big_seconds = 0.0;
  int runs = 0;
  for (const std::size_t n : sizes) {
    for (const std::string kind : {"uniform", "gaussian", "duplicates"}) {
      const std::string tag = kind + "/" + std::to_string(n);
      const fs::path las = work / (kind + ".las");
      Keys expected = write_fixture(kind, n, las);
      const auto run = convert_cli(las, work / "out");
      if (run.proc.exit_code != 0) {
        c.fail(tag + ": convert exit " + std::to_string(run.proc.exit_code) + " " + first_line(run.proc.err));
        continue;
      }
      ++runs;
      if (n == 10'000'000) {
        big_seconds = std::max(big_seconds, run.proc.seconds);
        c.expect(run.proc.seconds < kMaxConvertSeconds, tag + ": took " + fmt(run.proc.seconds) + " s");
      }
      const std::string structure = oracles::check_index(run.out, n);
      c.expect(structure.empty(), tag + ": " + first_line(structure));
      const std::string traversal = compare_traversal(run.out, expected);
      c.expect(traversal.empty(), tag + ": " + traversal);

      if (kind == "uniform" && n == 10'000'000) {
        facts.rss_1e7_kb = run.proc.max_rss_kb;
        const auto first = fixtures::hash_tree(run.out);
        const auto threaded = convert_cli(las, work / "out4", "4");
        facts.determinism_1e7 = threaded.proc.exit_code == 0 && fixtures::hash_tree(threaded.out) == first;
        facts.determinism_detail = std::to_string(first.size()) + " files at 10^7 identical with --threads 4";
        fs::remove_all(threaded.out);
      }
      fs::remove_all(run.out);
      fs::remove(las);
    }
  }
  // 10^6 reference for the memory bound
  {
    const fs::path las = work / "uniform_1e6.las";
    write_fixture("uniform", 1'000'000, las);
    const auto run = convert_cli(las, work / "out1e6");
    c.expect(run.proc.exit_code == 0, "10^6 reference convert failed");
    facts.rss_1e6_kb = run.proc.max_rss_kb;
    fs::remove_all(run.out);
    fs::remove(las);
  }
  c.note(std::to_string(runs) + "/12 fixtures conserved with exact multiset; 10^7 convert " + fmt(big_seconds) +
         " s (limit " + fmt(kMaxConvertSeconds) + " s)");
  return c.result();
}

Outcome out_of_core(const OctreeFacts& f) {
  Check c;
  if (f.rss_1e6_kb <= 0 || f.rss_1e7_kb <= 0) {
    c.fail("missing RSS measurement");
    return c.result();
  }
  const double ratio = static_cast<double>(f.rss_1e7_kb) / static_cast<double>(f.rss_1e6_kb);
  c.expect(ratio <= kMaxRssRatio, "ratio " + fmt(ratio) + " > " + fmt(kMaxRssRatio));
  c.note("peak RSS 10^6 " + std::to_string(f.rss_1e6_kb / 1024) + " MB, 10^7 " + std::to_string(f.rss_1e7_kb / 1024) +
         " MB, ratio " + fmt(ratio) + " (limit " + fmt(kMaxRssRatio) + ")");
  return c.result();
}

Outcome determinism(const fs::path& work, const OctreeFacts& f) {
  Check c;
  const fs::path las = work / "det.las";
  write_fixture("gaussian", 200'000, las);
  const auto a = convert_cli(las, work / "a", "1");
  const auto b = convert_cli(las, work / "b", "1");
  const auto t = convert_cli(las, work / "t", "4");
  c.expect(a.proc.exit_code == 0 && b.proc.exit_code == 0 && t.proc.exit_code == 0, "convert failed");
  const auto ha = fixtures::hash_tree(a.out);
  c.expect(ha.count("manifest.json") == 1, "no manifest");
  c.expect(ha == fixtures::hash_tree(b.out), "two runs differ");
  c.expect(ha == fixtures::hash_tree(t.out), "--threads 4 differs");
  c.expect(f.determinism_1e7, "10^7 run differs with --threads 4");
  c.note("2x10^5 gaussian: " + std::to_string(ha.size()) + " files identical across runs and --threads 4; " +
         f.determinism_detail);
  for (const auto& d : {a.out, b.out, t.out}) fs::remove_all(d);
  fs::remove(las);
  return c.result();
}

// ---------------------------------------------------------------------------
// Measurement

MeasurementSeries series(SeriesKind kind, const std::vector<Vec3>& pts) {
  MeasurementSeries s;
  s.kind = kind;
  for (const auto& p : pts) {
    Vertex3 v;
    v.position = p;
    s.vertices.push_back(v);
  }
  return s;
}

Vec3 rotate(const Vec3& p, double yaw, double tilt, double roll) {
  Vec3 a{p.x * std::cos(yaw) - p.y * std::sin(yaw), p.x * std::sin(yaw) + p.y * std::cos(yaw), p.z};
  a = {a.x, a.y * std::cos(tilt) - a.z * std::sin(tilt), a.y * std::sin(tilt) + a.z * std::cos(tilt)};
  return {a.x * std::cos(roll) + a.z * std::sin(roll), a.y, -a.x * std::sin(roll) + a.z * std::cos(roll)};
}

Outcome measurement(const fs::path& work) {
  Check c;
  const double d = evaluate(series(SeriesKind::kDistance, {{0, 0, 0}, {3, 4, 0}})).values.at(0);
  c.expect(d == 5.0, "3-4-5 distance " + fmt(d, 17));

  Rng rng(2024);
  double worst_angle = 0.0;
  double worst_area = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double yaw = rng.uniform(0, 6.283), tilt = rng.uniform(0, 6.283), roll = rng.uniform(0, 6.283);
    const double scale = i == 0 ? 1.0 : rng.uniform(0.01, 100.0);
    const Vec3 off = i == 0 ? Vec3{} : Vec3{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)};
    std::vector<Vec3> tri{{0, 0, 0}, {scale, 0, 0}, {scale * 0.5, scale * std::sqrt(3.0) / 2.0, 0}};
    for (auto& p : tri) p = rotate(p, yaw, tilt, roll) + off;
    for (double a : evaluate(series(SeriesKind::kAngle, tri)).values) {
      worst_angle = std::max(worst_angle, std::abs(a - 60.0));
    }
    std::vector<Vec3> square{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    if (i % 2) std::reverse(square.begin(), square.end());
    if (i > 0) {
      for (auto& p : square) p = rotate(p, yaw, tilt, roll);
    }
    worst_area = std::max(worst_area, std::abs(evaluate(series(SeriesKind::kArea, square)).values.at(0) - 1.0));
  }
  c.expect(worst_angle <= kAngleTolDeg, "equilateral angle off by " + fmt(worst_angle));
  c.expect(worst_area <= kAreaTol, "unit square area off by " + fmt(worst_area));

  // profile corridor against a brute-force filter over the same decoded points
  VectorPointReader reader(fixtures::uniform_cube(kCorridorPoints, 77, 20.0));
  BuildConfig cfg;
  build_index(reader, cfg, work / "corridor");
  const auto index = PointIndex::open(work / "corridor");
  std::vector<PointRecord> all;
  std::vector<std::pair<std::string, std::uint32_t>> where;
  for (const auto& n : index.manifest().nodes) {
    const auto pts = index.read_node(n.code);
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
      all.push_back(pts[i]);
      where.emplace_back(n.code.str(), i);
    }
  }
  c.expect(all.size() == kCorridorPoints, "corridor index lost points");
  int trials = 0;
  std::size_t hits = 0;
  for (; trials < 50; ++trials) {
    std::vector<Vertex3> line;
    std::vector<Vec3> poly;
    for (int k = 0, m = 2 + static_cast<int>(rng.below(4)); k < m; ++k) {
      const Vec3 p{rng.uniform(-2, 22), rng.uniform(-2, 22), rng.uniform(0, 20)};
      Vertex3 v;
      v.position = p;
      line.push_back(v);
      poly.push_back(p);
    }
    const double width = rng.uniform(0.1, 5);
    std::set<std::pair<std::string, std::uint32_t>> expected;
    for (auto i : oracles::corridor(all, poly, width)) expected.insert(where[i]);
    std::set<std::pair<std::string, std::uint32_t>> got;
    for (const auto& s : extract_profile(line, width, index, 16)) got.insert({s.node.str(), s.index_in_node});
    hits += expected.size();
    if (got != expected) {
      c.fail("corridor trial " + std::to_string(trials) + ": " + std::to_string(got.size()) + " vs brute force " +
             std::to_string(expected.size()));
      break;
    }
  }
  fs::remove_all(work / "corridor");
  c.note("3-4-5 = " + fmt(d, 17) + "; worst equilateral error " + fmt(worst_angle) + " deg over 1000 poses; worst square error " +
         fmt(worst_area) + "; " + std::to_string(trials) + " corridors identical to brute force on 10^4 points (" +
         std::to_string(hits) + " hits)");
  return c.result();
}

// ---------------------------------------------------------------------------
// Interchange

Outcome interchange() {
  Check c;
  Rng rng(1000);
  std::size_t docs = 0, series_total = 0, mutations = 0;
  for (std::size_t i = 0; i < kInterchangeDocs; ++i) {
    const auto doc = samples::random_layer(rng, true);
    const std::string text = export_layer(doc, LayerFormat::kJson);
    const auto back = import_layer(text);
    if (!(back == doc) || export_layer(back, LayerFormat::kJson) != text) {
      c.fail("document " + std::to_string(i) + " changed in round trip");
      break;
    }
    ++docs;
    series_total += doc.series.size();
    for (std::size_t s = 0; s < doc.series.size(); ++s) {
      auto bad = json::parse(text);
      const SeriesKind kind = doc.series[s].kind;
      auto& verts = bad["series"][s]["vertices"];
      const std::size_t count = samples::invalid_vertex_count(kind, rng);
      json filler = verts.empty() ? json{{"position", {0.0, 0.0, 0.0}}, {"snapped", false}} : verts[0];
      verts = json::array();
      for (std::size_t k = 0; k < count; ++k) verts.push_back(filler);
      const std::string prefix = std::string(series_kind_title(kind)) + " requires";
      try {
        import_layer(bad.dump());
        c.fail("accepted " + std::to_string(count) + " vertices for " + prefix);
      } catch (const Error& e) {
        c.expect(e.code() == ErrorCode::kValidationFailed && e.detail().rfind(prefix, 0) == 0,
                 "mutation rejected as " + std::string(error_code_name(e.code())) + ": " + e.detail());
      }
      ++mutations;
    }
  }
  c.note(std::to_string(docs) + " documents (" + std::to_string(series_total) +
         " series, unknown fields injected) round-trip byte-identical; " + std::to_string(mutations) +
         " wrong-vertex-count mutations rejected with the named rule");
  return c.result();
}

// ---------------------------------------------------------------------------
// Planes

double axis_error_deg(const Vec3& n, int* axis) {
  int best = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(n[a]) > std::abs(n[best])) best = a;
  }
  *axis = best;
  Vec3 e;
  e[best] = n[best] < 0 ? -1.0 : 1.0;
  return oracles::angle_deg(n, e);
}

Outcome planes() {
  Check c;
  constexpr std::size_t kPerFace = 2000;
  constexpr double kJitter = 0.001;
  double worst_axis = 0.0, worst_share = 1.0;
  for (int seed = 1; seed <= kPlaneSeeds; ++seed) {
    SegmentConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto r = segment_planes(fixtures::cube_shell(kPerFace, seed, kJitter), cfg);
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    if (r.planes.size() != 6) {
      c.fail(tag + std::to_string(r.planes.size()) + " planes");
      continue;
    }
    // face of each plane as (axis, side)
    std::vector<std::pair<int, int>> face(r.planes.size());
    std::set<std::pair<int, int>> distinct;
    for (std::size_t k = 0; k < r.planes.size(); ++k) {
      int axis = 0;
      const double err = axis_error_deg(r.planes[k].normal, &axis);
      worst_axis = std::max(worst_axis, err);
      c.expect(err <= kPlaneAxisTolDeg, tag + "normal " + fmt(err) + " deg off axis");
      face[k] = {axis, static_cast<int>(std::lround(std::abs(r.planes[k].offset / r.planes[k].normal[axis])))};
      distinct.insert(face[k]);
    }
    c.expect(distinct.size() == 6, tag + "faces not distinct");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      const auto idx = r.plane_index[i];
      if (idx == 0) continue;
      const auto [axis, side] = face[idx - 1];
      if (std::abs(r.points[i].position[axis] - side) <= kJitter + 1e-12) ++correct;
    }
    const double share = static_cast<double>(correct) / static_cast<double>(r.points.size());
    worst_share = std::min(worst_share, share);
    c.expect(share >= kMinInlierShare, tag + "correct assignment " + fmt(share));
  }
  int clean = 0;
  for (int seed = 1; seed <= kPlaneSeeds; ++seed) {
    SegmentConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    clean += segment_planes(fixtures::ball_noise(6 * kPerFace, seed), cfg).planes.empty() ? 1 : 0;
  }
  c.expect(clean >= kMinCleanNoiseSeeds, "noise clean in only " + std::to_string(clean) + "/20 seeds");
  c.note("cube shell: 6 planes in all " + std::to_string(kPlaneSeeds) + " seeds, worst normal " + fmt(worst_axis) +
         " deg, worst correct assignment " + fmt(worst_share, 4) + "; noise: 0 planes in " + std::to_string(clean) +
         "/20 seeds");
  return c.result();
}

// ---------------------------------------------------------------------------
// Collaboration

// Networked session: headless clients over TCP while tiles are served.
std::string networked_session(const fs::path& work, std::size_t* ops_sent, std::string* final_hash) {
  const auto cfg = project_config_from_json(
      json{{"projectId", "site"},
           {"dataDir", "data"},
           {"users",
            {{{"name", "carol"}, {"token", "t0"}, {"role", "curator"}},
             {{"name", "alice"}, {"token", "t1"}, {"role", "contributor"}},
             {{"name", "bob"}, {"token", "t2"}, {"role", "contributor"}},
             {{"name", "vic"}, {"token", "t3"}, {"role", "viewer"}}}}},
      work);
  init_project(cfg);
  fixtures::write_las(work / "shell.las", fixtures::cube_shell(3000, 1, 0.001));
  convert(work / "shell.las", cfg.index_dir(), ConvertOptions{});
  const auto before = fixtures::hash_tree(cfg.index_dir());

  auto project = std::make_shared<Project>(cfg.project_id, std::make_unique<FileOpStore>(cfg.collab_dir()));
  CollabServer collab(cfg, project);
  TileServer http(cfg, project);
  const int cport = collab.start("127.0.0.1", 0);
  const int hport = http.start("127.0.0.1", 0);

  struct Client {
    std::unique_ptr<CollabClient> conn;
    std::unique_ptr<Replica> replica;
    Principal who;
    std::string id;
    std::uint64_t seq = 1;
  };
  std::vector<Client> clients;
  for (std::size_t i = 0; i < kCollabClients; ++i) {
    Client cl;
    cl.conn = std::make_unique<CollabClient>("127.0.0.1", cport);
    cl.id = "net" + std::to_string(i);
    cl.conn->send(protocol::hello("site", "t" + std::to_string(i), cl.id));
    const auto w = cl.conn->receive();
    if (!w || (*w)["type"] != "welcome") return "no welcome for client " + std::to_string(i);
    cl.who = *cfg.authenticate("t" + std::to_string(i));
    cl.replica = std::make_unique<Replica>(restore((*w)["snapshot"]));
    clients.push_back(std::move(cl));
  }

  httplib::Client web("127.0.0.1", hport);
  const auto manifest_bytes = read_file_text(cfg.index_dir() / "manifest.json");
  Rng rng(99);
  for (std::size_t k = 0; k < kCollabOps; ++k) {
    Client& cl = clients[rng.below(clients.size())];
    const SessionOp op = sim::random_op(rng, cl.replica->state(), cl.who, cl.id, cl.seq);
    cl.conn->send(protocol::op_message("site", op));
    ++*ops_sent;
    for (;;) {
      const auto m = cl.conn->receive();
      if (!m) return "client " + cl.id + " timed out";
      const std::string type = (*m)["type"];
      if (type == "event") {
        cl.replica->deliver(protocol::event_from_json(*m));
        continue;
      }
      if (!m->contains("opId") || (*m)["opId"]["seq"] != op.id.seq) return "unexpected " + m->dump();
      if (type == "ack" && !(*m)["duplicate"].get<bool>()) ++cl.seq;
      break;
    }
    if (k % 100 == 0) {
      const auto res = web.Get("/projects/site/manifest.json");
      if (!res || res->status != 200 || res->body != manifest_bytes) return "manifest served differently";
    }
  }
  for (auto& cl : clients) {
    cl.conn->send(protocol::bye("site"));
    for (;;) {
      const auto m = cl.conn->receive();
      if (!m) return "no bye for " + cl.id;
      if ((*m)["type"] == "event") cl.replica->deliver(protocol::event_from_json(*m));
      if ((*m)["type"] == "bye") break;
    }
  }
  const auto server = to_hex(project->hash());
  for (const auto& cl : clients) {
    if (cl.replica->pending() != 0) return cl.id + " has undelivered events";
    if (to_hex(state_hash(cl.replica->state())) != server) return cl.id + " diverged from server";
  }
  collab.stop();
  http.stop();
  if (fixtures::hash_tree(cfg.index_dir()) != before) return "index files changed during the session";
  *final_hash = server;
  return "";
}

Outcome collaboration(const fs::path& work) {
  Check c;
  std::size_t accepted = 0, rejected = 0, stale = 0;
  for (int seed = 1; seed <= kCollabSeeds; ++seed) {
    const auto run = sim::run(static_cast<std::uint64_t>(seed), kCollabClients, kCollabOps, "sim");
    accepted += run.accepted;
    rejected += run.rejected;
    stale += run.stale;
    bool same = run.client_hashes.size() == kCollabClients;
    for (const auto& h : run.client_hashes) same = same && h == run.server_hash;
    c.expect(same, "seed " + std::to_string(seed) + ": replicas diverge");
    c.expect(to_hex(state_hash(sim::replay("sim", run.log, run.log.size()))) == run.server_hash,
             "seed " + std::to_string(seed) + ": log replay differs");
  }

  const auto run = sim::run(4242, kCollabClients, kCollabOps, "sim");
  Rng rng(4242);
  int cuts_ok = 0;
  for (int k = 0; k < kCutPoints; ++k) {
    const std::size_t cut = rng.below(run.log.size() + 1);
    SessionState s = restore(snapshot(sim::replay("sim", run.log, cut)));
    for (std::size_t i = cut; i < run.log.size(); ++i) apply_event(s, run.log[i]);
    if (to_hex(state_hash(s)) == run.server_hash) ++cuts_ok;
  }
  c.expect(cuts_ok == kCutPoints, "snapshot+replay matched at " + std::to_string(cuts_ok) + " cut points");

  std::size_t net_ops = 0;
  std::string net_hash;
  const std::string net = networked_session(work / "net", &net_ops, &net_hash);
  c.expect(net.empty(), "networked session: " + net);
  if (net.empty()) {
    // a restart recovers the same state from the op log and snapshot
    Project again("site", std::make_unique<FileOpStore>(work / "net" / "data" / "collab"));
    c.expect(to_hex(again.hash()) == net_hash, "recovered state differs after restart");
  }

  c.note(std::to_string(kCollabSeeds) + " seeds x " + std::to_string(kCollabClients) + " clients x " +
         std::to_string(kCollabOps) + " ops converge (" + std::to_string(accepted) + " accepted, " +
         std::to_string(rejected) + " rejected, " + std::to_string(stale) + " stale); " + std::to_string(cuts_ok) +
         " snapshot cut points equal full replay; TCP session of " + std::to_string(net_ops) +
         " ops converged with index SHA-256 unchanged");
  return c.result();
}

// ---------------------------------------------------------------------------
// CLI contract

Outcome cli_contract(const fs::path& work) {
  Check c;
  std::ofstream(work / "one.xyz") << "1 2 3\n";
  const auto conv = cli({"convert", (work / "one.xyz").string(), "-o", (work / "one").string(), "-q"});
  c.expect(conv.exit_code == 0, "convert one.xyz exit " + std::to_string(conv.exit_code));
  const auto info = cli({"info", (work / "one").string()});
  c.expect(info.exit_code == 0 && info.out == "points: 1, nodes: 1, spacing: 0.006928203230275509\n",
           "info printed '" + first_line(info.out) + "'");

  struct Case {
    std::vector<std::string> args;
    int code;
    std::string prefix;
  };
  std::ofstream(work / "bad.xyz") << "1 2 banana\n";
  std::ofstream(work / "a.laz") << "LASF";
  std::ofstream(work / "p.json") << R"({"projectId":"x","dataDir":"d","users":[]})";
  const std::vector<Case> cases{
      {{}, 1, "ERROR USAGE"},
      {{"frobnicate"}, 1, "ERROR USAGE"},
      {{"convert", (work / "one.xyz").string()}, 1, "ERROR USAGE"},
      {{"convert", (work / "one.xyz").string(), "-o", (work / "x").string(), "--node-capacity", "5"}, 1, "ERROR USAGE"},
      {{"convert", (work / "missing.las").string(), "-o", (work / "x").string()}, 3, "ERROR IO"},
      {{"info", (work / "nowhere").string()}, 3, "ERROR IO"},
      {{"convert", (work / "bad.xyz").string(), "-o", (work / "x").string()}, 2, "ERROR MALFORMED_RECORD"},
      {{"convert", (work / "a.laz").string(), "-o", (work / "x").string()}, 2, "ERROR UNSUPPORTED_FORMAT"},
      {{"init", (work / "p.json").string()}, 2, "ERROR CONFIG"},
  };
  for (const auto& k : cases) {
    const auto r = cli(k.args);
    std::string line;
    for (const auto& a : k.args) line += " " + a.substr(a.find_last_of('/') + 1);
    c.expect(r.exit_code == k.code && r.err.rfind(k.prefix, 0) == 0,
             "'" + line + "' gave exit " + std::to_string(r.exit_code) + " " + first_line(r.err));
  }
  c.note("convert/info golden output matched; " + std::to_string(cases.size()) + " error cases gave documented exit codes");
  return c.result();
}

}  // namespace

int main() {
  log::set_quiet(true);
  TempDir work;
  OctreeFacts facts;
  report("octree conservation", [&] { return octree_conservation(work.path(), facts); });
  report("out-of-core memory bound", [&] { return out_of_core(facts); });
  report("determinism", [&] { return determinism(work.path(), facts); });
  report("measurement oracles", [&] { return measurement(work.path()); });
  report("interchange round trip", [&] { return interchange(); });
  report("plane segmentation", [&] { return planes(); });
  report("collaboration convergence", [&] { return collaboration(work.path()); });
  report("cli contract", [&] { return cli_contract(work.path()); });
  return g_all ? 0 : 1;
}
