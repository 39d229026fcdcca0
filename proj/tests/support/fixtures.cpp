#include "fixtures.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cloudatelier/hash.hpp"

#ifndef CLOUDATELIER_CLI_PATH
#define CLOUDATELIER_CLI_PATH "cloudatelier"
#endif

namespace fixtures {

namespace fs = std::filesystem;
using cloudatelier::Rng;

TempDir::TempDir() {
  const char* base = std::getenv("TMPDIR");
  std::string tmpl = std::string(base && *base ? base : "/tmp") + "/cloudatelier-test-XXXXXX";
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
void poke(std::vector<std::uint8_t>& out, std::size_t at, T v) {
  std::memcpy(out.data() + at, &v, sizeof(T));
}

std::uint16_t record_length(std::uint8_t format) {
  switch (format) {
    case 0: return 20;
    case 1: return 28;
    case 2: return 26;
    case 3: return 34;
  }
  throw std::invalid_argument("LAS point format 0-3 only");
}

double mm(double v) { return std::round(v * 1000.0) * 0.001; }

}  // namespace

LasWriter::LasWriter(const fs::path& path, std::uint8_t format, Vec3 scale, Vec3 offset)
    : format_(format), scale_(scale), offset_(offset) {
  record_length(format);
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) throw std::runtime_error("cannot create " + path.string());
  std::vector<std::uint8_t> header(227, 0);
  std::fwrite(header.data(), 1, header.size(), file_);
}

LasWriter::~LasWriter() {
  if (file_) close();
}

void LasWriter::add(const PointRecord& p) {
  const auto q = [](double v, double o, double s) { return static_cast<std::int32_t>(std::llround((v - o) / s)); };
  put(q(p.position.x, offset_.x, scale_.x), q(p.position.y, offset_.y, scale_.y), q(p.position.z, offset_.z, scale_.z), p);
}

void LasWriter::add_raw(std::int32_t x, std::int32_t y, std::int32_t z) { put(x, y, z, PointRecord{}); }

void LasWriter::put(std::int32_t x, std::int32_t y, std::int32_t z, const PointRecord& p) {
  ::fixtures::put(buffer_, x);
  ::fixtures::put(buffer_, y);
  ::fixtures::put(buffer_, z);
  ::fixtures::put<std::uint16_t>(buffer_, p.intensity);
  ::fixtures::put<std::uint8_t>(buffer_, 0x09);  // return 1 of 1
  ::fixtures::put<std::uint8_t>(buffer_, p.classification);
  ::fixtures::put<std::int8_t>(buffer_, 0);
  ::fixtures::put<std::uint8_t>(buffer_, 0);
  ::fixtures::put<std::uint16_t>(buffer_, 0);
  if (format_ == 1 || format_ == 3) ::fixtures::put<double>(buffer_, 0.0);
  if (format_ == 2 || format_ == 3) {
    ::fixtures::put<std::uint16_t>(buffer_, static_cast<std::uint16_t>(p.r * 257));
    ::fixtures::put<std::uint16_t>(buffer_, static_cast<std::uint16_t>(p.g * 257));
    ::fixtures::put<std::uint16_t>(buffer_, static_cast<std::uint16_t>(p.b * 257));
  }
  box_.expand({x * scale_.x + offset_.x, y * scale_.y + offset_.y, z * scale_.z + offset_.z});
  ++count_;
  if (buffer_.size() >= (1u << 20)) {
    std::fwrite(buffer_.data(), 1, buffer_.size(), file_);
    buffer_.clear();
  }
}

void LasWriter::close() {
  if (!buffer_.empty()) std::fwrite(buffer_.data(), 1, buffer_.size(), file_);
  buffer_.clear();
  std::vector<std::uint8_t> h(227, 0);
  std::memcpy(h.data(), "LASF", 4);
  h[24] = 1;
  h[25] = 2;
  std::memcpy(h.data() + 26, "fixtures", 8);
  poke<std::uint16_t>(h, 94, 227);
  poke<std::uint32_t>(h, 96, 227);
  poke<std::uint32_t>(h, 100, 0);
  h[104] = format_;
  poke<std::uint16_t>(h, 105, record_length(format_));
  poke<std::uint32_t>(h, 107, count_);
  poke<std::uint32_t>(h, 111, count_);
  poke<double>(h, 131, scale_.x);
  poke<double>(h, 139, scale_.y);
  poke<double>(h, 147, scale_.z);
  poke<double>(h, 155, offset_.x);
  poke<double>(h, 163, offset_.y);
  poke<double>(h, 171, offset_.z);
  const bool any = count_ > 0;
  poke<double>(h, 179, any ? box_.max.x : 0.0);
  poke<double>(h, 187, any ? box_.min.x : 0.0);
  poke<double>(h, 195, any ? box_.max.y : 0.0);
  poke<double>(h, 203, any ? box_.min.y : 0.0);
  poke<double>(h, 211, any ? box_.max.z : 0.0);
  poke<double>(h, 219, any ? box_.min.z : 0.0);
  std::fseek(file_, 0, SEEK_SET);
  std::fwrite(h.data(), 1, h.size(), file_);
  std::fclose(file_);
  file_ = nullptr;
}

void write_las(const fs::path& path, const std::vector<PointRecord>& points, Vec3 scale, Vec3 offset, std::uint8_t format) {
  LasWriter w(path, format, scale, offset);
  for (const auto& p : points) w.add(p);
  w.close();
}

void write_xyz(const fs::path& path, const std::vector<PointRecord>& points) {
  std::ofstream out(path);
  out.precision(17);
  out << "# x y z intensity r g b\n";
  for (const auto& p : points) {
    out << p.position.x << ' ' << p.position.y << ' ' << p.position.z << ' ' << p.intensity << ' ' << int(p.r) << ' '
        << int(p.g) << ' ' << int(p.b) << '\n';
  }
}

void write_ply(const fs::path& path, const std::vector<PointRecord>& points, bool binary) {
  std::ofstream out(path, std::ios::binary);
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  out.precision(17);
  for (const auto& p : points) {
    if (binary) {
      std::vector<std::uint8_t> rec;
      put(rec, p.position.x);
      put(rec, p.position.y);
      put(rec, p.position.z);
      rec.push_back(p.r);
      rec.push_back(p.g);
      rec.push_back(p.b);
      out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    } else {
      out << p.position.x << ' ' << p.position.y << ' ' << p.position.z << ' ' << int(p.r) << ' ' << int(p.g) << ' '
          << int(p.b) << '\n';
    }
  }
}

PointRecord uniform_cube_point(Rng& rng, double edge) {
  PointRecord p;
  p.position = {mm(rng.uniform(0, edge)), mm(rng.uniform(0, edge)), mm(rng.uniform(0, edge))};
  p.r = static_cast<std::uint8_t>(rng.below(256));
  p.g = static_cast<std::uint8_t>(rng.below(256));
  p.b = static_cast<std::uint8_t>(rng.below(256));
  p.intensity = static_cast<std::uint16_t>(rng.below(65536));
  p.classification = static_cast<std::uint8_t>(rng.below(32));
  return p;
}

std::vector<PointRecord> uniform_cube(std::size_t n, std::uint64_t seed, double edge) {
  Rng rng(seed);
  std::vector<PointRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(uniform_cube_point(rng, edge));
  return out;
}

std::vector<PointRecord> clustered_gaussian(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::array<Vec3, 8> centers{};
  for (auto& c : centers) c = {rng.uniform(10, 90), rng.uniform(10, 90), rng.uniform(10, 90)};
  std::vector<PointRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& c = centers[rng.below(centers.size())];
    PointRecord p;
    p.position = {mm(c.x + 2.0 * rng.normal()), mm(c.y + 2.0 * rng.normal()), mm(c.z + 2.0 * rng.normal())};
    p.intensity = static_cast<std::uint16_t>(i & 0xFFFF);
    out.push_back(p);
  }
  return out;
}

std::vector<PointRecord> duplicate_pairs(std::size_t n) {
  std::vector<PointRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].position = (i % 2 == 0) ? Vec3{1.0, 2.0, 3.0} : Vec3{4.0, 5.0, 6.0};
    out[i].intensity = static_cast<std::uint16_t>(i & 0xFFFF);
  }
  return out;
}

std::vector<PointRecord> cube_shell(std::size_t per_face, std::uint64_t seed, double jitter) {
  Rng rng(seed);
  std::vector<PointRecord> out;
  out.reserve(per_face * 6);
  for (int axis = 0; axis < 3; ++axis) {
    for (double side : {0.0, 1.0}) {
      for (std::size_t i = 0; i < per_face; ++i) {
        Vec3 p{rng.unit(), rng.unit(), rng.unit()};
        p[axis] = side + rng.uniform(-jitter, jitter);
        PointRecord rec;
        rec.position = p;
        out.push_back(rec);
      }
    }
  }
  return out;
}

std::vector<PointRecord> ball_noise(std::size_t n, std::uint64_t seed, double radius) {
  Rng rng(seed);
  std::vector<PointRecord> out;
  while (out.size() < n) {
    const Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (cloudatelier::dot(p, p) > 1.0) continue;
    PointRecord rec;
    rec.position = p * radius;
    out.push_back(rec);
  }
  return out;
}

std::map<std::string, std::string> hash_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto digest = cloudatelier::sha256_file(e.path());
    out[fs::relative(e.path(), dir).generic_string()] = cloudatelier::to_hex(digest);
  }
  return out;
}

ProcessResult run_process(const std::vector<std::string>& command, const std::map<std::string, std::string>& env) {
  // Launch through the probe so the peak RSS is the program's own.
  char report[] = "/tmp/cloudatelier-rss-XXXXXX";
  const int report_fd = ::mkstemp(report);
  if (report_fd < 0) throw std::runtime_error("mkstemp failed");
  ::close(report_fd);
  std::vector<std::string> args{CLOUDATELIER_RSS_PROBE_PATH, report};
  args.insert(args.end(), command.begin(), command.end());
  int out_pipe[2];
  int err_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    ::dup2(out_pipe[1], 1);
    ::dup2(err_pipe[1], 2);
    for (const auto& [k, v] : env) ::setenv(k.c_str(), v.c_str(), 1);
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    ::execv(argv[0], argv.data());
    ::_exit(127);
  }
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  ProcessResult r;
  std::array<pollfd, 2> fds{{{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}}};
  int open = 2;
  char buf[65536];
  while (open > 0) {
    if (::poll(fds.data(), fds.size(), -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const ssize_t n = ::read(fds[i].fd, buf, sizeof(buf));
      if (n <= 0) {
        ::close(fds[i].fd);
        fds[i].fd = -1;
        --open;
        continue;
      }
      (i == 0 ? r.out : r.err).append(buf, static_cast<std::size_t>(n));
    }
  }
  int status = 0;
  rusage usage{};
  ::wait4(pid, &status, 0, &usage);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ifstream(report) >> r.max_rss_kb;
  ::unlink(report);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return r;
}

fs::path cli_path() { return CLOUDATELIER_CLI_PATH; }

}  // namespace fixtures
