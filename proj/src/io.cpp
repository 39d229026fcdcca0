#include "cloudatelier/io.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <utility>

#include "cloudatelier/error.hpp"

namespace cloudatelier {

namespace {

constexpr std::size_t kStreamBuffer = 1 << 20;

std::string errno_text() { return std::strerror(errno); }

}  // namespace

InputFile::InputFile(const std::filesystem::path& path) : path_(path) {
  file_ = std::fopen(path.c_str(), "rb");
  if (file_ == nullptr) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string() + ": " + errno_text());
  }
  std::setvbuf(file_, nullptr, _IOFBF, kStreamBuffer);
  std::error_code ec;
  size_ = std::filesystem::file_size(path, ec);
  if (ec) {
    std::fclose(file_);
    file_ = nullptr;
    throw Error(ErrorCode::kIo, "cannot stat " + path.string());
  }
}

InputFile::~InputFile() {
  if (file_ != nullptr) std::fclose(file_);
}

InputFile::InputFile(InputFile&& other) noexcept
    : file_(std::exchange(other.file_, nullptr)), size_(other.size_), path_(std::move(other.path_)) {}

InputFile& InputFile::operator=(InputFile&& other) noexcept {
  if (this != &other) {
    if (file_ != nullptr) std::fclose(file_);
    file_ = std::exchange(other.file_, nullptr);
    size_ = other.size_;
    path_ = std::move(other.path_);
  }
  return *this;
}

std::uint64_t InputFile::tell() const { return static_cast<std::uint64_t>(std::ftell(file_)); }

void InputFile::seek(std::uint64_t offset) {
  if (std::fseek(file_, static_cast<long>(offset), SEEK_SET) != 0) {
    throw Error(ErrorCode::kIo, "seek failed in " + path_.string());
  }
}

std::size_t InputFile::read_some(std::uint8_t* dst, std::size_t n) {
  const std::size_t got = std::fread(dst, 1, n, file_);
  if (got < n && std::ferror(file_)) {
    throw Error(ErrorCode::kIo, "read failed in " + path_.string() + ": " + errno_text());
  }
  return got;
}

void InputFile::read_exact(std::uint8_t* dst, std::size_t n) {
  if (read_some(dst, n) != n) {
    throw Error(ErrorCode::kIo, "unexpected end of file in " + path_.string());
  }
}

bool InputFile::read_line(std::string& line) {
  char* buf = nullptr;
  std::size_t cap = 0;
  const ssize_t n = ::getline(&buf, &cap, file_);
  if (n < 0) {
    std::free(buf);
    if (std::ferror(file_)) throw Error(ErrorCode::kIo, "read failed in " + path_.string());
    line.clear();
    return false;
  }
  line.assign(buf, static_cast<std::size_t>(n));
  std::free(buf);
  if (!line.empty() && line.back() == '\n') line.pop_back();
  return true;
}

OutputFile::OutputFile(const std::filesystem::path& path, Mode mode) : path_(path) {
  file_ = std::fopen(path.c_str(), mode == Mode::kAppend ? "ab" : "wb");
  if (file_ == nullptr) {
    if (errno == ENOSPC) throw Error(ErrorCode::kOutOfDiskSpace, "no space left creating " + path.string());
    throw Error(ErrorCode::kIo, "cannot create " + path.string() + ": " + errno_text());
  }
  std::setvbuf(file_, nullptr, _IOFBF, kStreamBuffer / 4);
}

OutputFile::~OutputFile() {
  if (file_ != nullptr) std::fclose(file_);
}

OutputFile::OutputFile(OutputFile&& other) noexcept
    : file_(std::exchange(other.file_, nullptr)), path_(std::move(other.path_)) {}

OutputFile& OutputFile::operator=(OutputFile&& other) noexcept {
  if (this != &other) {
    if (file_ != nullptr) std::fclose(file_);
    file_ = std::exchange(other.file_, nullptr);
    path_ = std::move(other.path_);
  }
  return *this;
}

void OutputFile::fail(const char* what) {
  const int err = errno;
  if (err == ENOSPC) throw Error(ErrorCode::kOutOfDiskSpace, std::string("no space left ") + what + " " + path_.string());
  throw Error(ErrorCode::kIo, std::string(what) + " " + path_.string() + ": " + std::strerror(err));
}

void OutputFile::write(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return;
  if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size()) fail("writing");
}

void OutputFile::write(const std::string& text) {
  write(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void OutputFile::close() {
  if (file_ == nullptr) return;
  std::FILE* f = std::exchange(file_, nullptr);
  const bool flush_failed = std::fflush(f) != 0;
  const int err = errno;
  const bool close_failed = std::fclose(f) != 0;
  if (flush_failed || close_failed) {
    errno = flush_failed ? err : errno;
    fail("closing");
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  InputFile in(path);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(in.size()));
  in.read_exact(bytes.data(), bytes.size());
  return bytes;
}

std::string read_file_text(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    OutputFile out(tmp);
    out.write(contents);
    out.close();
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace cloudatelier
