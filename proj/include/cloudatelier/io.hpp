#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cloudatelier {

/// Buffered read-only file handle. Errors surface as Error(kIo).
class InputFile {
 public:
  explicit InputFile(const std::filesystem::path& path);
  ~InputFile();
  InputFile(const InputFile&) = delete;
  InputFile& operator=(const InputFile&) = delete;
  InputFile(InputFile&& other) noexcept;
  InputFile& operator=(InputFile&& other) noexcept;

  std::uint64_t size() const { return size_; }
  std::uint64_t tell() const;
  void seek(std::uint64_t offset);

  /// Reads up to n bytes, returning how many were read.
  std::size_t read_some(std::uint8_t* dst, std::size_t n);
  /// Reads exactly n bytes or throws.
  void read_exact(std::uint8_t* dst, std::size_t n);
  /// Reads one '\n'-terminated line (terminator stripped). False at EOF.
  bool read_line(std::string& line);

 private:
  std::FILE* file_ = nullptr;
  std::uint64_t size_ = 0;
  std::filesystem::path path_;
};

/// Buffered write-only file handle. ENOSPC maps to Error(kOutOfDiskSpace).
class OutputFile {
 public:
  enum class Mode { kTruncate, kAppend };

  explicit OutputFile(const std::filesystem::path& path, Mode mode = Mode::kTruncate);
  ~OutputFile();
  OutputFile(const OutputFile&) = delete;
  OutputFile& operator=(const OutputFile&) = delete;
  OutputFile(OutputFile&& other) noexcept;
  OutputFile& operator=(OutputFile&& other) noexcept;

  void write(std::span<const std::uint8_t> bytes);
  void write(const std::string& text);
  /// Flushes and closes; errors are reported here rather than swallowed by the destructor.
  void close();

 private:
  void fail(const char* what);

  std::FILE* file_ = nullptr;
  std::filesystem::path path_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Little-endian append helpers for building binary records.
template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace cloudatelier
