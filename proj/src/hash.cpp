#include "cloudatelier/hash.hpp"

#include <memory>
#include <vector>

#include <openssl/evp.h>

#include "cloudatelier/error.hpp"
#include "cloudatelier/io.hpp"

namespace cloudatelier {

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256Stream {
 public:
  Sha256Stream() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("EVP sha256 init failed");
    }
  }

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }

  Sha256Digest finish() {
    Sha256Digest out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

}  // namespace

Sha256Digest sha256(std::span<const std::uint8_t> bytes) {
  Sha256Stream s;
  s.update(bytes.data(), bytes.size());
  return s.finish();
}

Sha256Digest sha256(std::string_view text) {
  Sha256Stream s;
  s.update(text.data(), text.size());
  return s.finish();
}

Sha256Digest sha256_file(const std::filesystem::path& path) {
  InputFile in(path);
  Sha256Stream s;
  std::vector<std::uint8_t> buf(1 << 16);
  while (const std::size_t n = in.read_some(buf.data(), buf.size())) s.update(buf.data(), n);
  return s.finish();
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 15]);
  }
  return out;
}

}  // namespace cloudatelier
