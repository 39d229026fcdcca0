#include "cloudatelier/uuid.hpp"

#include <algorithm>

#include "cloudatelier/hash.hpp"
#include "cloudatelier/random.hpp"

namespace cloudatelier {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

void stamp(std::array<std::uint8_t, 16>& b, int version) {
  b[6] = static_cast<std::uint8_t>((b[6] & 0x0F) | (version << 4));
  b[8] = static_cast<std::uint8_t>((b[8] & 0x3F) | 0x80);
}

}  // namespace

std::string Uuid::str() const {
  const std::string hex = to_hex(bytes_);
  return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" + hex.substr(16, 4) + "-" +
         hex.substr(20, 12);
}

std::optional<Uuid> Uuid::parse(std::string_view text) {
  if (text.size() != 36) return std::nullopt;
  std::array<std::uint8_t, 16> b{};
  std::size_t out = 0;
  for (std::size_t i = 0; i < text.size();) {
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (text[i] != '-') return std::nullopt;
      ++i;
      continue;
    }
    const int hi = hex_value(text[i]);
    const int lo = hex_value(text[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    b[out++] = static_cast<std::uint8_t>(hi * 16 + lo);
    i += 2;
  }
  return Uuid(b);
}

Uuid Uuid::random(Rng& rng) {
  std::array<std::uint8_t, 16> b{};
  for (int half = 0; half < 2; ++half) {
    std::uint64_t v = rng.next();
    for (int i = 0; i < 8; ++i) {
      b[static_cast<std::size_t>(half * 8 + i)] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    }
  }
  stamp(b, 4);
  return Uuid(b);
}

Uuid Uuid::derived(std::string_view ns, std::string_view name) {
  std::string input;
  input.reserve(ns.size() + name.size() + 1);
  input.append(ns);
  input.push_back('\0');
  input.append(name);
  const Sha256Digest d = sha256(input);
  std::array<std::uint8_t, 16> b{};
  std::copy_n(d.begin(), 16, b.begin());
  stamp(b, 8);
  return Uuid(b);
}

bool Uuid::is_nil() const {
  return std::all_of(bytes_.begin(), bytes_.end(), [](std::uint8_t v) { return v == 0; });
}

}  // namespace cloudatelier
