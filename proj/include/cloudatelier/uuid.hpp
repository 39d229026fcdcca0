#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cloudatelier {

class Rng;

/// 128-bit identifier, ordered by byte value.
class Uuid {
 public:
  Uuid() = default;
  explicit Uuid(const std::array<std::uint8_t, 16>& bytes) : bytes_(bytes) {}

  /// Canonical 8-4-4-4-12 lower-case hex form.
  std::string str() const;
  static std::optional<Uuid> parse(std::string_view text);

  /// Random (version 4) id drawn from a seeded generator.
  static Uuid random(Rng& rng);
  /// Name-based id (version 8 layout, SHA-256 of namespace + name).
  static Uuid derived(std::string_view ns, std::string_view name);

  const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
  bool is_nil() const;

  friend auto operator<=>(const Uuid&, const Uuid&) = default;
  friend bool operator==(const Uuid&, const Uuid&) = default;

 private:
  std::array<std::uint8_t, 16> bytes_{};
};

}  // namespace cloudatelier
