#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace cloudatelier {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::span<const std::uint8_t> bytes);
Sha256Digest sha256(std::string_view text);
Sha256Digest sha256_file(const std::filesystem::path& path);

std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace cloudatelier
