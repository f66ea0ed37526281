#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace proofgrade {

using Digest256 = std::array<std::uint8_t, 32>;

Digest256 sha256(std::string_view data);
Digest256 sha256_file(const std::filesystem::path& path);

std::string to_hex(const Digest256& digest);

struct Digest256Hash {
  std::size_t operator()(const Digest256& d) const noexcept {
    std::size_t h = 0;
    for (std::size_t i = 0; i < sizeof(std::size_t); ++i)
      h = (h << 8) | d[i];
    return h;
  }
};

}  // namespace proofgrade
