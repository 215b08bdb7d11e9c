#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace muse {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(const void* data, std::size_t len);
std::string digest_hex(const Digest& d);

}  // namespace muse
