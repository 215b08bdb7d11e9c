#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace muse {

// All randomness in a run flows from one top-level seed expanded into named
// streams. A stream is identified by (seed, tag, index); the same triple
// always yields the same generator, independent of call order or worker
// count.
std::uint64_t stream_key(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

std::mt19937_64 make_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

}  // namespace muse
