#pragma once

#include <cstdint>
#include <string>

namespace tcf {

// FNV-1a 64-bit; stable across platforms, used for config/input fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(const std::string& s);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace tcf
