#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace brt {

// Shortest decimal representation that round-trips the exact double.
std::string format_double(double v);

// Strict parse of a full token as double; returns false on any trailing junk.
bool parse_double(std::string_view token, double& out);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view line, char delim);

// FNV-1a 64-bit, used as the content checksum of persisted model files.
std::uint64_t fnv1a64(std::string_view data);
std::string to_hex(std::uint64_t v);

}  // namespace brt
