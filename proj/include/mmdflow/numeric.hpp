#pragma once

#include <cstdint>
#include <string>

namespace mmdflow {

/// Shortest decimal representation that round-trips the exact double.
std::string format_double(double value);

/// Hexadecimal-float encoding (bit-exact round trip for finite doubles).
/// Format is what std::to_chars produces, e.g. "1.91eb851eb851fp-4".
std::string hex_double(double value);
double parse_hex_double(const std::string& text);

/// Parse a decimal double; throws InputError on malformed input.
double parse_double(const std::string& text);

/// splitmix64 step; used to derive independent stream seeds from a master
/// seed, e.g. mix_seed(master, row_index).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace mmdflow
