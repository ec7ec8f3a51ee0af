#pragma once

#include <span>
#include <string>
#include <vector>

namespace sculpt {

// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(const std::string& text);
// Hash of the raw IEEE-754 bytes.
std::string checksum(std::span<const double> values);

}  // namespace sculpt
