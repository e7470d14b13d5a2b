#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace agriflow {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// zlib CRC-32 of `data`.
std::uint32_t crc32_of(std::string_view data);

}  // namespace agriflow
