#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pollmgraph/trace.hpp"

namespace pollmgraph::codec {

using Json = nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// {"rows", "cols", "data"}; data is base64 of little-endian float64, row-major.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

std::uint32_t crc32c(std::string_view bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Pulls a required field with a FormatError naming it when absent.
const Json& field(const Json& j, const char* name);

}  // namespace pollmgraph::codec
