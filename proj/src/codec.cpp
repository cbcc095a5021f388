#include "pollmgraph/codec.hpp"

#include <bit>
#include <cstring>

#include <boost/crc.hpp>
#include <sodium.h>

#include "pollmgraph/errors.hpp"

namespace pollmgraph::codec {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  const std::size_t len = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);  // drop the terminator
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t written = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &written, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    throw FormatError("invalid base64 payload");
  }
  out.resize(written);
  return out;
}

namespace {

std::vector<std::uint8_t> pack_doubles(const double* data, std::size_t count) {
  std::vector<std::uint8_t> bytes(count * 8);
  for (std::size_t i = 0; i < count; ++i) {
    auto bits = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return bytes;
}

void unpack_doubles(const std::vector<std::uint8_t>& bytes, double* out, std::size_t count) {
  if (bytes.size() != count * 8) {
    throw FormatError("float64 payload holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(count * 8));
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[i * 8 + b]} << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw FormatError(std::string("missing field \"") + name + "\"");
  return j.at(name);
}

Json matrix_to_json(const Matrix& m) {
  return Json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", base64_encode(pack_doubles(m.data(), static_cast<std::size_t>(m.size())))}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = field(j, "rows").get<Eigen::Index>();
  const auto cols = field(j, "cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0) throw FormatError("negative matrix shape");
  Matrix m(rows, cols);
  unpack_doubles(base64_decode(field(j, "data").get<std::string>()), m.data(),
                 static_cast<std::size_t>(m.size()));
  return m;
}

Json vector_to_json(const Vector& v) {
  return Json{{"size", v.size()},
              {"data", base64_encode(pack_doubles(v.data(), static_cast<std::size_t>(v.size())))}};
}

Vector vector_from_json(const Json& j) {
  const auto n = field(j, "size").get<Eigen::Index>();
  if (n < 0) throw FormatError("negative vector size");
  Vector v(n);
  unpack_doubles(base64_decode(field(j, "data").get<std::string>()), v.data(), static_cast<std::size_t>(n));
  return v;
}

std::uint32_t crc32c(std::string_view bytes) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  if (sodium_init() < 0) throw Error("libsodium initialisation failed");
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, bytes.data(), bytes.size());
  char hex[crypto_hash_sha256_BYTES * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, digest, sizeof digest);
  return hex;
}

}  // namespace pollmgraph::codec
