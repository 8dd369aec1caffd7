#include "e11/digest.hpp"

#include <openssl/evp.h>

#include "e11/common.hpp"

namespace e11 {

Sha256 sha256(std::string_view bytes) {
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error("sha256: digest failed");
  }
  return out;
}

std::string to_hex(const Sha256& digest) {
  static const char* kHex = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : digest) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xF]);
  }
  return s;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_bytes64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ 0x9AE16A3B2F90404FULL);
  for (unsigned char c : bytes) h = mix64(h ^ c);
  return mix64(h ^ static_cast<std::uint64_t>(bytes.size()));
}

}  // namespace e11
