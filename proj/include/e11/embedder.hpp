#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "e11/common.hpp"
#include "e11/digest.hpp"

namespace e11 {

struct EmbeddingMatrix {
  MatrixF data;  // n x d, no NaN/Inf; unit rows when normalized
  std::string provider_tag;
  bool normalized = false;
};

struct EmbeddingProviderConfig {
  enum class Kind { http, file_cache, stub };
  Kind kind = Kind::stub;
  std::string endpoint;  // http base URL
  std::string path;      // cache file
  std::string model_id = "stub";
  int dim = 0;  // 0 = take from provider; stub requires an explicit dim >= 2
  int batch_size = 64;
  bool normalize = true;
  std::uint64_t seed = 1;  // stub
  int http_attempts = 3;
  int http_backoff_ms = 100;

  void validate() const;
};

const char* provider_kind_name(EmbeddingProviderConfig::Kind kind);

// Deterministic test provider: seeded-hash projection of the word multiset,
// unit-normalized. Texts sharing words land closer in cosine.
VectorF stub_encode(std::string_view text, int dim, std::uint64_t seed);

// Content address of a text for the vector cache (SHA-256 of UTF-8 bytes).
Sha256 cache_key(std::string_view text);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Raw (unnormalized) provider rows, one per input text, in input order.
  virtual MatrixF encode_batch(const std::vector<std::string>& texts) = 0;
  virtual std::string tag() const = 0;
};

std::unique_ptr<EmbeddingProvider> make_provider(const EmbeddingProviderConfig& cfg);

// Full encode contract: batches through the provider, validates dim and
// finiteness, normalizes rows when cfg.normalize. Throws on empty input,
// blank texts, dim mismatch against cfg.dim, NaN/Inf, or zero rows.
EmbeddingMatrix encode(const std::vector<std::string>& texts, const EmbeddingProviderConfig& cfg);
EmbeddingMatrix encode(const std::vector<std::string>& texts, EmbeddingProvider& provider,
                       const EmbeddingProviderConfig& cfg);

// In-place row normalization; throws DataError on an all-zero row.
void normalize_rows(MatrixF& m);

// --- On-disk vector cache ---
// Layout: magic "E11V", u32 version, u32 dim, u64 count, then `count`
// records of {32-byte key, dim little-endian f32}.

class VectorCache {
 public:
  VectorCache() = default;
  explicit VectorCache(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return order_.size(); }
  bool contains(const Sha256& key) const { return index_.count(key) > 0; }
  std::optional<VectorF> get(const Sha256& key) const;
  void put(const Sha256& key, const VectorF& vec);  // first write wins

  static VectorCache load(const std::string& path);
  // Atomic: writes a temp sibling then renames over `path`.
  void save(const std::string& path) const;

 private:
  struct KeyHash {
    std::size_t operator()(const Sha256& k) const {
      std::size_t h;
      std::memcpy(&h, k.data(), sizeof(h));
      return h;
    }
  };
  int dim_ = 0;
  std::unordered_map<Sha256, VectorF, KeyHash> index_;
  std::vector<Sha256> order_;  // insertion order, for deterministic files
};

// Write-through wrapper: serves hits from the cache, delegates misses to
// the inner provider (when given) and records the new vectors.
class CachingProvider : public EmbeddingProvider {
 public:
  CachingProvider(VectorCache cache, std::unique_ptr<EmbeddingProvider> inner,
                  std::string tag);
  MatrixF encode_batch(const std::vector<std::string>& texts) override;
  std::string tag() const override { return tag_; }
  const VectorCache& cache() const { return cache_; }

 private:
  VectorCache cache_;
  std::unique_ptr<EmbeddingProvider> inner_;  // null = read-only cache mode
  std::string tag_;
};

}  // namespace e11
