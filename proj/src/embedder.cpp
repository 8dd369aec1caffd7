#include "e11/embedder.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "e11/text.hpp"

namespace e11 {

using nlohmann::json;

void EmbeddingProviderConfig::validate() const {
  if (dim != 0 && dim < 2) throw ConfigError("embedder: dim must be >= 2 when set");
  if (batch_size < 1) throw ConfigError("embedder: batch_size must be >= 1");
  switch (kind) {
    case Kind::stub:
      if (dim < 2) throw ConfigError("embedder: stub provider needs an explicit dim >= 2");
      break;
    case Kind::http:
      if (endpoint.empty()) throw ConfigError("embedder: http provider needs an endpoint");
      break;
    case Kind::file_cache:
      if (path.empty()) throw ConfigError("embedder: file_cache provider needs a path");
      break;
  }
}

const char* provider_kind_name(EmbeddingProviderConfig::Kind kind) {
  switch (kind) {
    case EmbeddingProviderConfig::Kind::http: return "http";
    case EmbeddingProviderConfig::Kind::file_cache: return "cache";
    case EmbeddingProviderConfig::Kind::stub: return "stub";
  }
  return "?";
}

VectorF stub_encode(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 2) throw DataError("stub_encode: dim must be >= 2");
  const auto words = split_words(text);
  if (words.empty()) throw DataError("stub_encode: empty text");

  // Each word scatters 8 signed values at hashed positions; summing over
  // the multiset approximately preserves bag-of-words overlap in cosine.
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
  for (const auto& w : words) {
    const std::uint64_t base = hash_bytes64(w, seed);
    for (int j = 0; j < 8; ++j) {
      const std::uint64_t h = mix64(base + static_cast<std::uint64_t>(j));
      const int idx = static_cast<int>(h % static_cast<std::uint64_t>(dim));
      const double mag = 0.5 + static_cast<double>((h >> 11) & 0xFFFFF) / double(0x100000);
      acc[idx] += (h >> 63) ? -mag : mag;
    }
  }
  const double norm = acc.norm();
  if (norm == 0.0) throw DataError("stub_encode: degenerate zero vector");
  return (acc / norm).cast<float>();
}

Sha256 cache_key(std::string_view text) { return sha256(text); }

namespace {

class StubProvider : public EmbeddingProvider {
 public:
  StubProvider(int dim, std::uint64_t seed, std::string model_id)
      : dim_(dim), seed_(seed), tag_("stub:" + std::move(model_id)) {}

  MatrixF encode_batch(const std::vector<std::string>& texts) override {
    MatrixF out(static_cast<Index>(texts.size()), dim_);
    for (std::size_t i = 0; i < texts.size(); ++i)
      out.row(static_cast<Index>(i)) = stub_encode(texts[i], dim_, seed_).transpose();
    return out;
  }
  std::string tag() const override { return tag_; }

 private:
  int dim_;
  std::uint64_t seed_;
  std::string tag_;
};

class HttpProvider : public EmbeddingProvider {
 public:
  explicit HttpProvider(const EmbeddingProviderConfig& cfg)
      : endpoint_(cfg.endpoint),
        model_id_(cfg.model_id),
        attempts_(cfg.http_attempts),
        backoff_ms_(cfg.http_backoff_ms),
        tag_("http:" + cfg.model_id) {}

  MatrixF encode_batch(const std::vector<std::string>& texts) override {
    json req = {{"model", model_id_}, {"texts", texts}};
    const std::string body = req.dump();
    std::string last_error;
    for (int attempt = 0; attempt < attempts_; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
      httplib::Client client(endpoint_);
      client.set_read_timeout(120, 0);
      auto res = client.Post("/embed", body, "application/json");
      if (!res) {
        last_error = "connection failed";
        continue;
      }
      if (res->status != 200) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      return parse_response(res->body, texts.size());
    }
    throw DataError("embedder: http provider failed after " + std::to_string(attempts_) +
                    " attempts (" + last_error + ")");
  }
  std::string tag() const override { return tag_; }

 private:
  static MatrixF parse_response(const std::string& body, std::size_t expected_rows) {
    json j = json::parse(body);
    const int dim = j.at("dim").get<int>();
    const auto& vectors = j.at("vectors");
    if (vectors.size() != expected_rows)
      throw DataError("embedder: response row count mismatch");
    MatrixF out(static_cast<Index>(expected_rows), dim);
    for (std::size_t i = 0; i < expected_rows; ++i) {
      const auto& row = vectors[i];
      if (static_cast<int>(row.size()) != dim)
        throw DataError("embedder: ragged response vector");
      for (int d = 0; d < dim; ++d)
        out(static_cast<Index>(i), d) = row[d].get<float>();
    }
    return out;
  }

  std::string endpoint_;
  std::string model_id_;
  int attempts_;
  int backoff_ms_;
  std::string tag_;
};

}  // namespace

std::optional<VectorF> VectorCache::get(const Sha256& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void VectorCache::put(const Sha256& key, const VectorF& vec) {
  if (dim_ == 0) dim_ = static_cast<int>(vec.size());
  if (vec.size() != dim_) throw DataError("vector cache: dim mismatch on put");
  if (index_.emplace(key, vec).second) order_.push_back(key);
}

namespace {
constexpr char kMagic[4] = {'E', '1', '1', 'V'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

VectorCache VectorCache::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("vector cache: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("vector cache: bad magic in " + path);
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCacheVersion)
    throw DataError("vector cache: unsupported version " + std::to_string(version));
  const auto dim = read_le<std::uint32_t>(in);
  const auto count = read_le<std::uint64_t>(in);
  if (dim < 1) throw DataError("vector cache: invalid dim");

  VectorCache cache(static_cast<int>(dim));
  Sha256 key;
  VectorF vec(static_cast<Index>(dim));
  for (std::uint64_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(key.data()), key.size());
    in.read(reinterpret_cast<char*>(vec.data()),
            static_cast<std::streamsize>(sizeof(float) * dim));
    if (!in) throw DataError("vector cache: truncated file " + path);
    cache.put(key, vec);
  }
  return cache;
}

void VectorCache::save(const std::string& path) const {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("vector cache: cannot write " + tmp.string());
    out.write(kMagic, 4);
    write_le(out, kCacheVersion);
    write_le(out, static_cast<std::uint32_t>(dim_));
    write_le(out, static_cast<std::uint64_t>(order_.size()));
    for (const auto& key : order_) {
      const VectorF& vec = index_.at(key);
      out.write(reinterpret_cast<const char*>(key.data()), key.size());
      out.write(reinterpret_cast<const char*>(vec.data()),
                static_cast<std::streamsize>(sizeof(float) * vec.size()));
    }
    if (!out) throw DataError("vector cache: write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

CachingProvider::CachingProvider(VectorCache cache, std::unique_ptr<EmbeddingProvider> inner,
                                 std::string tag)
    : cache_(std::move(cache)), inner_(std::move(inner)), tag_(std::move(tag)) {}

MatrixF CachingProvider::encode_batch(const std::vector<std::string>& texts) {
  std::vector<Sha256> keys(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys[i] = cache_key(texts[i]);
    if (!cache_.contains(keys[i])) missing.push_back(i);
  }
  if (!missing.empty()) {
    if (!inner_) {
      std::string msg = "vector cache: missing keys:";
      for (std::size_t i : missing) msg += " " + to_hex(keys[i]);
      throw DataError(msg);
    }
    std::vector<std::string> missing_texts;
    missing_texts.reserve(missing.size());
    for (std::size_t i : missing) missing_texts.push_back(texts[i]);
    MatrixF fresh = inner_->encode_batch(missing_texts);
    for (std::size_t m = 0; m < missing.size(); ++m)
      cache_.put(keys[missing[m]], fresh.row(static_cast<Index>(m)).transpose());
  }
  const int dim = cache_.dim();
  MatrixF out(static_cast<Index>(texts.size()), dim);
  for (std::size_t i = 0; i < texts.size(); ++i)
    out.row(static_cast<Index>(i)) = cache_.get(keys[i])->transpose();
  return out;
}

std::unique_ptr<EmbeddingProvider> make_provider(const EmbeddingProviderConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case EmbeddingProviderConfig::Kind::stub:
      return std::make_unique<StubProvider>(cfg.dim, cfg.seed, cfg.model_id);
    case EmbeddingProviderConfig::Kind::http:
      return std::make_unique<HttpProvider>(cfg);
    case EmbeddingProviderConfig::Kind::file_cache: {
      VectorCache cache = VectorCache::load(cfg.path);
      return std::make_unique<CachingProvider>(std::move(cache), nullptr,
                                               "cache:" + cfg.model_id);
    }
  }
  throw ConfigError("embedder: unknown provider kind");
}

void normalize_rows(MatrixF& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).cast<double>().norm();
    if (norm == 0.0) throw DataError("embedding: all-zero row " + std::to_string(i));
    m.row(i) /= static_cast<float>(norm);
  }
}

EmbeddingMatrix encode(const std::vector<std::string>& texts, EmbeddingProvider& provider,
                       const EmbeddingProviderConfig& cfg) {
  if (texts.empty()) throw DataError("encode: no texts");
  for (const auto& t : texts)
    if (trim(t).empty()) throw DataError("encode: blank text in input");

  MatrixF data;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
    const std::size_t end = std::min(begin + batch, texts.size());
    std::vector<std::string> slice(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                   texts.begin() + static_cast<std::ptrdiff_t>(end));
    MatrixF rows = provider.encode_batch(slice);
    if (rows.rows() != static_cast<Index>(slice.size()))
      throw DataError("encode: provider returned wrong row count");
    if (data.size() == 0) {
      data.resize(static_cast<Index>(texts.size()), rows.cols());
    } else if (rows.cols() != data.cols()) {
      throw DataError("encode: provider changed dimension mid-stream");
    }
    data.middleRows(static_cast<Index>(begin), rows.rows()) = rows;
  }

  if (cfg.dim != 0 && data.cols() != cfg.dim)
    throw DataError("encode: provider dim " + std::to_string(data.cols()) +
                    " != configured dim " + std::to_string(cfg.dim));
  if (!data.allFinite()) throw DataError("encode: non-finite values from provider");

  EmbeddingMatrix out;
  out.provider_tag = provider.tag();
  out.normalized = cfg.normalize;
  if (cfg.normalize) normalize_rows(data);
  out.data = std::move(data);
  return out;
}

EmbeddingMatrix encode(const std::vector<std::string>& texts,
                       const EmbeddingProviderConfig& cfg) {
  auto provider = make_provider(cfg);
  return encode(texts, *provider, cfg);
}

}  // namespace e11
