#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "e11/embedder.hpp"
#include "e11/scorer.hpp"

using namespace e11;

namespace {

EmbeddingProviderConfig stub_cfg(int dim = 8, std::uint64_t seed = 1) {
  EmbeddingProviderConfig cfg;
  cfg.kind = EmbeddingProviderConfig::Kind::stub;
  cfg.dim = dim;
  cfg.seed = seed;
  cfg.model_id = "test";
  return cfg;
}

}  // namespace

TEST_CASE("stub_encode is deterministic and unit-normalized") {
  const VectorF a = stub_encode("x", 8, 1);
  const VectorF b = stub_encode("x", 8, 1);
  CHECK(a == b);
  CHECK(std::abs(a.norm() - 1.0f) < 1e-5f);
  const VectorF c = stub_encode("some longer text with words", 64, 9);
  CHECK(std::abs(c.norm() - 1.0f) < 1e-5f);
}

TEST_CASE("stub_encode rejects empty text and tiny dims") {
  CHECK_THROWS_AS(stub_encode("", 8, 1), DataError);
  CHECK_THROWS_AS(stub_encode("  ", 8, 1), DataError);
  CHECK_THROWS_AS(stub_encode("x", 1, 1), DataError);
}

TEST_CASE("stub embeddings preserve bag-of-words locality across 100 seeds") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const VectorF base = stub_encode("a b c", 64, seed);
    const VectorF near = stub_encode("a b c d", 64, seed);
    const VectorF far = stub_encode("x y z", 64, seed);
    if (cosine(base, near) > cosine(base, far)) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("encode maps identical texts to identical rows in order") {
  const auto m = encode({"a", "a", "b"}, stub_cfg());
  CHECK(m.data.row(0) == m.data.row(1));
  CHECK(m.data.row(0) != m.data.row(2));
  CHECK(m.provider_tag == "stub:test");
  CHECK(m.normalized);
}

TEST_CASE("encode row order tracks input permutation") {
  const std::vector<std::string> texts = {"one", "two", "three", "four"};
  const auto base = encode(texts, stub_cfg());
  const auto permuted = encode({"three", "one", "four", "two"}, stub_cfg());
  CHECK(permuted.data.row(0) == base.data.row(2));
  CHECK(permuted.data.row(1) == base.data.row(0));
  CHECK(permuted.data.row(2) == base.data.row(3));
  CHECK(permuted.data.row(3) == base.data.row(1));
}

TEST_CASE("encode is batch-size independent") {
  const std::vector<std::string> texts = {"a", "b", "c", "d", "e", "f", "g"};
  auto cfg1 = stub_cfg();
  cfg1.batch_size = 1;
  auto cfg3 = stub_cfg();
  cfg3.batch_size = 3;
  const auto m1 = encode(texts, cfg1);
  const auto m3 = encode(texts, cfg3);
  CHECK(m1.data == m3.data);
}

TEST_CASE("normalization is idempotent within 1e-7") {
  auto m = encode({"alpha beta", "gamma"}, stub_cfg(32));
  MatrixF again = m.data;
  normalize_rows(again);
  CHECK(((again - m.data).cwiseAbs().maxCoeff()) <= 1e-7f);
}

TEST_CASE("encode validates dim against config") {
  auto cfg = stub_cfg(8);
  cfg.dim = 8;
  CHECK_NOTHROW(encode({"x"}, cfg));
  // Provider emits 8 dims; demand 16 via a mismatched config copy.
  auto provider = make_provider(stub_cfg(8));
  auto bad = stub_cfg(16);
  CHECK_THROWS_AS(encode({"x"}, *provider, bad), DataError);
}

TEST_CASE("vector cache round-trips and is insertion-order deterministic") {
  const auto tmp = std::filesystem::temp_directory_path() / "e11_cache_test.e11v";
  VectorCache cache(4);
  VectorF v1(4), v2(4);
  v1 << 1, 2, 3, 4;
  v2 << -1, 0, 0.5, 2;
  cache.put(cache_key("first"), v1);
  cache.put(cache_key("second"), v2);
  cache.save(tmp.string());

  const VectorCache loaded = VectorCache::load(tmp.string());
  CHECK(loaded.dim() == 4);
  CHECK(loaded.size() == 2);
  REQUIRE(loaded.get(cache_key("first")).has_value());
  CHECK(*loaded.get(cache_key("first")) == v1);
  CHECK(*loaded.get(cache_key("second")) == v2);
  CHECK_FALSE(loaded.get(cache_key("third")).has_value());

  // Identical content => identical bytes.
  const auto tmp2 = std::filesystem::temp_directory_path() / "e11_cache_test2.e11v";
  loaded.save(tmp2.string());
  std::ifstream a(tmp, std::ios::binary), b(tmp2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);
  std::filesystem::remove(tmp);
  std::filesystem::remove(tmp2);
}

TEST_CASE("file_cache provider errors on a miss, naming the absent hash") {
  const auto tmp = std::filesystem::temp_directory_path() / "e11_cache_miss.e11v";
  VectorCache cache(4);
  VectorF v(4);
  v << 1, 0, 0, 0;
  cache.put(cache_key("present"), v);
  cache.save(tmp.string());

  EmbeddingProviderConfig cfg;
  cfg.kind = EmbeddingProviderConfig::Kind::file_cache;
  cfg.path = tmp.string();
  cfg.dim = 4;
  CHECK_NOTHROW(encode({"present"}, cfg));
  try {
    encode({"present", "absent"}, cfg);
    FAIL("expected a missing-key error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(to_hex(cache_key("absent"))) != std::string::npos);
  }
  std::filesystem::remove(tmp);
}

TEST_CASE("caching provider writes through to the inner provider") {
  auto inner = make_provider(stub_cfg(8, 5));
  CachingProvider caching(VectorCache(), std::move(inner), "stub:test");
  const auto rows = caching.encode_batch({"aa", "bb"});
  CHECK(rows.rows() == 2);
  CHECK(caching.cache().size() == 2);
  // Second call is served from the cache (identical rows).
  const auto again = caching.encode_batch({"bb", "aa"});
  CHECK(again.row(0) == rows.row(1));
  CHECK(again.row(1) == rows.row(0));
}

TEST_CASE("http provider round-trips and retries on 500") {
  std::atomic<int> hits{0};
  httplib::Server server;
  server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const auto texts = body.at("texts").get<std::vector<std::string>>();
    if (hits.fetch_add(1) == 0) {
      res.status = 500;  // first attempt fails, client must retry
      return;
    }
    nlohmann::json out;
    out["dim"] = 4;
    nlohmann::json vectors = nlohmann::json::array();
    for (std::size_t i = 0; i < texts.size(); ++i)
      vectors.push_back({1.0, 0.0, static_cast<double>(i), 0.5});
    out["vectors"] = vectors;
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  EmbeddingProviderConfig cfg;
  cfg.kind = EmbeddingProviderConfig::Kind::http;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.model_id = "remote-model";
  cfg.http_backoff_ms = 1;
  cfg.normalize = false;
  const auto m = encode({"t0", "t1"}, cfg);
  CHECK(m.provider_tag == "http:remote-model");
  CHECK(m.data.rows() == 2);
  CHECK(m.data(1, 2) == doctest::Approx(1.0));
  CHECK(hits.load() >= 2);

  server.stop();
  server_thread.join();
}

TEST_CASE("http provider gives up after the configured attempts") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  EmbeddingProviderConfig cfg;
  cfg.kind = EmbeddingProviderConfig::Kind::http;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.http_backoff_ms = 1;
  CHECK_THROWS_AS(encode({"x"}, cfg), DataError);
  CHECK(hits.load() == 3);

  server.stop();
  server_thread.join();
}
