#include "e11/scorer.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "e11/text.hpp"

namespace e11 {

using nlohmann::json;

Scorer::Scorer(const ItemBank& bank, const EmbeddingProviderConfig& provider_cfg,
               ScoringConfig cfg)
    : Scorer(bank, std::shared_ptr<EmbeddingProvider>(make_provider(provider_cfg)),
             provider_cfg, cfg) {}

Scorer::Scorer(const ItemBank& bank, std::shared_ptr<EmbeddingProvider> provider,
               const EmbeddingProviderConfig& provider_cfg, ScoringConfig cfg)
    : item_ids_(bank.item_ids()),
      bank_fingerprint_(bank.fingerprint()),
      provider_cfg_(provider_cfg),
      cfg_(cfg),
      provider_(std::move(provider)) {
  if (cfg_.chunk_size < 1) throw ConfigError("scorer: chunk_size must be >= 1");
  std::vector<std::string> texts;
  texts.reserve(bank.items.size());
  for (const auto& item : bank.items) texts.push_back(item.text);
  item_vectors_ = encode(texts, *provider_, provider_cfg_);
  item_norms_.resize(item_vectors_.data.rows());
  for (Index j = 0; j < item_vectors_.data.rows(); ++j) {
    item_norms_[j] = item_vectors_.data.row(j).cast<double>().norm();
    if (item_norms_[j] == 0.0)
      throw DataError("scorer: zero item vector for " + item_ids_[static_cast<std::size_t>(j)]);
  }
}

MatrixF Scorer::embed_chunks(const std::vector<std::string>& chunks) const {
  return encode(chunks, *provider_, provider_cfg_).data;
}

VectorD Scorer::score_text(std::string_view text) const {
  const auto chunks = chunk_words(text, cfg_.chunk_size);
  const MatrixF emb = embed_chunks(chunks);

  const Index p = item_vectors_.data.rows();
  VectorD acc = VectorD::Zero(p);
  double total_weight = 0.0;
  for (Index c = 0; c < emb.rows(); ++c) {
    const double chunk_norm = emb.row(c).cast<double>().norm();
    if (chunk_norm == 0.0) throw DataError("scorer: zero chunk embedding");
    // One GEMV per chunk keeps results independent of batch grouping.
    VectorD dots = (item_vectors_.data * emb.row(c).transpose()).cast<double>();
    const double w =
        cfg_.length_weighted_mean
            ? static_cast<double>(word_count(chunks[static_cast<std::size_t>(c)]))
            : 1.0;
    for (Index j = 0; j < p; ++j)
      acc[j] += w * std::clamp(dots[j] / (chunk_norm * item_norms_[j]), -1.0, 1.0);
    total_weight += w;
  }
  return acc / total_weight;
}

ScoreCorpusResult Scorer::score_corpus(const std::vector<Post>& posts) const {
  if (posts.empty()) throw DataError("score_corpus: empty post stream");

  ScoreCorpusResult result;
  const Index p = static_cast<Index>(item_ids_.size());
  std::vector<VectorD> rows;
  rows.reserve(posts.size());
  for (const Post& post : posts) {
    try {
      rows.push_back(score_text(post.text));
      result.matrix.post_ids.push_back(post.id);
    } catch (const Error& e) {
      result.skipped.push_back({post.id, e.what()});
    }
  }
  if (rows.empty()) throw DataError("score_corpus: every post failed to score");

  result.matrix.item_ids = item_ids_;
  result.matrix.bank_fingerprint = bank_fingerprint_;
  result.matrix.provider_tag = item_vectors_.provider_tag;
  result.matrix.scores.resize(static_cast<Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i)
    result.matrix.scores.row(static_cast<Index>(i)) = rows[i].cast<float>().transpose();
  return result;
}

namespace {

void save_matrix(const json& header, const MatrixF& scores, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("score matrix: cannot write " + tmp.string());
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(scores.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(scores.size())));
    if (!out) throw DataError("score matrix: write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct RawMatrix {
  json header;
  MatrixF scores;
};

RawMatrix load_matrix(const std::string& path, const char* expected_kind,
                      const char* column_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("score matrix: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw DataError("score matrix: missing header in " + path);
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::parse_error& e) {
    throw DataError("score matrix: bad header in " + path + ": " + e.what());
  }
  if (header.value("kind", std::string(expected_kind)) != expected_kind)
    throw DataError("score matrix: " + path + " is not a " + expected_kind + " artifact");

  const auto n = header.at("post_count").get<Index>();
  const auto cols = header.at(column_key).get<std::vector<std::string>>();
  RawMatrix raw;
  raw.header = std::move(header);
  raw.scores.resize(n, static_cast<Index>(cols.size()));
  in.read(reinterpret_cast<char*>(raw.scores.data()),
          static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(raw.scores.size())));
  if (!in) throw DataError("score matrix: truncated payload in " + path);
  return raw;
}

}  // namespace

void save_score_matrix(const ItemScoreMatrix& m, const std::string& path) {
  json header = {{"kind", "item_scores"},
                 {"post_count", m.post_ids.size()},
                 {"item_ids", m.item_ids},
                 {"post_ids", m.post_ids},
                 {"bank_fingerprint", m.bank_fingerprint},
                 {"provider_tag", m.provider_tag}};
  save_matrix(header, m.scores, path);
}

void save_score_matrix(const FactorScoreMatrix& m, const std::string& path) {
  json header = {{"kind", "factor_scores"},
                 {"post_count", m.post_ids.size()},
                 {"factor_names", m.factor_names},
                 {"post_ids", m.post_ids},
                 {"model_fingerprint", m.model_fingerprint},
                 {"provider_tag", m.provider_tag}};
  save_matrix(header, m.scores, path);
}

ItemScoreMatrix load_item_score_matrix(const std::string& path) {
  RawMatrix raw = load_matrix(path, "item_scores", "item_ids");
  ItemScoreMatrix m;
  m.item_ids = raw.header.at("item_ids").get<std::vector<std::string>>();
  m.post_ids = raw.header.at("post_ids").get<std::vector<std::string>>();
  m.bank_fingerprint = raw.header.value("bank_fingerprint", "");
  m.provider_tag = raw.header.value("provider_tag", "");
  m.scores = std::move(raw.scores);
  if (static_cast<Index>(m.post_ids.size()) != m.scores.rows())
    throw DataError("score matrix: post_ids/post_count mismatch in " + path);
  return m;
}

FactorScoreMatrix load_factor_score_matrix(const std::string& path) {
  RawMatrix raw = load_matrix(path, "factor_scores", "factor_names");
  FactorScoreMatrix m;
  m.factor_names = raw.header.at("factor_names").get<std::vector<std::string>>();
  m.post_ids = raw.header.at("post_ids").get<std::vector<std::string>>();
  m.model_fingerprint = raw.header.value("model_fingerprint", "");
  m.provider_tag = raw.header.value("provider_tag", "");
  m.scores = std::move(raw.scores);
  if (static_cast<Index>(m.post_ids.size()) != m.scores.rows())
    throw DataError("score matrix: post_ids/post_count mismatch in " + path);
  return m;
}

namespace {

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

void export_csv(const std::vector<std::string>& row_ids,
                const std::vector<std::string>& col_ids, const MatrixF& scores,
                const char* id_header, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("csv export: cannot write " + path);
  out << id_header;
  for (const auto& c : col_ids) out << ',' << csv_quote(c);
  out << '\n';
  char buf[64];
  for (Index i = 0; i < scores.rows(); ++i) {
    out << csv_quote(row_ids[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < scores.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(scores(i, j)));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace

void export_scores_csv(const ItemScoreMatrix& m, const std::string& path) {
  export_csv(m.post_ids, m.item_ids, m.scores, "post_id", path);
}

void export_scores_csv(const FactorScoreMatrix& m, const std::string& path) {
  export_csv(m.post_ids, m.factor_names, m.scores, "post_id", path);
}

}  // namespace e11
