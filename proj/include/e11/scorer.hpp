#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "e11/common.hpp"
#include "e11/corpus.hpp"
#include "e11/embedder.hpp"
#include "e11/itembank.hpp"

namespace e11 {

// u·v / (‖u‖‖v‖), clamped to [-1,1]. Throws on dim mismatch or a zero norm.
template <typename DA, typename DB>
double cosine(const Eigen::MatrixBase<DA>& u, const Eigen::MatrixBase<DB>& v) {
  if (u.size() != v.size()) throw DataError("cosine: dimension mismatch");
  const double nu = u.template cast<double>().norm();
  const double nv = v.template cast<double>().norm();
  if (nu == 0.0 || nv == 0.0) throw DataError("cosine: zero vector");
  const double c = u.template cast<double>().dot(v.template cast<double>()) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

struct ItemScoreMatrix {
  std::vector<std::string> post_ids;  // n
  std::vector<std::string> item_ids;  // p, canonical bank order
  MatrixF scores;                     // n x p in [-1,1]
  std::string bank_fingerprint;
  std::string provider_tag;
};

struct FactorScoreMatrix {
  std::vector<std::string> post_ids;      // n
  std::vector<std::string> factor_names;  // k
  MatrixF scores;                         // n x k
  std::string model_fingerprint;
  std::string provider_tag;
};

struct ScoringConfig {
  std::size_t chunk_size = 100;
  bool length_weighted_mean = false;  // weight chunks by word count
};

struct SkippedPost {
  std::string post_id;
  std::string message;
};

struct ScoreCorpusResult {
  ItemScoreMatrix matrix;
  std::vector<SkippedPost> skipped;
};

// Embeds the bank once and scores texts chunk-by-chunk against it.
class Scorer {
 public:
  Scorer(const ItemBank& bank, const EmbeddingProviderConfig& provider_cfg,
         ScoringConfig cfg = {});
  // Caller-supplied provider (e.g. a write-through cache wrapper).
  Scorer(const ItemBank& bank, std::shared_ptr<EmbeddingProvider> provider,
         const EmbeddingProviderConfig& provider_cfg, ScoringConfig cfg = {});

  // Mean over 100-word chunks of the cosine against each item; length p.
  VectorD score_text(std::string_view text) const;
  VectorD score_post(const Post& post) const { return score_text(post.text); }

  // Rows in input order; posts that fail to score are skipped and reported.
  // Throws DataError when the stream is empty or every post is skipped.
  ScoreCorpusResult score_corpus(const std::vector<Post>& posts) const;

  const EmbeddingMatrix& item_vectors() const { return item_vectors_; }

 private:
  MatrixF embed_chunks(const std::vector<std::string>& chunks) const;

  std::vector<std::string> item_ids_;
  std::string bank_fingerprint_;
  EmbeddingProviderConfig provider_cfg_;
  ScoringConfig cfg_;
  std::shared_ptr<EmbeddingProvider> provider_;
  EmbeddingMatrix item_vectors_;
  VectorD item_norms_;
};

// --- Score-matrix container ---
// One JSON header line, then n rows of little-endian f32.

void save_score_matrix(const ItemScoreMatrix& m, const std::string& path);
void save_score_matrix(const FactorScoreMatrix& m, const std::string& path);
ItemScoreMatrix load_item_score_matrix(const std::string& path);
FactorScoreMatrix load_factor_score_matrix(const std::string& path);

void export_scores_csv(const ItemScoreMatrix& m, const std::string& path);
void export_scores_csv(const FactorScoreMatrix& m, const std::string& path);

}  // namespace e11
