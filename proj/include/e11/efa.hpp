#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "e11/common.hpp"
#include "e11/itembank.hpp"

namespace e11 {

struct CorrelationMatrix {
  MatrixD R;    // p x p, unit diagonal, symmetric
  Index n = 0;  // sample size it was computed from
};

// Pearson correlations with exact unit diagonal; symmetry enforced by
// (R + Rᵀ)/2. Requires n >= p+1 and positive variance in every column.
CorrelationMatrix correlation_matrix(const Eigen::Ref<const MatrixD>& X);

struct KmoResult {
  double overall = 0.0;
  VectorD per_item_msa;
};

// Kaiser–Meyer–Olkin sampling adequacy from partial correlations
// q_ij = -inv(R)_ij / sqrt(inv(R)_ii · inv(R)_jj).
KmoResult kmo(const CorrelationMatrix& corr);

struct BartlettResult {
  double chi2 = 0.0;
  std::int64_t df = 0;  // p(p-1)/2
  double p_value = 1.0;
};

// Sphericity test: chi2 = -(n - 1 - (2p+5)/6) · ln det(R).
BartlettResult bartlett(const CorrelationMatrix& corr);

struct ParallelAnalysisResult {
  int k = 0;
  VectorD observed;    // eigenvalues of R(X), descending
  VectorD thresholds;  // per-rank simulation quantiles
};

// Horn's rule: k = leading ranks where the observed eigenvalue exceeds the
// `quantile` of eigenvalues from `iters` synthetic standard-normal datasets
// of the same shape, stopping at the first failure.
ParallelAnalysisResult parallel_analysis(const Eigen::Ref<const MatrixD>& X, int iters = 100,
                                         double quantile = 0.95, std::uint64_t seed = 0);

struct EfaFitMeta {
  Index n = 0;
  std::string extraction = "principal-axis";
  std::string rotation = "varimax";
  bool converged = false;
  int iterations = 0;
  bool heywood = false;
  std::string r_hash;  // SHA-256 of R's canonical bytes, for W = R⁻¹Λ audits
};

struct EfaModel {
  std::vector<std::string> item_ids;  // canonical order
  VectorD means;
  VectorD sds;
  MatrixD loadings;       // p x k
  VectorD eigenvalues;    // of R, length p, descending
  VectorD communalities;  // row sums of squared loadings
  MatrixD score_weights;  // p x k, R⁻¹Λ
  std::vector<std::string> factor_names;
  int k = 0;
  EfaFitMeta fit_meta;
  std::string bank_fingerprint;

  std::string fingerprint() const;
};

struct EfaOptions {
  int max_iter = 100;
  double tol = 1e-6;
  bool rotate = true;  // varimax with Kaiser normalization
};

// Principal-axis factoring of standardized item scores: SMC-initialized
// communalities, iterated eigendecomposition of the reduced correlation
// matrix, varimax rotation, sign-fixed and ordered by explained variance.
EfaModel fit_efa(const Eigen::Ref<const MatrixD>& X, int k, const EfaOptions& opts = {});

struct VarimaxResult {
  MatrixD loadings;  // p x k
  MatrixD rotation;  // k x k orthonormal
  int iterations = 0;
};

VarimaxResult varimax(const Eigen::Ref<const MatrixD>& loadings, int max_iter = 1000,
                      double tol = 1e-8);

// Raw varimax criterion (sum over factors of the variance of squared
// loadings), used by tests and the rotation's convergence check.
double varimax_criterion(const Eigen::Ref<const MatrixD>& loadings);

// Regression (Thurstone) scores: Z·W with the model's stored means/sds.
// X columns must match model.item_ids in count and order.
MatrixD factor_scores(const Eigen::Ref<const MatrixD>& X, const EfaModel& model);

struct TopLoadingRow {
  std::string factor;
  std::string item_id;
  double loading = 0.0;
  std::string scale;
  std::string source;
  std::string text;
};

// Per factor, the m largest-|loading| items with metadata, signs preserved.
std::vector<TopLoadingRow> top_loadings_report(const EfaModel& model, const ItemBank& bank,
                                               std::size_t m);

void save_efa_model(const EfaModel& model, const std::string& path);
EfaModel load_efa_model(const std::string& path);

// Tucker's congruence coefficient between two loading columns.
double tucker_congruence(const Eigen::Ref<const VectorD>& a, const Eigen::Ref<const VectorD>& b);

}  // namespace e11
