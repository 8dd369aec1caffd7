#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "e11/common.hpp"
#include "e11/corpus.hpp"
#include "e11/scorer.hpp"

namespace e11 {

// 30.44-day month used for all offset arithmetic (exact in seconds).
constexpr std::int64_t kSecondsPerMonth = 2630016;

// Post-id keyed view over a factor score matrix.
class FactorScoreLookup {
 public:
  explicit FactorScoreLookup(const FactorScoreMatrix& scores);
  std::optional<Index> row_of(const std::string& post_id) const;
  const FactorScoreMatrix& matrix() const { return *scores_; }
  Index k() const { return scores_->scores.cols(); }

 private:
  const FactorScoreMatrix* scores_;
  std::unordered_map<std::string, Index> rows_;
};

struct LabeledFeatureSet {
  std::vector<std::string> user_ids;
  MatrixD X;                  // m x k mean factor scores in window
  std::vector<int> y;         // joiner=1, control=0
  int cutoff_months_before = 0;
  std::vector<std::string> excluded_users;  // no qualifying posts
};

// Per-user mean factor scores over posts with created_utc < t0 - offset
// (and >= t0 - lookback when lookback_months > 0). Timelines without t0
// are rejected; users with an empty window are excluded and reported.
LabeledFeatureSet build_features(const std::vector<UserTimeline>& timelines,
                                 const FactorScoreLookup& scores, int months_before,
                                 int lookback_months = 0);

struct LogisticModel {
  VectorD weights;
  double intercept = 0.0;
  double l2 = 0.0;
  bool converged = false;
  int iterations = 0;

  VectorD decision(const Eigen::Ref<const MatrixD>& X) const;
};

// L2-penalized logistic regression via IRLS; the intercept is unpenalized.
LogisticModel fit_logistic(const Eigen::Ref<const MatrixD>& X, const std::vector<int>& y,
                           double l2 = 1.0, double tol = 1e-8, int max_iter = 100);

// P(random positive outranks random negative), ties credited 0.5.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Fold index per row; per-fold class counts within 1 of proportionality.
std::vector<int> stratified_kfold(const std::vector<int>& y, int folds, std::uint64_t seed);

struct AucPoint {
  int months_before = 0;
  bool missing = false;
  std::string missing_reason;
  double auc_mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_joiners = 0;
  std::size_t n_controls = 0;
  std::vector<double> fold_aucs;
  std::vector<LogisticModel> fold_models;
};

struct AucCurve {
  std::vector<AucPoint> points;
};

struct SweepConfig {
  int folds = 5;
  double l2 = 1.0;
  std::uint64_t seed = 0;
  int lookback_months = 0;  // 0 = unlimited history
};

// For each offset: build features, stratified k-fold CV with train-fold
// standardization, fold AUCs, mean and 95% t-interval across folds.
// Degenerate offsets are marked missing rather than fabricated.
AucCurve months_before_sweep(const std::vector<UserTimeline>& timelines,
                             const FactorScoreLookup& scores, const std::vector<int>& offsets,
                             const SweepConfig& cfg);

void export_auc_curve_csv(const AucCurve& curve, const std::string& path);

}  // namespace e11
