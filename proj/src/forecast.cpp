#include "e11/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "e11/stats.hpp"

namespace e11 {

FactorScoreLookup::FactorScoreLookup(const FactorScoreMatrix& scores) : scores_(&scores) {
  rows_.reserve(scores.post_ids.size());
  for (std::size_t i = 0; i < scores.post_ids.size(); ++i)
    rows_.emplace(scores.post_ids[i], static_cast<Index>(i));
}

std::optional<Index> FactorScoreLookup::row_of(const std::string& post_id) const {
  auto it = rows_.find(post_id);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

LabeledFeatureSet build_features(const std::vector<UserTimeline>& timelines,
                                 const FactorScoreLookup& scores, int months_before,
                                 int lookback_months) {
  if (months_before < 0) throw DataError("build_features: months_before must be >= 0");
  const Index k = scores.k();

  LabeledFeatureSet fs;
  fs.cutoff_months_before = months_before;
  std::vector<VectorD> rows;
  for (const UserTimeline& tl : timelines) {
    if (!tl.t0) throw DataError("build_features: timeline for '" + tl.user + "' has no t0");
    const std::int64_t cutoff = *tl.t0 - static_cast<std::int64_t>(months_before) * kSecondsPerMonth;
    const std::int64_t earliest =
        lookback_months > 0
            ? *tl.t0 - static_cast<std::int64_t>(lookback_months) * kSecondsPerMonth
            : std::numeric_limits<std::int64_t>::min();
    VectorD acc = VectorD::Zero(k);
    std::size_t used = 0;
    for (const Post& p : tl.posts) {
      if (p.created_utc >= cutoff || p.created_utc < earliest) continue;
      const auto row = scores.row_of(p.id);
      if (!row) continue;  // post filtered out upstream of scoring
      acc += scores.matrix().scores.row(*row).cast<double>();
      ++used;
    }
    if (used == 0) {
      fs.excluded_users.push_back(tl.user);
      continue;
    }
    rows.push_back(acc / static_cast<double>(used));
    fs.user_ids.push_back(tl.user);
    fs.y.push_back(tl.cohort == Cohort::joiner ? 1 : 0);
  }
  if (rows.empty()) throw DataError("build_features: every user excluded (empty windows)");

  fs.X.resize(static_cast<Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i) fs.X.row(static_cast<Index>(i)) = rows[i];
  return fs;
}

VectorD LogisticModel::decision(const Eigen::Ref<const MatrixD>& X) const {
  return (X * weights).array() + intercept;
}

LogisticModel fit_logistic(const Eigen::Ref<const MatrixD>& X, const std::vector<int>& y,
                           double l2, double tol, int max_iter) {
  const Index n = X.rows();
  const Index k = X.cols();
  if (static_cast<std::size_t>(n) != y.size())
    throw DataError("fit_logistic: label count mismatch");
  if (!X.allFinite()) throw DataError("fit_logistic: non-finite features");
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos == 0 || pos == n) throw DataError("fit_logistic: both classes required");
  if (l2 < 0.0) throw DataError("fit_logistic: l2 must be >= 0");

  // Design matrix with intercept column first; ridge skips the intercept.
  MatrixD design(n, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = X;
  VectorD beta = VectorD::Zero(k + 1);
  VectorD penalty = VectorD::Constant(k + 1, l2);
  penalty[0] = 0.0;

  LogisticModel model;
  model.l2 = l2;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const VectorD eta = design * beta;
    const VectorD mu = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    const VectorD w = mu.array() * (1.0 - mu.array());
    VectorD grad = design.transpose() * (Eigen::Map<const Eigen::VectorXi>(y.data(), n)
                                             .cast<double>() -
                                         mu);
    grad -= penalty.asDiagonal() * beta;
    MatrixD hess = design.transpose() * w.asDiagonal() * design;
    hess += MatrixD(penalty.asDiagonal());
    // Minimal-norm solve keeps unidentified directions (e.g. all-zero
    // features with l2=0) at exactly zero.
    const VectorD step = hess.completeOrthogonalDecomposition().solve(grad);
    beta += step;
    if (!beta.allFinite()) throw DataError("fit_logistic: diverged to non-finite parameters");
    if (step.cwiseAbs().maxCoeff() < tol) {
      model.converged = true;
      ++iter;
      break;
    }
  }
  model.iterations = iter;
  model.intercept = beta[0];
  model.weights = beta.tail(k);
  return model;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw DataError("roc_auc: need equal-length scores and labels");
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError("roc_auc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc: both classes required");

  // Mann–Whitney with midranks; exact tie credit of 0.5.
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]] == 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) *
                                      (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<int> stratified_kfold(const std::vector<int>& y, int folds, std::uint64_t seed) {
  if (folds < 2) throw DataError("stratified_kfold: folds must be >= 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < static_cast<std::size_t>(folds) || neg.size() < static_cast<std::size_t>(folds))
    throw DataError("stratified_kfold: each class needs at least `folds` members (" +
                    std::to_string(pos.size()) + " positive, " + std::to_string(neg.size()) +
                    " negative, folds=" + std::to_string(folds) + ")");

  std::mt19937_64 rng(seed);
  std::vector<int> assignment(y.size(), -1);
  for (auto* cls : {&pos, &neg}) {
    std::shuffle(cls->begin(), cls->end(), rng);
    for (std::size_t i = 0; i < cls->size(); ++i)
      assignment[(*cls)[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  return assignment;
}

namespace {

struct FoldStandardizer {
  VectorD mean;
  VectorD sd;

  static FoldStandardizer fit(const Eigen::Ref<const MatrixD>& X) {
    FoldStandardizer s;
    s.mean = X.colwise().mean();
    s.sd.resize(X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
      const double ss = (X.col(j).array() - s.mean[j]).square().sum();
      const double sd = std::sqrt(ss / std::max<double>(1.0, static_cast<double>(X.rows() - 1)));
      s.sd[j] = sd > 0.0 ? sd : 1.0;  // constant features contribute zero after centering
    }
    return s;
  }

  MatrixD apply(const Eigen::Ref<const MatrixD>& X) const {
    MatrixD Z = X.rowwise() - mean.transpose();
    Z.array().rowwise() /= sd.transpose().array();
    return Z;
  }
};

}  // namespace

AucCurve months_before_sweep(const std::vector<UserTimeline>& timelines,
                             const FactorScoreLookup& scores, const std::vector<int>& offsets,
                             const SweepConfig& cfg) {
  if (offsets.empty()) throw DataError("months_before_sweep: no offsets");

  AucCurve curve;
  for (int offset : offsets) {
    AucPoint point;
    point.months_before = offset;
    try {
      const LabeledFeatureSet fs = build_features(timelines, scores, offset, cfg.lookback_months);
      point.n_joiners = static_cast<std::size_t>(std::count(fs.y.begin(), fs.y.end(), 1));
      point.n_controls = fs.y.size() - point.n_joiners;

      const std::vector<int> fold_of = stratified_kfold(fs.y, cfg.folds, cfg.seed);
      for (int fold = 0; fold < cfg.folds; ++fold) {
        std::vector<Index> train, test;
        for (std::size_t i = 0; i < fs.y.size(); ++i)
          (fold_of[i] == fold ? test : train).push_back(static_cast<Index>(i));

        MatrixD x_train(static_cast<Index>(train.size()), fs.X.cols());
        MatrixD x_test(static_cast<Index>(test.size()), fs.X.cols());
        std::vector<int> y_train, y_test;
        for (std::size_t i = 0; i < train.size(); ++i) {
          x_train.row(static_cast<Index>(i)) = fs.X.row(train[i]);
          y_train.push_back(fs.y[static_cast<std::size_t>(train[i])]);
        }
        for (std::size_t i = 0; i < test.size(); ++i) {
          x_test.row(static_cast<Index>(i)) = fs.X.row(test[i]);
          y_test.push_back(fs.y[static_cast<std::size_t>(test[i])]);
        }

        const FoldStandardizer std_fit = FoldStandardizer::fit(x_train);
        LogisticModel model = fit_logistic(std_fit.apply(x_train), y_train, cfg.l2);
        const VectorD decision = model.decision(std_fit.apply(x_test));
        std::vector<double> test_scores(decision.data(), decision.data() + decision.size());
        point.fold_aucs.push_back(roc_auc(test_scores, y_test));
        point.fold_models.push_back(std::move(model));
      }

      point.auc_mean = mean(point.fold_aucs);
      const double sd = sample_sd(point.fold_aucs);
      const double tq =
          student_t_quantile(0.975, static_cast<double>(cfg.folds - 1));
      const double half = tq * sd / std::sqrt(static_cast<double>(cfg.folds));
      point.ci_low = point.auc_mean - half;
      point.ci_high = point.auc_mean + half;
    } catch (const Error& e) {
      point.missing = true;
      point.missing_reason = e.what();
      point.fold_aucs.clear();
      point.fold_models.clear();
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

void export_auc_curve_csv(const AucCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("auc curve csv: cannot write " + path);
  out << "months_before,auc_mean,ci_low,ci_high,n_joiners,n_controls\n";
  char buf[64];
  for (const auto& point : curve.points) {
    out << point.months_before << ',';
    if (point.missing) {
      out << ",,";
    } else {
      std::snprintf(buf, sizeof(buf), "%.9g", point.auc_mean);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.9g", point.ci_low);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.9g", point.ci_high);
      out << buf;
    }
    out << ',' << point.n_joiners << ',' << point.n_controls << '\n';
  }
}

}  // namespace e11
