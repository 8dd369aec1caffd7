#pragma once

#include <span>
#include <string>
#include <vector>

#include "e11/common.hpp"
#include "e11/scorer.hpp"

namespace e11 {

struct GroupProfile {
  std::string group_key;
  std::size_t n_posts = 0;
  VectorD mean;        // per factor
  VectorD sd;          // sample sd; 0 for single-post groups
  VectorD positivity;  // fraction of posts with score strictly > 0
};

// Per-group unweighted post-level statistics, groups in sorted key order.
// `group_keys` holds one key per score row.
std::vector<GroupProfile> aggregate_mean(const FactorScoreMatrix& scores,
                                         const std::vector<std::string>& group_keys);

// |{i : scores(i, factor) > 0}| / n — strictly positive, zeros excluded.
double positivity_rate(const FactorScoreMatrix& scores, Index factor);

enum class TTestVariant { student_pooled, welch };

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
  TTestVariant variant = TTestVariant::student_pooled;
};

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b,
                             TTestVariant variant = TTestVariant::student_pooled);

struct FactorComparison {
  std::string factor;
  TTestResult test;
  double p_bonferroni = 1.0;
};

// Per-factor comparison of two row subsets (e.g. banned vs non-banned).
std::vector<FactorComparison> compare_groups(const FactorScoreMatrix& scores,
                                             const std::vector<Index>& rows_a,
                                             const std::vector<Index>& rows_b,
                                             TTestVariant variant = TTestVariant::student_pooled);

void export_profiles_csv(const std::vector<GroupProfile>& profiles,
                         const std::vector<std::string>& factor_names, const std::string& path);

void export_comparison_csv(const std::vector<FactorComparison>& rows, const std::string& path);

}  // namespace e11
