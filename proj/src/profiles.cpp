#include "e11/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "e11/stats.hpp"

namespace e11 {

std::vector<GroupProfile> aggregate_mean(const FactorScoreMatrix& scores,
                                         const std::vector<std::string>& group_keys) {
  const Index n = scores.scores.rows();
  const Index k = scores.scores.cols();
  if (n == 0 || group_keys.size() != static_cast<std::size_t>(n))
    throw DataError("aggregate_mean: one group key per score row required");

  std::map<std::string, std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) groups[group_keys[static_cast<std::size_t>(i)]].push_back(i);
  if (groups.empty()) throw DataError("aggregate_mean: no groups");

  std::vector<GroupProfile> profiles;
  profiles.reserve(groups.size());
  for (const auto& [key, rows] : groups) {
    GroupProfile gp;
    gp.group_key = key;
    gp.n_posts = rows.size();
    gp.mean = VectorD::Zero(k);
    gp.sd = VectorD::Zero(k);
    gp.positivity = VectorD::Zero(k);
    for (Index i : rows) gp.mean += scores.scores.row(i).cast<double>();
    gp.mean /= static_cast<double>(rows.size());
    if (rows.size() > 1) {
      for (Index i : rows) {
        const VectorD diff = scores.scores.row(i).cast<double>().transpose() - gp.mean;
        gp.sd += diff.array().square().matrix();
      }
      gp.sd = (gp.sd / static_cast<double>(rows.size() - 1)).array().sqrt();
    }
    for (Index i : rows)
      for (Index j = 0; j < k; ++j)
        if (scores.scores(i, j) > 0.0f) gp.positivity[j] += 1.0;
    gp.positivity /= static_cast<double>(rows.size());
    profiles.push_back(std::move(gp));
  }
  return profiles;
}

double positivity_rate(const FactorScoreMatrix& scores, Index factor) {
  const Index n = scores.scores.rows();
  if (n < 1) throw DataError("positivity_rate: empty matrix");
  if (factor < 0 || factor >= scores.scores.cols())
    throw DataError("positivity_rate: factor index out of range");
  Index count = 0;
  for (Index i = 0; i < n; ++i)
    if (scores.scores(i, factor) > 0.0f) ++count;
  return static_cast<double>(count) / static_cast<double>(n);
}

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b,
                             TTestVariant variant) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  if (na < 2 || nb < 2) throw DataError("two_sample_ttest: need at least 2 per sample");

  const double ma = mean(a);
  const double mb = mean(b);
  const double sa = sample_sd(a);
  const double sb = sample_sd(b);
  const double va = sa * sa;
  const double vb = sb * sb;

  TTestResult result;
  result.variant = variant;
  if (variant == TTestVariant::student_pooled) {
    const double pooled =
        ((static_cast<double>(na) - 1.0) * va + (static_cast<double>(nb) - 1.0) * vb) /
        (static_cast<double>(na + nb) - 2.0);
    if (pooled == 0.0) throw DataError("two_sample_ttest: degenerate pooled variance");
    const double se = std::sqrt(pooled * (1.0 / static_cast<double>(na) +
                                          1.0 / static_cast<double>(nb)));
    result.t = (ma - mb) / se;
    result.df = static_cast<double>(na + nb) - 2.0;
  } else {
    const double ea = va / static_cast<double>(na);
    const double eb = vb / static_cast<double>(nb);
    if (ea + eb == 0.0) throw DataError("two_sample_ttest: degenerate variances");
    result.t = (ma - mb) / std::sqrt(ea + eb);
    result.df = (ea + eb) * (ea + eb) /
                (ea * ea / (static_cast<double>(na) - 1.0) +
                 eb * eb / (static_cast<double>(nb) - 1.0));
  }
  result.p_value = student_t_two_sided_p(result.t, result.df);
  return result;
}

std::vector<FactorComparison> compare_groups(const FactorScoreMatrix& scores,
                                             const std::vector<Index>& rows_a,
                                             const std::vector<Index>& rows_b,
                                             TTestVariant variant) {
  const Index k = scores.scores.cols();
  std::vector<FactorComparison> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) {
    std::vector<double> a, b;
    a.reserve(rows_a.size());
    b.reserve(rows_b.size());
    for (Index i : rows_a) a.push_back(scores.scores(i, j));
    for (Index i : rows_b) b.push_back(scores.scores(i, j));
    FactorComparison cmp;
    cmp.factor = scores.factor_names[static_cast<std::size_t>(j)];
    cmp.test = two_sample_ttest(a, b, variant);
    cmp.p_bonferroni = std::min(1.0, cmp.test.p_value * static_cast<double>(k));
    out.push_back(std::move(cmp));
  }
  return out;
}

void export_profiles_csv(const std::vector<GroupProfile>& profiles,
                         const std::vector<std::string>& factor_names,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("profiles csv: cannot write " + path);
  out << "group,n_posts";
  for (const auto& f : factor_names) out << ",mean_" << f;
  for (const auto& f : factor_names) out << ",sd_" << f;
  for (const auto& f : factor_names) out << ",pos_" << f;
  out << '\n';
  char buf[64];
  for (const auto& gp : profiles) {
    out << gp.group_key << ',' << gp.n_posts;
    const auto emit = [&](const VectorD& v) {
      for (Index j = 0; j < v.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.9g", v[j]);
        out << ',' << buf;
      }
    };
    emit(gp.mean);
    emit(gp.sd);
    emit(gp.positivity);
    out << '\n';
  }
}

void export_comparison_csv(const std::vector<FactorComparison>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("comparison csv: cannot write " + path);
  out << "factor,t,df,p,p_bonferroni\n";
  char buf[64];
  for (const auto& row : rows) {
    out << row.factor;
    for (double v : {row.test.t, row.test.df, row.test.p_value, row.p_bonferroni}) {
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace e11
