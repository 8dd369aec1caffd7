#include <doctest.h>

#include <algorithm>
#include <random>

#include "e11/profiles.hpp"
#include "e11/stats.hpp"

using namespace e11;

namespace {

FactorScoreMatrix make_scores(const MatrixF& data) {
  FactorScoreMatrix m;
  m.scores = data;
  for (Index i = 0; i < data.rows(); ++i) m.post_ids.push_back("p" + std::to_string(i));
  for (Index j = 0; j < data.cols(); ++j) m.factor_names.push_back("F" + std::to_string(j + 1));
  return m;
}

}  // namespace

TEST_CASE("aggregate_mean: two-point group statistics") {
  MatrixF data(2, 1);
  data << 1.0f, -1.0f;
  const auto profiles = aggregate_mean(make_scores(data), {"g", "g"});
  REQUIRE(profiles.size() == 1);
  CHECK(profiles[0].n_posts == 2);
  CHECK(profiles[0].mean[0] == doctest::Approx(0.0));
  CHECK(profiles[0].sd[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(profiles[0].positivity[0] == doctest::Approx(0.5));
}

TEST_CASE("aggregate_mean: group means recombine to the global mean") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> normal;
  MatrixF data(10, 2);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 2; ++j) data(i, j) = normal(rng);
  std::vector<std::string> keys;
  for (Index i = 0; i < 10; ++i) keys.push_back(i < 4 ? "a" : "b");
  const auto profiles = aggregate_mean(make_scores(data), keys);
  REQUIRE(profiles.size() == 2);
  for (Index j = 0; j < 2; ++j) {
    const double weighted = (4.0 * profiles[0].mean[j] + 6.0 * profiles[1].mean[j]) / 10.0;
    CHECK(weighted == doctest::Approx(data.col(j).cast<double>().mean()).epsilon(1e-10));
  }
}

TEST_CASE("aggregate_mean: planted +1 shift appears in the profile difference") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> normal(0.0f, 0.3f);
  MatrixF data(400, 1);
  std::vector<std::string> keys;
  for (Index i = 0; i < 400; ++i) {
    const bool shifted = i % 2 == 0;
    data(i, 0) = normal(rng) + (shifted ? 1.0f : 0.0f);
    keys.push_back(shifted ? "hot" : "cold");
  }
  const auto profiles = aggregate_mean(make_scores(data), keys);
  REQUIRE(profiles.size() == 2);
  const double diff = profiles[1].mean[0] - profiles[0].mean[0];  // sorted: cold, hot
  CHECK(std::abs(diff) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("aggregate_mean is invariant to row order and merges over partitions") {
  std::mt19937_64 rng(6);
  std::normal_distribution<float> normal;
  MatrixF data(30, 2);
  std::vector<std::string> keys;
  for (Index i = 0; i < 30; ++i) {
    for (Index j = 0; j < 2; ++j) data(i, j) = normal(rng);
    keys.push_back("g" + std::to_string(i % 3));
  }
  const auto base = aggregate_mean(make_scores(data), keys);

  std::vector<Index> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixF shuffled(30, 2);
  std::vector<std::string> shuffled_keys(30);
  for (Index i = 0; i < 30; ++i) {
    shuffled.row(i) = data.row(perm[static_cast<std::size_t>(i)]);
    shuffled_keys[static_cast<std::size_t>(i)] = keys[static_cast<std::size_t>(perm[i])];
  }
  const auto reordered = aggregate_mean(make_scores(shuffled), shuffled_keys);
  REQUIRE(base.size() == reordered.size());
  for (std::size_t g = 0; g < base.size(); ++g) {
    CHECK(base[g].group_key == reordered[g].group_key);
    CHECK((base[g].mean - reordered[g].mean).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((base[g].sd - reordered[g].sd).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("single-post group reports sd = 0") {
  MatrixF data(1, 2);
  data << 0.25f, -0.5f;
  const auto profiles = aggregate_mean(make_scores(data), {"solo"});
  CHECK(profiles[0].sd[0] == 0.0);
  CHECK(profiles[0].sd[1] == 0.0);
}

TEST_CASE("positivity_rate follows the strict >0 rule") {
  MatrixF all_pos(3, 1), sym(4, 1), with_zero(3, 1);
  all_pos << 0.1f, 0.2f, 5.0f;
  sym << 0.7f, -0.7f, 0.2f, -0.2f;
  with_zero << 0.0f, 0.0f, 0.5f;
  CHECK(positivity_rate(make_scores(all_pos), 0) == doctest::Approx(1.0));
  CHECK(positivity_rate(make_scores(sym), 0) == doctest::Approx(0.5));
  CHECK(positivity_rate(make_scores(with_zero), 0) == doctest::Approx(1.0 / 3));
}

TEST_CASE("positivity_rate is monotone under adding a positive post") {
  MatrixF data(3, 1);
  data << -0.5f, 0.3f, -0.1f;
  const double before = positivity_rate(make_scores(data), 0);
  MatrixF more(4, 1);
  more << -0.5f, 0.3f, -0.1f, 0.9f;
  const double after = positivity_rate(make_scores(more), 0);
  CHECK(after >= before);
  CHECK(after <= 1.0);
  CHECK(before >= 0.0);
}

TEST_CASE("t-test: identical samples give t=0, p=1") {
  const std::vector<double> a = {1.0, 2.0, 3.0};
  const auto result = two_sample_ttest(a, a);
  CHECK(result.t == doctest::Approx(0.0));
  CHECK(result.p_value == doctest::Approx(1.0));
}

TEST_CASE("t-test: {1,2,3} vs {4,5,6} hand-computed") {
  const auto result = two_sample_ttest(std::vector<double>{1, 2, 3},
                                       std::vector<double>{4, 5, 6});
  CHECK(result.t == doctest::Approx(-3.674).epsilon(0.01 / 3.674));
  CHECK(result.df == doctest::Approx(4.0));
  // Frozen reference: 0.021311641128756727.
  CHECK(result.p_value == doctest::Approx(0.021311641128756727).epsilon(1e-9));
}

TEST_CASE("t-test rejects degenerate variance") {
  const std::vector<double> constant = {2.0, 2.0, 2.0};
  CHECK_THROWS_AS(two_sample_ttest(constant, constant), DataError);
  CHECK_THROWS_AS(two_sample_ttest(std::vector<double>{1.0}, std::vector<double>{1, 2}),
                  DataError);
}

TEST_CASE("t-test antisymmetry under swapping the samples") {
  const std::vector<double> a = {0.3, 1.2, -2.0, 0.7};
  const std::vector<double> b = {1.5, 2.5, 0.1};
  for (auto variant : {TTestVariant::student_pooled, TTestVariant::welch}) {
    const auto ab = two_sample_ttest(a, b, variant);
    const auto ba = two_sample_ttest(b, a, variant);
    CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
    CHECK(ab.df == doctest::Approx(ba.df).epsilon(1e-12));
  }
}

TEST_CASE("welch df lies between min(n)-1 and n_a+n_b-2") {
  const std::vector<double> a = {0.3, 1.2, -2.0, 0.7, 0.9};
  const std::vector<double> b = {10.5, 22.5, 0.1};
  const auto result = two_sample_ttest(a, b, TTestVariant::welch);
  CHECK(result.df >= 2.0);
  CHECK(result.df <= 6.0);
}

TEST_CASE("compare_groups: planted shift detected, unshifted factors quiet") {
  std::mt19937_64 rng(2718);
  std::normal_distribution<float> normal;
  const Index n = 400;
  MatrixF data(n, 3);
  std::vector<Index> rows_a, rows_b;
  for (Index i = 0; i < n; ++i) {
    const bool in_a = i < n / 2;
    data(i, 0) = normal(rng) + (in_a ? 0.6f : 0.0f);  // shifted factor
    data(i, 1) = normal(rng);                          // quiet factor
    data(i, 2) = normal(rng);                          // quiet factor
    (in_a ? rows_a : rows_b).push_back(i);
  }
  const auto cmp = compare_groups(make_scores(data), rows_a, rows_b);
  REQUIRE(cmp.size() == 3);
  CHECK(cmp[0].test.p_value < 0.01);
  CHECK(cmp[1].test.p_value > 0.1);
  CHECK(cmp[2].test.p_value > 0.1);
  CHECK(cmp[0].p_bonferroni == doctest::Approx(std::min(1.0, cmp[0].test.p_value * 3)));
}
