#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "e11/stats.hpp"
#include "e11/trend.hpp"

using namespace e11;

namespace {

// Independent tri-cube weighted least squares, uncentered normal equations
// solved by Cramer's rule. Mirrors the spec formula step by step.
double loess_oracle(const std::vector<double>& x, const std::vector<double>& y, double x0,
                    std::size_t q) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(x[a] - x0) < std::abs(x[b] - x0);
  });
  idx.resize(q);
  double dmax = 0;
  for (auto i : idx) dmax = std::max(dmax, std::abs(x[i] - x0));
  double s_w = 0, s_wx = 0, s_wxx = 0, s_wy = 0, s_wxy = 0;
  for (auto i : idx) {
    const double u = std::abs(x[i] - x0) / dmax;
    const double w = std::pow(1.0 - u * u * u, 3.0);
    s_w += w;
    s_wx += w * x[i];
    s_wxx += w * x[i] * x[i];
    s_wy += w * y[i];
    s_wxy += w * x[i] * y[i];
  }
  const double det = s_w * s_wxx - s_wx * s_wx;
  const double beta0 = (s_wy * s_wxx - s_wx * s_wxy) / det;
  const double beta1 = (s_w * s_wxy - s_wx * s_wy) / det;
  return beta0 + beta1 * x0;
}

}  // namespace

TEST_CASE("loess reproduces a constant signal exactly") {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(i * 0.25);
    y.push_back(3.75);
  }
  for (double frac : {0.2, 0.5, 1.0}) {
    LoessConfig cfg;
    cfg.frac = frac;
    cfg.grid_points = 17;
    const auto fit = loess(x, y, cfg);
    for (Index g = 0; g < fit.fitted.size(); ++g)
      CHECK(fit.fitted[g] == doctest::Approx(3.75).epsilon(1e-12));
  }
}

TEST_CASE("loess degree 1 reproduces an exactly linear signal within 1e-9") {
  std::vector<double> x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(-3.0 + i * 0.1);
    y.push_back(2.5 * x.back() - 1.25);
  }
  for (double frac : {0.15, 0.4, 1.0}) {
    LoessConfig cfg;
    cfg.frac = frac;
    cfg.grid_points = 23;
    const auto fit = loess(x, y, cfg);
    for (Index g = 0; g < fit.fitted.size(); ++g)
      CHECK(std::abs(fit.fitted[g] - (2.5 * fit.grid[g] - 1.25)) < 1e-9);
  }
}

TEST_CASE("loess matches the hand oracle on the 5-point instance") {
  const std::vector<double> x = {0.0, 1.0, 2.0, 3.2, 4.5};
  const std::vector<double> y = {1.0, 1.5, 1.3, 2.0, 2.2};
  LoessConfig cfg;
  cfg.frac = 0.8;  // q = 4
  VectorD grid(3);
  grid << 0.5, 1.7, 3.9;
  const auto fit = loess(x, y, cfg, grid);
  REQUIRE(fit.neighborhood == 4);
  // Frozen from an independent NumPy computation of the same formula.
  CHECK(std::abs(fit.fitted[0] - 1.1979548406557119) < 1e-9);
  CHECK(std::abs(fit.fitted[1] - 1.3867456208678819) < 1e-9);
  CHECK(std::abs(fit.fitted[2] - 2.0788508392132807) < 1e-9);
  for (Index g = 0; g < 3; ++g)
    CHECK(std::abs(fit.fitted[g] - loess_oracle(x, y, grid[g], 4)) < 1e-9);
}

TEST_CASE("loess with frac=0.6 equals the 3-neighbor oracle") {
  const std::vector<double> x = {0.0, 1.0, 2.0, 3.2, 4.5};
  const std::vector<double> y = {1.0, 1.5, 1.3, 2.0, 2.2};
  LoessConfig cfg;
  cfg.frac = 0.6;  // q = 3
  VectorD grid(2);
  grid << 1.4, 2.6;
  const auto fit = loess(x, y, cfg, grid);
  for (Index g = 0; g < 2; ++g)
    CHECK(std::abs(fit.fitted[g] - loess_oracle(x, y, grid[g], 3)) < 1e-9);
}

TEST_CASE("loess is translation equivariant in y") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal;
  std::vector<double> x, y, y_shift;
  for (int i = 0; i < 50; ++i) {
    x.push_back(normal(rng) * 4.0);
    y.push_back(std::sin(x.back()) + 0.1 * normal(rng));
    y_shift.push_back(y.back() + 11.5);
  }
  LoessConfig cfg;
  cfg.grid_points = 11;
  const auto base = loess(x, y, cfg);
  const auto shifted = loess(x, y_shift, cfg, base.grid);
  for (Index g = 0; g < base.fitted.size(); ++g)
    CHECK(shifted.fitted[g] == doctest::Approx(base.fitted[g] + 11.5).epsilon(1e-9));
}

TEST_CASE("loess frac=1 equals global tri-cube weighted regression per grid point") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  std::vector<double> x, y;
  for (int i = 0; i < 25; ++i) {
    x.push_back(i * 0.37);
    y.push_back(0.4 * x.back() * x.back() - x.back() + normal(rng));
  }
  LoessConfig cfg;
  cfg.frac = 1.0;
  VectorD grid(4);
  grid << 1.0, 3.0, 5.5, 8.0;
  const auto fit = loess(x, y, cfg, grid);
  for (Index g = 0; g < 4; ++g)
    CHECK(std::abs(fit.fitted[g] - loess_oracle(x, y, grid[g], x.size())) < 1e-9);
}

TEST_CASE("loess degenerate neighborhood falls back to the mean") {
  const std::vector<double> x = {2.0, 2.0, 2.0, 2.0};
  const std::vector<double> y = {1.0, 2.0, 3.0, 6.0};
  LoessConfig cfg;
  cfg.frac = 1.0;
  VectorD grid(1);
  grid << 2.0;
  const auto fit = loess(x, y, cfg, grid);
  CHECK(fit.fitted[0] == doctest::Approx(3.0));
}

TEST_CASE("loess input validation") {
  LoessConfig cfg;
  CHECK_THROWS_AS(loess(std::vector<double>{1.0}, std::vector<double>{1.0}, cfg), DataError);
  cfg.frac = 0.0;
  CHECK_THROWS_AS(loess(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}, cfg),
                  ConfigError);
}

TEST_CASE("composite_score: reference-mean rows map to zero") {
  CompositeConfig cfg;
  cfg.reference_mean = VectorD::Constant(3, 0.5);
  cfg.reference_sd = VectorD::Constant(3, 2.0);
  const VectorD row = VectorD::Constant(3, 0.5);
  const std::vector<std::string> names = {"A", "B", "C"};
  CHECK(composite_score(row, cfg, names) == doctest::Approx(0.0));
}

TEST_CASE("composite_score: single-factor mode projects one column") {
  CompositeConfig cfg;
  cfg.single_factor = "Radical and Violent Intent";
  VectorD row(3);
  row << 0.1, 0.9, -0.4;
  const std::vector<std::string> names = {"A", "Radical and Violent Intent", "C"};
  CHECK(composite_score(row, cfg, names) == doctest::Approx(0.9));
  cfg.single_factor = "missing";
  CHECK_THROWS_AS(composite_score(row, cfg, names), DataError);
}

TEST_CASE("composite_score is linear in standardized space") {
  CompositeConfig cfg;
  cfg.reference_mean = VectorD::Zero(4);
  cfg.reference_sd = VectorD::Constant(4, 1.0);
  VectorD v(4);
  v << 0.2, -0.1, 0.4, 0.3;
  const std::vector<std::string> names = {"A", "B", "C", "D"};
  const double single = composite_score(v, cfg, names);
  const double doubled = composite_score((2 * v).eval(), cfg, names);
  CHECK(doubled == doctest::Approx(2.0 * single).epsilon(1e-12));
}

TEST_CASE("align_to_t0 produces signed month offsets for every scored post") {
  UserTimeline tl;
  tl.user = "u";
  tl.cohort = Cohort::joiner;
  tl.t0 = 1600000000;
  Post at_t0, early;
  at_t0.id = "a";
  at_t0.user = "u";
  at_t0.forum = "f";
  at_t0.created_utc = 1600000000;
  at_t0.text = "x";
  early = at_t0;
  early.id = "b";
  early.created_utc = 1600000000 - kSecondsPerMonth;  // 30.44 days before
  tl.posts = {early, at_t0};

  FactorScoreMatrix scores;
  scores.factor_names = {"F1"};
  scores.post_ids = {"a", "b"};
  scores.scores.resize(2, 1);
  scores.scores << 0.5f, -0.5f;
  const FactorScoreLookup lookup(scores);
  CompositeConfig cfg;
  cfg.single_factor = "F1";
  const auto points = align_to_t0(tl, lookup, cfg);
  REQUIRE(points.size() == 2);
  CHECK(points[0].first == doctest::Approx(-1.0));
  CHECK(points[0].second == doctest::Approx(-0.5));
  CHECK(points[1].first == doctest::Approx(0.0));
  CHECK(points[1].second == doctest::Approx(0.5));

  UserTimeline no_t0 = tl;
  no_t0.t0.reset();
  CHECK_THROWS_AS(align_to_t0(no_t0, lookup, cfg), DataError);
}
