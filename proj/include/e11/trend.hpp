#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "e11/common.hpp"
#include "e11/corpus.hpp"
#include "e11/forecast.hpp"

namespace e11 {

struct LoessConfig {
  double frac = 0.3;
  int degree = 1;  // 0, 1 or 2
  int grid_points = 100;

  void validate() const;
};

struct LoessFit {
  VectorD grid;
  VectorD fitted;
  Index neighborhood = 0;     // ceil(frac * n)
  Index fallback_points = 0;  // grid points served by the mean fallback
};

// Local polynomial regression with tri-cube weights over the ceil(frac·n)
// nearest neighbors, evaluated on an even grid spanning the observed x
// range. A degenerate neighborhood (single distinct x) falls back to the
// weighted mean.
LoessFit loess(std::span<const double> x, std::span<const double> y, const LoessConfig& cfg);
LoessFit loess(std::span<const double> x, std::span<const double> y, const LoessConfig& cfg,
               const VectorD& grid);

// Composite "extremism score" per post row: mean of the k factor scores
// after z-standardization against a reference corpus, or one named factor.
struct CompositeConfig {
  std::optional<std::string> single_factor;  // unset = standardized mean
  VectorD reference_mean;  // per factor, from the declared reference corpus
  VectorD reference_sd;

  static CompositeConfig from_reference(const FactorScoreMatrix& reference);
};

double composite_score(const Eigen::Ref<const VectorD>& factor_row, const CompositeConfig& cfg,
                       const std::vector<std::string>& factor_names);

// One (month offset from t0, composite) point per scored post in the
// timeline; offsets use the 30.44-day month.
std::vector<std::pair<double, double>> align_to_t0(const UserTimeline& timeline,
                                                   const FactorScoreLookup& scores,
                                                   const CompositeConfig& cfg);

struct TrajectorySeries {
  std::string cohort;
  std::vector<std::pair<double, double>> points;
  LoessFit smoothed;
};

void export_trajectories_csv(const std::vector<TrajectorySeries>& series,
                             const std::string& path);

}  // namespace e11
