#include "e11/trend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace e11 {

void LoessConfig::validate() const {
  if (!(frac > 0.0 && frac <= 1.0)) throw ConfigError("loess: frac must be in (0, 1]");
  if (degree < 0 || degree > 2) throw ConfigError("loess: degree must be 0, 1 or 2");
  if (grid_points < 2) throw ConfigError("loess: grid_points must be >= 2");
}

namespace {

double fit_at(std::span<const double> x, std::span<const double> y, double x0, Index q,
              int degree, Index& fallbacks) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(x[a] - x0) < std::abs(x[b] - x0);
  });
  idx.resize(static_cast<std::size_t>(q));

  double d_max = 0.0;
  for (std::size_t i : idx) d_max = std::max(d_max, std::abs(x[i] - x0));

  if (d_max == 0.0) {
    // All selected x coincide with the grid point: plain mean.
    double s = 0.0;
    for (std::size_t i : idx) s += y[i];
    return s / static_cast<double>(idx.size());
  }

  VectorD w(static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double u = std::abs(x[idx[r]] - x0) / d_max;
    const double t = 1.0 - u * u * u;
    w[static_cast<Index>(r)] = t * t * t;
  }
  if (w.maxCoeff() <= 0.0) {
    // Every neighbor sits at d_max (tri-cube weight 0): plain mean.
    ++fallbacks;
    double s = 0.0;
    for (std::size_t i : idx) s += y[i];
    return s / static_cast<double>(idx.size());
  }

  // Degenerate neighborhood (single distinct x): weighted mean fallback.
  bool distinct = false;
  for (std::size_t r = 1; r < idx.size(); ++r)
    if (x[idx[r]] != x[idx[0]]) {
      distinct = true;
      break;
    }
  if (!distinct && degree > 0) ++fallbacks;
  const int deg = distinct ? degree : 0;

  // Weighted least squares around x0 for conditioning; intercept = fit.
  MatrixD design(static_cast<Index>(idx.size()), deg + 1);
  VectorD target(static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double dx = x[idx[r]] - x0;
    double pow = 1.0;
    for (int d = 0; d <= deg; ++d) {
      design(static_cast<Index>(r), d) = pow;
      pow *= dx;
    }
    target[static_cast<Index>(r)] = y[idx[r]];
  }
  const MatrixD wd = w.asDiagonal() * design;
  const MatrixD ata = design.transpose() * wd;
  const VectorD atb = wd.transpose() * target;
  const VectorD beta = ata.completeOrthogonalDecomposition().solve(atb);
  return beta[0];
}

}  // namespace

LoessFit loess(std::span<const double> x, std::span<const double> y, const LoessConfig& cfg,
               const VectorD& grid) {
  cfg.validate();
  const std::size_t n = x.size();
  if (n != y.size()) throw DataError("loess: x/y length mismatch");
  if (static_cast<int>(n) < cfg.degree + 2)
    throw DataError("loess: need at least degree+2 points");
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("loess: non-finite x");

  const Index q = static_cast<Index>(std::ceil(cfg.frac * static_cast<double>(n)));
  if (q < cfg.degree + 1)
    throw DataError("loess: neighborhood ceil(frac*n) must be >= degree+1");

  LoessFit fit;
  fit.grid = grid;
  fit.neighborhood = q;
  fit.fitted.resize(grid.size());
  for (Index g = 0; g < grid.size(); ++g)
    fit.fitted[g] = fit_at(x, y, grid[g], q, cfg.degree, fit.fallback_points);
  if (!fit.fitted.allFinite()) throw DataError("loess: non-finite fit");
  return fit;
}

LoessFit loess(std::span<const double> x, std::span<const double> y, const LoessConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw DataError("loess: empty input");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  VectorD grid = VectorD::LinSpaced(cfg.grid_points, *lo, *hi);
  return loess(x, y, cfg, grid);
}

CompositeConfig CompositeConfig::from_reference(const FactorScoreMatrix& reference) {
  const Index n = reference.scores.rows();
  const Index k = reference.scores.cols();
  if (n < 2) throw DataError("composite: reference corpus needs at least 2 rows");
  CompositeConfig cfg;
  cfg.reference_mean = reference.scores.cast<double>().colwise().mean();
  cfg.reference_sd.resize(k);
  for (Index j = 0; j < k; ++j) {
    const double ss =
        (reference.scores.col(j).cast<double>().array() - cfg.reference_mean[j]).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    cfg.reference_sd[j] = sd > 0.0 ? sd : 1.0;
  }
  return cfg;
}

double composite_score(const Eigen::Ref<const VectorD>& factor_row, const CompositeConfig& cfg,
                       const std::vector<std::string>& factor_names) {
  if (factor_row.size() < 1) throw DataError("composite_score: empty factor row");
  if (cfg.single_factor) {
    for (std::size_t j = 0; j < factor_names.size(); ++j)
      if (factor_names[j] == *cfg.single_factor) return factor_row[static_cast<Index>(j)];
    throw DataError("composite_score: unknown factor '" + *cfg.single_factor + "'");
  }
  if (cfg.reference_mean.size() != factor_row.size())
    throw DataError("composite_score: reference statistics do not match factor count");
  const VectorD z =
      (factor_row - cfg.reference_mean).array() / cfg.reference_sd.array();
  return z.mean();
}

std::vector<std::pair<double, double>> align_to_t0(const UserTimeline& timeline,
                                                   const FactorScoreLookup& scores,
                                                   const CompositeConfig& cfg) {
  if (!timeline.t0) throw DataError("align_to_t0: timeline has no t0");
  std::vector<std::pair<double, double>> points;
  points.reserve(timeline.posts.size());
  for (const Post& p : timeline.posts) {
    const auto row = scores.row_of(p.id);
    if (!row) continue;
    const double offset = static_cast<double>(p.created_utc - *timeline.t0) /
                          static_cast<double>(kSecondsPerMonth);
    const VectorD factors = scores.matrix().scores.row(*row).cast<double>();
    points.emplace_back(offset,
                        composite_score(factors, cfg, scores.matrix().factor_names));
  }
  return points;
}

void export_trajectories_csv(const std::vector<TrajectorySeries>& series,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("trajectory csv: cannot write " + path);
  out << "cohort,grid_offset,fitted,n_points_in_window\n";
  char buf[64];
  for (const auto& s : series) {
    for (Index g = 0; g < s.smoothed.grid.size(); ++g) {
      out << s.cohort << ',';
      std::snprintf(buf, sizeof(buf), "%.9g", s.smoothed.grid[g]);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.9g", s.smoothed.fitted[g]);
      out << buf << ',' << s.smoothed.neighborhood << '\n';
    }
  }
}

}  // namespace e11
