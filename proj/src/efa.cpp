#include "e11/efa.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "e11/digest.hpp"
#include "e11/stats.hpp"

namespace e11 {

using nlohmann::json;

CorrelationMatrix correlation_matrix(const Eigen::Ref<const MatrixD>& X) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (n < p + 1)
    throw DataError("correlation_matrix: need n >= p+1 (n=" + std::to_string(n) +
                    ", p=" + std::to_string(p) + ")");

  const Eigen::RowVectorXd means = X.colwise().mean();
  MatrixD centered = X.rowwise() - means;
  VectorD norms(p);
  for (Index j = 0; j < p; ++j) {
    norms[j] = centered.col(j).norm();
    if (norms[j] == 0.0)
      throw DataError("correlation_matrix: zero variance in column " + std::to_string(j));
  }
  MatrixD R = centered.transpose() * centered;
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) R(i, j) /= norms[i] * norms[j];
  R = ((R + R.transpose()) / 2.0).eval();
  R.diagonal().setOnes();

  return {std::move(R), n};
}

KmoResult kmo(const CorrelationMatrix& corr) {
  const MatrixD& R = corr.R;
  const Index p = R.rows();
  if (p < 2) throw DataError("kmo: need at least two items");

  Eigen::FullPivLU<MatrixD> lu(R);
  if (!lu.isInvertible()) throw DataError("kmo: singular correlation matrix");
  const MatrixD precision = lu.inverse();

  MatrixD partial(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      partial(i, j) =
          i == j ? 0.0 : -precision(i, j) / std::sqrt(precision(i, i) * precision(j, j));

  KmoResult result;
  result.per_item_msa.resize(p);
  double r2_total = 0.0, q2_total = 0.0;
  for (Index i = 0; i < p; ++i) {
    double r2 = 0.0, q2 = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (i == j) continue;
      r2 += R(i, j) * R(i, j);
      q2 += partial(i, j) * partial(i, j);
    }
    if (r2 + q2 == 0.0) throw DataError("kmo: no common variance (item " + std::to_string(i) + ")");
    result.per_item_msa[i] = r2 / (r2 + q2);
    r2_total += r2;
    q2_total += q2;
  }
  if (r2_total + q2_total == 0.0) throw DataError("kmo: no common variance");
  result.overall = r2_total / (r2_total + q2_total);
  return result;
}

BartlettResult bartlett(const CorrelationMatrix& corr) {
  const MatrixD& R = corr.R;
  const Index p = R.rows();
  const Index n = corr.n;
  if (n <= p) throw DataError("bartlett: need n > p");

  Eigen::PartialPivLU<MatrixD> lu(R);
  const double log_det = std::log(lu.determinant());
  if (!std::isfinite(log_det) || lu.determinant() <= 0.0)
    throw DataError("bartlett: correlation matrix has non-positive determinant");

  BartlettResult result;
  const double dp = static_cast<double>(p);
  result.chi2 = -(static_cast<double>(n) - 1.0 - (2.0 * dp + 5.0) / 6.0) * log_det;
  if (result.chi2 < 0.0) result.chi2 = 0.0;  // guards rounding at det(R)=1
  result.df = static_cast<std::int64_t>(p) * (p - 1) / 2;
  result.p_value = result.chi2 == 0.0 ? 1.0 : chi2_sf(result.chi2, static_cast<double>(result.df));
  return result;
}

namespace {

VectorD descending_eigenvalues(const MatrixD& symmetric) {
  Eigen::SelfAdjointEigenSolver<MatrixD> solver(symmetric, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw DataError("eigendecomposition failed");
  return solver.eigenvalues().reverse();
}

}  // namespace

ParallelAnalysisResult parallel_analysis(const Eigen::Ref<const MatrixD>& X, int iters,
                                         double quantile, std::uint64_t seed) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (n <= p) throw DataError("parallel_analysis: need n > p");
  if (iters < 1) throw DataError("parallel_analysis: iters must be >= 1");
  if (quantile <= 0.0 || quantile >= 1.0)
    throw DataError("parallel_analysis: quantile in (0,1) required");

  ParallelAnalysisResult result;
  result.observed = descending_eigenvalues(correlation_matrix(X).R);

  MatrixD sims(iters, p);  // one row of eigenvalues per synthetic dataset
  std::mt19937_64 rng(seed);
  for (int it = 0; it < iters; ++it) {
    const MatrixD noise = random_normal_matrix(n, p, rng);
    sims.row(it) = descending_eigenvalues(correlation_matrix(noise).R).transpose();
  }

  // Per-rank empirical quantile, linear interpolation between order stats.
  result.thresholds.resize(p);
  const double pos = quantile * static_cast<double>(iters - 1);
  const auto lo = static_cast<Index>(std::floor(pos));
  const auto hi = std::min<Index>(lo + 1, iters - 1);
  const double w = pos - static_cast<double>(lo);
  for (Index j = 0; j < p; ++j) {
    VectorD col = sims.col(j);
    std::sort(col.data(), col.data() + col.size());
    result.thresholds[j] = (1.0 - w) * col[lo] + w * col[hi];
  }

  while (result.k < p && result.observed[result.k] > result.thresholds[result.k]) ++result.k;
  return result;
}

double varimax_criterion(const Eigen::Ref<const MatrixD>& loadings) {
  const double p = static_cast<double>(loadings.rows());
  double crit = 0.0;
  for (Index j = 0; j < loadings.cols(); ++j) {
    const VectorD sq = loadings.col(j).array().square();
    crit += sq.array().square().sum() / p - std::pow(sq.sum() / p, 2);
  }
  return crit;
}

VarimaxResult varimax(const Eigen::Ref<const MatrixD>& loadings, int max_iter, double tol) {
  VarimaxResult result;
  result.loadings = loadings;
  result.rotation = MatrixD::Identity(loadings.cols(), loadings.cols());
  const Index p = loadings.rows();
  const Index k = loadings.cols();
  if (k < 2) return result;

  // Kaiser normalization: rotate rows scaled to unit communality.
  VectorD row_norms(p);
  for (Index i = 0; i < p; ++i) {
    const double norm = loadings.row(i).norm();
    row_norms[i] = norm > 0.0 ? norm : 1.0;
  }
  MatrixD B = loadings.array().colwise() / row_norms.array();

  const double dp = static_cast<double>(p);
  double crit = varimax_criterion(B);
  int stale = 0;
  int iter = 0;
  for (; iter < max_iter && stale < 2; ++iter) {
    bool rotated = false;
    for (Index a = 0; a + 1 < k; ++a) {
      for (Index b = a + 1; b < k; ++b) {
        const VectorD u = B.col(a).array().square() - B.col(b).array().square();
        const VectorD v = 2.0 * B.col(a).array() * B.col(b).array();
        const double A = u.sum();
        const double Bs = v.sum();
        const double C = (u.array().square() - v.array().square()).sum();
        const double D = 2.0 * u.dot(v);
        const double num = D - 2.0 * A * Bs / dp;
        const double den = C - (A * A - Bs * Bs) / dp;
        if (std::abs(num) < 1e-15 && std::abs(den) < 1e-15) continue;
        const double angle = 0.25 * std::atan2(num, den);
        if (std::abs(angle) < 1e-12) continue;
        rotated = true;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const VectorD ta = c * B.col(a) + s * B.col(b);
        B.col(b) = -s * B.col(a) + c * B.col(b);
        B.col(a) = ta;
        const VectorD ra = c * result.rotation.col(a) + s * result.rotation.col(b);
        result.rotation.col(b) = -s * result.rotation.col(a) + c * result.rotation.col(b);
        result.rotation.col(a) = ra;
      }
    }
    const double new_crit = varimax_criterion(B);
    const double rel = new_crit > 0.0 ? (new_crit - crit) / new_crit : 0.0;
    crit = new_crit;
    stale = (rel <= tol) ? stale + 1 : 0;
    if (!rotated) break;
  }
  result.iterations = iter;
  result.loadings = B.array().colwise() * row_norms.array();
  return result;
}

namespace {

std::string correlation_hash(const MatrixD& R) {
  std::string bytes(reinterpret_cast<const char*>(R.data()),
                    sizeof(double) * static_cast<std::size_t>(R.size()));
  return to_hex(sha256(bytes));
}

}  // namespace

EfaModel fit_efa(const Eigen::Ref<const MatrixD>& X, int k, const EfaOptions& opts) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (k < 1 || k >= p)
    throw DataError("fit_efa: k must satisfy 1 <= k < p (k=" + std::to_string(k) + ")");
  if (n <= p) throw DataError("fit_efa: need n > p");

  EfaModel model;
  model.k = k;
  model.fit_meta.n = n;

  model.means = X.colwise().mean();
  model.sds.resize(p);
  for (Index j = 0; j < p; ++j) {
    const double ss = (X.col(j).array() - model.means[j]).square().sum();
    model.sds[j] = std::sqrt(ss / static_cast<double>(n - 1));
    if (model.sds[j] == 0.0)
      throw DataError("fit_efa: zero variance in column " + std::to_string(j));
  }

  const CorrelationMatrix corr = correlation_matrix(X);
  const MatrixD& R = corr.R;
  model.eigenvalues = descending_eigenvalues(R);
  model.fit_meta.r_hash = correlation_hash(R);

  // Initial communalities: squared multiple correlations, 1 - 1/inv(R)_ii.
  Eigen::FullPivLU<MatrixD> lu(R);
  if (!lu.isInvertible()) throw DataError("fit_efa: singular correlation matrix");
  const MatrixD precision = lu.inverse();
  VectorD h2(p);
  for (Index j = 0; j < p; ++j) h2[j] = 1.0 - 1.0 / precision(j, j);

  MatrixD lambda(p, k);
  bool converged = false;
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    MatrixD reduced = R;
    reduced.diagonal() = h2;
    Eigen::SelfAdjointEigenSolver<MatrixD> solver(reduced);
    if (solver.info() != Eigen::Success) throw DataError("fit_efa: eigendecomposition failed");
    for (Index j = 0; j < k; ++j) {
      const Index src = p - 1 - j;  // descending order
      const double ev = std::max(solver.eigenvalues()[src], 0.0);
      lambda.col(j) = solver.eigenvectors().col(src) * std::sqrt(ev);
    }
    VectorD new_h2 = lambda.array().square().rowwise().sum();
    for (Index j = 0; j < p; ++j) {
      if (new_h2[j] > 1.0) {
        new_h2[j] = 1.0 - 1e-9;  // Heywood case
        model.fit_meta.heywood = true;
      }
    }
    const double delta = (new_h2 - h2).cwiseAbs().maxCoeff();
    h2 = new_h2;
    if (delta < opts.tol) {
      converged = true;
      ++iter;
      break;
    }
  }
  model.fit_meta.converged = converged;
  model.fit_meta.iterations = iter;

  if (opts.rotate && k > 1) {
    lambda = varimax(lambda).loadings;
  } else if (!opts.rotate) {
    model.fit_meta.rotation = "none";
  }

  // Sign convention: each factor's largest-|loading| item loads positive.
  for (Index j = 0; j < k; ++j) {
    Index arg = 0;
    lambda.col(j).cwiseAbs().maxCoeff(&arg);
    if (lambda(arg, j) < 0.0) lambda.col(j) = -lambda.col(j);
  }

  // Order factors by descending explained variance (sum of squared loadings).
  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  const VectorD ssq = lambda.array().square().colwise().sum();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return ssq[a] > ssq[b]; });
  MatrixD ordered(p, k);
  for (Index j = 0; j < k; ++j) ordered.col(j) = lambda.col(order[static_cast<std::size_t>(j)]);
  model.loadings = std::move(ordered);

  model.communalities = model.loadings.array().square().rowwise().sum();
  model.score_weights = lu.solve(model.loadings);

  model.factor_names.reserve(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) model.factor_names.push_back("F" + std::to_string(j));
  return model;
}

MatrixD factor_scores(const Eigen::Ref<const MatrixD>& X, const EfaModel& model) {
  if (X.cols() != model.means.size())
    throw DataError("factor_scores: column count does not match the model");
  MatrixD Z = X.rowwise() - model.means.transpose();
  Z.array().rowwise() /= model.sds.transpose().array();
  return Z * model.score_weights;
}

std::vector<TopLoadingRow> top_loadings_report(const EfaModel& model, const ItemBank& bank,
                                               std::size_t m) {
  if (m < 1) throw DataError("top_loadings_report: m must be >= 1");
  if (bank.size() != static_cast<std::size_t>(model.loadings.rows()))
    throw DataError("top_loadings_report: bank size does not match the model");

  std::vector<TopLoadingRow> rows;
  for (Index j = 0; j < model.loadings.cols(); ++j) {
    std::vector<Index> idx(static_cast<std::size_t>(model.loadings.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
      return std::abs(model.loadings(a, j)) > std::abs(model.loadings(b, j));
    });
    const std::size_t take = std::min(m, idx.size());
    for (std::size_t r = 0; r < take; ++r) {
      const auto& item = bank.items[static_cast<std::size_t>(idx[r])];
      rows.push_back({model.factor_names[static_cast<std::size_t>(j)], item.item_id,
                      model.loadings(idx[r], j), item.scale, item.source, item.text});
    }
  }
  return rows;
}

namespace {

json vector_to_json(const VectorD& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json matrix_to_json(const MatrixD& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

VectorD vector_from_json(const json& arr) {
  VectorD v(static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Index>(i)] = arr[i].get<double>();
  return v;
}

MatrixD matrix_from_json(const json& rows) {
  if (rows.empty()) return {};
  MatrixD m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DataError("efa model: ragged matrix");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j].get<double>();
  }
  return m;
}

json model_to_json(const EfaModel& model) {
  return json{{"item_ids", model.item_ids},
              {"means", vector_to_json(model.means)},
              {"sds", vector_to_json(model.sds)},
              {"loadings", matrix_to_json(model.loadings)},
              {"eigenvalues", vector_to_json(model.eigenvalues)},
              {"communalities", vector_to_json(model.communalities)},
              {"score_weights", matrix_to_json(model.score_weights)},
              {"factor_names", model.factor_names},
              {"k", model.k},
              {"fit_meta",
               {{"n", model.fit_meta.n},
                {"extraction", model.fit_meta.extraction},
                {"rotation", model.fit_meta.rotation},
                {"converged", model.fit_meta.converged},
                {"iterations", model.fit_meta.iterations},
                {"heywood", model.fit_meta.heywood},
                {"r_hash", model.fit_meta.r_hash}}},
              {"bank_fingerprint", model.bank_fingerprint}};
}

}  // namespace

std::string EfaModel::fingerprint() const { return to_hex(sha256(model_to_json(*this).dump())); }

void save_efa_model(const EfaModel& model, const std::string& path) {
  std::ofstream out(path + ".tmp", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("efa model: cannot write " + path);
  out << model_to_json(model).dump(2) << '\n';
  out.close();
  std::filesystem::rename(path + ".tmp", path);
}

EfaModel load_efa_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("efa model: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("efa model: malformed JSON in " + path + ": " + e.what());
  }
  EfaModel model;
  model.item_ids = j.at("item_ids").get<std::vector<std::string>>();
  model.means = vector_from_json(j.at("means"));
  model.sds = vector_from_json(j.at("sds"));
  model.loadings = matrix_from_json(j.at("loadings"));
  model.eigenvalues = vector_from_json(j.at("eigenvalues"));
  model.communalities = vector_from_json(j.at("communalities"));
  model.score_weights = matrix_from_json(j.at("score_weights"));
  model.factor_names = j.at("factor_names").get<std::vector<std::string>>();
  model.k = j.at("k").get<int>();
  const json& meta = j.at("fit_meta");
  model.fit_meta.n = meta.at("n").get<Index>();
  model.fit_meta.extraction = meta.at("extraction").get<std::string>();
  model.fit_meta.rotation = meta.at("rotation").get<std::string>();
  model.fit_meta.converged = meta.at("converged").get<bool>();
  model.fit_meta.iterations = meta.at("iterations").get<int>();
  model.fit_meta.heywood = meta.value("heywood", false);
  model.fit_meta.r_hash = meta.value("r_hash", "");
  model.bank_fingerprint = j.value("bank_fingerprint", "");
  return model;
}

double tucker_congruence(const Eigen::Ref<const VectorD>& a,
                         const Eigen::Ref<const VectorD>& b) {
  if (a.size() != b.size()) throw DataError("tucker_congruence: size mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DataError("tucker_congruence: zero loading vector");
  return a.dot(b) / (na * nb);
}

}  // namespace e11
