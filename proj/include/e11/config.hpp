#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "e11/common.hpp"
#include "e11/corpus.hpp"
#include "e11/embedder.hpp"
#include "e11/trend.hpp"

namespace e11 {

// Minimal TOML-style document: [section] headers, key = value scalars
// (string, integer, float, bool) and flat arrays, # comments.
// Keys are stored as "section.key". Environment variables with the prefix
// E11_ override entries: E11_EMBEDDER_DIM=256 sets embedder.dim.
class ConfigDoc {
 public:
  using Value = std::variant<std::string, std::int64_t, double, bool,
                             std::vector<std::string>, std::vector<double>>;

  static ConfigDoc parse(const std::string& text);
  static ConfigDoc load(const std::string& path);

  void apply_env_overrides();  // reads E11_* from the process environment
  void set(const std::string& key, Value v) { values_[key] = std::move(v); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_string_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  // Canonical "key = value" dump in sorted key order; hashed into manifests.
  std::string canonical() const;

 private:
  std::map<std::string, Value> values_;
};

struct EfaStageConfig {
  int iters = 100;
  double quantile = 0.95;
  int k_override = 0;  // 0 = decide via parallel analysis
  std::string factor_names_path;  // optional fixture with canonical names
};

struct ProfileStageConfig {
  std::string group_by = "forum";  // forum | user
  std::vector<std::string> banned_forums;
  std::string ttest_variant = "student_pooled";
};

struct ForecastStageConfig {
  std::vector<int> offsets = {12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
  int folds = 5;
  double l2 = 1.0;
  int lookback_months = 0;
};

struct TrendStageConfig {
  LoessConfig loess;
  std::string single_factor;  // empty = standardized-mean composite
  bool per_user_average = false;
};

struct PipelineConfig {
  std::string corpus_path;
  std::string item_bank_path;
  std::string cache_path;
  std::string output_dir;

  EmbeddingProviderConfig embedder;
  FilterConfig filters;
  CohortConfig cohorts;
  EfaStageConfig efa;
  ProfileStageConfig profiles;
  ForecastStageConfig forecast;
  TrendStageConfig trend;
  std::uint64_t seed = 0;
  bool lenient_parse = true;

  std::string config_hash;  // SHA-256 of the resolved canonical document

  static PipelineConfig from_doc(const ConfigDoc& doc);
  static PipelineConfig load(const std::string& path, bool env_overrides = true);
};

// "YYYY-MM-DD" (UTC midnight) or integer epoch seconds.
std::int64_t parse_date_or_epoch(const std::string& text);

}  // namespace e11
