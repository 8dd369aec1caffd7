#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "e11/config.hpp"

namespace e11 {

enum class Stage { ingest, score, efa_fit, efa_score, profile, forecast, trend };

const char* stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

// Artifact filenames inside the configured output directory.
namespace artifact {
inline constexpr const char* kFiltered = "filtered.jsonl";
inline constexpr const char* kDropSummary = "drop_summary.json";
inline constexpr const char* kIngestErrors = "ingest_errors.json";
inline constexpr const char* kTimelines = "timelines.json";
inline constexpr const char* kItemScores = "item_scores.e11m";
inline constexpr const char* kScoreSkips = "score_skips.json";
inline constexpr const char* kEfaModel = "efa_model.json";
inline constexpr const char* kEfaDiagnostics = "efa_diagnostics.json";
inline constexpr const char* kTopLoadings = "top_loadings.csv";
inline constexpr const char* kFactorScores = "factor_scores.e11m";
inline constexpr const char* kProfiles = "profiles.json";
inline constexpr const char* kBannedCompare = "banned_compare.json";
inline constexpr const char* kAucCurve = "auc_curve.json";
inline constexpr const char* kTrajectory = "trajectory.json";
}  // namespace artifact

// Serializes one pipeline stage: checks upstream artifacts and their
// fingerprints, runs the module work, writes outputs atomically and drops
// a manifest_<stage>.json recording config hash, seed and input/output
// digests. Holds an exclusive lock file in the output directory.
void run_stage(Stage stage, const PipelineConfig& cfg);

enum class ReportKind { forum_profile, banned_compare, auc_curve, trajectory };

ReportKind report_kind_from_name(const std::string& name);

// Renders a stage artifact into its CSV schema plus a JSON sidecar with
// column metadata. Returns the CSV path.
std::filesystem::path emit_report(ReportKind kind, const PipelineConfig& cfg);

// Exclusive advisory lock on an output directory (create-exclusive file,
// removed on destruction).
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
std::string file_sha256_hex(const std::filesystem::path& path);

}  // namespace e11
