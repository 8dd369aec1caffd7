#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "e11/common.hpp"

namespace e11 {

struct Post {
  std::string id;
  std::string user;
  std::string forum;
  std::int64_t created_utc = 0;  // epoch seconds, > 0
  std::string text;              // non-empty after trim
  std::optional<std::string> lang;
};

struct FilterConfig {
  std::size_t min_words = 10;
  std::int64_t min_date = 1262304000;  // 2010-01-01T00:00:00Z
  std::optional<std::string> require_lang = "en";
  std::optional<std::set<std::string>> forum_allowlist;
};

enum class Cohort { joiner, control };

struct UserTimeline {
  std::string user;
  std::vector<Post> posts;  // ascending created_utc
  std::optional<std::int64_t> t0;
  Cohort cohort = Cohort::control;
};

// --- JSONL parsing ---

struct RecordError {
  std::size_t line_no = 0;  // 1-based
  std::string message;
};

// Parses one JSONL line into a Post. Unknown fields ignored; text kept
// byte-exact. Throws DataError on malformed JSON, missing required fields,
// or an invariant violation (empty id, created_utc <= 0, blank text).
Post parse_post_record(std::string_view line);

struct ParseResult {
  std::vector<Post> posts;
  std::vector<RecordError> errors;
};

// Reads a JSONL stream. In lenient mode bad records (including duplicate
// ids) are collected into `errors`; in strict mode the first one throws.
ParseResult parse_jsonl(std::istream& in, bool lenient = true);
ParseResult parse_jsonl_file(const std::string& path, bool lenient = true);

// --- Filtering ---

enum class DropReason { language, word_count, date, forum };

const char* drop_reason_name(DropReason r);

struct FilterOutcome {
  std::vector<Post> kept;                  // input order preserved
  std::map<std::string, std::size_t> dropped;  // reason name -> count
};

// Checks run in the order language, word_count, date, forum; the first
// failure is the recorded reason.
std::optional<DropReason> filter_reason(const Post& post, const FilterConfig& cfg);

FilterOutcome apply_filters(const std::vector<Post>& posts, const FilterConfig& cfg);

// --- Activity filtering ---

// Users with >= min_posts posts overall and, when min_active_months > 0,
// at least min_active_months distinct active UTC calendar months within
// some run of window_months consecutive months. window_months = 0 means
// the whole corpus span counts as one window.
std::set<std::string> activity_filter(
    const std::map<std::string, std::vector<Post>>& posts_by_user, std::size_t min_posts,
    std::size_t min_active_months, std::size_t window_months);

// Months since epoch of the UTC calendar month containing `epoch_seconds`.
std::int64_t utc_month_index(std::int64_t epoch_seconds);

// --- Timelines ---

struct JoiningRule {
  std::set<std::string> target_forums;
  Cohort cohort = Cohort::joiner;
};

// Sorts posts by (created_utc, id) and derives T0:
//   joiner:  first post in any target forum;
//   control: earliest post in a forum not seen before it, excluding target
//            forums, requiring at least one prior post; falls back to the
//            user's first post when no such event exists.
// T0 stays unset only when a joiner never touches a target forum.
UserTimeline build_timeline(std::vector<Post> posts, const JoiningRule& rule);

struct CohortConfig {
  std::set<std::string> target_forums;
  std::size_t joiner_min_posts = 1;
  std::size_t joiner_min_active_months = 10;
  std::size_t joiner_window_months = 12;
};

// Splits users into joiners (posted in a target forum and meet the
// engagement rule there) and controls (never posted in a target forum).
// Users with target posts but insufficient engagement are dropped.
std::vector<UserTimeline> assign_cohorts(
    const std::map<std::string, std::vector<Post>>& posts_by_user, const CohortConfig& cfg);

}  // namespace e11
