#include "e11/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <unordered_set>

#include <json.hpp>

#include "e11/text.hpp"

namespace e11 {

using nlohmann::json;

Post parse_post_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record is not a JSON object");

  Post p;
  const auto require = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(std::string("missing required field '") + key + "'");
    return *it;
  };
  const auto as_string = [&](const json& v, const char* key) -> std::string {
    if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  };

  p.id = as_string(require("id"), "id");
  p.user = as_string(require("user"), "user");
  p.forum = as_string(require("forum"), "forum");
  const json& ts = require("created_utc");
  if (!ts.is_number_integer() && !ts.is_number_unsigned())
    throw DataError("field 'created_utc' must be an integer");
  p.created_utc = ts.get<std::int64_t>();
  p.text = as_string(require("text"), "text");
  if (auto it = j.find("lang"); it != j.end() && !it->is_null())
    p.lang = as_string(*it, "lang");

  if (p.id.empty()) throw DataError("post id is empty");
  if (p.created_utc <= 0) throw DataError("created_utc must be > 0");
  if (trim(p.text).empty()) throw DataError("post text is blank");
  return p;
}

ParseResult parse_jsonl(std::istream& in, bool lenient) {
  ParseResult result;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      Post p = parse_post_record(line);
      if (!seen_ids.insert(p.id).second)
        throw DataError("duplicate post id '" + p.id + "'");
      result.posts.push_back(std::move(p));
    } catch (const DataError& e) {
      if (!lenient)
        throw DataError("line " + std::to_string(line_no) + ": " + e.what());
      result.errors.push_back({line_no, e.what()});
    }
  }
  return result;
}

ParseResult parse_jsonl_file(const std::string& path, bool lenient) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);
  return parse_jsonl(in, lenient);
}

const char* drop_reason_name(DropReason r) {
  switch (r) {
    case DropReason::language: return "language";
    case DropReason::word_count: return "word_count";
    case DropReason::date: return "date";
    case DropReason::forum: return "forum";
  }
  return "?";
}

std::optional<DropReason> filter_reason(const Post& post, const FilterConfig& cfg) {
  if (cfg.require_lang && post.lang != cfg.require_lang) return DropReason::language;
  if (word_count(post.text) < cfg.min_words) return DropReason::word_count;
  if (post.created_utc < cfg.min_date) return DropReason::date;
  if (cfg.forum_allowlist && !cfg.forum_allowlist->count(post.forum)) return DropReason::forum;
  return std::nullopt;
}

FilterOutcome apply_filters(const std::vector<Post>& posts, const FilterConfig& cfg) {
  FilterOutcome out;
  out.kept.reserve(posts.size());
  for (const Post& p : posts) {
    if (auto reason = filter_reason(p, cfg)) {
      ++out.dropped[drop_reason_name(*reason)];
    } else {
      out.kept.push_back(p);
    }
  }
  return out;
}

std::int64_t utc_month_index(std::int64_t epoch_seconds) {
  // Civil-calendar month arithmetic without timezone state.
  std::int64_t days = epoch_seconds / 86400;
  if (epoch_seconds < 0 && epoch_seconds % 86400 != 0) --days;
  // Howard Hinnant's days-to-civil algorithm.
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const std::int64_t doe = days - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = yoe + era * 400;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const std::int64_t month = mp < 10 ? mp + 3 : mp - 9;  // 1..12
  const std::int64_t year = y + (month <= 2);
  return year * 12 + (month - 1);
}

std::set<std::string> activity_filter(
    const std::map<std::string, std::vector<Post>>& posts_by_user, std::size_t min_posts,
    std::size_t min_active_months, std::size_t window_months) {
  if (window_months != 0 && window_months < min_active_months)
    throw DataError("activity_filter: window_months must be >= min_active_months");
  std::set<std::string> result;
  for (const auto& [user, posts] : posts_by_user) {
    if (posts.size() < min_posts) continue;
    if (min_active_months == 0) {
      result.insert(user);
      continue;
    }
    std::set<std::int64_t> months;
    for (const Post& p : posts) months.insert(utc_month_index(p.created_utc));
    bool ok = false;
    if (window_months == 0) {
      ok = months.size() >= min_active_months;
    } else {
      // Slide a window of `window_months` consecutive calendar months over
      // the user's active months; sorted-set two-pointer count.
      std::vector<std::int64_t> m(months.begin(), months.end());
      std::size_t lo = 0;
      for (std::size_t hi = 0; hi < m.size(); ++hi) {
        while (m[hi] - m[lo] >= static_cast<std::int64_t>(window_months)) ++lo;
        if (hi - lo + 1 >= min_active_months) {
          ok = true;
          break;
        }
      }
    }
    if (ok) result.insert(user);
  }
  return result;
}

UserTimeline build_timeline(std::vector<Post> posts, const JoiningRule& rule) {
  if (posts.empty()) throw DataError("build_timeline: empty post list");
  for (const Post& p : posts)
    if (p.user != posts.front().user)
      throw DataError("build_timeline: posts span multiple users");

  std::sort(posts.begin(), posts.end(), [](const Post& a, const Post& b) {
    return std::tie(a.created_utc, a.id) < std::tie(b.created_utc, b.id);
  });

  UserTimeline tl;
  tl.user = posts.front().user;
  tl.cohort = rule.cohort;

  if (rule.cohort == Cohort::joiner) {
    for (const Post& p : posts) {
      if (rule.target_forums.count(p.forum)) {
        tl.t0 = p.created_utc;
        break;
      }
    }
  } else {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < posts.size(); ++i) {
      const Post& p = posts[i];
      if (i > 0 && !rule.target_forums.count(p.forum) && !seen.count(p.forum)) {
        tl.t0 = p.created_utc;
        break;
      }
      seen.insert(p.forum);
    }
    if (!tl.t0) tl.t0 = posts.front().created_utc;
  }

  tl.posts = std::move(posts);
  return tl;
}

std::vector<UserTimeline> assign_cohorts(
    const std::map<std::string, std::vector<Post>>& posts_by_user, const CohortConfig& cfg) {
  // Engagement rule is evaluated on target-forum posts only.
  std::map<std::string, std::vector<Post>> target_posts;
  for (const auto& [user, posts] : posts_by_user) {
    for (const Post& p : posts)
      if (cfg.target_forums.count(p.forum)) target_posts[user].push_back(p);
  }
  const std::set<std::string> engaged =
      activity_filter(target_posts, cfg.joiner_min_posts, cfg.joiner_min_active_months,
                      cfg.joiner_window_months);

  std::vector<UserTimeline> timelines;
  for (const auto& [user, posts] : posts_by_user) {
    const bool touched_target = target_posts.count(user) > 0;
    if (touched_target && !engaged.count(user)) continue;  // insufficient engagement
    JoiningRule rule;
    rule.target_forums = cfg.target_forums;
    rule.cohort = touched_target ? Cohort::joiner : Cohort::control;
    timelines.push_back(build_timeline(posts, rule));
  }
  return timelines;
}

}  // namespace e11
