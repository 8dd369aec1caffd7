#include "e11/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "e11/digest.hpp"
#include "e11/text.hpp"

extern char** environ;

namespace e11 {

namespace {

std::string strip(std::string_view s) { return std::string(trim(s)); }

bool looks_like_float(std::string_view s) {
  return s.find('.') != std::string_view::npos || s.find('e') != std::string_view::npos ||
         s.find('E') != std::string_view::npos;
}

ConfigDoc::Value parse_scalar(const std::string& raw, const std::string& key) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        ++i;
        switch (raw[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: out += raw[i];
        }
      } else {
        out += raw[i];
      }
    }
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (!raw.empty() && looks_like_float(raw)) {
    double d = 0.0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), d);
    if (ec == std::errc() && ptr == raw.data() + raw.size()) return d;
  }
  std::int64_t i = 0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), i);
  if (ec == std::errc() && ptr == raw.data() + raw.size()) return i;
  throw ConfigError("config: cannot parse value '" + raw + "' for key '" + key + "'");
}

std::vector<std::string> split_array_items(const std::string& body, const std::string& key) {
  std::vector<std::string> items;
  std::string current;
  bool in_string = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (in_string) {
      current += c;
      if (c == '\\' && i + 1 < body.size()) {
        current += body[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      current += c;
    } else if (c == ',') {
      if (!strip(current).empty()) items.push_back(strip(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (in_string) throw ConfigError("config: unterminated string in array for '" + key + "'");
  if (!strip(current).empty()) items.push_back(strip(current));
  return items;
}

}  // namespace

ConfigDoc ConfigDoc::parse(const std::string& text) {
  ConfigDoc doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip comments outside of strings.
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line.resize(i);
        break;
      }
    }
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section");
      section = strip(stripped.substr(1, stripped.size() - 2));
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key_part = strip(stripped.substr(0, eq));
    const std::string val_part = strip(stripped.substr(eq + 1));
    if (key_part.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    const std::string key = section.empty() ? key_part : section + "." + key_part;

    if (!val_part.empty() && val_part.front() == '[') {
      if (val_part.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": arrays must close on the same line");
      const auto items = split_array_items(val_part.substr(1, val_part.size() - 2), key);
      bool all_strings = !items.empty();
      for (const auto& item : items)
        if (item.empty() || item.front() != '"') all_strings = false;
      if (items.empty() || all_strings) {
        std::vector<std::string> list;
        for (const auto& item : items)
          list.push_back(std::get<std::string>(parse_scalar(item, key)));
        doc.values_[key] = std::move(list);
      } else {
        std::vector<double> list;
        for (const auto& item : items) {
          const Value v = parse_scalar(item, key);
          if (std::holds_alternative<double>(v))
            list.push_back(std::get<double>(v));
          else if (std::holds_alternative<std::int64_t>(v))
            list.push_back(static_cast<double>(std::get<std::int64_t>(v)));
          else
            throw ConfigError("config: mixed array types for '" + key + "'");
        }
        doc.values_[key] = std::move(list);
      }
    } else {
      doc.values_[key] = parse_scalar(val_part, key);
    }
  }
  return doc;
}

ConfigDoc ConfigDoc::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(content);
}

void ConfigDoc::apply_env_overrides() {
  for (char** env = environ; *env != nullptr; ++env) {
    const std::string_view entry(*env);
    if (entry.rfind("E11_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    std::string name(entry.substr(4, eq - 4));
    const std::string value(entry.substr(eq + 1));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    // E11_SECTION_KEY -> section.key; top-level keys have no underscore.
    const auto us = name.find('_');
    std::string key = us == std::string::npos
                          ? name
                          : name.substr(0, us) + "." + name.substr(us + 1);
    try {
      values_[key] = parse_scalar(value, key);
    } catch (const ConfigError&) {
      values_[key] = value;  // bare strings allowed in the environment
    }
  }
}

namespace {

const ConfigDoc::Value* find_value(const std::map<std::string, ConfigDoc::Value>& values,
                                   const std::string& key) {
  auto it = values.find(key);
  return it == values.end() ? nullptr : &it->second;
}

}  // namespace

std::string ConfigDoc::get_string(const std::string& key, const std::string& fallback) const {
  const Value* v = find_value(values_, key);
  if (!v) return fallback;
  if (auto* s = std::get_if<std::string>(v)) return *s;
  throw ConfigError("config: '" + key + "' must be a string");
}

std::int64_t ConfigDoc::get_int(const std::string& key, std::int64_t fallback) const {
  const Value* v = find_value(values_, key);
  if (!v) return fallback;
  if (auto* i = std::get_if<std::int64_t>(v)) return *i;
  if (auto* d = std::get_if<double>(v)) return static_cast<std::int64_t>(*d);
  throw ConfigError("config: '" + key + "' must be an integer");
}

double ConfigDoc::get_double(const std::string& key, double fallback) const {
  const Value* v = find_value(values_, key);
  if (!v) return fallback;
  if (auto* d = std::get_if<double>(v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
  throw ConfigError("config: '" + key + "' must be a number");
}

bool ConfigDoc::get_bool(const std::string& key, bool fallback) const {
  const Value* v = find_value(values_, key);
  if (!v) return fallback;
  if (auto* b = std::get_if<bool>(v)) return *b;
  throw ConfigError("config: '" + key + "' must be a boolean");
}

std::vector<std::string> ConfigDoc::get_string_list(const std::string& key) const {
  const Value* v = find_value(values_, key);
  if (!v) return {};
  if (auto* l = std::get_if<std::vector<std::string>>(v)) return *l;
  if (auto* s = std::get_if<std::string>(v)) {
    // Comma-separated fallback, mainly for env overrides.
    std::vector<std::string> out;
    std::string current;
    for (char c : *s) {
      if (c == ',') {
        if (!strip(current).empty()) out.push_back(strip(current));
        current.clear();
      } else {
        current += c;
      }
    }
    if (!strip(current).empty()) out.push_back(strip(current));
    return out;
  }
  throw ConfigError("config: '" + key + "' must be a string array");
}

std::vector<double> ConfigDoc::get_double_list(const std::string& key) const {
  const Value* v = find_value(values_, key);
  if (!v) return {};
  if (auto* l = std::get_if<std::vector<double>>(v)) return *l;
  if (auto* l = std::get_if<std::vector<std::string>>(v)) {
    if (l->empty()) return {};
  }
  throw ConfigError("config: '" + key + "' must be a numeric array");
}

std::string ConfigDoc::canonical() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) {
    out << key << " = ";
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) {
            out << '"' << v << '"';
          } else if constexpr (std::is_same_v<T, bool>) {
            out << (v ? "true" : "false");
          } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            out << '[';
            for (std::size_t i = 0; i < v.size(); ++i)
              out << (i ? "," : "") << '"' << v[i] << '"';
            out << ']';
          } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            out << '[';
            for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
            out << ']';
          } else {
            out << v;
          }
        },
        value);
    out << '\n';
  }
  return out.str();
}

std::int64_t parse_date_or_epoch(const std::string& text) {
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    const int year = std::stoi(text.substr(0, 4));
    const unsigned month = static_cast<unsigned>(std::stoi(text.substr(5, 2)));
    const unsigned day = static_cast<unsigned>(std::stoi(text.substr(8, 2)));
    if (month < 1 || month > 12 || day < 1 || day > 31)
      throw ConfigError("config: bad date '" + text + "'");
    // days-from-civil (Hinnant).
    const std::int64_t y = year - (month <= 2);
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const std::int64_t yoe = y - era * 400;
    const std::int64_t doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return (era * 146097 + doe - 719468) * 86400;
  }
  std::int64_t epoch = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), epoch);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("config: expected YYYY-MM-DD or epoch seconds, got '" + text + "'");
  return epoch;
}

PipelineConfig PipelineConfig::from_doc(const ConfigDoc& doc) {
  PipelineConfig cfg;
  cfg.corpus_path = doc.get_string("paths.corpus", "");
  cfg.item_bank_path = doc.get_string("paths.item_bank", "");
  cfg.cache_path = doc.get_string("paths.cache", "");
  cfg.output_dir = doc.get_string("paths.output_dir", "out");

  const std::string kind = doc.get_string("embedder.kind", "stub");
  if (kind == "stub")
    cfg.embedder.kind = EmbeddingProviderConfig::Kind::stub;
  else if (kind == "http")
    cfg.embedder.kind = EmbeddingProviderConfig::Kind::http;
  else if (kind == "cache")
    cfg.embedder.kind = EmbeddingProviderConfig::Kind::file_cache;
  else
    throw ConfigError("config: embedder.kind must be stub|http|cache");
  cfg.embedder.endpoint = doc.get_string("embedder.endpoint", "");
  cfg.embedder.model_id = doc.get_string("embedder.model_id", "stub");
  cfg.embedder.dim = static_cast<int>(doc.get_int("embedder.dim", 64));
  cfg.embedder.batch_size = static_cast<int>(doc.get_int("embedder.batch_size", 64));
  cfg.embedder.normalize = doc.get_bool("embedder.normalize", true);
  cfg.embedder.path = cfg.cache_path;

  cfg.filters.min_words = static_cast<std::size_t>(doc.get_int("filters.min_words", 10));
  cfg.filters.min_date = parse_date_or_epoch(doc.get_string("filters.min_date", "2010-01-01"));
  const std::string lang = doc.get_string("filters.require_lang", "en");
  cfg.filters.require_lang = lang.empty() ? std::nullopt : std::make_optional(lang);
  const auto allow = doc.get_string_list("filters.forum_allowlist");
  if (!allow.empty())
    cfg.filters.forum_allowlist = std::set<std::string>(allow.begin(), allow.end());

  const auto targets = doc.get_string_list("cohorts.target_forums");
  cfg.cohorts.target_forums = std::set<std::string>(targets.begin(), targets.end());
  cfg.cohorts.joiner_min_posts =
      static_cast<std::size_t>(doc.get_int("cohorts.joiner_min_posts", 1));
  cfg.cohorts.joiner_min_active_months =
      static_cast<std::size_t>(doc.get_int("cohorts.joiner_min_active_months", 10));
  cfg.cohorts.joiner_window_months =
      static_cast<std::size_t>(doc.get_int("cohorts.joiner_window_months", 12));

  cfg.efa.iters = static_cast<int>(doc.get_int("efa.iters", 100));
  cfg.efa.quantile = doc.get_double("efa.quantile", 0.95);
  cfg.efa.k_override = static_cast<int>(doc.get_int("efa.k_override", 0));
  cfg.efa.factor_names_path = doc.get_string("efa.factor_names", "");

  cfg.profiles.group_by = doc.get_string("profiles.group_by", "forum");
  if (cfg.profiles.group_by != "forum" && cfg.profiles.group_by != "user")
    throw ConfigError("config: profiles.group_by must be forum|user");
  cfg.profiles.banned_forums = doc.get_string_list("profiles.banned_forums");
  cfg.profiles.ttest_variant = doc.get_string("profiles.ttest_variant", "student_pooled");
  if (cfg.profiles.ttest_variant != "student_pooled" && cfg.profiles.ttest_variant != "welch")
    throw ConfigError("config: profiles.ttest_variant must be student_pooled|welch");

  const auto offsets = doc.get_double_list("forecast.offsets");
  if (!offsets.empty()) {
    cfg.forecast.offsets.clear();
    for (double v : offsets) cfg.forecast.offsets.push_back(static_cast<int>(v));
  }
  cfg.forecast.folds = static_cast<int>(doc.get_int("forecast.folds", 5));
  cfg.forecast.l2 = doc.get_double("forecast.l2", 1.0);
  cfg.forecast.lookback_months =
      static_cast<int>(doc.get_int("forecast.lookback_months", 0));

  cfg.trend.loess.frac = doc.get_double("trend.frac", 0.3);
  cfg.trend.loess.degree = static_cast<int>(doc.get_int("trend.degree", 1));
  cfg.trend.loess.grid_points = static_cast<int>(doc.get_int("trend.grid_points", 100));
  cfg.trend.single_factor = doc.get_string("trend.single_factor", "");
  cfg.trend.per_user_average = doc.get_bool("trend.per_user_average", false);

  cfg.seed = static_cast<std::uint64_t>(doc.get_int("seed", 0));
  cfg.embedder.seed = cfg.seed + 1;  // distinct stream from the analysis RNG
  cfg.lenient_parse = doc.get_bool("lenient_parse", true);

  cfg.config_hash = to_hex(sha256(doc.canonical()));
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path, bool env_overrides) {
  ConfigDoc doc = ConfigDoc::load(path);
  if (env_overrides) doc.apply_env_overrides();
  return from_doc(doc);
}

}  // namespace e11
