#include "e11/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "e11/digest.hpp"
#include "e11/efa.hpp"
#include "e11/forecast.hpp"
#include "e11/profiles.hpp"
#include "e11/scorer.hpp"
#include "e11/trend.hpp"

namespace e11 {

namespace fs = std::filesystem;
using nlohmann::json;

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::score: return "score";
    case Stage::efa_fit: return "efa-fit";
    case Stage::efa_score: return "efa-score";
    case Stage::profile: return "profile";
    case Stage::forecast: return "forecast";
    case Stage::trend: return "trend";
  }
  return "?";
}

Stage stage_from_name(const std::string& name) {
  for (Stage s : {Stage::ingest, Stage::score, Stage::efa_fit, Stage::efa_score, Stage::profile,
                  Stage::forecast, Stage::trend})
    if (name == stage_name(s)) return s;
  throw ConfigError("unknown stage '" + name + "'");
}

ReportKind report_kind_from_name(const std::string& name) {
  if (name == "forum-profile") return ReportKind::forum_profile;
  if (name == "banned-compare") return ReportKind::banned_compare;
  if (name == "auc-curve") return ReportKind::auc_curve;
  if (name == "trajectory") return ReportKind::trajectory;
  throw ConfigError("unknown report kind '" + name + "'");
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".e11.lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw DependencyError("output directory is locked by another stage: " + path_.string());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string file_sha256_hex(const fs::path& path) { return to_hex(sha256(read_file(path))); }

namespace {

fs::path outpath(const PipelineConfig& cfg, const char* name) {
  return fs::path(cfg.output_dir) / name;
}

void require_artifact(const PipelineConfig& cfg, const char* name, const char* produced_by) {
  if (!fs::exists(outpath(cfg, name)))
    throw DependencyError(std::string("missing artifact ") + name + ": run " + produced_by +
                          " first");
}

void write_manifest(const PipelineConfig& cfg, const std::string& stage,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  json m;
  m["stage"] = stage;
  m["config_hash"] = cfg.config_hash;
  m["seed"] = cfg.seed;
  m["tool_version"] = "e11 0.1.0";
  json in = json::object();
  for (const auto& p : inputs) in[p.filename().string()] = file_sha256_hex(p);
  json out = json::object();
  for (const auto& p : outputs) out[p.filename().string()] = file_sha256_hex(p);
  m["inputs"] = std::move(in);
  m["outputs"] = std::move(out);
  write_file_atomic(outpath(cfg, ("manifest_" + stage + ".json").c_str()), m.dump(2) + "\n");
}

json post_to_json(const Post& p) {
  json j = {{"id", p.id},
            {"user", p.user},
            {"forum", p.forum},
            {"created_utc", p.created_utc},
            {"text", p.text}};
  if (p.lang) j["lang"] = *p.lang;
  return j;
}

// --- ingest ---

void run_ingest(const PipelineConfig& cfg) {
  if (cfg.corpus_path.empty()) throw ConfigError("paths.corpus is required for ingest");
  ParseResult parsed = parse_jsonl_file(cfg.corpus_path, cfg.lenient_parse);
  FilterOutcome filtered = apply_filters(parsed.posts, cfg.filters);
  if (filtered.kept.empty()) throw DataError("ingest: no posts survive the filters");

  std::ostringstream jsonl;
  for (const Post& p : filtered.kept) jsonl << post_to_json(p).dump() << '\n';
  write_file_atomic(outpath(cfg, artifact::kFiltered), jsonl.str());

  json drops = json::object();
  for (const auto& [reason, count] : filtered.dropped) drops[reason] = count;
  json drop_summary = {{"input_posts", parsed.posts.size()},
                       {"kept", filtered.kept.size()},
                       {"dropped", drops},
                       {"record_errors", parsed.errors.size()}};
  write_file_atomic(outpath(cfg, artifact::kDropSummary), drop_summary.dump(2) + "\n");

  json errors = json::array();
  for (const auto& e : parsed.errors)
    errors.push_back({{"line", e.line_no}, {"error", e.message}});
  write_file_atomic(outpath(cfg, artifact::kIngestErrors), errors.dump(2) + "\n");

  std::map<std::string, std::vector<Post>> by_user;
  for (const Post& p : filtered.kept) by_user[p.user].push_back(p);
  const auto timelines = assign_cohorts(by_user, cfg.cohorts);
  json tl_json = json::array();
  for (const auto& tl : timelines) {
    json entry = {{"user", tl.user},
                  {"cohort", tl.cohort == Cohort::joiner ? "joiner" : "control"}};
    if (tl.t0)
      entry["t0"] = *tl.t0;
    else
      entry["t0"] = nullptr;
    json ids = json::array();
    for (const Post& p : tl.posts) ids.push_back(p.id);
    entry["post_ids"] = std::move(ids);
    tl_json.push_back(std::move(entry));
  }
  write_file_atomic(outpath(cfg, artifact::kTimelines),
                    json{{"timelines", tl_json}}.dump(2) + "\n");

  write_manifest(cfg, "ingest", {cfg.corpus_path},
                 {outpath(cfg, artifact::kFiltered), outpath(cfg, artifact::kDropSummary),
                  outpath(cfg, artifact::kIngestErrors), outpath(cfg, artifact::kTimelines)});
}

// --- score ---

void run_score(const PipelineConfig& cfg) {
  require_artifact(cfg, artifact::kFiltered, "ingest");
  if (cfg.item_bank_path.empty()) throw ConfigError("paths.item_bank is required for score");

  const ItemBank bank = load_item_bank(cfg.item_bank_path);
  ParseResult corpus = parse_jsonl_file(outpath(cfg, artifact::kFiltered).string(), false);

  std::shared_ptr<EmbeddingProvider> provider;
  const bool write_cache = cfg.embedder.kind == EmbeddingProviderConfig::Kind::http &&
                           !cfg.cache_path.empty();
  if (write_cache) {
    VectorCache cache = fs::exists(cfg.cache_path) ? VectorCache::load(cfg.cache_path)
                                                   : VectorCache();
    auto inner = make_provider(cfg.embedder);
    const std::string tag = inner->tag();
    provider = std::make_shared<CachingProvider>(std::move(cache), std::move(inner), tag);
  } else {
    provider = make_provider(cfg.embedder);
  }

  const Scorer scorer(bank, provider, cfg.embedder);
  ScoreCorpusResult scored = scorer.score_corpus(corpus.posts);
  save_score_matrix(scored.matrix, outpath(cfg, artifact::kItemScores).string());

  json skips = json::array();
  for (const auto& s : scored.skipped)
    skips.push_back({{"post_id", s.post_id}, {"error", s.message}});
  write_file_atomic(outpath(cfg, artifact::kScoreSkips), skips.dump(2) + "\n");

  if (write_cache)
    static_cast<CachingProvider*>(provider.get())->cache().save(cfg.cache_path);

  write_manifest(cfg, "score",
                 {outpath(cfg, artifact::kFiltered), fs::path(cfg.item_bank_path)},
                 {outpath(cfg, artifact::kItemScores), outpath(cfg, artifact::kScoreSkips)});
}

// --- efa fit ---

void run_efa_fit(const PipelineConfig& cfg) {
  require_artifact(cfg, artifact::kItemScores, "score");
  const ItemScoreMatrix scores = load_item_score_matrix(outpath(cfg, artifact::kItemScores).string());
  const MatrixD X = scores.scores.cast<double>();

  json diagnostics = json::object();
  CorrelationMatrix corr = correlation_matrix(X);
  try {
    const KmoResult k = kmo(corr);
    json msa = json::array();
    for (Index i = 0; i < k.per_item_msa.size(); ++i) msa.push_back(k.per_item_msa[i]);
    diagnostics["kmo"] = {{"overall", k.overall}, {"per_item_msa", msa}};
  } catch (const Error& e) {
    diagnostics["kmo"] = {{"error", e.what()}};
  }
  try {
    const BartlettResult b = bartlett(corr);
    diagnostics["bartlett"] = {{"chi2", b.chi2}, {"df", b.df}, {"p_value", b.p_value}};
  } catch (const Error& e) {
    diagnostics["bartlett"] = {{"error", e.what()}};
  }

  int k = cfg.efa.k_override;
  if (k <= 0) {
    const ParallelAnalysisResult pa =
        parallel_analysis(X, cfg.efa.iters, cfg.efa.quantile, cfg.seed);
    json observed = json::array(), thresholds = json::array();
    for (Index i = 0; i < pa.observed.size(); ++i) {
      observed.push_back(pa.observed[i]);
      thresholds.push_back(pa.thresholds[i]);
    }
    diagnostics["parallel_analysis"] = {{"k", pa.k},
                                        {"iters", cfg.efa.iters},
                                        {"quantile", cfg.efa.quantile},
                                        {"observed", observed},
                                        {"thresholds", thresholds}};
    k = pa.k;
    if (k < 1)
      throw DataError("efa-fit: parallel analysis retained no factors; set efa.k_override");
  } else {
    diagnostics["parallel_analysis"] = {{"skipped", "k_override in effect"}};
  }
  diagnostics["k"] = k;

  EfaModel model = fit_efa(X, k);
  model.item_ids = scores.item_ids;
  model.bank_fingerprint = scores.bank_fingerprint;

  if (!cfg.efa.factor_names_path.empty()) {
    const json names_doc = json::parse(read_file(cfg.efa.factor_names_path));
    const auto names = names_doc.at("factor_names").get<std::vector<std::string>>();
    if (static_cast<int>(names.size()) == k) {
      model.factor_names = names;
      diagnostics["factor_names"] = "attached from fixture";
    } else {
      diagnostics["factor_names"] = "fixture has " + std::to_string(names.size()) +
                                    " names but k=" + std::to_string(k) + "; kept defaults";
    }
  }

  save_efa_model(model, outpath(cfg, artifact::kEfaModel).string());
  write_file_atomic(outpath(cfg, artifact::kEfaDiagnostics), diagnostics.dump(2) + "\n");

  if (cfg.item_bank_path.empty()) throw ConfigError("paths.item_bank is required for efa-fit");
  const ItemBank bank = load_item_bank(cfg.item_bank_path);
  if (bank.fingerprint() != scores.bank_fingerprint)
    throw DependencyError("efa-fit: item bank fingerprint mismatch\n  bank:   " +
                          bank.fingerprint() + "\n  scores: " + scores.bank_fingerprint);
  const auto top = top_loadings_report(model, bank, 10);
  std::ostringstream csv;
  csv << "factor,item_id,loading,scale,source\n";
  for (const auto& row : top) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", row.loading);
    csv << '"' << row.factor << "\"," << row.item_id << ',' << buf << ",\"" << row.scale
        << "\",\"" << row.source << "\"\n";
  }
  write_file_atomic(outpath(cfg, artifact::kTopLoadings), csv.str());

  write_manifest(cfg, "efa-fit", {outpath(cfg, artifact::kItemScores)},
                 {outpath(cfg, artifact::kEfaModel), outpath(cfg, artifact::kEfaDiagnostics),
                  outpath(cfg, artifact::kTopLoadings)});
}

// --- efa score ---

void run_efa_score(const PipelineConfig& cfg) {
  require_artifact(cfg, artifact::kItemScores, "score");
  require_artifact(cfg, artifact::kEfaModel, "efa-fit");
  const ItemScoreMatrix scores = load_item_score_matrix(outpath(cfg, artifact::kItemScores).string());
  const EfaModel model = load_efa_model(outpath(cfg, artifact::kEfaModel).string());

  if (model.bank_fingerprint != scores.bank_fingerprint)
    throw DependencyError(
        "efa-score: model was fitted against a different item bank\n  model:  " +
        model.bank_fingerprint + "\n  scores: " + scores.bank_fingerprint);
  if (model.item_ids != scores.item_ids)
    throw DependencyError("efa-score: item id order differs between model and scores");

  const MatrixD result = factor_scores(scores.scores.cast<double>(), model);
  FactorScoreMatrix out;
  out.post_ids = scores.post_ids;
  out.factor_names = model.factor_names;
  out.scores = result.cast<float>();
  out.model_fingerprint = model.fingerprint();
  out.provider_tag = scores.provider_tag;
  save_score_matrix(out, outpath(cfg, artifact::kFactorScores).string());

  write_manifest(cfg, "efa-score",
                 {outpath(cfg, artifact::kItemScores), outpath(cfg, artifact::kEfaModel)},
                 {outpath(cfg, artifact::kFactorScores)});
}

// --- shared loaders for downstream stages ---

std::map<std::string, Post> load_posts_by_id(const PipelineConfig& cfg) {
  require_artifact(cfg, artifact::kFiltered, "ingest");
  ParseResult corpus = parse_jsonl_file(outpath(cfg, artifact::kFiltered).string(), false);
  std::map<std::string, Post> posts;
  for (Post& p : corpus.posts) posts.emplace(p.id, std::move(p));
  return posts;
}

std::vector<UserTimeline> load_timelines(const PipelineConfig& cfg,
                                         const std::map<std::string, Post>& posts_by_id) {
  require_artifact(cfg, artifact::kTimelines, "ingest");
  const json doc = json::parse(read_file(outpath(cfg, artifact::kTimelines)));
  std::vector<UserTimeline> timelines;
  for (const auto& entry : doc.at("timelines")) {
    UserTimeline tl;
    tl.user = entry.at("user").get<std::string>();
    tl.cohort = entry.at("cohort").get<std::string>() == "joiner" ? Cohort::joiner
                                                                  : Cohort::control;
    if (!entry.at("t0").is_null()) tl.t0 = entry.at("t0").get<std::int64_t>();
    for (const auto& id : entry.at("post_ids")) {
      auto it = posts_by_id.find(id.get<std::string>());
      if (it == posts_by_id.end())
        throw DependencyError("timelines reference post '" + id.get<std::string>() +
                              "' missing from the filtered corpus");
      tl.posts.push_back(it->second);
    }
    timelines.push_back(std::move(tl));
  }
  return timelines;
}

// --- profile ---

void run_profile(const PipelineConfig& cfg) {
  require_artifact(cfg, artifact::kFactorScores, "efa-score");
  const FactorScoreMatrix scores =
      load_factor_score_matrix(outpath(cfg, artifact::kFactorScores).string());
  const auto posts = load_posts_by_id(cfg);

  std::vector<std::string> keys;
  keys.reserve(scores.post_ids.size());
  for (const auto& id : scores.post_ids) {
    auto it = posts.find(id);
    if (it == posts.end())
      throw DependencyError("profile: scored post '" + id + "' missing from filtered corpus");
    keys.push_back(cfg.profiles.group_by == "forum" ? it->second.forum : it->second.user);
  }

  const auto profiles = aggregate_mean(scores, keys);
  json groups = json::array();
  for (const auto& gp : profiles) {
    json mean = json::array(), sd = json::array(), pos = json::array();
    for (Index j = 0; j < gp.mean.size(); ++j) {
      mean.push_back(gp.mean[j]);
      sd.push_back(gp.sd[j]);
      pos.push_back(gp.positivity[j]);
    }
    groups.push_back({{"group", gp.group_key},
                      {"n_posts", gp.n_posts},
                      {"mean", mean},
                      {"sd", sd},
                      {"positivity", pos}});
  }
  json doc = {{"group_by", cfg.profiles.group_by},
              {"factor_names", scores.factor_names},
              {"groups", groups}};
  write_file_atomic(outpath(cfg, artifact::kProfiles), doc.dump(2) + "\n");

  std::vector<fs::path> outputs = {outpath(cfg, artifact::kProfiles)};
  if (!cfg.profiles.banned_forums.empty()) {
    const std::set<std::string> banned(cfg.profiles.banned_forums.begin(),
                                       cfg.profiles.banned_forums.end());
    std::vector<Index> rows_a, rows_b;
    for (std::size_t i = 0; i < scores.post_ids.size(); ++i) {
      const Post& p = posts.at(scores.post_ids[i]);
      (banned.count(p.forum) ? rows_a : rows_b).push_back(static_cast<Index>(i));
    }
    const auto variant = cfg.profiles.ttest_variant == "welch" ? TTestVariant::welch
                                                               : TTestVariant::student_pooled;
    const auto comparison = compare_groups(scores, rows_a, rows_b, variant);
    json rows = json::array();
    for (const auto& c : comparison)
      rows.push_back({{"factor", c.factor},
                      {"t", c.test.t},
                      {"df", c.test.df},
                      {"p", c.test.p_value},
                      {"p_bonferroni", c.p_bonferroni}});
    json cmp = {{"variant", cfg.profiles.ttest_variant},
                {"group_a", cfg.profiles.banned_forums},
                {"n_a", rows_a.size()},
                {"n_b", rows_b.size()},
                {"rows", rows}};
    write_file_atomic(outpath(cfg, artifact::kBannedCompare), cmp.dump(2) + "\n");
    outputs.push_back(outpath(cfg, artifact::kBannedCompare));
  }

  write_manifest(cfg, "profile",
                 {outpath(cfg, artifact::kFactorScores), outpath(cfg, artifact::kFiltered)},
                 outputs);
}

// --- forecast ---

void run_forecast(const PipelineConfig& cfg) {
  require_artifact(cfg, artifact::kFactorScores, "efa-score");
  const FactorScoreMatrix scores =
      load_factor_score_matrix(outpath(cfg, artifact::kFactorScores).string());
  const auto posts = load_posts_by_id(cfg);
  auto timelines = load_timelines(cfg, posts);

  std::erase_if(timelines, [](const UserTimeline& tl) { return !tl.t0.has_value(); });
  if (timelines.empty()) throw DataError("forecast: no timelines with a joining event");

  const FactorScoreLookup lookup(scores);
  SweepConfig sweep;
  sweep.folds = cfg.forecast.folds;
  sweep.l2 = cfg.forecast.l2;
  sweep.seed = cfg.seed;
  sweep.lookback_months = cfg.forecast.lookback_months;
  const AucCurve curve = months_before_sweep(timelines, lookup, cfg.forecast.offsets, sweep);

  json points = json::array();
  for (const auto& p : curve.points) {
    json entry = {{"months_before", p.months_before},
                  {"n_joiners", p.n_joiners},
                  {"n_controls", p.n_controls}};
    if (p.missing) {
      entry["missing"] = true;
      entry["reason"] = p.missing_reason;
    } else {
      entry["auc_mean"] = p.auc_mean;
      entry["ci_low"] = p.ci_low;
      entry["ci_high"] = p.ci_high;
      json folds = json::array();
      for (std::size_t f = 0; f < p.fold_aucs.size(); ++f) {
        const auto& m = p.fold_models[f];
        json weights = json::array();
        for (Index j = 0; j < m.weights.size(); ++j) weights.push_back(m.weights[j]);
        folds.push_back({{"fold", f},
                         {"auc", p.fold_aucs[f]},
                         {"weights", weights},
                         {"intercept", m.intercept},
                         {"converged", m.converged},
                         {"iterations", m.iterations}});
      }
      entry["folds"] = std::move(folds);
    }
    points.push_back(std::move(entry));
  }
  json doc = {{"factor_names", scores.factor_names},
              {"folds", cfg.forecast.folds},
              {"l2", cfg.forecast.l2},
              {"seed", cfg.seed},
              {"points", points}};
  write_file_atomic(outpath(cfg, artifact::kAucCurve), doc.dump(2) + "\n");

  write_manifest(cfg, "forecast",
                 {outpath(cfg, artifact::kFactorScores), outpath(cfg, artifact::kTimelines)},
                 {outpath(cfg, artifact::kAucCurve)});
}

// --- trend ---

void run_trend(const PipelineConfig& cfg) {
  require_artifact(cfg, artifact::kFactorScores, "efa-score");
  const FactorScoreMatrix scores =
      load_factor_score_matrix(outpath(cfg, artifact::kFactorScores).string());
  const auto posts = load_posts_by_id(cfg);
  auto timelines = load_timelines(cfg, posts);
  std::erase_if(timelines, [](const UserTimeline& tl) { return !tl.t0.has_value(); });
  if (timelines.empty()) throw DataError("trend: no timelines with a joining event");

  const FactorScoreLookup lookup(scores);
  CompositeConfig composite = CompositeConfig::from_reference(scores);
  if (!cfg.trend.single_factor.empty()) composite.single_factor = cfg.trend.single_factor;

  std::map<std::string, std::vector<std::pair<double, double>>> pooled;
  for (const auto& tl : timelines) {
    auto points = align_to_t0(tl, lookup, composite);
    if (cfg.trend.per_user_average) {
      // Collapse each user's points into integer-month bins first.
      std::map<std::int64_t, std::pair<double, std::size_t>> bins;
      for (const auto& [offset, value] : points) {
        auto& bin = bins[static_cast<std::int64_t>(std::llround(offset))];
        bin.first += value;
        ++bin.second;
      }
      points.clear();
      for (const auto& [m, acc] : bins)
        points.emplace_back(static_cast<double>(m),
                            acc.first / static_cast<double>(acc.second));
    }
    auto& dst = pooled[tl.cohort == Cohort::joiner ? "joiner" : "control"];
    dst.insert(dst.end(), points.begin(), points.end());
  }

  std::vector<TrajectorySeries> series;
  json series_json = json::array();
  for (const auto& [cohort, points] : pooled) {
    if (points.size() < static_cast<std::size_t>(cfg.trend.loess.degree + 2)) continue;
    TrajectorySeries s;
    s.cohort = cohort;
    s.points = points;
    std::vector<double> x, y;
    x.reserve(points.size());
    y.reserve(points.size());
    for (const auto& [offset, value] : points) {
      x.push_back(offset);
      y.push_back(value);
    }
    s.smoothed = loess(x, y, cfg.trend.loess);
    json grid = json::array(), fitted = json::array();
    for (Index g = 0; g < s.smoothed.grid.size(); ++g) {
      grid.push_back(s.smoothed.grid[g]);
      fitted.push_back(s.smoothed.fitted[g]);
    }
    series_json.push_back({{"cohort", cohort},
                           {"n_points", points.size()},
                           {"neighborhood", s.smoothed.neighborhood},
                           {"fallback_points", s.smoothed.fallback_points},
                           {"grid", grid},
                           {"fitted", fitted}});
    series.push_back(std::move(s));
  }
  if (series.empty()) throw DataError("trend: no cohort has enough points to smooth");

  json doc = {{"composite",
               cfg.trend.single_factor.empty() ? "standardized-mean" : cfg.trend.single_factor},
              {"per_user_average", cfg.trend.per_user_average},
              {"frac", cfg.trend.loess.frac},
              {"degree", cfg.trend.loess.degree},
              {"series", series_json}};
  write_file_atomic(outpath(cfg, artifact::kTrajectory), doc.dump(2) + "\n");

  write_manifest(cfg, "trend",
                 {outpath(cfg, artifact::kFactorScores), outpath(cfg, artifact::kTimelines)},
                 {outpath(cfg, artifact::kTrajectory)});
}

}  // namespace

void run_stage(Stage stage, const PipelineConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  DirectoryLock lock(cfg.output_dir);
  switch (stage) {
    case Stage::ingest: run_ingest(cfg); break;
    case Stage::score: run_score(cfg); break;
    case Stage::efa_fit: run_efa_fit(cfg); break;
    case Stage::efa_score: run_efa_score(cfg); break;
    case Stage::profile: run_profile(cfg); break;
    case Stage::forecast: run_forecast(cfg); break;
    case Stage::trend: run_trend(cfg); break;
  }
}

namespace {

void write_sidecar(const fs::path& csv_path, const PipelineConfig& cfg, const char* kind,
                   const json& extra) {
  json meta = {{"kind", kind},
               {"csv", csv_path.filename().string()},
               {"config_hash", cfg.config_hash}};
  meta.update(extra);
  write_file_atomic(csv_path.string() + ".meta.json", meta.dump(2) + "\n");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

fs::path emit_report(ReportKind kind, const PipelineConfig& cfg) {
  switch (kind) {
    case ReportKind::forum_profile: {
      require_artifact(cfg, artifact::kProfiles, "profile");
      const json doc = json::parse(read_file(outpath(cfg, artifact::kProfiles)));
      const auto names = doc.at("factor_names").get<std::vector<std::string>>();
      const auto& groups = doc.at("groups");
      if (groups.empty()) throw DataError("report: profiles artifact has no groups");
      std::ostringstream csv;
      csv << "group,n_posts";
      for (const auto& f : names) csv << ",mean_" << f;
      for (const auto& f : names) csv << ",sd_" << f;
      for (const auto& f : names) csv << ",pos_" << f;
      csv << '\n';
      for (const auto& g : groups) {
        csv << g.at("group").get<std::string>() << ',' << g.at("n_posts").get<std::size_t>();
        for (const char* key : {"mean", "sd", "positivity"})
          for (const auto& v : g.at(key)) csv << ',' << fmt(v.get<double>());
        csv << '\n';
      }
      const fs::path path = outpath(cfg, "report_forum_profile.csv");
      write_file_atomic(path, csv.str());
      write_sidecar(path, cfg, "forum-profile",
                    {{"factor_names", names}, {"group_by", doc.at("group_by")}});
      return path;
    }
    case ReportKind::banned_compare: {
      require_artifact(cfg, artifact::kBannedCompare, "profile (with profiles.banned_forums)");
      const json doc = json::parse(read_file(outpath(cfg, artifact::kBannedCompare)));
      const auto& rows = doc.at("rows");
      if (rows.empty()) throw DataError("report: banned-compare artifact is empty");
      std::ostringstream csv;
      csv << "factor,t,df,p,p_bonferroni\n";
      for (const auto& r : rows) {
        csv << '"' << r.at("factor").get<std::string>() << '"' << ','
            << fmt(r.at("t").get<double>()) << ',' << fmt(r.at("df").get<double>()) << ','
            << fmt(r.at("p").get<double>()) << ',' << fmt(r.at("p_bonferroni").get<double>())
            << '\n';
      }
      const fs::path path = outpath(cfg, "report_banned_compare.csv");
      write_file_atomic(path, csv.str());
      write_sidecar(path, cfg, "banned-compare",
                    {{"variant", doc.at("variant")},
                     {"n_a", doc.at("n_a")},
                     {"n_b", doc.at("n_b")}});
      return path;
    }
    case ReportKind::auc_curve: {
      require_artifact(cfg, artifact::kAucCurve, "forecast");
      const json doc = json::parse(read_file(outpath(cfg, artifact::kAucCurve)));
      const auto& points = doc.at("points");
      if (points.empty()) throw DataError("report: auc-curve artifact is empty");
      std::ostringstream csv;
      csv << "months_before,auc_mean,ci_low,ci_high,n_joiners,n_controls\n";
      for (const auto& p : points) {
        csv << p.at("months_before").get<int>() << ',';
        if (p.value("missing", false))
          csv << ",,";
        else
          csv << fmt(p.at("auc_mean").get<double>()) << ',' << fmt(p.at("ci_low").get<double>())
              << ',' << fmt(p.at("ci_high").get<double>());
        csv << ',' << p.at("n_joiners").get<std::size_t>() << ','
            << p.at("n_controls").get<std::size_t>() << '\n';
      }
      const fs::path path = outpath(cfg, "report_auc_curve.csv");
      write_file_atomic(path, csv.str());
      write_sidecar(path, cfg, "auc-curve",
                    {{"folds", doc.at("folds")}, {"l2", doc.at("l2")}, {"seed", doc.at("seed")}});
      return path;
    }
    case ReportKind::trajectory: {
      require_artifact(cfg, artifact::kTrajectory, "trend");
      const json doc = json::parse(read_file(outpath(cfg, artifact::kTrajectory)));
      const auto& series = doc.at("series");
      if (series.empty()) throw DataError("report: trajectory artifact is empty");
      std::ostringstream csv;
      csv << "cohort,grid_offset,fitted,n_points_in_window\n";
      for (const auto& s : series) {
        const auto& grid = s.at("grid");
        const auto& fitted = s.at("fitted");
        for (std::size_t g = 0; g < grid.size(); ++g)
          csv << s.at("cohort").get<std::string>() << ',' << fmt(grid[g].get<double>()) << ','
              << fmt(fitted[g].get<double>()) << ',' << s.at("neighborhood").get<Index>()
              << '\n';
      }
      const fs::path path = outpath(cfg, "report_trajectory.csv");
      write_file_atomic(path, csv.str());
      write_sidecar(path, cfg, "trajectory",
                    {{"composite", doc.at("composite")},
                     {"frac", doc.at("frac")},
                     {"degree", doc.at("degree")}});
      return path;
    }
  }
  throw ConfigError("unknown report kind");
}

}  // namespace e11
