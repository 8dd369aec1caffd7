// e11 — pipeline CLI: ingest, score, efa fit/score, profile, forecast,
// trend and report subcommands over a single config file.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "e11/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string provider;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "pipeline config file (TOML-style)")
      ->required();
  cmd->add_option("--seed", opts.seed, "override the config seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--provider", opts.provider, "override embedder kind: stub|http|cache");
  cmd->add_option("--output-dir", opts.output_dir, "override paths.output_dir");
}

e11::PipelineConfig load_config(const CommonOpts& opts) {
  e11::ConfigDoc doc = e11::ConfigDoc::load(opts.config_path);
  doc.apply_env_overrides();
  if (opts.seed_set) doc.set("seed", static_cast<std::int64_t>(opts.seed));
  if (!opts.provider.empty()) doc.set("embedder.kind", opts.provider);
  if (!opts.output_dir.empty()) doc.set("paths.output_dir", opts.output_dir);
  return e11::PipelineConfig::from_doc(doc);
}

std::vector<int> parse_offsets(const std::string& spec) {
  // "A..B" (inclusive, either direction) or comma-separated integers.
  std::vector<int> offsets;
  const auto dots = spec.find("..");
  if (dots != std::string::npos) {
    const int a = std::stoi(spec.substr(0, dots));
    const int b = std::stoi(spec.substr(dots + 2));
    const int step = a <= b ? 1 : -1;
    for (int v = a;; v += step) {
      offsets.push_back(v);
      if (v == b) break;
    }
  } else {
    std::size_t pos = 0;
    while (pos < spec.size()) {
      auto comma = spec.find(',', pos);
      if (comma == std::string::npos) comma = spec.size();
      offsets.push_back(std::stoi(spec.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  if (offsets.empty()) throw e11::ConfigError("--months-before: empty offset list");
  return offsets;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extremist-Eleven scoring and analysis pipeline"};
  app.require_subcommand(1);

  CommonOpts ingest_opts, score_opts, efa_fit_opts, efa_score_opts, profile_opts,
      forecast_opts, trend_opts, report_opts;

  CLI::App* ingest = app.add_subcommand("ingest", "filter a JSONL corpus and build timelines");
  add_common(ingest, ingest_opts);

  CLI::App* score = app.add_subcommand("score", "score posts against the item bank");
  add_common(score, score_opts);

  CLI::App* efa = app.add_subcommand("efa", "factor-analysis stages");
  efa->require_subcommand(1);
  CLI::App* efa_fit = efa->add_subcommand("fit", "diagnostics, factor count and model fit");
  add_common(efa_fit, efa_fit_opts);
  int k_override = 0;
  efa_fit->add_option("--k", k_override, "override the parallel-analysis factor count");
  CLI::App* efa_score = efa->add_subcommand("score", "apply a fitted model to item scores");
  add_common(efa_score, efa_score_opts);

  CLI::App* profile = app.add_subcommand("profile", "group-level factor profiles");
  add_common(profile, profile_opts);

  CLI::App* forecast = app.add_subcommand("forecast", "months-before joining AUC sweep");
  add_common(forecast, forecast_opts);
  std::string months_before;
  forecast->add_option("--months-before", months_before, "offsets, e.g. 12..0 or 12,6,0");
  int folds = 0;
  forecast->add_option("--folds", folds, "cross-validation folds");

  CLI::App* trend = app.add_subcommand("trend", "LOESS trajectories aligned to T0");
  add_common(trend, trend_opts);

  CLI::App* report = app.add_subcommand("report", "emit CSV reports from stage artifacts");
  add_common(report, report_opts);
  std::string kind;
  report->add_option("--kind", kind,
                     "forum-profile | banned-compare | auc-curve | trajectory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      e11::run_stage(e11::Stage::ingest, load_config(ingest_opts));
    } else if (score->parsed()) {
      e11::run_stage(e11::Stage::score, load_config(score_opts));
    } else if (efa->parsed() && efa_fit->parsed()) {
      auto cfg = load_config(efa_fit_opts);
      if (k_override > 0) cfg.efa.k_override = k_override;
      e11::run_stage(e11::Stage::efa_fit, cfg);
    } else if (efa->parsed() && efa_score->parsed()) {
      e11::run_stage(e11::Stage::efa_score, load_config(efa_score_opts));
    } else if (profile->parsed()) {
      e11::run_stage(e11::Stage::profile, load_config(profile_opts));
    } else if (forecast->parsed()) {
      auto cfg = load_config(forecast_opts);
      if (!months_before.empty()) cfg.forecast.offsets = parse_offsets(months_before);
      if (folds > 0) cfg.forecast.folds = folds;
      e11::run_stage(e11::Stage::forecast, cfg);
    } else if (trend->parsed()) {
      e11::run_stage(e11::Stage::trend, load_config(trend_opts));
    } else if (report->parsed()) {
      const auto path = e11::emit_report(e11::report_kind_from_name(kind),
                                         load_config(report_opts));
      std::printf("%s\n", path.c_str());
    }
  } catch (const e11::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const e11::DependencyError& e) {
    std::fprintf(stderr, "dependency error: %s\n", e.what());
    return 3;
  } catch (const e11::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
