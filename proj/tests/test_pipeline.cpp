#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "e11/pipeline.hpp"
#include "e11/scorer.hpp"

using namespace e11;
namespace fs = std::filesystem;

namespace {

std::string sentence(std::mt19937_64& rng, std::size_t n_words) {
  static const std::vector<std::string> vocab = {
      "the",   "quick",  "river",  "mountain", "people", "believe", "change", "society",
      "group", "nation", "always", "never",    "story",  "forum",   "market", "garden",
      "city",  "quiet",  "loud",   "evening"};
  std::string text;
  for (std::size_t i = 0; i < n_words; ++i) {
    if (i) text += ' ';
    text += vocab[rng() % vocab.size()];
  }
  return text;
}

// Small synthetic corpus: 3 forums, 12 users, a couple of target-forum
// joiners, timestamps over 2016-2018.
void write_corpus(const fs::path& path, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::ofstream out(path);
  const std::int64_t base = 1467331200;  // 2016-07-01
  int id = 0;
  for (int u = 0; u < 12; ++u) {
    const std::string user = "user" + std::to_string(u);
    const bool joiner = u < 3;
    for (int m = 0; m < 14; ++m) {
      nlohmann::json j;
      j["id"] = "p" + std::to_string(id++);
      j["user"] = user;
      // Joiners move into the target forum for the last 12 months.
      if (joiner && m >= 2)
        j["forum"] = "target";
      else
        j["forum"] = (u + m) % 2 == 0 ? "alpha" : "beta";
      j["created_utc"] = base + m * 2630016LL + u * 3600;
      j["text"] = sentence(rng, 12 + rng() % 30);
      j["lang"] = "en";
      out << j.dump() << '\n';
    }
  }
}

fs::path write_config(const fs::path& dir, const fs::path& corpus, const fs::path& outdir) {
  const fs::path bank = fs::path(E11_SOURCE_DIR) / "data" / "item_bank.json";
  const fs::path names = fs::path(E11_SOURCE_DIR) / "data" / "factor_names.json";
  std::ostringstream cfg;
  cfg << "seed = 7\n\n[paths]\n";
  cfg << "corpus = \"" << corpus.string() << "\"\n";
  cfg << "item_bank = \"" << bank.string() << "\"\n";
  cfg << "output_dir = \"" << outdir.string() << "\"\n";
  cfg << "\n[embedder]\nkind = \"stub\"\ndim = 48\nbatch_size = 32\n";
  cfg << "\n[filters]\nmin_words = 10\nmin_date = \"2010-01-01\"\n";
  cfg << "\n[cohorts]\ntarget_forums = [\"target\"]\njoiner_min_posts = 5\n"
         "joiner_min_active_months = 10\njoiner_window_months = 12\n";
  cfg << "\n[efa]\nk_override = 3\nfactor_names = \"" << names.string() << "\"\n";
  cfg << "\n[profiles]\nbanned_forums = [\"beta\"]\n";
  cfg << "\n[forecast]\noffsets = [2, 1, 0]\nfolds = 3\n";
  cfg << "\n[trend]\nfrac = 0.5\ngrid_points = 20\n";
  const fs::path path = dir / "pipeline.toml";
  std::ofstream out(path);
  out << cfg.str();
  return path;
}

struct TempTree {
  fs::path root;
  TempTree() {
    root = fs::temp_directory_path() /
           ("e11_pipe_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
  }
  ~TempTree() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("pipeline stages run in sequence and gate on dependencies") {
  TempTree tree;
  write_corpus(tree.root / "corpus.jsonl");
  const fs::path cfg_path = write_config(tree.root, tree.root / "corpus.jsonl",
                                         tree.root / "out");
  const PipelineConfig cfg = PipelineConfig::load(cfg_path.string(), false);

  // Dependency gate: score before ingest must fail.
  CHECK_THROWS_AS(run_stage(Stage::score, cfg), DependencyError);

  run_stage(Stage::ingest, cfg);
  CHECK(fs::exists(tree.root / "out" / "filtered.jsonl"));
  CHECK(fs::exists(tree.root / "out" / "drop_summary.json"));
  CHECK(fs::exists(tree.root / "out" / "timelines.json"));
  CHECK(fs::exists(tree.root / "out" / "manifest_ingest.json"));

  const auto timelines = nlohmann::json::parse(read_file(tree.root / "out/timelines.json"));
  std::size_t joiners = 0;
  for (const auto& tl : timelines.at("timelines"))
    if (tl.at("cohort") == "joiner") ++joiners;
  CHECK(joiners == 3);

  // Forecast before efa-score must name the missing stage.
  CHECK_THROWS_AS(run_stage(Stage::forecast, cfg), DependencyError);

  run_stage(Stage::score, cfg);
  const ItemScoreMatrix scores =
      load_item_score_matrix((tree.root / "out" / "item_scores.e11m").string());
  CHECK(scores.item_ids.size() == 89);
  CHECK(scores.scores.rows() > 100);

  run_stage(Stage::efa_fit, cfg);
  const EfaModel model = load_efa_model((tree.root / "out" / "efa_model.json").string());
  CHECK(model.k == 3);
  CHECK(model.bank_fingerprint == scores.bank_fingerprint);
  CHECK(fs::exists(tree.root / "out" / "efa_diagnostics.json"));
  CHECK(fs::exists(tree.root / "out" / "top_loadings.csv"));

  run_stage(Stage::efa_score, cfg);
  const FactorScoreMatrix factors =
      load_factor_score_matrix((tree.root / "out" / "factor_scores.e11m").string());
  CHECK(factors.scores.rows() == scores.scores.rows());
  CHECK(factors.factor_names.size() == 3);

  run_stage(Stage::profile, cfg);
  CHECK(fs::exists(tree.root / "out" / "profiles.json"));
  CHECK(fs::exists(tree.root / "out" / "banned_compare.json"));

  run_stage(Stage::forecast, cfg);
  const auto curve = nlohmann::json::parse(read_file(tree.root / "out/auc_curve.json"));
  CHECK(curve.at("points").size() == 3);

  run_stage(Stage::trend, cfg);
  const auto traj = nlohmann::json::parse(read_file(tree.root / "out/trajectory.json"));
  CHECK(traj.at("series").size() == 2);

  // Reports render every artifact kind.
  for (const char* kind : {"forum-profile", "banned-compare", "auc-curve", "trajectory"}) {
    const auto csv = emit_report(report_kind_from_name(kind), cfg);
    CHECK(fs::exists(csv));
    CHECK(fs::exists(csv.string() + ".meta.json"));
  }

  // Profile CSV schema: group, n_posts then 3k factor columns.
  {
    std::ifstream in(tree.root / "out" / "report_forum_profile.csv");
    std::string header;
    std::getline(in, header);
    std::size_t commas = 0;
    for (char c : header)
      if (c == ',') ++commas;
    CHECK(commas == 1 + 3 * 3);
  }
}

TEST_CASE("efa-score refuses a model fitted against a different bank") {
  TempTree tree;
  write_corpus(tree.root / "corpus.jsonl");
  const fs::path cfg_path = write_config(tree.root, tree.root / "corpus.jsonl",
                                         tree.root / "out");
  const PipelineConfig cfg = PipelineConfig::load(cfg_path.string(), false);
  run_stage(Stage::ingest, cfg);
  run_stage(Stage::score, cfg);
  run_stage(Stage::efa_fit, cfg);

  // Corrupt the stored fingerprint to simulate a foreign model.
  const fs::path model_path = tree.root / "out" / "efa_model.json";
  auto doc = nlohmann::json::parse(read_file(model_path));
  doc["bank_fingerprint"] = "0000";
  write_file_atomic(model_path, doc.dump(2) + "\n");

  CHECK_THROWS_AS(run_stage(Stage::efa_score, cfg), DependencyError);
}

TEST_CASE("directory lock blocks concurrent stages") {
  TempTree tree;
  fs::create_directories(tree.root / "out");
  DirectoryLock lock(tree.root / "out");
  CHECK_THROWS_AS(DirectoryLock(tree.root / "out"), DependencyError);
}

TEST_CASE("atomic write leaves no partial file behind") {
  TempTree tree;
  const fs::path target = tree.root / "artifact.json";
  write_file_atomic(target, "{\"ok\":true}");
  CHECK(read_file(target) == "{\"ok\":true}");
  CHECK_FALSE(fs::exists(target.string() + ".tmp"));
}
