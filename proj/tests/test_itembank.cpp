#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "e11/itembank.hpp"

using namespace e11;

namespace {

const std::string kBankPath = std::string(E11_SOURCE_DIR) + "/data/item_bank.json";

ItemBank tiny_bank() {
  ItemBank bank;
  bank.items = {
      {"A_01", "Dirty Dozen", "src", "I tend to ponder.", ""},
      {"A_02", "Dirty Dozen", "src", "I tend to wander.", ""},
      {"B_01", "Nationalism Scale", "src", "Our flags are nice.", ""},
  };
  return bank;
}

}  // namespace

TEST_CASE("canonical bank loads with 89 items in Table-1 proportions") {
  const ItemBank bank = load_item_bank(kBankPath);
  CHECK(bank.size() == 89);
  const auto report = validate_item_bank(bank);
  CHECK(report.conformant);
  CHECK(report.deviations.empty());
  CHECK(report.scale_counts.at("Extremism Scale") == 14);
  CHECK(report.scale_counts.at("Social Dominance Orientation") == 8);
  CHECK(report.scale_counts.at("Radicalism Intention") == 4);
  CHECK(report.scale_counts.at("Violent Intention") == 7);
  CHECK(report.scale_counts.at("Nationalism Scale") == 4);
  CHECK(report.scale_counts.at("Right-Wing Authoritarianism") == 15);
  CHECK(report.scale_counts.at("Self-Categorization Scale") == 3);
  CHECK(report.scale_counts.at("Dirty Dozen") == 12);
  CHECK(report.scale_counts.at("General Extremist") == 5);
  CHECK(report.scale_counts.at("Left-Wing Radical") == 6);
  CHECK(report.scale_counts.at("Right-Wing Radical") == 7);
  CHECK(report.scale_counts.at("Ethnic Intolerance") == 4);
}

TEST_CASE("duplicate item ids are rejected") {
  CHECK_THROWS_AS(parse_item_bank_json(R"([
    {"item_id":"X_01","scale":"Dirty Dozen","source":"s","text":"a"},
    {"item_id":"X_01","scale":"Dirty Dozen","source":"s","text":"b"}
  ])"),
                  DataError);
}

TEST_CASE("unknown scale and empty text are rejected") {
  CHECK_THROWS_AS(parse_item_bank_json(
                      R"([{"item_id":"X_01","scale":"Made Up Scale","source":"s","text":"a"}])"),
                  DataError);
  CHECK_THROWS_AS(
      parse_item_bank_json(R"([{"item_id":"X_01","scale":"Dirty Dozen","source":"s","text":" "}])"),
      DataError);
}

TEST_CASE("non-canonical banks load but validate as nonconformant") {
  const ItemBank bank = parse_item_bank_json(R"([
    {"item_id":"X_01","scale":"Dirty Dozen","source":"s","text":"one"},
    {"item_id":"X_02","scale":"Dirty Dozen","source":"s","text":"two"},
    {"item_id":"X_03","scale":"Dirty Dozen","source":"s","text":"three"},
    {"item_id":"X_04","scale":"Dirty Dozen","source":"s","text":"four"},
    {"item_id":"X_05","scale":"Dirty Dozen","source":"s","text":"five"}
  ])");
  CHECK(bank.size() == 5);
  const auto report = validate_item_bank(bank);
  CHECK_FALSE(report.conformant);
  bool found = false;
  for (const auto& d : report.deviations)
    if (d.find("Dirty Dozen expected 12 got 5") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validation flags an in-memory bank with an unknown scale") {
  ItemBank bank = tiny_bank();
  bank.items.push_back({"Z_01", "Mystery Scale", "src", "text", ""});
  const auto report = validate_item_bank(bank);
  CHECK_FALSE(report.conformant);
  bool found = false;
  for (const auto& d : report.deviations)
    if (d.find("unknown scale 'Mystery Scale'") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("item texts round-trip byte-exact through save/load") {
  const ItemBank bank = load_item_bank(kBankPath);
  const auto tmp = std::filesystem::temp_directory_path() / "e11_bank_roundtrip.json";
  save_item_bank_json(bank, tmp.string());
  const ItemBank reloaded = load_item_bank(tmp.string());
  REQUIRE(reloaded.size() == bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    CHECK(reloaded.items[i].item_id == bank.items[i].item_id);
    CHECK(reloaded.items[i].text == bank.items[i].text);
  }
  CHECK(reloaded.fingerprint() == bank.fingerprint());
  std::filesystem::remove(tmp);
}

TEST_CASE("TSV mirror parses with identical content") {
  const ItemBank bank = tiny_bank();
  std::string tsv = "item_id\tscale\tsource\ttext\n";
  for (const auto& item : bank.items)
    tsv += item.item_id + "\t" + item.scale + "\t" + item.source + "\t" + item.text + "\n";
  const ItemBank parsed = parse_item_bank_tsv(tsv);
  REQUIRE(parsed.size() == bank.size());
  CHECK(parsed.items[2].text == "Our flags are nice.");
}

TEST_CASE("fingerprint changes when an item text changes") {
  ItemBank a = tiny_bank();
  ItemBank b = tiny_bank();
  b.items[0].text += "!";
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("reference factor-item fixture cross-references the canonical bank") {
  const ItemBank bank = load_item_bank(kBankPath);
  std::set<std::pair<std::string, std::string>> bank_items;  // (text, scale)
  for (const auto& item : bank.items) bank_items.emplace(item.text, item.scale);

  std::ifstream in(std::string(E11_SOURCE_DIR) + "/data/reference_factor_items.json");
  REQUIRE(in.good());
  nlohmann::json doc;
  in >> doc;
  const auto& factors = doc.at("factors");
  CHECK(factors.size() == 11);
  for (const auto& factor : factors) {
    for (const auto& entry : factor.at("items")) {
      const auto text = entry.at("text").get<std::string>();
      const auto scale = entry.at("scale").get<std::string>();
      INFO("missing from bank: " << text);
      CHECK(bank_items.count({text, scale}) == 1);
    }
  }
}

TEST_CASE("factor-name fixture lists eleven names") {
  std::ifstream in(std::string(E11_SOURCE_DIR) + "/data/factor_names.json");
  REQUIRE(in.good());
  nlohmann::json doc;
  in >> doc;
  CHECK(doc.at("factor_names").size() == 11);
}
