#include "e11/itembank.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "e11/digest.hpp"
#include "e11/text.hpp"

namespace e11 {

using nlohmann::json;

const std::map<std::string, std::size_t>& canonical_scale_counts() {
  static const std::map<std::string, std::size_t> counts = {
      {"Extremism Scale", 14},
      {"Social Dominance Orientation", 8},
      {"Radicalism Intention", 4},
      {"Violent Intention", 7},
      {"Nationalism Scale", 4},
      {"Right-Wing Authoritarianism", 15},
      {"Self-Categorization Scale", 3},
      {"Dirty Dozen", 12},
      {"General Extremist", 5},
      {"Left-Wing Radical", 6},
      {"Right-Wing Radical", 7},
      {"Ethnic Intolerance", 4},
  };
  return counts;
}

std::vector<std::string> ItemBank::item_ids() const {
  std::vector<std::string> ids;
  ids.reserve(items.size());
  for (const auto& item : items) ids.push_back(item.item_id);
  return ids;
}

std::string ItemBank::fingerprint() const {
  std::string buf;
  for (const auto& item : items) {
    buf += item.item_id;
    buf += '\x1f';
    buf += item.scale;
    buf += '\x1f';
    buf += item.text;
    buf += '\x1e';
  }
  return to_hex(sha256(buf));
}

namespace {

void check_bank(const ItemBank& bank) {
  if (bank.items.empty()) throw DataError("item bank is empty");
  std::set<std::string> ids;
  for (const auto& item : bank.items) {
    if (item.item_id.empty()) throw DataError("item with empty item_id");
    if (!ids.insert(item.item_id).second)
      throw DataError("duplicate item_id '" + item.item_id + "'");
    if (!canonical_scale_counts().count(item.scale))
      throw DataError("unknown scale name '" + item.scale + "' (item " + item.item_id + ")");
    if (trim(item.text).empty())
      throw DataError("empty text for item " + item.item_id);
  }
}

}  // namespace

ItemBank parse_item_bank_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("item bank: malformed JSON: ") + e.what());
  }
  if (!j.is_array()) throw DataError("item bank: top-level JSON array expected");
  ItemBank bank;
  for (const auto& entry : j) {
    ScaleItem item;
    for (const char* key : {"item_id", "scale", "source", "text"})
      if (!entry.contains(key) || !entry[key].is_string())
        throw DataError(std::string("item bank: entry missing string field '") + key + "'");
    item.item_id = entry["item_id"].get<std::string>();
    item.scale = entry["scale"].get<std::string>();
    item.source = entry["source"].get<std::string>();
    item.text = entry["text"].get<std::string>();
    if (entry.contains("provenance") && entry["provenance"].is_string())
      item.provenance = entry["provenance"].get<std::string>();
    bank.items.push_back(std::move(item));
  }
  check_bank(bank);
  return bank;
}

ItemBank parse_item_bank_tsv(const std::string& tsv_text) {
  ItemBank bank;
  std::istringstream in(tsv_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (line_no == 1 && cols.size() >= 1 && cols[0] == "item_id") continue;  // header row
    if (cols.size() < 4)
      throw DataError("item bank TSV line " + std::to_string(line_no) + ": expected 4 columns");
    ScaleItem item;
    item.item_id = cols[0];
    item.scale = cols[1];
    item.source = cols[2];
    item.text = cols[3];
    bank.items.push_back(std::move(item));
  }
  check_bank(bank);
  return bank;
}

ItemBank load_item_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open item bank: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".tsv")
    return parse_item_bank_tsv(content);
  return parse_item_bank_json(content);
}

void save_item_bank_json(const ItemBank& bank, const std::string& path) {
  json j = json::array();
  for (const auto& item : bank.items) {
    json e = {{"item_id", item.item_id},
              {"scale", item.scale},
              {"source", item.source},
              {"text", item.text}};
    if (!item.provenance.empty()) e["provenance"] = item.provenance;
    j.push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write item bank: " + path);
  out << j.dump(2) << '\n';
}

ValidationReport validate_item_bank(const ItemBank& bank) {
  ValidationReport report;
  for (const auto& item : bank.items) ++report.scale_counts[item.scale];

  for (const auto& [scale, expected] : canonical_scale_counts()) {
    auto it = report.scale_counts.find(scale);
    const std::size_t got = it == report.scale_counts.end() ? 0 : it->second;
    if (got != expected)
      report.deviations.push_back(scale + " expected " + std::to_string(expected) + " got " +
                                  std::to_string(got));
  }
  for (const auto& [scale, got] : report.scale_counts)
    if (!canonical_scale_counts().count(scale))
      report.deviations.push_back("unknown scale '" + scale + "' with " + std::to_string(got) +
                                  " items");
  if (bank.size() != kCanonicalItemCount)
    report.deviations.push_back("total expected " + std::to_string(kCanonicalItemCount) +
                                " got " + std::to_string(bank.size()));
  report.conformant = report.deviations.empty();
  return report;
}

}  // namespace e11
