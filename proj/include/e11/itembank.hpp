#pragma once

#include <map>
#include <string>
#include <vector>

#include "e11/common.hpp"

namespace e11 {

struct ScaleItem {
  std::string item_id;
  std::string scale;
  std::string source;
  std::string text;
  std::string provenance;  // optional metadata, kept verbatim
};

// The canonical manifest: the 12 scale names with their item counts.
const std::map<std::string, std::size_t>& canonical_scale_counts();

constexpr std::size_t kCanonicalItemCount = 89;

struct ItemBank {
  std::vector<ScaleItem> items;  // canonical order = file order

  std::size_t size() const { return items.size(); }
  std::vector<std::string> item_ids() const;
  // SHA-256 over (item_id, scale, text) triples in order; binds every
  // downstream matrix to this bank.
  std::string fingerprint() const;
};

// Accepts the JSON array format or a 4-column TSV mirror (by extension).
// Throws DataError on duplicate ids, unknown scale names or empty texts.
ItemBank load_item_bank(const std::string& path);

ItemBank parse_item_bank_json(const std::string& json_text);
ItemBank parse_item_bank_tsv(const std::string& tsv_text);

void save_item_bank_json(const ItemBank& bank, const std::string& path);

struct ValidationReport {
  bool conformant = false;
  std::map<std::string, std::size_t> scale_counts;
  std::vector<std::string> deviations;  // human-readable, empty when conformant
};

// Report-only comparison against the canonical manifest.
ValidationReport validate_item_bank(const ItemBank& bank);

}  // namespace e11
