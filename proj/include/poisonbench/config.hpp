#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "poisonbench/harness.hpp"

namespace poisonbench::cfg {

// Flat dotted-key config text: one `key = value` per line, `#` comments,
// blank lines ignored, later lines win. parse_* preserve order so override
// semantics stay last-writer-wins.
std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text);
std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::filesystem::path& path);

// Splits a --set argument at the first '='. Throws ConfigError if absent.
std::pair<std::string, std::string> parse_override(const std::string& arg);

// Everything a CLI invocation needs: the experiment plus execution knobs.
struct FullConfig {
  harness::ExperimentConfig experiment;
  std::set<harness::ReportFormat> formats = {
      harness::ReportFormat::kJson, harness::ReportFormat::kCsv,
      harness::ReportFormat::kMarkdown, harness::ReportFormat::kRocPoints};
  unsigned workers = 0;
};

// Merges file entries and overrides (in order), validates every key against
// the documented set, and builds the config. Throws ConfigError on unknown
// keys, unparsable values, or failed validation.
FullConfig build_config(const std::vector<std::pair<std::string, std::string>>& entries);

// The fully-merged, normalized key=value view of a config: canonical
// experiment items plus the execution keys. Two configs that print the same
// here behave the same.
std::map<std::string, std::string> normalized_items(const FullConfig& config);

std::string format_token(harness::ReportFormat f);
std::set<harness::ReportFormat> parse_formats(const std::string& csv_list);

}  // namespace poisonbench::cfg
