#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poisonbench/matrix.hpp"

namespace poisonbench::data {

// Label convention used throughout: 0 = malware, 1 = benign. Malware is the
// positive class for every metric, so a "positive" prediction is label 0.
inline constexpr int kMalwareLabel = 0;
inline constexpr int kBenignLabel = 1;

// Free-form audit trail. Every pipeline stage appends one line describing
// what it did (seeds, fractions, drop counts), so a Dataset can always say
// where it came from.
struct Provenance {
  std::vector<std::string> lineage;

  void note(std::string line) { lineage.push_back(std::move(line)); }
  nlohmann::json to_json() const { return lineage; }
};

// Raw parsed table: numeric feature cells (nullopt = missing) plus the label
// column kept as raw text until conversion. Cells per row always match the
// header width; that is validated at load time.
struct FeatureTable {
  std::vector<std::string> column_names;  // header order, label included
  std::size_t label_index = 0;
  std::string positive_label_value;  // raw text that maps to label 0

  std::vector<std::vector<std::optional<double>>> rows;  // feature cells only
  std::vector<std::optional<std::string>> labels;        // raw label text

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_features() const {
    return column_names.empty() ? 0 : column_names.size() - 1;
  }
  std::vector<std::string> feature_names() const;
};

// Statistics fitted while cleaning/normalizing; reusable so a held-out
// partition can be transformed with the training partition's values.
struct PreprocessReport {
  std::size_t rows_dropped = 0;
  std::vector<double> column_means;  // imputation values
  std::vector<double> column_min;
  std::vector<double> column_max;
  double missing_row_threshold = 0.5;

  nlohmann::json to_json() const;
  static PreprocessReport from_json(const nlohmann::json& j);
};

struct Dataset {
  Matrix features;          // n x d
  std::vector<int> labels;  // 0 = malware, 1 = benign
  std::vector<std::string> feature_names;
  Provenance meta;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

struct SplitSpec {
  double train_fraction = 0.85;
  std::uint64_t shuffle_seed = 7;
};

// Two isotropic Gaussian blobs, one per class. Class index doubles as the
// label, so class 0 is the malware blob.
struct SyntheticSpec {
  std::array<std::size_t, 2> n_per_class{500, 500};
  std::size_t dimension = 2;
  std::array<std::vector<double>, 2> class_means{{{0.0, 0.0}, {10.0, 10.0}}};
  double noise_scale = 1.0;
  std::uint64_t seed = 7;

  void validate() const;  // throws ConfigError
};

// Parses a comma-separated table with a header row. Empty cells and
// non-numeric tokens become missing feature values; the label column is kept
// as raw trimmed text. Throws FileNotFoundError, MissingLabelColumnError, or
// MalformedRowError (message carries the 1-based file line).
FeatureTable load_table(const std::filesystem::path& path,
                        const std::string& label_column,
                        const std::string& positive_label_value);

// Drop phase of cleaning, usable on its own: removes rows whose missing
// feature fraction strictly exceeds the threshold, and rows with a missing
// label unconditionally. Adds the number of dropped rows to *rows_dropped.
FeatureTable drop_sparse_rows(const FeatureTable& table,
                              double missing_row_threshold,
                              std::size_t* rows_dropped);

// Drop sparse rows, then impute remaining missing cells with the column mean
// over the retained rows (or with the given means, so held-out data can reuse
// training statistics). Throws AllRowsDroppedError or ColumnAllMissingError.
std::pair<FeatureTable, PreprocessReport> clean(
    const FeatureTable& table, double missing_row_threshold = 0.5,
    const std::optional<std::vector<double>>& impute_means = std::nullopt);

// Converts a fully-imputed table to a numeric dataset. Labels equal to the
// table's positive value map to 0 (malware), everything else to 1.
Dataset to_dataset(const FeatureTable& table);

// Min-max scaling to [0,1]. Without stats, fits column min/max on ds and
// returns them; with stats, applies the given min/max and clamps the result
// into [0,1]. Constant columns map to 0.0 either way.
std::pair<Dataset, PreprocessReport> normalize(
    const Dataset& ds,
    const std::optional<PreprocessReport>& stats = std::nullopt);

// Seeded permutation split; train gets floor(train_fraction * n) rows.
// Throws DegenerateSplitError if either side would be empty.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// Same permutation arithmetic applied at the table level, for pipelines that
// must fit cleaning statistics on the training partition only.
std::pair<FeatureTable, FeatureTable> split_table(const FeatureTable& table,
                                                  const SplitSpec& spec);

// Draws the two blobs (class 0 rows first), then min-max normalizes, so the
// output is ready for training as-is.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Writes header + rows as decimal text that round-trips bit-exactly through
// load_table. The label column is last and named "label".
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

// Bitwise equality of features and labels (provenance ignored).
bool same_data(const Dataset& a, const Dataset& b);

// Stable hash of shape, feature bits, and labels.
std::uint64_t dataset_fingerprint(const Dataset& ds);

}  // namespace poisonbench::data
