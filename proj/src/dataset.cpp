#include "poisonbench/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "poisonbench/errors.hpp"
#include "poisonbench/hash.hpp"
#include "poisonbench/rng.hpp"

namespace poisonbench::data {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Empty cells, unparsable tokens, and non-finite values all count as missing.
std::optional<double> parse_cell(const std::string& raw) {
  const std::string token = trim(raw);
  if (token.empty()) return std::nullopt;
  const char* begin = token.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end != begin + token.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

FeatureTable table_skeleton(const FeatureTable& source) {
  FeatureTable out;
  out.column_names = source.column_names;
  out.label_index = source.label_index;
  out.positive_label_value = source.positive_label_value;
  return out;
}

}  // namespace

std::vector<std::string> FeatureTable::feature_names() const {
  std::vector<std::string> names;
  names.reserve(n_features());
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    if (c != label_index) names.push_back(column_names[c]);
  }
  return names;
}

nlohmann::json PreprocessReport::to_json() const {
  return {{"rows_dropped", rows_dropped},
          {"column_means", column_means},
          {"column_min", column_min},
          {"column_max", column_max},
          {"missing_row_threshold", missing_row_threshold}};
}

PreprocessReport PreprocessReport::from_json(const nlohmann::json& j) {
  PreprocessReport r;
  r.rows_dropped = j.at("rows_dropped").get<std::size_t>();
  r.column_means = j.at("column_means").get<std::vector<double>>();
  r.column_min = j.at("column_min").get<std::vector<double>>();
  r.column_max = j.at("column_max").get<std::vector<double>>();
  r.missing_row_threshold = j.at("missing_row_threshold").get<double>();
  return r;
}

void SyntheticSpec::validate() const {
  if (dimension == 0) throw ConfigError("synthetic: dimension must be positive");
  if (n_per_class[0] == 0 || n_per_class[1] == 0) {
    throw ConfigError("synthetic: both classes need at least one sample");
  }
  if (!(noise_scale > 0.0)) throw ConfigError("synthetic: noise scale must be positive");
  for (int c = 0; c < 2; ++c) {
    if (class_means[c].size() != dimension) {
      throw ConfigError(fmt::format(
          "synthetic: class {} mean has {} components, expected {}", c,
          class_means[c].size(), dimension));
    }
  }
}

FeatureTable load_table(const std::filesystem::path& path,
                        const std::string& label_column,
                        const std::string& positive_label_value) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(fmt::format("cannot open {}", path.string()));

  std::string line;
  if (!std::getline(in, line)) {
    throw MalformedRowError(fmt::format("{}: empty file, expected a header row", path.string()));
  }
  FeatureTable table;
  for (const auto& name : split_csv_line(line)) table.column_names.push_back(trim(name));

  bool found = false;
  for (std::size_t c = 0; c < table.column_names.size(); ++c) {
    if (table.column_names[c] == label_column) {
      table.label_index = c;
      found = true;
      break;
    }
  }
  if (!found) {
    throw MissingLabelColumnError(
        fmt::format("{}: no column named '{}'", path.string(), label_column));
  }
  table.positive_label_value = positive_label_value;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != table.column_names.size()) {
      throw MalformedRowError(
          fmt::format("{}: line {} has {} cells, expected {}", path.string(),
                      line_no, cells.size(), table.column_names.size()));
    }
    std::vector<std::optional<double>> row;
    row.reserve(table.n_features());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == table.label_index) {
        const std::string raw = trim(cells[c]);
        table.labels.emplace_back(raw.empty() ? std::nullopt
                                              : std::optional<std::string>(raw));
      } else {
        row.push_back(parse_cell(cells[c]));
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

FeatureTable drop_sparse_rows(const FeatureTable& table,
                              double missing_row_threshold,
                              std::size_t* rows_dropped) {
  FeatureTable out = table_skeleton(table);
  const double d = static_cast<double>(table.n_features());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    if (!table.labels[r].has_value()) {
      if (rows_dropped) ++*rows_dropped;
      continue;
    }
    std::size_t missing = 0;
    for (const auto& cell : table.rows[r]) {
      if (!cell.has_value()) ++missing;
    }
    // Strict inequality: a row exactly at the threshold is kept.
    if (d > 0 && static_cast<double>(missing) / d > missing_row_threshold) {
      if (rows_dropped) ++*rows_dropped;
      continue;
    }
    out.rows.push_back(table.rows[r]);
    out.labels.push_back(table.labels[r]);
  }
  return out;
}

std::pair<FeatureTable, PreprocessReport> clean(
    const FeatureTable& table, double missing_row_threshold,
    const std::optional<std::vector<double>>& impute_means) {
  PreprocessReport report;
  report.missing_row_threshold = missing_row_threshold;

  FeatureTable kept = drop_sparse_rows(table, missing_row_threshold, &report.rows_dropped);
  if (kept.n_rows() == 0) {
    throw AllRowsDroppedError(fmt::format(
        "cleaning dropped all {} rows at threshold {}", table.n_rows(), missing_row_threshold));
  }

  const std::size_t d = kept.n_features();
  if (impute_means) {
    if (impute_means->size() != d) {
      throw DataError(fmt::format("impute means have {} columns, table has {}",
                                  impute_means->size(), d));
    }
    report.column_means = *impute_means;
  } else {
    report.column_means.assign(d, 0.0);
    // Fixed row-ascending accumulation so the means are reproducible exactly.
    std::vector<std::size_t> counts(d, 0);
    for (const auto& row : kept.rows) {
      for (std::size_t c = 0; c < d; ++c) {
        if (row[c].has_value()) {
          report.column_means[c] += *row[c];
          ++counts[c];
        }
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      if (counts[c] == 0) {
        throw ColumnAllMissingError(fmt::format(
            "column '{}' has no value to average over the retained rows",
            kept.feature_names()[c]));
      }
      report.column_means[c] /= static_cast<double>(counts[c]);
    }
  }

  for (auto& row : kept.rows) {
    for (std::size_t c = 0; c < d; ++c) {
      if (!row[c].has_value()) row[c] = report.column_means[c];
    }
  }
  return {std::move(kept), std::move(report)};
}

Dataset to_dataset(const FeatureTable& table) {
  Dataset ds;
  ds.feature_names = table.feature_names();
  ds.features = Matrix(table.n_rows(), table.n_features());
  ds.labels.reserve(table.n_rows());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < table.n_features(); ++c) {
      const auto& cell = table.rows[r][c];
      if (!cell.has_value()) {
        throw DataError(fmt::format("row {} still has a missing cell; clean the table first", r));
      }
      ds.features(r, c) = *cell;
    }
    if (!table.labels[r].has_value()) {
      throw DataError(fmt::format("row {} has no label; clean the table first", r));
    }
    ds.labels.push_back(*table.labels[r] == table.positive_label_value ? kMalwareLabel
                                                                       : kBenignLabel);
  }
  ds.meta.note(fmt::format("table: {} rows, {} features, positive label '{}'",
                           table.n_rows(), table.n_features(), table.positive_label_value));
  return ds;
}

std::pair<Dataset, PreprocessReport> normalize(
    const Dataset& ds, const std::optional<PreprocessReport>& stats) {
  const std::size_t n = ds.size();
  const std::size_t d = ds.dim();

  PreprocessReport report;
  bool clamp = false;
  if (stats) {
    if (stats->column_min.size() != d || stats->column_max.size() != d) {
      throw DataError(fmt::format("normalization stats cover {} columns, dataset has {}",
                                  stats->column_min.size(), d));
    }
    report = *stats;
    clamp = true;  // out-of-range values under foreign stats clamp into [0,1]
  } else {
    report.column_min.assign(d, 0.0);
    report.column_max.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      double lo = ds.features(0, c);
      double hi = lo;
      for (std::size_t r = 1; r < n; ++r) {
        const double v = ds.features(r, c);
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
      report.column_min[c] = lo;
      report.column_max[c] = hi;
    }
  }

  Dataset out;
  out.labels = ds.labels;
  out.feature_names = ds.feature_names;
  out.meta = ds.meta;
  out.features = Matrix(n, d);
  for (std::size_t c = 0; c < d; ++c) {
    const double lo = report.column_min[c];
    const double range = report.column_max[c] - lo;
    for (std::size_t r = 0; r < n; ++r) {
      double v = range == 0.0 ? 0.0 : (ds.features(r, c) - lo) / range;
      if (clamp) {
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
      }
      out.features(r, c) = v;
    }
  }
  out.meta.note(stats ? "normalize: applied given min-max stats with clamping"
                      : "normalize: fitted min-max stats");
  return {std::move(out), std::move(report)};
}

namespace {

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw DegenerateSplitError(
        fmt::format("train fraction {} leaves no data on one side", spec.train_fraction));
  }
  const std::size_t n_train = floor_count(spec.train_fraction, n);
  if (n_train == 0 || n_train == n) {
    throw DegenerateSplitError(fmt::format(
        "split of {} rows at fraction {} leaves an empty partition", n, spec.train_fraction));
  }
  auto perm = shuffled_indices(n, spec.shuffle_seed);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<long>(n_train), perm.end());
  return {std::move(train), std::move(test)};
}

Dataset gather(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.meta = ds.meta;
  out.features = Matrix(rows.size(), ds.dim());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = ds.features.row(rows[i]);
    auto dst = out.features.row(i);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c];
    out.labels.push_back(ds.labels[rows[i]]);
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  auto [train_rows, test_rows] = split_indices(ds.size(), spec);
  Dataset train = gather(ds, train_rows);
  Dataset test = gather(ds, test_rows);
  train.meta.note(fmt::format("split: train partition, fraction {}, seed {}",
                              spec.train_fraction, spec.shuffle_seed));
  test.meta.note(fmt::format("split: test partition, fraction {}, seed {}",
                             spec.train_fraction, spec.shuffle_seed));
  return {std::move(train), std::move(test)};
}

std::pair<FeatureTable, FeatureTable> split_table(const FeatureTable& table,
                                                  const SplitSpec& spec) {
  auto [train_rows, test_rows] = split_indices(table.n_rows(), spec);
  FeatureTable train = table_skeleton(table);
  FeatureTable test = table_skeleton(table);
  for (auto r : train_rows) {
    train.rows.push_back(table.rows[r]);
    train.labels.push_back(table.labels[r]);
  }
  for (auto r : test_rows) {
    test.rows.push_back(table.rows[r]);
    test.labels.push_back(table.labels[r]);
  }
  return {std::move(train), std::move(test)};
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_per_class[0] + spec.n_per_class[1];
  Dataset ds;
  ds.features = Matrix(n, spec.dimension);
  ds.labels.reserve(n);
  for (std::size_t c = 0; c < spec.dimension; ++c) {
    ds.feature_names.push_back(fmt::format("f{}", c));
  }

  Rng rng(spec.seed);
  std::size_t row = 0;
  for (int cls = 0; cls < 2; ++cls) {
    for (std::size_t i = 0; i < spec.n_per_class[static_cast<std::size_t>(cls)]; ++i, ++row) {
      for (std::size_t c = 0; c < spec.dimension; ++c) {
        ds.features(row, c) =
            spec.class_means[static_cast<std::size_t>(cls)][c] + spec.noise_scale * rng.next_gaussian();
      }
      ds.labels.push_back(cls);
    }
  }
  ds.meta.note(fmt::format(
      "synthetic: blobs {}+{} points, dim {}, noise {}, seed {}",
      spec.n_per_class[0], spec.n_per_class[1], spec.dimension, spec.noise_scale, spec.seed));

  auto [normalized, stats] = normalize(ds);
  (void)stats;
  return std::move(normalized);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw OutputUnwritableError(fmt::format("cannot write {}", path.string()));
  for (std::size_t c = 0; c < ds.dim(); ++c) {
    out << (c < ds.feature_names.size() ? ds.feature_names[c] : fmt::format("f{}", c)) << ',';
  }
  out << "label\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < ds.dim(); ++c) {
      // Shortest round-trip formatting: reloading reproduces the exact bits.
      out << fmt::format("{}", ds.features(r, c)) << ',';
    }
    out << ds.labels[r] << '\n';
  }
  if (!out) throw OutputUnwritableError(fmt::format("write failed for {}", path.string()));
}

bool same_data(const Dataset& a, const Dataset& b) {
  return a.features == b.features && a.labels == b.labels;
}

std::uint64_t dataset_fingerprint(const Dataset& ds) {
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(ds.size()));
  h.update(static_cast<std::uint64_t>(ds.dim()));
  for (double v : ds.features.data()) h.update(v);
  for (int label : ds.labels) h.update(static_cast<std::uint64_t>(label));
  return h.digest();
}

}  // namespace poisonbench::data
