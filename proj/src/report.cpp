#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <fmt/core.h>

#include "poisonbench/errors.hpp"
#include "poisonbench/harness.hpp"
#include "poisonbench/hash.hpp"

namespace poisonbench::harness {

namespace {

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.flush();
  if (!out) {
    throw OutputUnwritableError(fmt::format("cannot write report file {}", path.string()));
  }
}

// Percentage with two decimals for human-facing tables; "-" marks a metric
// whose denominator was zero.
std::string pct(double value, bool undefined) {
  return undefined ? "-" : fmt::format("{:.2f}", value * 100.0);
}

// Raw ratio for machine-facing tables; an empty cell marks an undefined
// metric so spreadsheet tools read it as missing rather than zero.
std::string csv_value(double value, bool undefined) {
  return undefined ? "" : fmt::format("{}", value);
}

struct GridIndex {
  std::vector<double> fractions;    // order of first appearance
  std::vector<std::string> models;  // order of first appearance
  std::map<std::pair<double, std::string>, const CellResult*> train;
  std::map<std::pair<double, std::string>, const CellResult*> test;

  const CellResult* find(const std::map<std::pair<double, std::string>, const CellResult*>& side,
                         double fraction, const std::string& model) const {
    const auto it = side.find({fraction, model});
    return it == side.end() ? nullptr : it->second;
  }
};

GridIndex index_grid(const ExperimentResult& result) {
  GridIndex index;
  for (const auto& cell : result.grid) {
    if (std::find(index.fractions.begin(), index.fractions.end(), cell.poison_fraction) ==
        index.fractions.end()) {
      index.fractions.push_back(cell.poison_fraction);
    }
    if (std::find(index.models.begin(), index.models.end(), cell.model) == index.models.end()) {
      index.models.push_back(cell.model);
    }
    auto& side = cell.split == SplitKind::kTrain ? index.train : index.test;
    side[{cell.poison_fraction, cell.model}] = &cell;
  }
  return index;
}

nlohmann::json provenance_json(const ExperimentResult& result) {
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& record : result.plans) {
    plans.push_back({{"fraction", record.fraction},
                     {"model", record.model},
                     {"plan", record.plan.to_json()}});
  }
  return {{"config_fingerprint", result.config_fingerprint},
          {"config", result.canonical_config},
          {"preprocess", result.preprocess.to_json()},
          {"train_fingerprint", to_hex(result.train_fingerprint)},
          {"test_fingerprint", to_hex(result.test_fingerprint)},
          {"plans", plans}};
}

std::string metrics_csv(const GridIndex& index, double fraction) {
  std::string out =
      "model,train_accuracy,train_precision,train_recall,train_f1,"
      "test_accuracy,test_precision,test_recall,test_f1\n";
  for (const auto& model : index.models) {
    const CellResult* tr = index.find(index.train, fraction, model);
    const CellResult* te = index.find(index.test, fraction, model);
    if (!tr || !te) continue;
    const auto& a = tr->metric_set;
    const auto& b = te->metric_set;
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", model, csv_value(a.accuracy, false),
                       csv_value(a.precision, a.precision_undefined),
                       csv_value(a.recall, a.recall_undefined), csv_value(a.f1, a.f1_undefined),
                       csv_value(b.accuracy, false),
                       csv_value(b.precision, b.precision_undefined),
                       csv_value(b.recall, b.recall_undefined), csv_value(b.f1, b.f1_undefined));
  }
  return out;
}

std::string confusion_csv(const GridIndex& index, double fraction) {
  std::string out = "model,split,tp,fp,fn,tn\n";
  for (const auto& model : index.models) {
    for (const auto* cell : {index.find(index.train, fraction, model),
                             index.find(index.test, fraction, model)}) {
      if (!cell) continue;
      out += fmt::format("{},{},{},{},{},{}\n", model,
                         cell->split == SplitKind::kTrain ? "train" : "test",
                         cell->confusion.tp, cell->confusion.fp, cell->confusion.fn,
                         cell->confusion.tn);
    }
  }
  return out;
}

std::string markdown_report(const ExperimentResult& result, const GridIndex& index) {
  std::string out = "# Label-flip robustness report\n\n";
  out += fmt::format("Config fingerprint `{}`; train set `{}`, test set `{}`.\n",
                     result.config_fingerprint, to_hex(result.train_fingerprint),
                     to_hex(result.test_fingerprint));
  out += "All values are percentages; `-` marks a metric whose denominator was zero.\n";

  for (const double fraction : index.fractions) {
    out += fmt::format("\n## Poison fraction {:g}\n\n", fraction);
    out +=
        "| Model | Train Acc | Train Prec | Train Rec | Train F1 "
        "| Test Acc | Test Prec | Test Rec | Test F1 |\n"
        "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& model : index.models) {
      const CellResult* tr = index.find(index.train, fraction, model);
      const CellResult* te = index.find(index.test, fraction, model);
      if (!tr || !te) continue;
      const auto& a = tr->metric_set;
      const auto& b = te->metric_set;
      out += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", model,
                         pct(a.accuracy, false), pct(a.precision, a.precision_undefined),
                         pct(a.recall, a.recall_undefined), pct(a.f1, a.f1_undefined),
                         pct(b.accuracy, false), pct(b.precision, b.precision_undefined),
                         pct(b.recall, b.recall_undefined), pct(b.f1, b.f1_undefined));
    }
  }

  out += "\n## Provenance\n\n";
  out += fmt::format("- rows dropped while cleaning: {}\n", result.preprocess.rows_dropped);
  out += fmt::format("- missing-row threshold: {:g}\n",
                     result.preprocess.missing_row_threshold);
  for (const auto& record : result.plans) {
    const std::string owner =
        record.model.empty() ? "shared" : fmt::format("model {}", record.model);
    out += fmt::format("- fraction {:g} ({}): {} malware and {} benign labels flipped\n",
                       record.fraction, owner, record.plan.counts_per_class[0],
                       record.plan.counts_per_class[1]);
  }
  return out;
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const ExperimentResult& result,
                                               const std::set<ReportFormat>& formats,
                                               const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) {
    throw OutputUnwritableError(
        fmt::format("cannot create output directory {}", output_dir.string()));
  }

  const GridIndex index = index_grid(result);
  std::vector<std::filesystem::path> written;
  const auto emit = [&](const std::filesystem::path& name, const std::string& content) {
    const auto path = output_dir / name;
    write_text(path, content);
    written.push_back(path);
  };

  if (formats.count(ReportFormat::kJson)) {
    emit("result.json", result.to_json().dump(2) + "\n");
  }

  if (formats.count(ReportFormat::kCsv)) {
    emit("provenance.json", provenance_json(result).dump(2) + "\n");
    for (const double fraction : index.fractions) {
      emit(fmt::format("metrics_{:g}.csv", fraction), metrics_csv(index, fraction));
      emit(fmt::format("confusion_{:g}.csv", fraction), confusion_csv(index, fraction));
    }
  }

  if (formats.count(ReportFormat::kMarkdown)) {
    emit("report.md", markdown_report(result, index));
  }

  if (formats.count(ReportFormat::kRocPoints)) {
    for (const auto& cell : result.grid) {
      if (cell.split != SplitKind::kTest || !cell.roc) continue;
      std::string points;
      for (std::size_t i = 0; i < cell.roc->size(); ++i) {
        points += fmt::format("{} {}\n", cell.roc->fpr[i], cell.roc->tpr[i]);
      }
      emit(fmt::format("{}_{:g}.roc", cell.model, cell.poison_fraction), points);
    }
  }

  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace poisonbench::harness
