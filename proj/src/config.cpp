#include "poisonbench/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <fmt/core.h>

#include "poisonbench/errors.hpp"
#include "poisonbench/hash.hpp"
#include "poisonbench/rng.hpp"

namespace poisonbench::cfg {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream stream(text);
  while (std::getline(stream, token, ',')) {
    token = trim(token);
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, value));
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, value));
  }
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  try {
    // stoull would wrap "-1" around instead of failing, so reject signs here.
    if (value.empty() || value.front() == '-' || value.front() == '+') {
      throw std::invalid_argument(value);
    }
    std::size_t used = 0;
    const std::uint64_t parsed = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not an unsigned integer", key, value));
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, value));
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& token : split_list(value)) out.push_back(parse_double(key, token));
  if (out.empty()) throw ConfigError(fmt::format("{}: list must not be empty", key));
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "data.source", "data.path", "data.label_column", "data.positive_label",
      "synthetic.n0", "synthetic.n1", "synthetic.dimension", "synthetic.mean0",
      "synthetic.mean1", "synthetic.noise", "synthetic.seed",
      "split.train_fraction", "split.seed",
      "preprocess.mode", "preprocess.missing_row_threshold",
      "models", "models.seed",
      "models.sgd.rate", "models.sgd.l2", "models.sgd.epochs",
      "models.tree.max_depth", "models.tree.min_leaf",
      "models.forest.trees", "models.forest.bootstrap", "models.forest.max_features",
      "models.logreg.rate", "models.logreg.l2", "models.logreg.iterations",
      "models.knn.k",
      "models.svm.lambda", "models.svm.epochs",
      "models.perceptron.rate", "models.perceptron.epochs",
      "models.mlp.hidden", "models.mlp.batch", "models.mlp.rate", "models.mlp.epochs",
      "poison.fractions", "poison.seed", "poison.mode", "poison.per_model_plans",
      "threat.surface", "threat.knowledge", "threat.capability", "threat.goal",
      "output.dir", "report.formats", "harness.workers"};
  return keys;
}

// Applies the models.<family>.* overrides present in the merged map to one
// spec. Keys for families that are not in the run are legal but unused.
void apply_model_overrides(models::ModelSpec& spec,
                           const std::map<std::string, std::string>& kv) {
  const auto get = [&](const char* suffix) -> const std::string* {
    const auto it = kv.find(fmt::format("models.{}.{}", models::family_key(spec.family), suffix));
    return it == kv.end() ? nullptr : &it->second;
  };
  const auto key = [&](const char* suffix) {
    return fmt::format("models.{}.{}", models::family_key(spec.family), suffix);
  };

  switch (spec.family) {
    case models::ModelFamily::kSgdLinear: {
      auto& p = std::get<models::SgdLinearParams>(spec.params);
      if (const auto* v = get("rate")) p.learning_rate = parse_double(key("rate"), *v);
      if (const auto* v = get("l2")) p.l2 = parse_double(key("l2"), *v);
      if (const auto* v = get("epochs")) p.epochs = parse_int(key("epochs"), *v);
      break;
    }
    case models::ModelFamily::kDecisionTree: {
      auto& p = std::get<models::DecisionTreeParams>(spec.params);
      if (const auto* v = get("max_depth")) p.max_depth = parse_int(key("max_depth"), *v);
      if (const auto* v = get("min_leaf")) p.min_leaf = parse_int(key("min_leaf"), *v);
      break;
    }
    case models::ModelFamily::kRandomForest: {
      auto& p = std::get<models::RandomForestParams>(spec.params);
      if (const auto* v = get("trees")) p.n_trees = parse_int(key("trees"), *v);
      if (const auto* v = get("bootstrap")) p.bootstrap = parse_bool(key("bootstrap"), *v);
      if (const auto* v = get("max_features")) {
        p.max_features = parse_int(key("max_features"), *v);
      }
      break;
    }
    case models::ModelFamily::kLogisticRegression: {
      auto& p = std::get<models::LogisticRegressionParams>(spec.params);
      if (const auto* v = get("rate")) p.learning_rate = parse_double(key("rate"), *v);
      if (const auto* v = get("l2")) p.l2 = parse_double(key("l2"), *v);
      if (const auto* v = get("iterations")) p.iterations = parse_int(key("iterations"), *v);
      break;
    }
    case models::ModelFamily::kKnn: {
      auto& p = std::get<models::KnnParams>(spec.params);
      if (const auto* v = get("k")) p.k = parse_int(key("k"), *v);
      break;
    }
    case models::ModelFamily::kLinearSvm: {
      auto& p = std::get<models::LinearSvmParams>(spec.params);
      if (const auto* v = get("lambda")) p.lambda = parse_double(key("lambda"), *v);
      if (const auto* v = get("epochs")) p.epochs = parse_int(key("epochs"), *v);
      break;
    }
    case models::ModelFamily::kPerceptron: {
      auto& p = std::get<models::PerceptronParams>(spec.params);
      if (const auto* v = get("rate")) p.learning_rate = parse_double(key("rate"), *v);
      if (const auto* v = get("epochs")) p.epochs = parse_int(key("epochs"), *v);
      break;
    }
    case models::ModelFamily::kMlp: {
      auto& p = std::get<models::MlpParams>(spec.params);
      if (const auto* v = get("hidden")) p.hidden_units = parse_int(key("hidden"), *v);
      if (const auto* v = get("batch")) p.batch_size = parse_int(key("batch"), *v);
      if (const auto* v = get("rate")) p.learning_rate = parse_double(key("rate"), *v);
      if (const auto* v = get("epochs")) p.epochs = parse_int(key("epochs"), *v);
      break;
    }
  }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("line {}: expected key = value, got '{}'", line_no, line));
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(fmt::format("line {}: empty key", line_no));
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

std::vector<std::pair<std::string, std::string>> parse_kv_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_kv_text(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::pair<std::string, std::string> parse_override(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(fmt::format("--set expects key=value, got '{}'", arg));
  }
  return {trim(arg.substr(0, eq)), trim(arg.substr(eq + 1))};
}

std::string format_token(harness::ReportFormat f) {
  switch (f) {
    case harness::ReportFormat::kJson: return "json";
    case harness::ReportFormat::kCsv: return "csv";
    case harness::ReportFormat::kMarkdown: return "markdown";
    case harness::ReportFormat::kRocPoints: return "roc_points";
  }
  throw ConfigError("unknown report format");
}

std::set<harness::ReportFormat> parse_formats(const std::string& csv_list) {
  std::set<harness::ReportFormat> formats;
  for (const auto& token : split_list(csv_list)) {
    if (token == "json") {
      formats.insert(harness::ReportFormat::kJson);
    } else if (token == "csv") {
      formats.insert(harness::ReportFormat::kCsv);
    } else if (token == "markdown") {
      formats.insert(harness::ReportFormat::kMarkdown);
    } else if (token == "roc_points") {
      formats.insert(harness::ReportFormat::kRocPoints);
    } else {
      throw ConfigError(fmt::format(
          "report.formats: unknown format '{}' (expected json, csv, markdown, roc_points)",
          token));
    }
  }
  if (formats.empty()) throw ConfigError("report.formats: list must not be empty");
  return formats;
}

FullConfig build_config(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::map<std::string, std::string> kv;
  for (const auto& [key, value] : entries) {
    if (!known_keys().count(key)) {
      throw ConfigError(fmt::format("unknown config key '{}'", key));
    }
    kv[key] = value;
  }
  const auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  FullConfig config;
  auto& exp = config.experiment;

  std::string source_kind = "synthetic";
  if (const auto* v = get("data.source")) source_kind = *v;
  if (source_kind == "file") {
    harness::FileSource file;
    const auto* path = get("data.path");
    if (!path || path->empty()) {
      throw ConfigError("data.path is required when data.source = file");
    }
    file.path = *path;
    if (const auto* v = get("data.label_column")) file.label_column = *v;
    if (const auto* v = get("data.positive_label")) file.positive_label = *v;
    exp.source = std::move(file);
  } else if (source_kind == "synthetic") {
    data::SyntheticSpec spec;
    if (const auto* v = get("synthetic.dimension")) {
      const int dim = parse_int("synthetic.dimension", *v);
      if (dim < 1) throw ConfigError("synthetic.dimension must be at least 1");
      spec.dimension = static_cast<std::size_t>(dim);
      // Defaults for unspecified means stretch to the requested width.
      spec.class_means[0].assign(spec.dimension, 0.0);
      spec.class_means[1].assign(spec.dimension, 10.0);
    }
    if (const auto* v = get("synthetic.n0")) {
      spec.n_per_class[0] = static_cast<std::size_t>(parse_int("synthetic.n0", *v));
    }
    if (const auto* v = get("synthetic.n1")) {
      spec.n_per_class[1] = static_cast<std::size_t>(parse_int("synthetic.n1", *v));
    }
    if (const auto* v = get("synthetic.mean0")) {
      spec.class_means[0] = parse_double_list("synthetic.mean0", *v);
    }
    if (const auto* v = get("synthetic.mean1")) {
      spec.class_means[1] = parse_double_list("synthetic.mean1", *v);
    }
    if (const auto* v = get("synthetic.noise")) {
      spec.noise_scale = parse_double("synthetic.noise", *v);
    }
    if (const auto* v = get("synthetic.seed")) spec.seed = parse_seed("synthetic.seed", *v);
    exp.source = std::move(spec);
  } else {
    throw ConfigError(
        fmt::format("data.source: expected file or synthetic, got '{}'", source_kind));
  }

  if (const auto* v = get("split.train_fraction")) {
    exp.split.train_fraction = parse_double("split.train_fraction", *v);
  }
  if (const auto* v = get("split.seed")) exp.split.shuffle_seed = parse_seed("split.seed", *v);

  if (const auto* v = get("preprocess.mode")) {
    if (*v == "faithful") {
      exp.preprocessing = harness::PreprocessingMode::kFaithful;
    } else if (*v == "hygienic") {
      exp.preprocessing = harness::PreprocessingMode::kHygienic;
    } else {
      throw ConfigError(
          fmt::format("preprocess.mode: expected faithful or hygienic, got '{}'", *v));
    }
  }
  if (const auto* v = get("preprocess.missing_row_threshold")) {
    exp.missing_row_threshold = parse_double("preprocess.missing_row_threshold", *v);
  }

  std::uint64_t model_seed = 1;
  if (const auto* v = get("models.seed")) model_seed = parse_seed("models.seed", *v);
  std::vector<std::string> model_list{"all"};
  if (const auto* v = get("models")) model_list = split_list(*v);
  if (model_list.size() == 1 && model_list.front() == "all") {
    model_list.clear();
    for (const auto family : models::kAllFamilies) {
      model_list.push_back(models::family_key(family));
    }
  }
  if (model_list.empty()) throw ConfigError("models: list must not be empty");
  for (const auto& name : model_list) {
    const auto family = models::family_from_key(name);
    if (!family) throw ConfigError(fmt::format("models: unknown family '{}'", name));
    auto spec = models::ModelSpec::with_defaults(*family, derive_seed(model_seed, fnv1a(name)));
    apply_model_overrides(spec, kv);
    exp.model_specs.push_back(std::move(spec));
  }

  if (const auto* v = get("poison.fractions")) {
    exp.poison_fractions = parse_double_list("poison.fractions", *v);
  }
  if (const auto* v = get("poison.seed")) exp.poison_seed = parse_seed("poison.seed", *v);
  if (const auto* v = get("poison.mode")) {
    if (*v == "independent") {
      exp.poison_mode = harness::PoisonMode::kIndependent;
    } else if (*v == "cumulative") {
      exp.poison_mode = harness::PoisonMode::kCumulative;
    } else {
      throw ConfigError(
          fmt::format("poison.mode: expected independent or cumulative, got '{}'", *v));
    }
  }
  if (const auto* v = get("poison.per_model_plans")) {
    exp.per_model_plans = parse_bool("poison.per_model_plans", *v);
  }

  if (const auto* v = get("threat.surface")) exp.threat.surface = poison::surface_from_string(*v);
  if (const auto* v = get("threat.knowledge")) {
    exp.threat.knowledge = poison::knowledge_from_string(*v);
  }
  if (const auto* v = get("threat.capability")) {
    exp.threat.capability = poison::capability_from_string(*v);
  }
  if (const auto* v = get("threat.goal")) exp.threat.goal = poison::goal_from_string(*v);

  if (const auto* v = get("output.dir")) {
    if (v->empty()) throw ConfigError("output.dir must not be empty");
    exp.output_dir = *v;
  }
  if (const auto* v = get("report.formats")) config.formats = parse_formats(*v);
  if (const auto* v = get("harness.workers")) {
    const int workers = parse_int("harness.workers", *v);
    if (workers < 0) throw ConfigError("harness.workers must be nonnegative");
    config.workers = static_cast<unsigned>(workers);
  }

  exp.validate();
  return config;
}

std::map<std::string, std::string> normalized_items(const FullConfig& config) {
  auto items = harness::canonical_items(config.experiment);
  items["output.dir"] = config.experiment.output_dir.string();
  std::string formats;
  for (const auto format : config.formats) {
    if (!formats.empty()) formats += ',';
    formats += format_token(format);
  }
  items["report.formats"] = formats;
  items["harness.workers"] = fmt::format("{}", config.workers);
  return items;
}

}  // namespace poisonbench::cfg
