#include <algorithm>
#include <cmath>

#include "model_internals.hpp"
#include "poisonbench/errors.hpp"
#include "poisonbench/models.hpp"
#include "poisonbench/rng.hpp"

namespace poisonbench::models {

double MlpClassifier::score_one(std::span<const double> x) const {
  const std::size_t hidden = b1_.size();
  double out = b2_;
  for (std::size_t h = 0; h < hidden; ++h) {
    double pre = b1_[h];
    const auto row = w1_.row(h);
    for (std::size_t j = 0; j < row.size(); ++j) pre += row[j] * x[j];
    if (pre > 0.0) out += w2_[h] * pre;  // ReLU
  }
  return sigmoid(out);
}

nlohmann::json MlpClassifier::params_to_json() const {
  nlohmann::json w1 = nlohmann::json::array();
  for (std::size_t h = 0; h < w1_.rows(); ++h) {
    const auto row = w1_.row(h);
    w1.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"w1", w1}, {"b1", b1_}, {"w2", w2_}, {"b2", b2_}};
}

std::shared_ptr<MlpClassifier> MlpClassifier::from_params_json(const nlohmann::json& j) {
  const auto rows = j.at("w1").get<std::vector<std::vector<double>>>();
  Matrix w1(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) w1(r, c) = rows[r][c];
  }
  return std::make_shared<MlpClassifier>(std::move(w1), j.at("b1").get<std::vector<double>>(),
                                         j.at("w2").get<std::vector<double>>(),
                                         j.at("b2").get<double>());
}

namespace internal {

MlpParamBlock MlpParamBlock::zeros(std::size_t dim, int hidden) {
  MlpParamBlock p;
  const auto h = static_cast<std::size_t>(hidden);
  p.w1 = Matrix(h, dim);
  p.b1.assign(h, 0.0);
  p.w2.assign(h, 0.0);
  p.b2 = 0.0;
  return p;
}

MlpParamBlock MlpParamBlock::glorot(std::size_t dim, int hidden, Rng& rng) {
  MlpParamBlock p = zeros(dim, hidden);
  const auto h = static_cast<std::size_t>(hidden);
  const double r1 = std::sqrt(6.0 / static_cast<double>(dim + h));
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      p.w1(i, j) = (2.0 * rng.next_double() - 1.0) * r1;
    }
  }
  const double r2 = std::sqrt(6.0 / static_cast<double>(h + 1));
  for (std::size_t i = 0; i < h; ++i) {
    p.w2[i] = (2.0 * rng.next_double() - 1.0) * r2;
  }
  return p;
}

std::size_t MlpParamBlock::count() const {
  return w1.rows() * w1.cols() + b1.size() + w2.size() + 1;
}

double MlpParamBlock::get(std::size_t i) const {
  const std::size_t n1 = w1.rows() * w1.cols();
  if (i < n1) return w1.data()[i];
  i -= n1;
  if (i < b1.size()) return b1[i];
  i -= b1.size();
  if (i < w2.size()) return w2[i];
  return b2;
}

void MlpParamBlock::add(std::size_t i, double delta) {
  const std::size_t n1 = w1.rows() * w1.cols();
  if (i < n1) {
    w1.data()[i] += delta;
    return;
  }
  i -= n1;
  if (i < b1.size()) {
    b1[i] += delta;
    return;
  }
  i -= b1.size();
  if (i < w2.size()) {
    w2[i] += delta;
    return;
  }
  b2 += delta;
}

namespace {

struct Forward {
  std::vector<double> hidden;  // post-ReLU activations
  double output = 0.0;         // sigmoid activation
};

void forward_one(const MlpParamBlock& p, std::span<const double> x, Forward& f) {
  const std::size_t h = p.b1.size();
  f.hidden.resize(h);
  double out = p.b2;
  for (std::size_t i = 0; i < h; ++i) {
    double pre = p.b1[i];
    const auto row = p.w1.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) pre += row[j] * x[j];
    f.hidden[i] = pre > 0.0 ? pre : 0.0;
    out += p.w2[i] * f.hidden[i];
  }
  f.output = sigmoid(out);
}

}  // namespace

double mlp_loss(const MlpParamBlock& p, const Matrix& x, const std::vector<int>& labels,
                std::span<const std::size_t> rows) {
  Forward f;
  double loss = 0.0;
  for (auto r : rows) {
    forward_one(p, x.row(r), f);
    const double prob = clamp_probability(f.output);
    const double z = malware_target(labels[r]);
    loss -= z * std::log(prob) + (1.0 - z) * std::log(1.0 - prob);
  }
  return loss / static_cast<double>(rows.size());
}

void mlp_gradients(const MlpParamBlock& p, const Matrix& x, const std::vector<int>& labels,
                   std::span<const std::size_t> rows, MlpParamBlock& g) {
  const std::size_t h = p.b1.size();
  const std::size_t d = p.w1.cols();
  g.w1 = Matrix(h, d);
  g.b1.assign(h, 0.0);
  g.w2.assign(h, 0.0);
  g.b2 = 0.0;

  Forward f;
  const double inv_batch = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    const auto xi = x.row(r);
    forward_one(p, xi, f);
    // Sigmoid + cross-entropy collapse to (output - target) at the top.
    const double delta_out = (f.output - malware_target(labels[r])) * inv_batch;
    g.b2 += delta_out;
    for (std::size_t i = 0; i < h; ++i) {
      g.w2[i] += delta_out * f.hidden[i];
      // ReLU passes gradient only where the unit is active; the subgradient
      // at exactly zero is taken as zero.
      if (f.hidden[i] > 0.0) {
        const double delta_h = delta_out * p.w2[i];
        g.b1[i] += delta_h;
        auto grad_row = g.w1.row(i);
        for (std::size_t j = 0; j < d; ++j) grad_row[j] += delta_h * xi[j];
      }
    }
  }
}

MlpClassifier train_mlp(const MlpParams& params, std::uint64_t seed, const Matrix& x,
                        const std::vector<int>& labels) {
  const std::size_t n = x.rows();
  Rng rng(seed);
  MlpParamBlock p = MlpParamBlock::glorot(x.cols(), params.hidden_units, rng);
  MlpParamBlock g = MlpParamBlock::zeros(x.cols(), params.hidden_units);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  const auto batch = static_cast<std::size_t>(params.batch_size);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(start + batch, n);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      mlp_gradients(p, x, labels, rows, g);
      const std::size_t total = p.count();
      for (std::size_t i = 0; i < total; ++i) {
        p.add(i, -params.learning_rate * g.get(i));
      }
    }
    for (std::size_t i = 0; i < p.count(); ++i) {
      if (!std::isfinite(p.get(i))) {
        throw NonFiniteLossError("mlp: parameters diverged; lower the learning rate");
      }
    }
  }
  return MlpClassifier(std::move(p.w1), std::move(p.b1), std::move(p.w2), p.b2);
}

}  // namespace internal
}  // namespace poisonbench::models
