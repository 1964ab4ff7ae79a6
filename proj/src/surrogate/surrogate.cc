#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "autotm/errors.h"
#include "autotm/surrogate.h"

namespace autotm {

// ---------------------------------------------------------------------------
// Random forest

void RandomForest::Fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  if (x.empty() || x.size() != y.size()) throw InsufficientData("random forest needs data");
  trees_.clear();
  const int n = static_cast<int>(x.size());
  for (int t = 0; t < config_.n_trees; ++t) {
    Rng rng(DeriveSeed({config_.seed, static_cast<uint64_t>(t)}));
    std::vector<int> sample(static_cast<size_t>(n));
    if (config_.bootstrap) {
      for (auto& s : sample) s = UniformInt(rng, 0, n - 1);
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    trees_.push_back(BuildTree(x, y, std::move(sample), rng));
  }
}

RandomForest::Tree RandomForest::BuildTree(const std::vector<std::vector<double>>& x,
                                           const std::vector<double>& y, std::vector<int> sample,
                                           Rng& rng) const {
  const int num_features = static_cast<int>(x.front().size());
  const int per_split = std::clamp(
      static_cast<int>(std::lround(config_.feature_fraction * num_features)), 1, num_features);
  const int min_leaf = std::max(1, config_.min_leaf);
  Tree tree;
  std::vector<int> features(static_cast<size_t>(num_features));
  std::iota(features.begin(), features.end(), 0);

  // Returns the index of the created node.
  auto build = [&](auto&& self, std::vector<int> idx, int depth) -> int {
    const int node_id = static_cast<int>(tree.size());
    tree.push_back({});
    double sum = 0.0, sum_sq = 0.0;
    for (int i : idx) {
      sum += y[i];
      sum_sq += y[i] * y[i];
    }
    const double count = static_cast<double>(idx.size());
    tree[node_id].value = sum / count;
    const double total_sse = sum_sq - sum * sum / count;
    const bool depth_left = config_.max_depth < 0 || depth < config_.max_depth;
    if (!depth_left || static_cast<int>(idx.size()) < 2 * min_leaf || total_sse <= 1e-12) {
      return node_id;
    }

    // Partial Fisher-Yates for the feature subset.
    for (int k = 0; k < per_split; ++k) {
      std::swap(features[k], features[UniformInt(rng, k, num_features - 1)]);
    }
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_sse = total_sse - 1e-12;
    std::vector<int> order = idx;
    for (int k = 0; k < per_split; ++k) {
      const int f = features[k];
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (x[a][f] != x[b][f]) return x[a][f] < x[b][f];
        return a < b;
      });
      double left_sum = 0.0, left_sq = 0.0;
      const int n = static_cast<int>(order.size());
      for (int i = 0; i < n - 1; ++i) {
        const double yi = y[order[i]];
        left_sum += yi;
        left_sq += yi * yi;
        const int left_n = i + 1;
        const int right_n = n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        const double lo = x[order[i]][f];
        const double hi = x[order[i + 1]][f];
        if (!(lo < hi)) continue;
        const double right_sum = sum - left_sum;
        const double right_sq = sum_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / left_n) +
                           (right_sq - right_sum * right_sum / right_n);
        if (sse < best_sse) {
          best_sse = sse;
          best_feature = f;
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<int> left, right;
    for (int i : idx) (x[i][best_feature] <= best_threshold ? left : right).push_back(i);
    tree[node_id].feature = best_feature;
    tree[node_id].threshold = best_threshold;
    const int l = self(self, std::move(left), depth + 1);
    const int r = self(self, std::move(right), depth + 1);
    tree[node_id].left = l;
    tree[node_id].right = r;
    return node_id;
  };
  build(build, std::move(sample), 0);
  return tree;
}

double RandomForest::PredictTree(const Tree& tree, const std::vector<double>& x) {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
  }
  return tree[node].value;
}

std::vector<double> RandomForest::TreePredictions(const std::vector<double>& x) const {
  std::vector<double> out;
  out.reserve(trees_.size());
  for (const Tree& tree : trees_) out.push_back(PredictTree(tree, x));
  return out;
}

Prediction RandomForest::Predict(const std::vector<double>& x) const {
  if (trees_.empty()) throw InsufficientData("random forest is not fitted");
  const std::vector<double> values = TreePredictions(x);
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

// ---------------------------------------------------------------------------
// Gaussian process

Eigen::VectorXd GaussianProcess::Standardize(const std::vector<double>& x) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = x_scale_(i) > 0.0 ? (x[static_cast<size_t>(i)] - x_mean_(i)) / x_scale_(i) : 0.0;
  }
  return v;
}

void GaussianProcess::Fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  if (x.empty() || x.size() != y.size()) throw InsufficientData("gaussian process needs data");
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto d = static_cast<Eigen::Index>(x.front().size());
  Eigen::MatrixXd raw(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) raw(i, j) = x[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  x_mean_ = raw.colwise().mean().transpose();
  x_scale_.resize(d);
  int active_dims = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = (raw.col(j).array() - x_mean_(j)).square().mean();
    x_scale_(j) = var > 0.0 ? std::sqrt(var) : 0.0;
    if (var > 0.0) ++active_dims;
  }
  x_.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x_.row(i) = Standardize(x[static_cast<size_t>(i)]).transpose();

  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  y_mean_ = yv.mean();
  const double y_var = (yv.array() - y_mean_).square().mean();
  degenerate_ = !(y_var > 0.0);
  y_scale_ = degenerate_ ? 1.0 : std::sqrt(y_var);
  y_ = (yv.array() - y_mean_) / y_scale_;

  const double base = std::sqrt(static_cast<double>(std::max(active_dims, 1)));
  std::vector<double> scales, noises;
  if (config_.length_scale) {
    scales = {*config_.length_scale};
  } else {
    for (int k = 0; k < 5; ++k) scales.push_back(base * std::pow(10.0, -1.0 + 0.5 * k));
  }
  if (config_.noise) {
    noises = {*config_.noise};
  } else {
    for (int k = 0; k < 5; ++k) noises.push_back(std::pow(10.0, -6.0 + 1.5 * k));
  }
  double best = -std::numeric_limits<double>::infinity();
  double best_scale = scales.front(), best_noise = noises.front();
  for (double s : scales) {
    for (double z : noises) {
      const double lml = FitWith(s, z, false);
      if (lml > best) {
        best = lml;
        best_scale = s;
        best_noise = z;
      }
    }
  }
  FitWith(best_scale, best_noise, true);
}

double GaussianProcess::FitWith(double length_scale, double noise, bool keep) {
  const Eigen::Index n = x_.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double d2 = (x_.row(i) - x_.row(j)).squaredNorm();
      k(i, j) = k(j, i) = std::exp(-0.5 * d2 / (length_scale * length_scale));
    }
  }
  k.diagonal().array() += noise + 1e-10;
  Eigen::LLT<Eigen::MatrixXd> chol(k);
  if (chol.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  Eigen::VectorXd alpha = chol.solve(y_);
  const double log_det = 2.0 * chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double lml = -0.5 * y_.dot(alpha) - 0.5 * log_det -
                     0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  if (keep) {
    length_scale_ = length_scale;
    noise_ = noise;
    lml_ = lml;
    chol_ = std::move(chol);
    alpha_ = std::move(alpha);
  }
  return lml;
}

Prediction GaussianProcess::Predict(const std::vector<double>& x) const {
  if (alpha_.size() == 0) throw InsufficientData("gaussian process is not fitted");
  const Eigen::VectorXd z = Standardize(x);
  Eigen::VectorXd kstar(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    kstar(i) = std::exp(-0.5 * (x_.row(i).transpose() - z).squaredNorm() /
                        (length_scale_ * length_scale_));
  }
  const double mean = kstar.dot(alpha_);
  const Eigen::VectorXd v = chol_.matrixL().solve(kstar);
  const double var = std::max(0.0, 1.0 - v.squaredNorm());
  return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

// ---------------------------------------------------------------------------

std::string SurrogateKindName(SurrogateKind kind) {
  return kind == SurrogateKind::kRandomForest ? "random_forest" : "gaussian_process";
}

SurrogateKind ParseSurrogateKind(const std::string& name) {
  if (name == "random_forest" || name == "rf") return SurrogateKind::kRandomForest;
  if (name == "gaussian_process" || name == "gp") return SurrogateKind::kGaussianProcess;
  throw ConfigError("surrogate.kind", "unknown surrogate kind '" + name + "'");
}

std::string CheckSurrogateConfig(const SurrogateConfig& config, int population_size) {
  if (!(config.promote_fraction > 0.0 && config.promote_fraction <= 1.0)) {
    return "promote_fraction must be in (0, 1]";
  }
  if (config.warmup_true_evals < std::max(10, population_size)) {
    return "warmup_true_evals must be >= max(10, population_size)";
  }
  if (config.retrain_every < 1) return "retrain_every must be >= 1";
  return {};
}

void SurrogateDataset::Add(std::vector<double> vector, double fitness) {
  if (vector.size() != static_cast<size_t>(kSurrogateVectorLength)) {
    throw DimensionMismatch("surrogate rows must have length 90");
  }
  x_.push_back(std::move(vector));
  y_.push_back(fitness);
}

void SurrogateDataset::WriteCsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.precision(17);
  for (int j = 0; j < kSurrogateVectorLength; ++j) out << 'f' << j << ',';
  out << "fitness\n";
  for (size_t i = 0; i < y_.size(); ++i) {
    for (double v : x_[i]) out << v << ',';
    out << y_[i] << '\n';
  }
}

namespace {

class ForestSurrogate : public SurrogateModel {
 public:
  explicit ForestSurrogate(RandomForest forest) : forest_(std::move(forest)) {}
  Prediction Predict(const std::vector<double>& x) const override { return forest_.Predict(x); }

 private:
  RandomForest forest_;
};

class GpSurrogate : public SurrogateModel {
 public:
  explicit GpSurrogate(GaussianProcess gp) : gp_(std::move(gp)) {}
  Prediction Predict(const std::vector<double>& x) const override { return gp_.Predict(x); }

 private:
  GaussianProcess gp_;
};

}  // namespace

std::unique_ptr<SurrogateModel> FitSurrogate(const SurrogateDataset& data,
                                             const SurrogateConfig& config, int min_rows,
                                             uint64_t seed) {
  if (data.size() < std::max(1, min_rows)) {
    throw InsufficientData("surrogate needs " + std::to_string(min_rows) + " rows, have " +
                           std::to_string(data.size()));
  }
  if (config.kind == SurrogateKind::kRandomForest) {
    ForestConfig fc = config.forest;
    fc.seed = seed;
    RandomForest forest(fc);
    forest.Fit(data.x(), data.y());
    return std::make_unique<ForestSurrogate>(std::move(forest));
  }
  GaussianProcess gp(config.gp);
  gp.Fit(data.x(), data.y());
  return std::make_unique<GpSurrogate>(std::move(gp));
}

std::vector<ScoredCandidate> SurrogateEvaluateGeneration(const std::vector<EvalRequest>& batch,
                                                         SurrogateState& state,
                                                         Evaluator& evaluator,
                                                         GenerationCounts* counts) {
  const size_t n = batch.size();
  std::vector<ScoredCandidate> scored(n);
  std::vector<size_t> to_evaluate;
  const bool warmup = state.model == nullptr ||
                      state.dataset.size() < state.config.warmup_true_evals;
  if (warmup) {
    to_evaluate.resize(n);
    std::iota(to_evaluate.begin(), to_evaluate.end(), 0);
  } else {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = 0; i < n; ++i) {
      scored[i].prediction = state.model->Predict(ToSurrogateVector(batch[i].pipeline));
      scored[i].fitness = scored[i].prediction.mean;
      scored[i].source = FitnessSource::kSurrogatePred;
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      const auto& pa = scored[a].prediction;
      const auto& pb = scored[b].prediction;
      if (pa.mean != pb.mean) return pa.mean > pb.mean;
      return pa.stddev < pb.stddev;
    });
    const auto promote = static_cast<size_t>(
        std::ceil(state.config.promote_fraction * static_cast<double>(n) - 1e-9));
    to_evaluate.assign(order.begin(), order.begin() + std::min(promote, n));
    std::sort(to_evaluate.begin(), to_evaluate.end());
  }

  std::vector<EvalRequest> requests;
  requests.reserve(to_evaluate.size());
  for (size_t i : to_evaluate) requests.push_back(batch[i]);
  const std::vector<EvalOutcome> outcomes = evaluator.EvaluateBatch(requests);
  GenerationCounts local;
  for (size_t k = 0; k < to_evaluate.size(); ++k) {
    const size_t i = to_evaluate[k];
    ++local.true_evals;
    if (outcomes[k].ok) {
      scored[i].fitness = outcomes[k].fitness;
      scored[i].source = FitnessSource::kTrueEval;
      if (std::isfinite(outcomes[k].fitness)) {
        state.dataset.Add(ToSurrogateVector(batch[i].pipeline), outcomes[k].fitness);
      }
    } else if (!warmup) {
      spdlog::warn("true evaluation failed ({}); keeping surrogate prediction", outcomes[k].error);
      scored[i].error = outcomes[k].error;
    } else {
      scored[i].failed = true;
      scored[i].error = outcomes[k].error;
      scored[i].fitness = -std::numeric_limits<double>::infinity();
      scored[i].source = FitnessSource::kTrueEval;
    }
  }
  for (const auto& s : scored) {
    if (s.source == FitnessSource::kSurrogatePred) ++local.surrogate_evals;
  }

  ++state.generations_since_fit;
  const bool ready = state.dataset.size() >= state.config.warmup_true_evals;
  if (ready && (state.model == nullptr || state.generations_since_fit >= state.config.retrain_every)) {
    state.model = FitSurrogate(state.dataset, state.config, state.config.warmup_true_evals,
                               DeriveSeed({state.seed, static_cast<uint64_t>(state.fits)}));
    ++state.fits;
    state.generations_since_fit = 0;
  }
  if (counts != nullptr) *counts = local;
  return scored;
}

}  // namespace autotm
