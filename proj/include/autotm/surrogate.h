#ifndef AUTOTM_SURROGATE_H_
#define AUTOTM_SURROGATE_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autotm/evaluator.h"

namespace autotm {

struct Prediction {
  double mean = 0.0;
  double stddev = 0.0;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 12;  // < 0 means unlimited
  int min_leaf = 2;
  double feature_fraction = 1.0 / 3.0;
  bool bootstrap = true;
  uint64_t seed = 0;
};

// Bagged CART regression trees with variance-reduction splits at midpoints of
// sorted distinct feature values.
class RandomForest {
 public:
  explicit RandomForest(ForestConfig config = {}) : config_(config) {}
  void Fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y);
  // Mean and across-tree standard deviation.
  Prediction Predict(const std::vector<double>& x) const;
  std::vector<double> TreePredictions(const std::vector<double>& x) const;
  int num_trees() const { return static_cast<int>(trees_.size()); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  Tree BuildTree(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                 std::vector<int> sample, Rng& rng) const;
  static double PredictTree(const Tree& tree, const std::vector<double>& x);

  ForestConfig config_;
  std::vector<Tree> trees_;
};

struct GpConfig {
  // When unset, chosen by log-marginal-likelihood over a 5 x 5 grid.
  std::optional<double> length_scale;  // in standardized input units
  std::optional<double> noise;         // variance in standardized output units
};

// Zero-mean GP with a squared-exponential kernel on standardized inputs and
// outputs.
class GaussianProcess {
 public:
  explicit GaussianProcess(GpConfig config = {}) : config_(config) {}
  void Fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y);
  // Posterior mean and standard deviation of the latent function.
  Prediction Predict(const std::vector<double>& x) const;
  double length_scale() const { return length_scale_; }
  double noise() const { return noise_; }
  double log_marginal_likelihood() const { return lml_; }
  // True when every training target was equal.
  bool degenerate() const { return degenerate_; }

 private:
  Eigen::VectorXd Standardize(const std::vector<double>& x) const;
  double FitWith(double length_scale, double noise, bool keep);

  GpConfig config_;
  Eigen::MatrixXd x_;  // n x d standardized
  Eigen::VectorXd y_;  // standardized
  Eigen::VectorXd x_mean_, x_scale_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  double length_scale_ = 1.0, noise_ = 1e-6, lml_ = 0.0;
  bool degenerate_ = false;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
};

enum class SurrogateKind { kRandomForest, kGaussianProcess };

std::string SurrogateKindName(SurrogateKind kind);
SurrogateKind ParseSurrogateKind(const std::string& name);

struct SurrogateConfig {
  SurrogateKind kind = SurrogateKind::kRandomForest;
  int warmup_true_evals = 10;
  double promote_fraction = 0.3;
  int retrain_every = 1;
  ForestConfig forest;
  GpConfig gp;
};

// Empty when valid for the given population size.
std::string CheckSurrogateConfig(const SurrogateConfig& config, int population_size);

// Append-only (vector, true fitness) rows.
class SurrogateDataset {
 public:
  void Add(std::vector<double> vector, double fitness);
  int size() const { return static_cast<int>(y_.size()); }
  const std::vector<std::vector<double>>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  // Header f0..f89,fitness.
  void WriteCsv(const std::filesystem::path& path) const;

 private:
  std::vector<std::vector<double>> x_;
  std::vector<double> y_;
};

class SurrogateModel {
 public:
  virtual ~SurrogateModel() = default;
  virtual Prediction Predict(const std::vector<double>& x) const = 0;
};

// Throws InsufficientData when the dataset is below `min_rows`.
std::unique_ptr<SurrogateModel> FitSurrogate(const SurrogateDataset& data,
                                             const SurrogateConfig& config, int min_rows,
                                             uint64_t seed);

enum class FitnessSource { kTrueEval, kSurrogatePred };

struct ScoredCandidate {
  double fitness = 0.0;
  FitnessSource source = FitnessSource::kTrueEval;
  bool failed = false;
  std::string error;
  Prediction prediction;  // set when a surrogate was consulted
};

struct SurrogateState {
  SurrogateConfig config;
  uint64_t seed = 0;
  SurrogateDataset dataset;
  std::unique_ptr<SurrogateModel> model;
  int generations_since_fit = 0;
  int fits = 0;
};

struct GenerationCounts {
  int true_evals = 0;
  int surrogate_evals = 0;
};

// Warmup (dataset below warmup_true_evals or no model yet): every candidate is
// truly evaluated. Afterwards all are predicted, the top ceil(q * N) by
// predicted mean (ties: lower uncertainty first) are truly evaluated and the
// rest keep their prediction. True results are appended to the dataset and the
// model is refit every retrain_every generations.
std::vector<ScoredCandidate> SurrogateEvaluateGeneration(const std::vector<EvalRequest>& batch,
                                                         SurrogateState& state,
                                                         Evaluator& evaluator,
                                                         GenerationCounts* counts = nullptr);

}  // namespace autotm

#endif  // AUTOTM_SURROGATE_H_
