#ifndef AUTOTM_METRICS_H_
#define AUTOTM_METRICS_H_

#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "autotm/artm.h"
#include "autotm/corpus.h"

namespace autotm {

constexpr double kDefaultNpmiEpsilon = 1e-12;
constexpr int kDefaultCoherenceTopK = 25;

// Normalized PMI from window co-occurrence statistics with p(w) = n(w)/N + eps
// and p(w1,w2) = n(w1,w2)/N + eps. Pairs that never co-occur score -1 (the
// eps -> 0 limit). Throws UnknownToken for indices outside the statistics and
// DegenerateInput when the statistics are empty.
double NpmiPair(int w1, int w2, const CoocStats& cooc, double epsilon = kDefaultNpmiEpsilon);

// Mean NPMI over all unordered pairs of the topic's top-k tokens.
double TopicCoherence(const TopicModel& model, int topic, int k, const CoocStats& cooc,
                      double epsilon = kDefaultNpmiEpsilon);

// Mean top-k coherence over the specific topics.
double DefaultFitness(const TopicModel& model, const CoocStats& cooc,
                      int k = kDefaultCoherenceTopK);

struct TopicScorecard {
  int k = 0;
  std::vector<std::vector<std::string>> top_tokens;  // per topic
  std::vector<double> coherence;                     // per topic
  std::vector<bool> background;                      // per topic
  double mean_specific_coherence = 0.0;
};

TopicScorecard ScoreTopics(const TopicModel& model, const Vocabulary& vocab,
                           const CoocStats& cooc, int k = kDefaultCoherenceTopK);

// Named fitness functions. Higher is better.
using MetricFn =
    std::function<double(const TopicModel&, const Corpus&, const CoocStats&)>;

class MetricRegistry {
 public:
  // Holds "default" (mean top-25 coherence), "coherence10" and
  // "loglik_per_token".
  static MetricRegistry& Global();

  void Register(const std::string& name, MetricFn fn);
  bool Contains(const std::string& name) const;
  // Throws ConfigError for unknown names.
  MetricFn Get(const std::string& name) const;
  std::vector<std::string> Names() const;

 private:
  MetricRegistry();
  mutable std::mutex mutex_;
  std::map<std::string, MetricFn> metrics_;
};

struct Correlation {
  double pearson = 0.0;
  double spearman = 0.0;
};

// Throws DegenerateInput on length mismatch, fewer than 3 points or constant
// input.
Correlation CorrelationReport(const std::vector<double>& metric_values,
                              const std::vector<double>& human_labels);

}  // namespace autotm

#endif  // AUTOTM_METRICS_H_
