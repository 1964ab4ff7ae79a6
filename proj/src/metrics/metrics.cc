#include <algorithm>
#include <cmath>
#include <numeric>

#include "autotm/errors.h"
#include "autotm/metrics.h"

namespace autotm {

double NpmiPair(int w1, int w2, const CoocStats& cooc, double epsilon) {
  const int v = cooc.vocab_size();
  if (w1 < 0 || w1 >= v || w2 < 0 || w2 >= v) {
    throw UnknownToken("token index out of co-occurrence vocabulary");
  }
  if (cooc.empty()) throw DegenerateInput("co-occurrence statistics are empty");
  const int64_t joint = cooc.pair(w1, w2);
  if (joint == 0) return -1.0;
  const double n = static_cast<double>(cooc.total());
  const double p12 = static_cast<double>(joint) / n + epsilon;
  const double p1 = static_cast<double>(cooc.single(w1)) / n + epsilon;
  const double p2 = static_cast<double>(cooc.single(w2)) / n + epsilon;
  const double denom = -std::log(p12);
  // Every observation is this pair: perfect association.
  if (denom <= 0.0) return 1.0;
  return std::log(p12 / (p1 * p2)) / denom;
}

double TopicCoherence(const TopicModel& model, int topic, int k, const CoocStats& cooc,
                      double epsilon) {
  const std::vector<int> top = TopTokenIndices(model, topic, k);
  if (top.size() < 2) return 0.0;
  double sum = 0.0;
  int pairs = 0;
  for (size_t i = 0; i < top.size(); ++i) {
    for (size_t j = i + 1; j < top.size(); ++j) {
      sum += NpmiPair(top[i], top[j], cooc, epsilon);
      ++pairs;
    }
  }
  return sum / pairs;
}

double DefaultFitness(const TopicModel& model, const CoocStats& cooc, int k) {
  double sum = 0.0;
  int count = 0;
  for (int t = model.num_background; t < model.num_topics(); ++t) {
    sum += TopicCoherence(model, t, k, cooc);
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

TopicScorecard ScoreTopics(const TopicModel& model, const Vocabulary& vocab,
                           const CoocStats& cooc, int k) {
  TopicScorecard card;
  card.k = k;
  double sum = 0.0;
  int count = 0;
  for (int t = 0; t < model.num_topics(); ++t) {
    card.top_tokens.push_back(TopTokens(model, vocab, t, k));
    card.coherence.push_back(TopicCoherence(model, t, k, cooc));
    card.background.push_back(model.is_background(t));
    if (!model.is_background(t)) {
      sum += card.coherence.back();
      ++count;
    }
  }
  card.mean_specific_coherence = count > 0 ? sum / count : 0.0;
  return card;
}

MetricRegistry::MetricRegistry() {
  metrics_["default"] = [](const TopicModel& m, const Corpus&, const CoocStats& c) {
    return DefaultFitness(m, c, kDefaultCoherenceTopK);
  };
  metrics_["coherence10"] = [](const TopicModel& m, const Corpus&, const CoocStats& c) {
    return DefaultFitness(m, c, 10);
  };
  metrics_["loglik_per_token"] = [](const TopicModel& m, const Corpus& corpus,
                                    const CoocStats&) {
    return LogLikelihood(m, corpus) / static_cast<double>(corpus.total_tokens);
  };
}

MetricRegistry& MetricRegistry::Global() {
  static MetricRegistry registry;
  return registry;
}

void MetricRegistry::Register(const std::string& name, MetricFn fn) {
  std::lock_guard lock(mutex_);
  metrics_[name] = std::move(fn);
}

bool MetricRegistry::Contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return metrics_.contains(name);
}

MetricFn MetricRegistry::Get(const std::string& name) const {
  std::lock_guard lock(mutex_);
  auto it = metrics_.find(name);
  if (it == metrics_.end()) throw ConfigError("metric", "unknown metric '" + name + "'");
  return it->second;
}

std::vector<std::string> MetricRegistry::Names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> names;
  for (const auto& [name, fn] : metrics_) names.push_back(name);
  return names;
}

namespace {

double Pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("constant input");
  return sxy / std::sqrt(sxx * syy);
}

// 1-based ranks, ties get the average rank.
std::vector<double> Ranks(const std::vector<double>& x) {
  std::vector<size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Correlation CorrelationReport(const std::vector<double>& metric_values,
                              const std::vector<double>& human_labels) {
  if (metric_values.size() != human_labels.size()) {
    throw DegenerateInput("metric and label lists differ in length");
  }
  if (metric_values.size() < 3) throw DegenerateInput("need at least 3 topics");
  for (double v : metric_values) {
    if (!std::isfinite(v)) throw DegenerateInput("non-finite metric value");
  }
  for (double v : human_labels) {
    if (!std::isfinite(v)) throw DegenerateInput("non-finite label");
  }
  return {Pearson(metric_values, human_labels),
          Pearson(Ranks(metric_values), Ranks(human_labels))};
}

}  // namespace autotm
