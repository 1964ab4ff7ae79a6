#include <random>
#include <sstream>

#include <fmt/format.h>

#include "autotm/errors.h"
#include "autotm/random.h"
#include "autotm/synthetic.h"

namespace autotm {

PlantedCorpus GeneratePlanted(const PlantedConfig& c) {
  if (c.num_docs < 1 || c.num_topics < 1 || c.words_per_topic < 1 || c.doc_length < 1 ||
      c.core_words < 1 || c.core_words > c.words_per_topic || c.common_words < 0 ||
      !(c.alpha > 0.0) || c.core_mass < 0.0 || c.core_mass > 1.0 ||
      c.common_fraction < 0.0 || c.common_fraction >= 1.0 ||
      (c.common_fraction > 0.0 && c.common_words == 0)) {
    throw ConfigError("planted", "invalid planted corpus configuration");
  }
  Rng rng(DeriveSeed({c.seed, 0x91a7}));
  PlantedCorpus out;

  std::vector<std::vector<std::string>> topic_tokens(static_cast<size_t>(c.num_topics));
  std::vector<double> weights(static_cast<size_t>(c.words_per_topic));
  const int tail = c.words_per_topic - c.core_words;
  for (int j = 0; j < c.words_per_topic; ++j) {
    weights[j] = j < c.core_words ? c.core_mass / c.core_words
                                  : (tail > 0 ? (1.0 - c.core_mass) / tail : 0.0);
  }
  for (int k = 0; k < c.num_topics; ++k) {
    for (int j = 0; j < c.words_per_topic; ++j) {
      topic_tokens[k].push_back(fmt::format("t{}_w{:02d}", k, j));
    }
    out.core_sets.emplace_back(topic_tokens[k].begin(), topic_tokens[k].begin() + c.core_words);
  }
  std::vector<std::string> common;
  for (int j = 0; j < c.common_words; ++j) common.push_back(fmt::format("common_{:02d}", j));

  std::discrete_distribution<int> word_dist(weights.begin(), weights.end());
  std::gamma_distribution<double> gamma(c.alpha, 1.0);
  for (int d = 0; d < c.num_docs; ++d) {
    std::vector<double> theta(static_cast<size_t>(c.num_topics));
    double sum = 0.0;
    for (auto& v : theta) {
      v = gamma(rng);
      sum += v;
    }
    if (!(sum > 0.0)) theta.assign(theta.size(), 1.0);
    std::discrete_distribution<int> topic_dist(theta.begin(), theta.end());
    Document doc;
    doc.id = fmt::format("doc{:04d}", d);
    for (int i = 0; i < c.doc_length; ++i) {
      if (Uniform01(rng) < c.common_fraction) {
        doc.tokens.push_back(common[UniformInt(rng, 0, c.common_words - 1)]);
      } else {
        doc.tokens.push_back(topic_tokens[topic_dist(rng)][word_dist(rng)]);
      }
    }
    out.documents.push_back(std::move(doc));
  }
  return out;
}

std::string PlantedToTsv(const PlantedCorpus& corpus) {
  std::ostringstream out;
  for (const auto& doc : corpus.documents) {
    out << doc.id << '\t';
    for (size_t i = 0; i < doc.tokens.size(); ++i) out << (i ? " " : "") << doc.tokens[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace autotm
