#ifndef AUTOTM_SYNTHETIC_H_
#define AUTOTM_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "autotm/corpus.h"

namespace autotm {

// Planted topic model used for tests and demos. Topic k owns a block of
// `words_per_topic` tokens "t<k>_w<j>"; its first `core_words` tokens share
// `core_mass` of the topic's probability and the rest share the remainder.
// A fraction of every document is drawn from shared tokens "common_<j>".
struct PlantedConfig {
  int num_docs = 200;
  int num_topics = 5;
  int words_per_topic = 50;
  int core_words = 10;
  double core_mass = 0.6;
  int common_words = 50;
  double common_fraction = 0.2;
  int doc_length = 60;
  double alpha = 0.1;  // symmetric Dirichlet over topics per document
  uint64_t seed = 1;
};

struct PlantedCorpus {
  std::vector<Document> documents;
  // Core token sets, one per planted topic.
  std::vector<std::vector<std::string>> core_sets;
};

PlantedCorpus GeneratePlanted(const PlantedConfig& config);

// Writes the documents as "id<TAB>text" lines.
std::string PlantedToTsv(const PlantedCorpus& corpus);

}  // namespace autotm

#endif  // AUTOTM_SYNTHETIC_H_
