#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "autotm/corpus.h"
#include "autotm/errors.h"

namespace autotm {

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<int64_t> df)
    : tokens_(std::move(tokens)), df_(std::move(df)) {
  if (tokens_.size() != df_.size()) {
    throw FormatError("vocabulary token and df lists differ in length");
  }
  index_.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw FormatError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

Vocabulary BuildVocabulary(const std::vector<Document>& documents, int64_t min_df,
                           double max_df_ratio) {
  if (min_df < 1) throw ConfigError("min_df", "min_df must be >= 1");
  if (!(max_df_ratio > 0.0 && max_df_ratio <= 1.0)) {
    throw ConfigError("max_df_ratio", "max_df_ratio must be in (0, 1]");
  }
  std::map<std::string, int64_t> df;
  for (const auto& doc : documents) {
    std::unordered_set<std::string_view> seen;
    for (const auto& token : doc.tokens) {
      if (seen.insert(token).second) ++df[token];
    }
  }
  const double max_df = max_df_ratio * static_cast<double>(documents.size());
  std::vector<std::pair<std::string, int64_t>> kept;
  for (auto& [token, count] : df) {
    if (count >= min_df && static_cast<double>(count) <= max_df) {
      kept.emplace_back(token, count);
    }
  }
  if (kept.empty()) throw EmptyVocabulary("no token satisfies the df bounds");
  std::stable_sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) {
    return x.second > y.second;  // map order already lexicographic
  });
  std::vector<std::string> tokens;
  std::vector<int64_t> counts;
  tokens.reserve(kept.size());
  counts.reserve(kept.size());
  for (auto& [token, count] : kept) {
    tokens.push_back(token);
    counts.push_back(count);
  }
  return Vocabulary(std::move(tokens), std::move(counts));
}

Corpus Vectorize(const std::vector<Document>& documents, const Vocabulary& vocabulary,
                 VectorizeReport* report) {
  Corpus corpus;
  corpus.vocabulary = vocabulary;
  VectorizeReport local;
  local.documents_in = static_cast<int>(documents.size());
  for (const auto& doc : documents) {
    std::map<int, int64_t> counts;
    for (const auto& token : doc.tokens) {
      const int idx = vocabulary.index(token);
      if (idx >= 0) ++counts[idx];
    }
    if (counts.empty()) {
      ++local.documents_dropped;
      local.dropped_ids.push_back(doc.id);
      spdlog::debug("document '{}' has no in-vocabulary tokens, excluded", doc.id);
      continue;
    }
    SparseDoc sparse{doc.id, {}};
    sparse.terms.reserve(counts.size());
    for (auto [idx, count] : counts) {
      sparse.terms.push_back({idx, count});
      corpus.total_tokens += count;
    }
    corpus.docs.push_back(std::move(sparse));
  }
  if (local.documents_dropped > 0) {
    spdlog::info("vectorize: excluded {} of {} documents with no retained tokens",
                 local.documents_dropped, local.documents_in);
  }
  if (report != nullptr) *report = std::move(local);
  if (corpus.docs.empty()) throw EmptyCorpus("every document was excluded");
  return corpus;
}

std::vector<std::vector<int>> ToIndexSequences(const std::vector<Document>& documents,
                                               const Vocabulary& vocabulary) {
  std::vector<std::vector<int>> sequences;
  sequences.reserve(documents.size());
  for (const auto& doc : documents) {
    std::vector<int> seq;
    seq.reserve(doc.tokens.size());
    for (const auto& token : doc.tokens) {
      const int idx = vocabulary.index(token);
      if (idx >= 0) seq.push_back(idx);
    }
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

// ---------------------------------------------------------------------------

CoocStats::CoocStats(int window_size, int vocab_size)
    : window_size_(window_size), single_(static_cast<size_t>(vocab_size), 0) {}

uint64_t CoocStats::Key(int wi, int wj) {
  if (wi > wj) std::swap(wi, wj);
  return (static_cast<uint64_t>(static_cast<uint32_t>(wi)) << 32) |
         static_cast<uint32_t>(wj);
}

int64_t CoocStats::pair(int wi, int wj) const {
  auto it = pairs_.find(Key(wi, wj));
  return it == pairs_.end() ? 0 : it->second;
}

void CoocStats::AddObservation(int wi, int wj) {
  ++pairs_[Key(wi, wj)];
  ++single_.at(wi);
  if (wj != wi) ++single_.at(wj);
  ++total_;
}

std::vector<std::tuple<int, int, int64_t>> CoocStats::SortedPairs() const {
  std::vector<std::tuple<int, int, int64_t>> out;
  out.reserve(pairs_.size());
  for (const auto& [key, count] : pairs_) {
    out.emplace_back(static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu),
                     count);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void CoocStats::SetRaw(int64_t total, std::vector<int64_t> single,
                       const std::vector<std::tuple<int, int, int64_t>>& pairs) {
  total_ = total;
  single_ = std::move(single);
  pairs_.clear();
  pairs_.reserve(pairs.size());
  for (const auto& [i, j, count] : pairs) pairs_[Key(i, j)] = count;
}

CoocStats ComputeCooccurrence(const std::vector<std::vector<int>>& sequences,
                              int vocab_size, int window_size) {
  if (window_size < 1) throw ConfigError("window_size", "window_size must be >= 1");
  CoocStats stats(window_size, vocab_size);
  for (const auto& seq : sequences) {
    const size_t n = seq.size();
    for (size_t i = 0; i < n; ++i) {
      const size_t end = std::min(n, i + 1 + static_cast<size_t>(window_size));
      for (size_t j = i + 1; j < end; ++j) stats.AddObservation(seq[i], seq[j]);
    }
  }
  return stats;
}

std::vector<PpmiEntry> ComputePpmi(const CoocStats& cooc, double epsilon) {
  std::vector<PpmiEntry> out;
  const double total = static_cast<double>(cooc.total());
  for (const auto& [i, j, count] : cooc.SortedPairs()) {
    const double num = static_cast<double>(count) * total + epsilon;
    const double den =
        static_cast<double>(cooc.single(i)) * static_cast<double>(cooc.single(j)) + epsilon;
    const double value = std::log(num / den);
    if (value > 0.0) out.push_back({i, j, value});
  }
  return out;
}

std::vector<Batch> BatchCorpus(const Corpus& corpus, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch_size", "batch_size must be >= 1");
  std::vector<Batch> batches;
  const int d = corpus.num_docs();
  for (int start = 0, ordinal = 0; start < d; start += batch_size, ++ordinal) {
    Batch batch{ordinal, {}};
    for (int i = start; i < std::min(d, start + batch_size); ++i) {
      batch.doc_indices.push_back(i);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

PreparedDataset PrepareDataset(const std::vector<Document>& documents,
                               const PrepareConfig& config, PrepareReport* report) {
  if (documents.empty()) throw EmptyCorpus("no documents after preprocessing");
  PreparedDataset data;
  Vocabulary vocab = BuildVocabulary(documents, config.min_df, config.max_df_ratio);
  VectorizeReport vreport;
  data.corpus = Vectorize(documents, vocab, &vreport);
  data.cooc = ComputeCooccurrence(ToIndexSequences(documents, vocab), vocab.size(),
                                  config.window_size);
  data.ppmi = ComputePpmi(data.cooc, config.ppmi_epsilon);
  if (report != nullptr) report->dropped_by_vocabulary = vreport.documents_dropped;
  return data;
}

}  // namespace autotm
