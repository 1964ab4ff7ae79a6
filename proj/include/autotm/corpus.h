#ifndef AUTOTM_CORPUS_H_
#define AUTOTM_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace autotm {

// Maps a token to its normalized form. Returning an empty string drops it.
using Normalizer = std::function<std::string(const std::string&)>;

struct PreprocessConfig {
  bool strip_html = true;
  bool lowercase = true;
  bool remove_digits = true;
  bool remove_stopwords = true;
  bool stem = true;
  int min_token_len = 2;
  std::vector<std::string> extra_stopwords;
  // Applied after stemming; maps a normalized token to a replacement.
  std::map<std::string, std::string> replacements;
  // Optional user hook applied last (e.g. a real lemmatizer).
  Normalizer normalizer;
};

struct Document {
  std::string id;
  std::vector<std::string> tokens;
};

// Light suffix stripping: the classic English "S" stemmer plus a short list of
// Russian inflectional endings. Non-letter input is returned unchanged.
std::string StemToken(const std::string& token);

bool IsBuiltinStopword(const std::string& token);

std::vector<std::string> PreprocessText(std::string_view raw,
                                        const PreprocessConfig& config);

class Vocabulary {
 public:
  Vocabulary() = default;
  // tokens[i] gets index i; df.size() must equal tokens.size().
  Vocabulary(std::vector<std::string> tokens, std::vector<int64_t> df);

  int size() const { return static_cast<int>(tokens_.size()); }
  // -1 when absent.
  int index(const std::string& token) const;
  const std::string& token(int index) const { return tokens_.at(index); }
  int64_t df(int index) const { return df_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<int64_t> df_;
  std::unordered_map<std::string, int> index_;
};

// Indices are assigned in descending df order with lexicographic ties.
// Throws EmptyVocabulary.
Vocabulary BuildVocabulary(const std::vector<Document>& documents, int64_t min_df,
                           double max_df_ratio);

struct TermCount {
  int index;
  int64_t count;
  bool operator==(const TermCount&) const = default;
};

struct SparseDoc {
  std::string id;
  std::vector<TermCount> terms;  // sorted by index, count >= 1
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<SparseDoc> docs;
  int64_t total_tokens = 0;

  int num_docs() const { return static_cast<int>(docs.size()); }
  int vocab_size() const { return vocabulary.size(); }
};

struct VectorizeReport {
  int documents_in = 0;
  int documents_dropped = 0;
  std::vector<std::string> dropped_ids;
};

// Out-of-vocabulary tokens are dropped; documents left empty are excluded and
// reported. Throws EmptyCorpus when nothing survives.
Corpus Vectorize(const std::vector<Document>& documents, const Vocabulary& vocabulary,
                 VectorizeReport* report = nullptr);

// Vocabulary-filtered index sequences in original token order.
std::vector<std::vector<int>> ToIndexSequences(const std::vector<Document>& documents,
                                               const Vocabulary& vocabulary);

// Windowed co-occurrence counts. Every ordered position pair (i, j) with
// 0 < j - i <= window is one observation of the unordered pair {w_i, w_j};
// total() is the number of observations and single(w) the number of
// observations in which w takes part.
class CoocStats {
 public:
  CoocStats() = default;
  CoocStats(int window_size, int vocab_size);

  int window_size() const { return window_size_; }
  int vocab_size() const { return static_cast<int>(single_.size()); }
  int64_t total() const { return total_; }
  int64_t single(int w) const { return single_.at(w); }
  // Symmetric.
  int64_t pair(int wi, int wj) const;
  size_t num_pairs() const { return pairs_.size(); }
  bool empty() const { return total_ == 0; }

  void AddObservation(int wi, int wj);

  // (i, j, count) with i <= j, sorted.
  std::vector<std::tuple<int, int, int64_t>> SortedPairs() const;

  // Raw setters for deserialization.
  void SetRaw(int64_t total, std::vector<int64_t> single,
              const std::vector<std::tuple<int, int, int64_t>>& pairs);

 private:
  static uint64_t Key(int wi, int wj);

  int window_size_ = 0;
  int64_t total_ = 0;
  std::vector<int64_t> single_;
  std::unordered_map<uint64_t, int64_t> pairs_;
};

CoocStats ComputeCooccurrence(const std::vector<std::vector<int>>& sequences,
                              int vocab_size, int window_size);

struct PpmiEntry {
  int i;
  int j;
  double value;
};

constexpr double kDefaultPpmiEpsilon = 1e-12;

// Positive entries only, sorted by (i, j), i <= j.
std::vector<PpmiEntry> ComputePpmi(const CoocStats& cooc,
                                   double epsilon = kDefaultPpmiEpsilon);

struct Batch {
  int ordinal;
  std::vector<int> doc_indices;
};

std::vector<Batch> BatchCorpus(const Corpus& corpus, int batch_size);

// ---------------------------------------------------------------------------
// Corpus directory: vocab.tsv, corpus.bin, doc_ids.txt, cooc.bin, ppmi.bin,
// meta.json. Layouts are documented in docs/FORMATS.md.

struct PreparedDataset {
  Corpus corpus;
  CoocStats cooc;
  std::vector<PpmiEntry> ppmi;
};

struct PrepareConfig {
  PreprocessConfig preprocess;
  int64_t min_df = 1;
  double max_df_ratio = 1.0;
  int window_size = 10;
  double ppmi_epsilon = kDefaultPpmiEpsilon;
  int batch_size = 1000;
};

struct PrepareReport {
  int documents_read = 0;
  int dropped_by_preprocessing = 0;
  int dropped_by_vocabulary = 0;
};

PreparedDataset PrepareDataset(const std::vector<Document>& raw_docs,
                               const PrepareConfig& config, PrepareReport* report);

// Reads one document per line, or "id<TAB>text" lines when two_column is set.
// Returns (id, raw text) pairs; line-mode ids are the 0-based line numbers.
std::vector<std::pair<std::string, std::string>> ReadRawDocuments(
    const std::filesystem::path& path, bool two_column);

std::vector<Document> PreprocessDocuments(
    const std::vector<std::pair<std::string, std::string>>& raw,
    const PreprocessConfig& config, int* dropped);

void WriteDatasetDir(const std::filesystem::path& dir, const PreparedDataset& data,
                     const PrepareConfig& config, const PrepareReport& report);

PreparedDataset LoadDatasetDir(const std::filesystem::path& dir);
// vocab.tsv only.
Vocabulary LoadVocabulary(const std::filesystem::path& dir);

}  // namespace autotm

#endif  // AUTOTM_CORPUS_H_
