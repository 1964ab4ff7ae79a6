#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "autotm/app.h"
#include "autotm/corpus.h"
#include "autotm/errors.h"
#include "autotm/synthetic.h"
#include "test_support.h"

namespace autotm {
namespace {

using testing::TempDir;

const std::filesystem::path kData = AUTOTM_TEST_DATA_DIR;

std::vector<Document> Docs(const std::vector<std::vector<std::string>>& tokens) {
  std::vector<Document> docs;
  for (size_t i = 0; i < tokens.size(); ++i) docs.push_back({"d" + std::to_string(i), tokens[i]});
  return docs;
}

std::vector<Document> FixtureDocs(int n, uint64_t seed) {
  PlantedConfig c;
  c.num_docs = n;
  c.doc_length = 25;
  c.seed = seed;
  return GeneratePlanted(c).documents;
}

TEST(PreprocessTest, StripsTagsStopwordsAndSuffixes) {
  EXPECT_EQ(PreprocessText("<b>The Cats</b> run!", PreprocessConfig{}),
            (std::vector<std::string>{"cat", "run"}));
}

TEST(PreprocessTest, EmptyInputGivesNoTokens) {
  EXPECT_TRUE(PreprocessText("", PreprocessConfig{}).empty());
}

TEST(PreprocessTest, ParagraphMatchesGolden) {
  const std::string raw = testing::ReadFile(kData / "fixture_paragraph.txt");
  std::istringstream golden(testing::ReadFile(kData / "fixture_paragraph.golden"));
  std::vector<std::string> expected;
  for (std::string t; golden >> t;) expected.push_back(t);
  EXPECT_EQ(PreprocessText(raw, PreprocessConfig{}), expected);
}

TEST(PreprocessTest, DigitsKeptWhenRequested) {
  PreprocessConfig c;
  c.remove_digits = false;
  c.stem = false;
  EXPECT_EQ(PreprocessText("room 101", c), (std::vector<std::string>{"room", "101"}));
}

TEST(PreprocessTest, ReplacementsAndNormalizerApply) {
  PreprocessConfig c;
  c.replacements = {{"mice", "mouse"}};
  c.normalizer = [](const std::string& t) { return t == "drop" ? std::string() : t; };
  EXPECT_EQ(PreprocessText("mice drop cheese", c), (std::vector<std::string>{"mouse", "cheese"}));
}

TEST(PreprocessTest, ExtraStopwordsAndMinLength) {
  PreprocessConfig c;
  c.extra_stopwords = {"foo"};
  c.min_token_len = 3;
  EXPECT_EQ(PreprocessText("foo ab abc", c), (std::vector<std::string>{"abc"}));
}

TEST(StemTest, EnglishSuffixRules) {
  EXPECT_EQ(StemToken("berries"), "berry");
  EXPECT_EQ(StemToken("dogs"), "dog");
  EXPECT_EQ(StemToken("glass"), "glass");
  EXPECT_EQ(StemToken("corpus"), "corpus");
  EXPECT_EQ(StemToken("toes"), "toe");
}

TEST(StemTest, RussianEndings) {
  EXPECT_EQ(StemToken("кошками"), "кошк");
  // Stem would fall below three letters.
  EXPECT_EQ(StemToken("дома"), "дом");
  EXPECT_EQ(StemToken("ума"), "ума");
}

TEST(VocabularyTest, ThresholdBoundaries) {
  const auto docs = Docs({{"alpha", "x"}, {"alpha", "y"}, {"alpha", "z"}});
  const Vocabulary all = BuildVocabulary(docs, 1, 1.0);
  ASSERT_GE(all.index("alpha"), 0);
  EXPECT_EQ(all.df(all.index("alpha")), 3);
  const Vocabulary capped = BuildVocabulary(docs, 1, 0.5);
  EXPECT_EQ(capped.index("alpha"), -1);
  EXPECT_EQ(capped.size(), 3);
}

TEST(VocabularyTest, EmptyVocabularyThrows) {
  EXPECT_THROW(BuildVocabulary(Docs({{"a"}, {"b"}}), 2, 1.0), EmptyVocabulary);
}

TEST(VocabularyTest, MatchesBruteForceDocumentFrequency) {
  const auto docs = FixtureDocs(20, 3);
  std::map<std::string, int64_t> df;
  for (const auto& d : docs) {
    for (const auto& t : std::set<std::string>(d.tokens.begin(), d.tokens.end())) ++df[t];
  }
  std::vector<std::pair<std::string, int64_t>> expected(df.begin(), df.end());
  std::stable_sort(expected.begin(), expected.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const Vocabulary v = BuildVocabulary(docs, 1, 1.0);
  ASSERT_EQ(v.size(), static_cast<int>(expected.size()));
  for (int i = 0; i < v.size(); ++i) {
    EXPECT_EQ(v.token(i), expected[i].first);
    EXPECT_EQ(v.df(i), expected[i].second);
  }
}

TEST(VectorizeTest, CountsAndOovDocuments) {
  const Vocabulary v({"a", "b"}, {1, 1});
  VectorizeReport report;
  const Corpus c = Vectorize(Docs({{"a", "a", "b"}, {"zzz"}}), v, &report);
  ASSERT_EQ(c.num_docs(), 1);
  EXPECT_EQ(c.docs[0].terms, (std::vector<TermCount>{{0, 2}, {1, 1}}));
  EXPECT_EQ(c.total_tokens, 3);
  EXPECT_EQ(report.documents_dropped, 1);
  EXPECT_EQ(report.dropped_ids, std::vector<std::string>{"d1"});
  EXPECT_THROW(Vectorize(Docs({{"zzz"}}), v), EmptyCorpus);
}

TEST(CooccurrenceTest, SmallCases) {
  const CoocStats ab = ComputeCooccurrence({{0, 1}}, 2, 1);
  EXPECT_EQ(ab.pair(0, 1), 1);
  EXPECT_EQ(ab.single(0), 1);
  EXPECT_EQ(ab.single(1), 1);
  EXPECT_EQ(ab.total(), 1);
  const CoocStats aaa = ComputeCooccurrence({{0, 0, 0}}, 1, 2);
  EXPECT_EQ(aaa.pair(0, 0), 3);
}

TEST(CooccurrenceTest, MatchesBruteForcePairEnumeration) {
  const auto docs = FixtureDocs(20, 4);
  const Vocabulary v = BuildVocabulary(docs, 1, 1.0);
  const auto seqs = ToIndexSequences(docs, v);
  for (int window : {1, 3, 10}) {
    const CoocStats cooc = ComputeCooccurrence(seqs, v.size(), window);
    const testing::BruteCooc brute = testing::CountPairs(seqs, window);
    EXPECT_EQ(static_cast<double>(cooc.total()), brute.total);
    EXPECT_EQ(cooc.num_pairs(), brute.pair.size());
    for (const auto& [key, n] : brute.pair) {
      EXPECT_EQ(static_cast<double>(cooc.pair(key.first, key.second)), n);
      EXPECT_EQ(cooc.pair(key.first, key.second), cooc.pair(key.second, key.first));
    }
    for (int w = 0; w < v.size(); ++w) {
      const auto it = brute.single.find(w);
      EXPECT_EQ(static_cast<double>(cooc.single(w)), it == brute.single.end() ? 0.0 : it->second);
    }
  }
}

TEST(PpmiTest, IndependenceClampsToZeroAndPerfectPairIsZero) {
  // Two tokens alternating: every observation is (a, b), so p(a,b) = p(a) = p(b).
  const CoocStats perfect = ComputeCooccurrence({{0, 1}, {0, 1}}, 2, 1);
  EXPECT_TRUE(ComputePpmi(perfect).empty());
  // n(a,b) = k with n(a) = n(b) = k out of N observations gives ln(N / k).
  CoocStats c(1, 3);
  c.AddObservation(0, 1);
  c.AddObservation(2, 2);
  c.AddObservation(2, 2);
  const auto ppmi = ComputePpmi(c);
  ASSERT_EQ(ppmi.size(), 2u);
  EXPECT_NEAR(ppmi[0].value, std::log(3.0), 1e-12);
}

TEST(PpmiTest, MatchesDirectRecomputation) {
  const auto docs = FixtureDocs(20, 5);
  const Vocabulary v = BuildVocabulary(docs, 1, 1.0);
  const auto seqs = ToIndexSequences(docs, v);
  const CoocStats cooc = ComputeCooccurrence(seqs, v.size(), 5);
  const testing::BruteCooc brute = testing::CountPairs(seqs, 5);
  std::map<std::pair<int, int>, double> expected;
  for (const auto& [key, n] : brute.pair) {
    const double pmi = std::log((n / brute.total) / ((brute.single.at(key.first) / brute.total) *
                                                     (brute.single.at(key.second) / brute.total)));
    if (pmi > 0.0) expected[key] = pmi;
  }
  const auto ppmi = ComputePpmi(cooc);
  ASSERT_EQ(ppmi.size(), expected.size());
  for (const auto& e : ppmi) {
    EXPECT_NEAR(e.value, expected.at({e.i, e.j}), 1e-12);
  }
}

TEST(BatchTest, Sizes) {
  auto sizes = [](int d, int b) {
    Corpus c;
    c.docs.resize(d);
    std::vector<size_t> out;
    for (const auto& batch : BatchCorpus(c, b)) out.push_back(batch.doc_indices.size());
    return out;
  };
  EXPECT_EQ(sizes(10, 4), (std::vector<size_t>{4, 4, 2}));
  EXPECT_EQ(sizes(4, 4), (std::vector<size_t>{4}));
  EXPECT_EQ(sizes(7, 2), (std::vector<size_t>{2, 2, 2, 1}));
}

TEST(DatasetDirTest, RoundTripAndDeterminism) {
  TempDir dir("corpus_io");
  const auto docs = FixtureDocs(30, 6);
  PrepareConfig config;
  PrepareReport report;
  const PreparedDataset data = PrepareDataset(docs, config, &report);
  WriteDatasetDir(dir.path() / "a", data, config, report);
  WriteDatasetDir(dir.path() / "b", PrepareDataset(docs, config, &report), config, report);
  for (const char* name : {"vocab.tsv", "corpus.bin", "doc_ids.txt", "cooc.bin", "ppmi.bin",
                           "meta.json"}) {
    EXPECT_EQ(testing::ReadFile(dir.path() / "a" / name), testing::ReadFile(dir.path() / "b" / name))
        << name;
  }
  const PreparedDataset loaded = LoadDatasetDir(dir.path() / "a");
  EXPECT_EQ(loaded.corpus.vocabulary.tokens(), data.corpus.vocabulary.tokens());
  ASSERT_EQ(loaded.corpus.num_docs(), data.corpus.num_docs());
  for (int d = 0; d < data.corpus.num_docs(); ++d) {
    EXPECT_EQ(loaded.corpus.docs[d].terms, data.corpus.docs[d].terms);
    EXPECT_EQ(loaded.corpus.docs[d].id, data.corpus.docs[d].id);
  }
  EXPECT_EQ(loaded.cooc.SortedPairs(), data.cooc.SortedPairs());
  EXPECT_EQ(loaded.cooc.total(), data.cooc.total());
  ASSERT_EQ(loaded.ppmi.size(), data.ppmi.size());
  for (size_t i = 0; i < data.ppmi.size(); ++i) EXPECT_EQ(loaded.ppmi[i].value, data.ppmi[i].value);
}

TEST(DatasetDirTest, CorruptFileIsFormatError) {
  TempDir dir("corpus_bad");
  PrepareReport report;
  WriteDatasetDir(dir.path(), PrepareDataset(FixtureDocs(5, 7), PrepareConfig{}, &report),
                  PrepareConfig{}, report);
  testing::WriteFile(dir.path() / "corpus.bin", "garbage");
  EXPECT_THROW(LoadDatasetDir(dir.path()), FormatError);
}

TEST(CmdPreprocessTest, FixtureMatchesGoldenVocabulary) {
  TempDir dir("preprocess");
  PreprocessRequest request;
  request.input = kData / "fixture_docs.txt";
  request.out_dir = dir.path() / "out";
  const PrepareReport report = CmdPreprocess(request);
  EXPECT_EQ(report.documents_read, 5);
  EXPECT_EQ(testing::ReadFile(dir.path() / "out" / "vocab.tsv"),
            testing::ReadFile(kData / "fixture_docs.vocab.golden"));
  EXPECT_EQ(testing::ReadFile(dir.path() / "out" / "doc_ids.txt"), "0\n1\n2\n3\n4\n");
}

TEST(CmdPreprocessTest, EmptyInputIsEmptyCorpus) {
  TempDir dir("preprocess_empty");
  testing::WriteFile(dir.path() / "empty.txt", "");
  PreprocessRequest request;
  request.input = dir.path() / "empty.txt";
  request.out_dir = dir.path() / "out";
  EXPECT_THROW(CmdPreprocess(request), EmptyCorpus);
}

}  // namespace
}  // namespace autotm
