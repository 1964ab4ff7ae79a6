#include <fstream>
#include <sstream>

#include <json.hpp>

#include "autotm/corpus.h"
#include "autotm/errors.h"
#include "common/binary_io.h"

namespace autotm {
namespace {

constexpr uint32_t kFormatVersion = 1;

void PutMagic(io::ByteWriter& w, const char* magic) {
  w.PutBytes(std::string(magic, 4));
  w.PutU32(kFormatVersion);
}

void CheckMagic(io::ByteReader& r, const char* magic, const std::string& file) {
  if (r.GetBytes(4) != std::string(magic, 4)) throw FormatError(file + ": bad magic");
  if (r.GetU32() != kFormatVersion) throw FormatError(file + ": unsupported version");
}

nlohmann::json ConfigToJson(const PrepareConfig& c) {
  const auto& p = c.preprocess;
  return {
      {"preprocess",
       {{"strip_html", p.strip_html},
        {"lowercase", p.lowercase},
        {"remove_digits", p.remove_digits},
        {"remove_stopwords", p.remove_stopwords},
        {"stem", p.stem},
        {"min_token_len", p.min_token_len},
        {"extra_stopwords", p.extra_stopwords},
        {"replacements", p.replacements},
        {"custom_normalizer", static_cast<bool>(p.normalizer)}}},
      {"min_df", c.min_df},
      {"max_df_ratio", c.max_df_ratio},
      {"window_size", c.window_size},
      {"ppmi_epsilon", c.ppmi_epsilon},
      {"batch_size", c.batch_size},
  };
}

}  // namespace

std::vector<std::pair<std::string, std::string>> ReadRawDocuments(
    const std::filesystem::path& path, bool two_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("input", "cannot open input file " + path.string());
  std::vector<std::pair<std::string, std::string>> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const int current = line_no++;
    if (two_column) {
      const size_t tab = line.find('\t');
      if (tab == std::string::npos) {
        if (line.empty()) continue;
        throw FormatError("line " + std::to_string(current + 1) + ": expected id<TAB>text");
      }
      docs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    } else {
      docs.emplace_back(std::to_string(current), line);
    }
  }
  return docs;
}

std::vector<Document> PreprocessDocuments(
    const std::vector<std::pair<std::string, std::string>>& raw,
    const PreprocessConfig& config, int* dropped) {
  std::vector<Document> docs;
  int empty = 0;
  for (const auto& [id, text] : raw) {
    auto tokens = PreprocessText(text, config);
    if (tokens.empty()) {
      ++empty;
      continue;
    }
    docs.push_back({id, std::move(tokens)});
  }
  if (dropped != nullptr) *dropped = empty;
  return docs;
}

void WriteDatasetDir(const std::filesystem::path& dir, const PreparedDataset& data,
                     const PrepareConfig& config, const PrepareReport& report) {
  std::filesystem::create_directories(dir);
  const Corpus& corpus = data.corpus;
  const Vocabulary& vocab = corpus.vocabulary;

  std::ostringstream vocab_tsv;
  for (int i = 0; i < vocab.size(); ++i) {
    vocab_tsv << vocab.token(i) << '\t' << i << '\t' << vocab.df(i) << '\n';
  }
  io::WriteFileText(dir / "vocab.tsv", vocab_tsv.str());

  std::ostringstream ids;
  for (const auto& doc : corpus.docs) ids << doc.id << '\n';
  io::WriteFileText(dir / "doc_ids.txt", ids.str());

  io::ByteWriter cw;
  PutMagic(cw, "ATMC");
  cw.PutU64(static_cast<uint64_t>(corpus.num_docs()));
  cw.PutU64(static_cast<uint64_t>(vocab.size()));
  for (const auto& doc : corpus.docs) {
    cw.PutVarint(doc.terms.size());
    for (const auto& term : doc.terms) {
      cw.PutVarint(static_cast<uint64_t>(term.index));
      cw.PutVarint(static_cast<uint64_t>(term.count));
    }
  }
  io::WriteFileBytes(dir / "corpus.bin", cw.bytes());

  io::ByteWriter ow;
  PutMagic(ow, "ATMO");
  ow.PutU32(static_cast<uint32_t>(data.cooc.window_size()));
  ow.PutU64(static_cast<uint64_t>(data.cooc.vocab_size()));
  ow.PutU64(static_cast<uint64_t>(data.cooc.total()));
  for (int w = 0; w < data.cooc.vocab_size(); ++w) {
    ow.PutU64(static_cast<uint64_t>(data.cooc.single(w)));
  }
  const auto pairs = data.cooc.SortedPairs();
  ow.PutU64(pairs.size());
  for (const auto& [i, j, count] : pairs) {
    ow.PutU32(static_cast<uint32_t>(i));
    ow.PutU32(static_cast<uint32_t>(j));
    ow.PutU64(static_cast<uint64_t>(count));
  }
  io::WriteFileBytes(dir / "cooc.bin", ow.bytes());

  io::ByteWriter pw;
  PutMagic(pw, "ATMP");
  pw.PutU64(data.ppmi.size());
  for (const auto& e : data.ppmi) {
    pw.PutU32(static_cast<uint32_t>(e.i));
    pw.PutU32(static_cast<uint32_t>(e.j));
    pw.PutF64(e.value);
  }
  io::WriteFileBytes(dir / "ppmi.bin", pw.bytes());

  const auto batches = BatchCorpus(corpus, config.batch_size);
  nlohmann::json meta = {
      {"format_version", kFormatVersion},
      {"config", ConfigToJson(config)},
      {"report",
       {{"documents_read", report.documents_read},
        {"dropped_by_preprocessing", report.dropped_by_preprocessing},
        {"dropped_by_vocabulary", report.dropped_by_vocabulary}}},
      {"stats",
       {{"num_docs", corpus.num_docs()},
        {"vocab_size", vocab.size()},
        {"total_tokens", corpus.total_tokens},
        {"cooc_total", data.cooc.total()},
        {"cooc_pairs", pairs.size()},
        {"ppmi_entries", data.ppmi.size()},
        {"num_batches", batches.size()}}},
  };
  io::WriteFileText(dir / "meta.json", meta.dump(2) + "\n");
}

Vocabulary LoadVocabulary(const std::filesystem::path& dir) {
  std::vector<std::string> tokens;
  std::vector<int64_t> df;
  std::istringstream in(io::ReadFileText(dir / "vocab.tsv"));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string token;
    int index = 0;
    int64_t count = 0;
    if (!std::getline(fields, token, '\t') || !(fields >> index >> count) ||
        index != static_cast<int>(tokens.size())) {
      throw FormatError("vocab.tsv: malformed line '" + line + "'");
    }
    tokens.push_back(token);
    df.push_back(count);
  }
  return Vocabulary(std::move(tokens), std::move(df));
}

PreparedDataset LoadDatasetDir(const std::filesystem::path& dir) {
  PreparedDataset data;
  data.corpus.vocabulary = LoadVocabulary(dir);
  const int vocab_size = data.corpus.vocabulary.size();

  std::vector<std::string> ids;
  {
    std::istringstream in(io::ReadFileText(dir / "doc_ids.txt"));
    std::string line;
    while (std::getline(in, line)) ids.push_back(line);
  }

  io::ByteReader cr(io::ReadFileBytes(dir / "corpus.bin"));
  CheckMagic(cr, "ATMC", "corpus.bin");
  const uint64_t num_docs = cr.GetU64();
  if (cr.GetU64() != static_cast<uint64_t>(vocab_size)) {
    throw FormatError("corpus.bin: vocabulary size disagrees with vocab.tsv");
  }
  if (ids.size() != num_docs) throw FormatError("doc_ids.txt: wrong number of ids");
  data.corpus.docs.reserve(num_docs);
  for (uint64_t d = 0; d < num_docs; ++d) {
    SparseDoc doc{ids[d], {}};
    const uint64_t n = cr.GetVarint();
    for (uint64_t k = 0; k < n; ++k) {
      const auto index = static_cast<int>(cr.GetVarint());
      const auto count = static_cast<int64_t>(cr.GetVarint());
      if (index >= vocab_size) throw FormatError("corpus.bin: token index out of range");
      doc.terms.push_back({index, count});
      data.corpus.total_tokens += count;
    }
    data.corpus.docs.push_back(std::move(doc));
  }
  if (!cr.done()) throw FormatError("corpus.bin: trailing bytes");

  io::ByteReader orr(io::ReadFileBytes(dir / "cooc.bin"));
  CheckMagic(orr, "ATMO", "cooc.bin");
  const auto window = static_cast<int>(orr.GetU32());
  const auto cooc_vocab = static_cast<int>(orr.GetU64());
  const auto total = static_cast<int64_t>(orr.GetU64());
  std::vector<int64_t> single(static_cast<size_t>(cooc_vocab));
  for (auto& s : single) s = static_cast<int64_t>(orr.GetU64());
  const uint64_t npairs = orr.GetU64();
  std::vector<std::tuple<int, int, int64_t>> pairs;
  pairs.reserve(npairs);
  for (uint64_t k = 0; k < npairs; ++k) {
    const auto i = static_cast<int>(orr.GetU32());
    const auto j = static_cast<int>(orr.GetU32());
    pairs.emplace_back(i, j, static_cast<int64_t>(orr.GetU64()));
  }
  if (!orr.done()) throw FormatError("cooc.bin: trailing bytes");
  data.cooc = CoocStats(window, cooc_vocab);
  data.cooc.SetRaw(total, std::move(single), pairs);

  io::ByteReader pr(io::ReadFileBytes(dir / "ppmi.bin"));
  CheckMagic(pr, "ATMP", "ppmi.bin");
  const uint64_t nppmi = pr.GetU64();
  data.ppmi.reserve(nppmi);
  for (uint64_t k = 0; k < nppmi; ++k) {
    const auto i = static_cast<int>(pr.GetU32());
    const auto j = static_cast<int>(pr.GetU32());
    data.ppmi.push_back({i, j, pr.GetF64()});
  }
  if (!pr.done()) throw FormatError("ppmi.bin: trailing bytes");
  return data;
}

}  // namespace autotm
