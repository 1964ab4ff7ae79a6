#ifndef AUTOTM_TESTS_TEST_SUPPORT_H_
#define AUTOTM_TESTS_TEST_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "autotm/corpus.h"
#include "autotm/evaluator.h"
#include "autotm/synthetic.h"

namespace autotm::testing {

// Self-deleting scratch directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("autotm_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline PlantedConfig SmallPlanted(uint64_t seed) {
  PlantedConfig c;
  c.seed = seed;
  return c;
}

inline std::shared_ptr<const PreparedDataset> PlantedDataset(const PlantedConfig& config) {
  const PlantedCorpus planted = GeneratePlanted(config);
  PrepareConfig prep;
  PrepareReport report;
  return std::make_shared<const PreparedDataset>(
      PrepareDataset(planted.documents, prep, &report));
}

// Windowed pair counting straight from the definition: every ordered position
// pair (i, j) with 0 < j - i <= window inside one document.
struct BruteCooc {
  double total = 0;
  std::map<int, double> single;
  std::map<std::pair<int, int>, double> pair;
};

inline BruteCooc CountPairs(const std::vector<std::vector<int>>& docs, int window) {
  BruteCooc c;
  for (const auto& doc : docs) {
    const int n = static_cast<int>(doc.size());
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n && j - i <= window; ++j) {
        c.total += 1;
        const int a = std::min(doc[i], doc[j]);
        const int b = std::max(doc[i], doc[j]);
        c.pair[{a, b}] += 1;
        c.single[doc[i]] += 1;
        if (doc[j] != doc[i]) c.single[doc[j]] += 1;
      }
    }
  }
  return c;
}

inline double BruteNpmi(const BruteCooc& c, int w1, int w2, double eps) {
  const int a = std::min(w1, w2);
  const int b = std::max(w1, w2);
  auto find = [](const auto& m, const auto& key) {
    const auto it = m.find(key);
    return it == m.end() ? 0.0 : it->second;
  };
  const double n12 = find(c.pair, std::make_pair(a, b));
  if (n12 == 0) return -1.0;
  const double p1 = find(c.single, w1) / c.total + eps;
  const double p2 = find(c.single, w2) / c.total + eps;
  const double p12 = n12 / c.total + eps;
  return std::log(p12 / (p1 * p2)) / -std::log(p12);
}

// Cheap deterministic stand-in for pipeline training: rewards stages near 20
// passes and decorrelation strength. Pipelines that fail validation fail.
class ToyEvaluator : public Evaluator {
 public:
  static double Score(const GraphPipeline& p) {
    if (!Validate(p).empty()) return -1e9;
    double s = 0.0;
    for (const Stage& st : p.stages) {
      s -= std::abs(st.n_iters - 20) / 50.0;
      if (st.kind == RegKind::kDecorrelation) s += std::log10(1.0 + st.a) / 10.0;
    }
    return s / p.size();
  }

  std::vector<EvalOutcome> EvaluateBatch(const std::vector<EvalRequest>& requests) override {
    CountExecutions(requests.size());
    std::vector<EvalOutcome> out;
    for (const auto& r : requests) {
      seeds.push_back(r.seed);
      EvalOutcome o;
      o.ok = Validate(r.pipeline).empty();
      if (o.ok) {
        o.fitness = Score(r.pipeline);
      } else {
        o.error = "invalid pipeline";
      }
      out.push_back(o);
    }
    return out;
  }

  std::vector<uint64_t> seeds;
};

}  // namespace autotm::testing

#endif  // AUTOTM_TESTS_TEST_SUPPORT_H_
