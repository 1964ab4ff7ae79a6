#ifndef AUTOTM_APP_H_
#define AUTOTM_APP_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autotm/corpus.h"
#include "autotm/evolution.h"

namespace autotm {

enum class Algorithm { kGa, kBo, kRandom };

struct BrokerBackend {
  std::string listen = "0.0.0.0:7777";
  std::string dataset_id;  // defaults to the corpus directory name
  double liveness_timeout_s = 30.0;
  int max_attempts = 3;
  double deadline_s = 0.0;
};

// One optimization run. Parsed strictly: unknown keys are errors.
struct RunConfig {
  std::string text;  // the document as given, echoed into the run directory
  std::filesystem::path corpus;
  int num_topics = 10;
  int num_background = 2;
  Representation representation = Representation::kGraph;
  Algorithm algorithm = Algorithm::kGa;
  std::string metric = "default";
  uint64_t seed = 0;
  int threads = 1;
  double background_smoothing = 0.01;
  int topwords_k = 10;
  // Wall times go to timing.csv; history.csv keeps elapsed_s = 0 unless set,
  // so that reruns are byte-identical.
  bool record_elapsed = false;
  GaConfig ga;
  BoConfig bo;
  RandomSearchConfig random;
  std::optional<BrokerBackend> broker;
};

// Relative corpus paths resolve against `base_dir`. Throws ConfigError.
RunConfig ParseRunConfig(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Accepts the PrepareConfig fields (and a nested "preprocess" object).
PrepareConfig ParsePrepareConfig(const nlohmann::json& j);

std::string AlgorithmName(Algorithm a);

// history.csv: generation,best,mean,true_evals,surrogate_evals,elapsed_s.
std::string FormatHistoryCsv(const std::vector<GenerationRecord>& history, bool record_elapsed);
std::vector<GenerationRecord> ParseHistoryCsv(const std::string& text);

struct PreprocessRequest {
  std::filesystem::path input;
  std::filesystem::path out_dir;
  bool two_column = false;
  PrepareConfig config;
};

PrepareReport CmdPreprocess(const PreprocessRequest& request);

struct OptimizeSummary {
  double best_fitness = 0.0;
  int64_t true_evals = 0;
  int generations = 0;
  bool early_stopped = false;
  std::filesystem::path out_dir;
};

// Writes run_config.json, history.csv, timing.csv, best_pipeline.json,
// best_model.bin, topwords.txt, summary.json and, with a surrogate,
// surrogate_data.csv.
OptimizeSummary CmdOptimize(const RunConfig& config, const std::filesystem::path& out_dir);

// Top-k listing of a saved model using the corpus directory's vocabulary.
std::string CmdTopwords(const std::filesystem::path& model_path,
                        const std::filesystem::path& corpus_dir, int k);

// Per-run plot data (fitness_by_generation.tsv, eval_counts.tsv) and, for
// several runs, aggregate.tsv with mean best fitness and a 90% t interval.
// Missing run directories raise ConfigError.
void CmdReport(const std::vector<std::filesystem::path>& run_dirs,
               const std::filesystem::path& out_dir);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Mean with a two-sided t interval at `level`. Intervals are NaN for n < 2.
Aggregate MeanConfidence(const std::vector<double>& values, double level = 0.90);

}  // namespace autotm

#endif  // AUTOTM_APP_H_
