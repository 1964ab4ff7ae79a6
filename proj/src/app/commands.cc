#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "autotm/app.h"
#include "autotm/distributed.h"
#include "autotm/errors.h"
#include "autotm/metrics.h"
#include "common/binary_io.h"

namespace autotm {

using nlohmann::json;

namespace {

std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

double ParseNum(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

json GenomeJson(const Individual& ind) {
  json j;
  if (const auto* fixed = std::get_if<FixedGenome>(&ind.genome)) {
    j["fixed_genome"] = fixed->slots;
  }
  j["pipeline"] = PipelineToJson(GenomePipeline(ind.genome));
  return j;
}

void CheckCorpusDir(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "meta.json")) {
    throw ConfigError("corpus", "not a prepared corpus directory: " + dir.string());
  }
}

}  // namespace

std::string FormatHistoryCsv(const std::vector<GenerationRecord>& history, bool record_elapsed) {
  std::string out = "generation,best,mean,true_evals,surrogate_evals,elapsed_s\n";
  for (const auto& r : history) {
    out += fmt::format("{},{},{},{},{},{}\n", r.generation, Num(r.best), Num(r.mean),
                       r.true_evals, r.surrogate_evals, record_elapsed ? Num(r.elapsed_s) : "0");
  }
  return out;
}

std::vector<GenerationRecord> ParseHistoryCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("generation,best,mean,true_evals", 0) != 0) {
    throw FormatError("history.csv: missing header");
  }
  std::vector<GenerationRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) {
      throw FormatError("history.csv line " + std::to_string(line_no) + ": expected 6 columns");
    }
    try {
      GenerationRecord r;
      r.generation = std::stoi(cells[0]);
      r.best = ParseNum(cells[1]);
      r.mean = ParseNum(cells[2]);
      r.true_evals = std::stoll(cells[3]);
      r.surrogate_evals = std::stoll(cells[4]);
      r.elapsed_s = ParseNum(cells[5]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw FormatError("history.csv line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

PrepareReport CmdPreprocess(const PreprocessRequest& request) {
  const auto raw = ReadRawDocuments(request.input, request.two_column);
  PrepareReport report;
  report.documents_read = static_cast<int>(raw.size());
  if (raw.empty()) throw EmptyCorpus("input has no documents: " + request.input.string());
  int dropped = 0;
  const auto docs = PreprocessDocuments(raw, request.config.preprocess, &dropped);
  report.dropped_by_preprocessing = dropped;
  const PreparedDataset data = PrepareDataset(docs, request.config, &report);
  WriteDatasetDir(request.out_dir, data, request.config, report);
  spdlog::info("prepared {} documents, {} tokens in vocabulary", data.corpus.num_docs(),
               data.corpus.vocab_size());
  return report;
}

OptimizeSummary CmdOptimize(const RunConfig& config, const std::filesystem::path& out_dir) {
  CheckCorpusDir(config.corpus);
  std::filesystem::create_directories(out_dir);
  io::WriteFileText(out_dir / "run_config.json", config.text);
  auto data = std::make_shared<const PreparedDataset>(LoadDatasetDir(config.corpus));
  const TopicSetup setup{config.num_topics, config.num_background, config.metric};
  ExecuteOptions options;
  options.train.background_smoothing = config.background_smoothing;

  std::unique_ptr<Broker> broker;
  std::unique_ptr<Evaluator> evaluator;
  if (config.broker) {
    BrokerConfig bc;
    bc.liveness_timeout_s = config.broker->liveness_timeout_s;
    bc.max_attempts = config.broker->max_attempts;
    broker = std::make_unique<Broker>(bc);
    const auto [host, port] = ParseHostPort(config.broker->listen);
    broker->Listen(host, port);
    std::string dataset_id = config.broker->dataset_id;
    if (dataset_id.empty()) dataset_id = std::filesystem::absolute(config.corpus).filename();
    broker->RegisterDataset(dataset_id);
    evaluator = std::make_unique<BrokerEvaluator>(*broker, dataset_id, setup,
                                                  config.broker->deadline_s);
  } else {
    evaluator = std::make_unique<LocalEvaluator>(data, setup, config.threads, options);
  }

  RunResult result;
  switch (config.algorithm) {
    case Algorithm::kGa:
      result = RunGa(*evaluator, config.ga, config.representation);
      break;
    case Algorithm::kBo:
      result = RunBo(*evaluator, config.bo, config.representation);
      break;
    case Algorithm::kRandom:
      result = RunRandomSearch(*evaluator, config.random, config.representation);
      break;
  }
  if (broker) broker->Stop();

  io::WriteFileText(out_dir / "history.csv", FormatHistoryCsv(result.history, config.record_elapsed));
  std::string timing = "generation,elapsed_s\n";
  for (const auto& r : result.history) timing += fmt::format("{},{}\n", r.generation, Num(r.elapsed_s));
  io::WriteFileText(out_dir / "timing.csv", timing);
  if (result.surrogate_data) result.surrogate_data->WriteCsv(out_dir / "surrogate_data.csv");

  if (!result.best.fitness) throw Error("NoValidIndividual", "every evaluation failed");
  const Individual& best = result.best;

  // Retrain the winner; fitness is a pure function of (pipeline, seed).
  const MetricFn metric = MetricRegistry::Global().Get(config.metric);
  const ExecutionResult retrained = Execute(
      GenomePipeline(best.genome), data->corpus, config.num_topics, config.num_background,
      best.eval_seed,
      [&](const TopicModel& m) { return metric(m, data->corpus, data->cooc); }, options);
  SaveModel(out_dir / "best_model.bin", retrained.model);
  io::WriteFileText(out_dir / "topwords.txt",
                    FormatTopWords(retrained.model, data->corpus.vocabulary, config.topwords_k));

  json best_json = GenomeJson(best);
  best_json["fitness"] = *best.fitness;
  best_json["eval_seed"] = best.eval_seed;
  best_json["representation"] = RepresentationName(config.representation);
  best_json["algorithm"] = AlgorithmName(config.algorithm);
  io::WriteFileText(out_dir / "best_pipeline.json", best_json.dump(2) + "\n");

  json summary = {{"best_fitness", *best.fitness},
                  {"retrained_fitness", retrained.fitness},
                  {"true_evals", result.total_true_evals},
                  {"generations", result.history.size()},
                  {"early_stopped", result.early_stopped},
                  {"random_fallbacks", result.random_fallbacks}};
  io::WriteFileText(out_dir / "summary.json", summary.dump(2) + "\n");

  OptimizeSummary out;
  out.best_fitness = *best.fitness;
  out.true_evals = result.total_true_evals;
  out.generations = static_cast<int>(result.history.size());
  out.early_stopped = result.early_stopped;
  out.out_dir = out_dir;
  return out;
}

std::string CmdTopwords(const std::filesystem::path& model_path,
                        const std::filesystem::path& corpus_dir, int k) {
  if (k < 1) throw ConfigError("k", "k must be >= 1");
  if (!std::filesystem::exists(model_path)) {
    throw ConfigError("model", "model file not found: " + model_path.string());
  }
  CheckCorpusDir(corpus_dir);
  const TopicModel model = LoadModel(model_path);
  const Vocabulary vocab = LoadVocabulary(corpus_dir);
  if (vocab.size() != static_cast<int>(model.phi.rows())) {
    throw DimensionMismatch("model vocabulary size differs from the corpus vocabulary");
  }
  return FormatTopWords(model, vocab, k);
}

Aggregate MeanConfidence(const std::vector<double>& values, double level) {
  Aggregate a;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return {nan, nan, nan, nan};
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / n;
  if (values.size() < 2) {
    a.stddev = a.ci_low = a.ci_high = nan;
    return a;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
  const double half = t * a.stddev / std::sqrt(n);
  a.ci_low = a.mean - half;
  a.ci_high = a.mean + half;
  return a;
}

void CmdReport(const std::vector<std::filesystem::path>& run_dirs,
               const std::filesystem::path& out_dir) {
  if (run_dirs.empty()) throw ConfigError("runs", "no run directories given");
  std::vector<std::vector<GenerationRecord>> histories;
  for (const auto& dir : run_dirs) {
    if (!std::filesystem::is_directory(dir)) {
      throw ConfigError("runs", "run directory not found: " + dir.string());
    }
    if (!std::filesystem::exists(dir / "history.csv")) {
      throw ConfigError("runs", "no history.csv in " + dir.string());
    }
    histories.push_back(ParseHistoryCsv(io::ReadFileText(dir / "history.csv")));
  }
  std::filesystem::create_directories(out_dir);

  for (size_t i = 0; i < histories.size(); ++i) {
    std::filesystem::path target = out_dir;
    if (histories.size() > 1) {
      target /= fmt::format("run{}_{}", i, std::filesystem::absolute(run_dirs[i]).filename().string());
      std::filesystem::create_directories(target);
    }
    std::string fitness = "generation\tbest\tmean\n";
    std::string evals =
        "generation\ttrue_evals\tsurrogate_evals\tcumulative_true\tcumulative_surrogate\n";
    int64_t cum_true = 0, cum_surrogate = 0;
    for (const auto& r : histories[i]) {
      cum_true += r.true_evals;
      cum_surrogate += r.surrogate_evals;
      fitness += fmt::format("{}\t{}\t{}\n", r.generation, Num(r.best), Num(r.mean));
      evals += fmt::format("{}\t{}\t{}\t{}\t{}\n", r.generation, r.true_evals, r.surrogate_evals,
                           cum_true, cum_surrogate);
    }
    io::WriteFileText(target / "fitness_by_generation.tsv", fitness);
    io::WriteFileText(target / "eval_counts.tsv", evals);
  }

  if (histories.size() > 1) {
    // Runs that stopped early carry their last best value forward.
    size_t rows = 0;
    for (const auto& h : histories) rows = std::max(rows, h.size());
    std::string agg = "generation\truns\tmean_best\tstd_best\tci90_low\tci90_high\n";
    for (size_t g = 0; g < rows; ++g) {
      std::vector<double> values;
      for (const auto& h : histories) {
        if (!h.empty()) values.push_back(h[std::min(g, h.size() - 1)].best);
      }
      const Aggregate a = MeanConfidence(values);
      agg += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", g, values.size(), Num(a.mean), Num(a.stddev),
                         Num(a.ci_low), Num(a.ci_high));
    }
    io::WriteFileText(out_dir / "aggregate.tsv", agg);
  }
}

}  // namespace autotm
