// Command-line entry point: preprocess, synth, optimize, topwords, report,
// worker, broker, judge and judge-stub.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "autotm/app.h"
#include "autotm/distributed.h"
#include "autotm/errors.h"
#include "autotm/llm_judge.h"
#include "autotm/synthetic.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

void SetupLogging() {
  auto logger = spdlog::stderr_color_mt("autotm");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("AUTOTM_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

bool IsInputError(const autotm::Error& e) {
  if (dynamic_cast<const autotm::ConfigError*>(&e) != nullptr) return true;
  const std::string& code = e.code();
  return code == "EmptyCorpus" || code == "EmptyVocabulary" || code == "InvalidPipeline" ||
         code == "UnknownToken";
}

nlohmann::json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw autotm::ConfigError("config", "cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw autotm::ConfigError("config", path + " is not valid JSON");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  SetupLogging();
  CLI::App app{"Automatic topic-model pipeline search"};
  app.require_subcommand(1);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Build a corpus directory from raw text");
  autotm::PreprocessRequest pre_req;
  std::string pre_input, pre_out, pre_config;
  int64_t pre_min_df = -1;
  double pre_max_df = -1.0;
  int pre_window = -1;
  pre->add_option("--input", pre_input, "One document per line (or id<TAB>text)")->required();
  pre->add_option("--out", pre_out, "Output corpus directory")->required();
  pre->add_flag("--two-column", pre_req.two_column, "Input lines are id<TAB>text");
  pre->add_option("--config", pre_config, "JSON file with preprocessing settings");
  pre->add_option("--min-df", pre_min_df, "Minimum document frequency");
  pre->add_option("--max-df-ratio", pre_max_df, "Maximum document frequency ratio");
  pre->add_option("--window", pre_window, "Co-occurrence window size");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a planted-topic corpus directory");
  autotm::PlantedConfig planted;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output corpus directory")->required();
  synth->add_option("--docs", planted.num_docs, "Number of documents");
  synth->add_option("--topics", planted.num_topics, "Number of planted topics");
  synth->add_option("--doc-length", planted.doc_length, "Tokens per document");
  synth->add_option("--seed", planted.seed, "Generator seed");

  // optimize
  auto* opt = app.add_subcommand("optimize", "Search for the best training pipeline");
  std::string opt_config, opt_out;
  opt->add_option("--config", opt_config, "Run config (JSON)")->required();
  opt->add_option("--out", opt_out, "Run directory")->required();

  // topwords
  auto* top = app.add_subcommand("topwords", "Print the top tokens of every topic");
  std::string top_model, top_corpus;
  int top_k = 10;
  top->add_option("--model", top_model, "Saved model file")->required();
  top->add_option("--corpus", top_corpus, "Corpus directory (for the vocabulary)")->required();
  top->add_option("-k,--k", top_k, "Tokens per topic");

  // report
  auto* rep = app.add_subcommand("report", "Emit plot-ready tables for one or more runs");
  std::vector<std::string> rep_runs;
  std::string rep_out;
  rep->add_option("runs", rep_runs, "Run directories")->required();
  rep->add_option("--out", rep_out, "Output directory (default: <run>/report)");

  // worker
  auto* work = app.add_subcommand("worker", "Evaluate tasks for a broker");
  std::string work_broker, work_store;
  autotm::WorkerConfig worker_cfg;
  work->add_option("--broker", work_broker, "Broker host:port")->required();
  work->add_option("--store", work_store, "Directory of prepared corpus directories")->required();
  work->add_option("--id", worker_cfg.worker_id, "Worker id");
  work->add_option("--heartbeat", worker_cfg.heartbeat_s, "Heartbeat interval in seconds");

  // broker
  auto* brk = app.add_subcommand("broker", "Run an optimization served to remote workers");
  std::string brk_listen, brk_config, brk_out;
  brk->add_option("--listen", brk_listen, "host:port to listen on")->required();
  brk->add_option("--config", brk_config, "Run config (JSON)")->required();
  brk->add_option("--out", brk_out, "Run directory")->required();

  // judge
  auto* judge = app.add_subcommand("judge", "Score a word list with the LLM judge (1-4)");
  autotm::LlmJudgeConfig judge_cfg;
  std::vector<std::string> judge_words;
  std::string judge_cache;
  judge->add_option("words", judge_words, "Topic words")->required();
  judge->add_option("--endpoint", judge_cfg.endpoint, "Chat-completion URL");
  judge->add_option("--model", judge_cfg.model, "Model name");
  judge->add_option("--retries", judge_cfg.max_retries, "Maximum retries");
  judge->add_option("--cache", judge_cache, "Score cache file");

  // judge-stub
  auto* stub = app.add_subcommand("judge-stub", "Serve scripted chat-completion replies");
  std::string stub_listen = "127.0.0.1:8089";
  std::vector<std::string> stub_replies{"4"};
  stub->add_option("--listen", stub_listen, "host:port");
  stub->add_option("--reply", stub_replies, "Replies in order; the last one repeats");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*pre) {
      if (!pre_config.empty()) pre_req.config = autotm::ParsePrepareConfig(ReadJsonFile(pre_config));
      if (pre_min_df >= 0) pre_req.config.min_df = pre_min_df;
      if (pre_max_df >= 0) pre_req.config.max_df_ratio = pre_max_df;
      if (pre_window >= 0) pre_req.config.window_size = pre_window;
      pre_req.input = pre_input;
      pre_req.out_dir = pre_out;
      autotm::CmdPreprocess(pre_req);
    } else if (*synth) {
      const autotm::PlantedCorpus corpus = autotm::GeneratePlanted(planted);
      autotm::PrepareConfig config;
      autotm::PrepareReport report;
      report.documents_read = static_cast<int>(corpus.documents.size());
      const auto data = autotm::PrepareDataset(corpus.documents, config, &report);
      autotm::WriteDatasetDir(synth_out, data, config, report);
    } else if (*opt) {
      const auto config = autotm::LoadRunConfig(opt_config);
      const auto summary = autotm::CmdOptimize(config, opt_out);
      std::cout << "best fitness " << summary.best_fitness << " after " << summary.true_evals
                << " true evaluations\n";
    } else if (*top) {
      std::cout << autotm::CmdTopwords(top_model, top_corpus, top_k);
    } else if (*rep) {
      std::vector<std::filesystem::path> runs(rep_runs.begin(), rep_runs.end());
      std::filesystem::path out = rep_out;
      if (out.empty()) out = runs.size() == 1 ? runs[0] / "report" : std::filesystem::path("report");
      autotm::CmdReport(runs, out);
    } else if (*work) {
      const auto [host, port] = autotm::ParseHostPort(work_broker);
      worker_cfg.host = host;
      worker_cfg.port = port;
      auto executor = std::make_shared<autotm::DatasetExecutor>(work_store);
      worker_cfg.datasets = executor->AvailableDatasets();
      if (worker_cfg.datasets.empty()) {
        spdlog::warn("no prepared corpus directories under {}", work_store);
      }
      autotm::Worker worker(worker_cfg, [executor](const autotm::Task& t) { return (*executor)(t); });
      worker.Run();
    } else if (*brk) {
      auto config = autotm::LoadRunConfig(brk_config);
      if (!config.broker) config.broker.emplace();
      config.broker->listen = brk_listen;
      autotm::ParseHostPort(brk_listen);
      const auto summary = autotm::CmdOptimize(config, brk_out);
      std::cout << "best fitness " << summary.best_fitness << " after " << summary.true_evals
                << " true evaluations\n";
    } else if (*judge) {
      if (const std::string problem = autotm::CheckJudgeConfig(judge_cfg); !problem.empty()) {
        throw autotm::ConfigError("judge", problem);
      }
      std::optional<autotm::JudgeCache> cache;
      if (!judge_cache.empty()) cache.emplace(judge_cache);
      if (cache) {
        if (auto hit = cache->Lookup(judge_cfg, judge_words)) {
          std::cout << *hit << "\n";
          return kExitOk;
        }
      }
      autotm::HttpChatClient client(judge_cfg);
      const auto result = autotm::LlmScoreTopic(judge_words, judge_cfg, client);
      if (cache) cache->Store(judge_cfg, judge_words, result.score);
      std::cout << result.score << "\n";
    } else if (*stub) {
      const auto [host, port] = autotm::ParseHostPort(stub_listen);
      autotm::StubJudgeServer server(stub_replies);
      spdlog::info("stub judge on {}:{}", host, port);
      server.Listen(host, port);
    }
  } catch (const autotm::Error& e) {
    spdlog::error("{}: {}", e.code(), e.what());
    return IsInputError(e) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
