#include <atomic>
#include <chrono>
#include <thread>

#include <spdlog/spdlog.h>

#include "autotm/evaluator.h"

namespace autotm {

EvalOutcome EvaluatePipeline(const PreparedDataset& data, const TopicSetup& setup,
                             const GraphPipeline& pipeline, uint64_t seed,
                             const ExecuteOptions& options) {
  EvalOutcome outcome;
  const auto start = std::chrono::steady_clock::now();
  try {
    const MetricFn metric = MetricRegistry::Global().Get(setup.metric);
    const ExecutionResult result = Execute(
        pipeline, data.corpus, setup.num_topics, setup.num_background, seed,
        [&](const TopicModel& model) { return metric(model, data.corpus, data.cooc); }, options);
    outcome.ok = true;
    outcome.fitness = result.fitness;
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
  }
  outcome.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return outcome;
}

LocalEvaluator::LocalEvaluator(std::shared_ptr<const PreparedDataset> data, TopicSetup setup,
                               int threads, ExecuteOptions options)
    : data_(std::move(data)), setup_(std::move(setup)), threads_(std::max(1, threads)),
      options_(std::move(options)) {}

std::vector<EvalOutcome> LocalEvaluator::EvaluateBatch(const std::vector<EvalRequest>& requests) {
  CountExecutions(requests.size());
  std::vector<EvalOutcome> outcomes(requests.size());
  auto run = [&](size_t i) {
    outcomes[i] = EvaluatePipeline(*data_, setup_, requests[i].pipeline, requests[i].seed, options_);
    outcomes[i].worker = "local";
    if (!outcomes[i].ok) spdlog::warn("evaluation {} failed: {}", i, outcomes[i].error);
  };
  if (threads_ == 1 || requests.size() < 2) {
    for (size_t i = 0; i < requests.size(); ++i) run(i);
    return outcomes;
  }
  std::atomic<size_t> next{0};
  std::vector<std::jthread> pool;
  const size_t n = std::min(static_cast<size_t>(threads_), requests.size());
  for (size_t t = 0; t < n; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < requests.size(); i = next++) run(i);
    });
  }
  pool.clear();  // joins
  return outcomes;
}

}  // namespace autotm
