#ifndef AUTOTM_EVALUATOR_H_
#define AUTOTM_EVALUATOR_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "autotm/corpus.h"
#include "autotm/metrics.h"
#include "autotm/pipeline.h"

namespace autotm {

struct EvalRequest {
  GraphPipeline pipeline;
  uint64_t seed = 0;
};

struct EvalOutcome {
  bool ok = false;
  double fitness = 0.0;
  std::string error;
  double seconds = 0.0;
  std::string worker;
};

// Batch fitness evaluation. Outcomes are returned in request order and depend
// only on (pipeline, seed), never on the schedule.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::vector<EvalOutcome> EvaluateBatch(const std::vector<EvalRequest>& requests) = 0;
  // Number of pipeline executions requested so far.
  int64_t executions() const { return executions_; }

 protected:
  void CountExecutions(size_t n) { executions_ += static_cast<int64_t>(n); }

 private:
  int64_t executions_ = 0;
};

struct TopicSetup {
  int num_topics = 10;
  int num_background = 2;
  std::string metric = "default";
};

// Trains and scores one pipeline against a prepared dataset.
EvalOutcome EvaluatePipeline(const PreparedDataset& data, const TopicSetup& setup,
                             const GraphPipeline& pipeline, uint64_t seed,
                             const ExecuteOptions& options = {});

// In-process evaluator; `threads` > 1 evaluates a batch on a worker pool.
class LocalEvaluator : public Evaluator {
 public:
  LocalEvaluator(std::shared_ptr<const PreparedDataset> data, TopicSetup setup,
                 int threads = 1, ExecuteOptions options = {});
  std::vector<EvalOutcome> EvaluateBatch(const std::vector<EvalRequest>& requests) override;

 private:
  std::shared_ptr<const PreparedDataset> data_;
  TopicSetup setup_;
  int threads_;
  ExecuteOptions options_;
};

}  // namespace autotm

#endif  // AUTOTM_EVALUATOR_H_
