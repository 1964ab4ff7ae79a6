#ifndef AUTOTM_DISTRIBUTED_H_
#define AUTOTM_DISTRIBUTED_H_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "autotm/evaluator.h"
#include "autotm/protocol.h"

namespace autotm {

using SteadyTime = std::chrono::steady_clock::time_point;

// Runs one task on a worker. Must not throw; failures become failed results.
using TaskExecutor = std::function<TaskResult(const Task&)>;

// Executes tasks against prepared dataset directories below `store`
// (`store/<dataset_id>/`), loading each dataset once.
class DatasetExecutor {
 public:
  explicit DatasetExecutor(std::filesystem::path store, ExecuteOptions options = {});
  TaskResult operator()(const Task& task);
  // Subdirectories of the store holding a meta.json.
  std::vector<std::string> AvailableDatasets() const;
  int loads() const { return loads_; }

 private:
  std::filesystem::path store_;
  ExecuteOptions options_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const PreparedDataset>> cache_;
  int loads_ = 0;
};

// Sequential in-process execution of tasks in submission order.
std::vector<TaskResult> RunLocalBackend(const std::vector<Task>& tasks,
                                        const TaskExecutor& executor);

struct BrokerConfig {
  double liveness_timeout_s = 30.0;
  int max_attempts = 3;
  double idle_retry_s = 0.05;  // hint sent to idle workers
  double reap_interval_s = 0.25;
  double shutdown_grace_s = 2.0;
};

struct BatchHandle {
  uint64_t batch_id = 0;
  std::vector<uint64_t> task_ids;
};

struct QueueStats {
  int64_t enqueued = 0;
  int64_t completed = 0;
  int64_t failed = 0;
  int64_t in_flight = 0;
  int64_t queued = 0;
};

// Task queue with worker sessions over TCP. All state changes happen under a
// single mutex, so there is one logical writer.
class Broker {
 public:
  explicit Broker(BrokerConfig config = {});
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  // Returns the bound port.
  int Listen(const std::string& host, int port);
  // Asks workers to shut down, then closes every connection.
  void Stop();

  void RegisterDataset(const std::string& dataset_id);
  // Task ids are assigned here. Tasks for unregistered datasets fail at once
  // with UnknownDataset.
  BatchHandle Submit(std::vector<Task> tasks);
  // Results in submission order once every task is terminal. Returns nullopt
  // on timeout.
  std::optional<std::vector<TaskResult>> Wait(
      const BatchHandle& handle,
      std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  std::vector<std::optional<TaskResult>> Partial(const BatchHandle& handle) const;

  // Requeues in-flight tasks of workers silent for longer than the liveness
  // timeout and tasks past their deadline. Returns the requeued ids; tasks out
  // of attempts fail with "exhausted retries" instead.
  std::vector<uint64_t> RequeueExpired(SteadyTime now);

  QueueStats Stats() const;
  int live_workers() const;
  // Task ids executed by each worker (accepted results only).
  std::map<std::string, std::vector<uint64_t>> Assignments() const;
  int port() const { return port_; }

 private:
  enum class TaskState { kQueued, kInFlight, kDone };
  struct TaskEntry {
    Task task;
    TaskState state = TaskState::kQueued;
    int attempts = 0;
    uint64_t age = 0;  // submission order; requeued tasks keep it
    std::string worker;
    SteadyTime assigned_at;
    std::optional<TaskResult> result;
  };
  struct WorkerEntry {
    std::set<std::string> datasets;
    std::optional<uint64_t> current;
    SteadyTime last_seen;
    bool connected = false;
  };

  void AcceptLoop();
  void ReapLoop();
  void Session(int fd);
  nlohmann::json Handle(const nlohmann::json& message, std::string& worker_id);
  void FinishLocked(TaskEntry& entry, TaskResult result);
  void EnqueueLocked(uint64_t id);

  BrokerConfig config_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> closed_{false};
  std::atomic<bool> stop_called_{false};
  std::thread accept_thread_;
  std::thread reap_thread_;

  mutable std::mutex mu_;
  std::condition_variable done_cv_;
  std::condition_variable stop_cv_;
  std::map<uint64_t, TaskEntry> tasks_;
  std::set<std::pair<uint64_t, uint64_t>> queue_;  // (age, task id)
  std::map<std::string, WorkerEntry> workers_;
  std::set<std::string> datasets_;
  std::map<std::string, std::vector<uint64_t>> assignments_;
  std::vector<std::thread> sessions_;
  std::set<int> session_fds_;
  uint64_t next_task_id_ = 1;
  uint64_t next_age_ = 0;
  uint64_t next_batch_ = 1;
  QueueStats stats_;
};

struct WorkerConfig {
  std::string host = "127.0.0.1";
  int port = 0;
  std::string worker_id;  // generated when empty
  std::vector<std::string> datasets;
  double heartbeat_s = 5.0;
  double reconnect_initial_s = 0.1;
  double reconnect_max_s = 5.0;
  int max_reconnect_attempts = 10;
};

// Single-task-at-a-time worker. Run() blocks until SHUTDOWN, Stop(), Kill() or
// reconnect attempts run out (then throws ProtocolError).
class Worker {
 public:
  Worker(WorkerConfig config, TaskExecutor executor);
  ~Worker();
  void Run();
  // Finishes the current task, then leaves.
  void Stop();
  // Simulated crash: drops the connection at once and never reports the
  // current task.
  void Kill();
  const std::string& id() const { return config_.worker_id; }
  int tasks_done() const { return tasks_done_; }

 private:
  bool Session();  // false when the connection was lost
  void CloseSocket();

  WorkerConfig config_;
  TaskExecutor executor_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> killed_{false};
  std::atomic<int> tasks_done_{0};
  std::mutex send_mu_;
  std::atomic<int> fd_{-1};
  std::optional<TaskResult> unsent_;
};

// Evaluator that ships every request to a broker as a task.
class BrokerEvaluator : public Evaluator {
 public:
  BrokerEvaluator(Broker& broker, std::string dataset_id, TopicSetup setup,
                  double deadline_s = 0.0);
  std::vector<EvalOutcome> EvaluateBatch(const std::vector<EvalRequest>& requests) override;

 private:
  Broker& broker_;
  std::string dataset_id_;
  TopicSetup setup_;
  double deadline_s_;
};

}  // namespace autotm

#endif  // AUTOTM_DISTRIBUTED_H_
