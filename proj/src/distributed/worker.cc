#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <condition_variable>
#include <stop_token>

#include <spdlog/spdlog.h>

#include "autotm/distributed.h"
#include "autotm/errors.h"

namespace autotm {

using nlohmann::json;

namespace {

std::atomic<int> g_worker_counter{0};

std::string DefaultWorkerId() {
  char host[256] = {0};
  ::gethostname(host, sizeof(host) - 1);
  return std::string(host) + "-" + std::to_string(::getpid()) + "-" +
         std::to_string(g_worker_counter++);
}

double Elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

// ---------------------------------------------------------------------------

DatasetExecutor::DatasetExecutor(std::filesystem::path store, ExecuteOptions options)
    : store_(std::move(store)), options_(std::move(options)) {}

std::vector<std::string> DatasetExecutor::AvailableDatasets() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(store_, ec)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "meta.json")) {
      out.push_back(entry.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

TaskResult DatasetExecutor::operator()(const Task& task) {
  const auto start = std::chrono::steady_clock::now();
  TaskResult result;
  result.task_id = task.task_id;
  try {
    std::shared_ptr<const PreparedDataset> data;
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(task.dataset_id);
      if (it == cache_.end()) {
        const auto dir = store_ / task.dataset_id;
        if (task.dataset_id.empty() || task.dataset_id.find('/') != std::string::npos ||
            !std::filesystem::exists(dir / "meta.json")) {
          throw UnknownDataset("dataset '" + task.dataset_id + "' is not in the store");
        }
        it = cache_.emplace(task.dataset_id,
                            std::make_shared<const PreparedDataset>(LoadDatasetDir(dir)))
                 .first;
        ++loads_;
      }
      data = it->second;
    }
    const EvalOutcome outcome =
        EvaluatePipeline(*data, {task.num_topics, task.num_background, task.metric},
                         task.pipeline, task.eval_seed, options_);
    result.ok = outcome.ok;
    result.fitness = outcome.fitness;
    result.error = outcome.error;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  result.elapsed_s = Elapsed(start);
  return result;
}

std::vector<TaskResult> RunLocalBackend(const std::vector<Task>& tasks,
                                        const TaskExecutor& executor) {
  std::vector<TaskResult> out;
  out.reserve(tasks.size());
  for (const Task& task : tasks) {
    TaskResult r = executor(task);
    r.task_id = task.task_id;
    if (r.worker_id.empty()) r.worker_id = "local";
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

Worker::Worker(WorkerConfig config, TaskExecutor executor)
    : config_(std::move(config)), executor_(std::move(executor)) {
  if (config_.worker_id.empty()) config_.worker_id = DefaultWorkerId();
  if (!(config_.heartbeat_s > 0.0)) throw ConfigError("heartbeat_s", "heartbeat must be positive");
}

Worker::~Worker() { CloseSocket(); }

void Worker::Stop() { stop_ = true; }

void Worker::Kill() {
  killed_ = true;
  stop_ = true;
  const int fd = fd_.load();
  if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
}

void Worker::CloseSocket() {
  std::lock_guard lock(send_mu_);
  const int fd = fd_.exchange(-1);
  if (fd >= 0) ::close(fd);
}

void Worker::Run() {
  double backoff = config_.reconnect_initial_s;
  int failures = 0;
  while (!stop_) {
    int fd = -1;
    try {
      fd = ConnectTcp(config_.host, config_.port);
    } catch (const ProtocolError& e) {
      if (++failures > config_.max_reconnect_attempts) throw;
      spdlog::warn("worker {}: {}; retrying in {:.2f}s", config_.worker_id, e.what(), backoff);
      for (double waited = 0.0; waited < backoff && !stop_; waited += 0.01) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      backoff = std::min(backoff * 2.0, config_.reconnect_max_s);
      continue;
    }
    fd_ = fd;
    if (killed_) {
      CloseSocket();
      return;
    }
    bool finished = false;
    try {
      finished = Session();
    } catch (const ConfigError& e) {
      CloseSocket();
      throw;
    }
    CloseSocket();
    if (finished || stop_) return;
    failures = 0;
    backoff = config_.reconnect_initial_s;
    spdlog::warn("worker {}: connection lost, reconnecting", config_.worker_id);
  }
}

bool Worker::Session() {
  const int fd = fd_.load();
  auto send = [&](const json& message) {
    std::lock_guard lock(send_mu_);
    WriteFrame(fd, message);
  };
  auto receive = [&]() {
    std::optional<json> reply = ReadFrame(fd);
    if (!reply) throw ProtocolError("broker closed the connection");
    return *reply;
  };
  try {
    send(HelloMessage(config_.worker_id, config_.datasets));
    const json hello = receive();
    if (TypeOf(hello) != MessageType::kAck || !hello.value("accepted", false)) {
      throw ConfigError("broker", "broker rejected worker: " + hello.value("detail", ""));
    }
    if (unsent_) {
      send(ResultMessage(*unsent_));
      receive();
      unsent_.reset();
      ++tasks_done_;
    }
    while (!stop_) {
      send(TaskRequestMessage(config_.worker_id));
      const json reply = receive();
      const MessageType type = TypeOf(reply);
      if (type == MessageType::kShutdown) {
        spdlog::info("worker {}: shutdown requested", config_.worker_id);
        return true;
      }
      if (type == MessageType::kAck) {
        const double wait = reply.value("retry_after_s", 0.05);
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        continue;
      }
      if (type != MessageType::kTask) {
        throw ProtocolError("unexpected " + MessageTypeName(type) + " from broker");
      }

      TaskResult result;
      const auto start = std::chrono::steady_clock::now();
      std::optional<Task> task;
      try {
        task = Task::FromJson(reply.at("task"));
      } catch (const std::exception& e) {
        result.task_id = reply.value("/task/task_id"_json_pointer, uint64_t{0});
        result.error = std::string("bad task: ") + e.what();
      }
      if (task) {
        std::mutex hb_mu;
        std::condition_variable_any hb_cv;
        const uint64_t task_id = task->task_id;
        std::jthread heartbeat([&](std::stop_token token) {
          std::unique_lock lock(hb_mu);
          while (!token.stop_requested() && !killed_) {
            hb_cv.wait_for(lock, token, std::chrono::duration<double>(config_.heartbeat_s),
                           [] { return false; });
            if (token.stop_requested() || killed_) break;
            try {
              send(HeartbeatMessage(config_.worker_id, task_id));
            } catch (const Error&) {
              break;
            }
          }
        });
        result = executor_(*task);
        heartbeat.request_stop();
        heartbeat.join();
      }
      if (killed_) return true;
      result.worker_id = config_.worker_id;
      if (result.elapsed_s == 0.0) result.elapsed_s = Elapsed(start);
      unsent_ = result;
      send(ResultMessage(result));
      receive();
      unsent_.reset();
      ++tasks_done_;
    }
    return true;
  } catch (const ProtocolError& e) {
    if (killed_ || stop_) return true;
    spdlog::warn("worker {}: {}", config_.worker_id, e.what());
    return false;
  }
}

// ---------------------------------------------------------------------------

BrokerEvaluator::BrokerEvaluator(Broker& broker, std::string dataset_id, TopicSetup setup,
                                 double deadline_s)
    : broker_(broker), dataset_id_(std::move(dataset_id)), setup_(std::move(setup)),
      deadline_s_(deadline_s) {}

std::vector<EvalOutcome> BrokerEvaluator::EvaluateBatch(const std::vector<EvalRequest>& requests) {
  CountExecutions(requests.size());
  std::vector<Task> tasks;
  tasks.reserve(requests.size());
  for (const auto& r : requests) {
    Task t;
    t.dataset_id = dataset_id_;
    t.pipeline = r.pipeline;
    t.num_topics = setup_.num_topics;
    t.num_background = setup_.num_background;
    t.eval_seed = r.seed;
    t.metric = setup_.metric;
    t.deadline_s = deadline_s_;
    tasks.push_back(std::move(t));
  }
  const BatchHandle handle = broker_.Submit(std::move(tasks));
  const auto results = broker_.Wait(handle);
  if (!results) throw ProtocolError("broker stopped before the batch finished");
  std::vector<EvalOutcome> out;
  out.reserve(results->size());
  for (const TaskResult& r : *results) {
    EvalOutcome o;
    o.ok = r.ok;
    o.fitness = r.fitness;
    o.error = r.error;
    o.seconds = r.elapsed_s;
    o.worker = r.worker_id;
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace autotm
