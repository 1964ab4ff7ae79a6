#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "autotm/distributed.h"
#include "autotm/errors.h"

namespace autotm {

using nlohmann::json;

namespace {

SteadyTime Now() { return std::chrono::steady_clock::now(); }

double SecondsBetween(SteadyTime a, SteadyTime b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

Broker::Broker(BrokerConfig config) : config_(config) {
  if (config_.max_attempts < 1) throw ConfigError("max_attempts", "max_attempts must be >= 1");
  if (!(config_.liveness_timeout_s > 0.0)) {
    throw ConfigError("liveness_timeout_s", "liveness timeout must be positive");
  }
}

Broker::~Broker() { Stop(); }

int Broker::Listen(const std::string& host, int port) {
  if (listen_fd_ >= 0) throw ConfigError("listen", "broker is already listening");
  listen_fd_ = ListenTcp(host, port, &port_);
  accept_thread_ = std::thread(&Broker::AcceptLoop, this);
  reap_thread_ = std::thread(&Broker::ReapLoop, this);
  spdlog::info("broker listening on {}:{}", host, port_);
  return port_;
}

void Broker::AcceptLoop() {
  while (!closed_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(mu_);
    if (closed_) {
      ::close(fd);
      break;
    }
    session_fds_.insert(fd);
    sessions_.emplace_back(&Broker::Session, this, fd);
  }
}

void Broker::ReapLoop() {
  std::unique_lock lock(mu_);
  while (!closed_) {
    stop_cv_.wait_for(lock, std::chrono::duration<double>(config_.reap_interval_s));
    if (closed_) break;
    lock.unlock();
    RequeueExpired(Now());
    lock.lock();
  }
}

void Broker::Session(int fd) {
  std::string worker_id;
  try {
    while (true) {
      const std::optional<json> message = ReadFrame(fd);
      if (!message) break;
      const json reply = Handle(*message, worker_id);
      if (reply.is_null()) continue;
      WriteFrame(fd, reply);
      const MessageType type = TypeOf(reply);
      if (type == MessageType::kShutdown) break;
      if (type == MessageType::kAck && !reply.value("accepted", true) && worker_id.empty()) break;
    }
  } catch (const Error& e) {
    if (!closed_) spdlog::warn("session {}: {}", worker_id.empty() ? "?" : worker_id, e.what());
  }
  std::lock_guard lock(mu_);
  if (!worker_id.empty()) {
    auto it = workers_.find(worker_id);
    if (it != workers_.end()) it->second.connected = false;
  }
  session_fds_.erase(fd);
  ::close(fd);
}

json Broker::Handle(const json& message, std::string& worker_id) {
  const MessageType type = TypeOf(message);
  std::lock_guard lock(mu_);
  const SteadyTime now = Now();
  if (type != MessageType::kHello && worker_id.empty()) {
    throw ProtocolError("expected HELLO first, got " + MessageTypeName(type));
  }
  switch (type) {
    case MessageType::kHello: {
      if (message.value("protocol_version", -1) != kProtocolVersion) {
        return AckMessage(false, "protocol version mismatch");
      }
      const std::string id = message.value("worker_id", "");
      if (id.empty()) return AckMessage(false, "empty worker_id");
      WorkerEntry& w = workers_[id];
      w.datasets.clear();
      for (const auto& d : message.value("datasets", json::array())) {
        w.datasets.insert(d.get<std::string>());
        datasets_.insert(d.get<std::string>());
      }
      w.last_seen = now;
      w.connected = true;
      worker_id = id;
      spdlog::info("worker {} joined with {} dataset(s)", id, w.datasets.size());
      return AckMessage(true);
    }
    case MessageType::kTaskRequest: {
      WorkerEntry& w = workers_[worker_id];
      w.last_seen = now;
      if (stopping_) return ShutdownMessage();
      for (auto it = queue_.begin(); it != queue_.end(); ++it) {
        TaskEntry& entry = tasks_.at(it->second);
        if (!w.datasets.count(entry.task.dataset_id)) continue;
        queue_.erase(it);
        entry.state = TaskState::kInFlight;
        ++entry.attempts;
        entry.worker = worker_id;
        entry.assigned_at = now;
        w.current = entry.task.task_id;
        --stats_.queued;
        ++stats_.in_flight;
        return TaskMessage(entry.task);
      }
      return IdleMessage(config_.idle_retry_s);
    }
    case MessageType::kHeartbeat:
      workers_[worker_id].last_seen = now;
      return nullptr;
    case MessageType::kResult: {
      if (!message.contains("result")) throw ProtocolError("RESULT without result");
      TaskResult result = TaskResult::FromJson(message["result"]);
      WorkerEntry& w = workers_[worker_id];
      w.last_seen = now;
      if (w.current == result.task_id) w.current.reset();
      auto it = tasks_.find(result.task_id);
      if (it == tasks_.end()) return AckMessage(false, "unknown task");
      TaskEntry& entry = it->second;
      if (entry.state == TaskState::kDone) return AckMessage(false, "duplicate");
      result.worker_id = worker_id;
      if (!result.ok && entry.attempts < config_.max_attempts) {
        spdlog::warn("task {} failed on {} (attempt {}): {}", result.task_id, worker_id,
                     entry.attempts, result.error);
        if (entry.state == TaskState::kInFlight) EnqueueLocked(result.task_id);
        return AckMessage(true, "requeued");
      }
      if (!result.ok) result.error = "exhausted retries: " + result.error;
      FinishLocked(entry, std::move(result));
      return AckMessage(true);
    }
    case MessageType::kTask:
    case MessageType::kShutdown:
    case MessageType::kAck:
      break;
  }
  throw ProtocolError("unexpected " + MessageTypeName(type) + " from worker");
}

void Broker::EnqueueLocked(uint64_t id) {
  TaskEntry& entry = tasks_.at(id);
  if (entry.state == TaskState::kInFlight) --stats_.in_flight;
  entry.state = TaskState::kQueued;
  entry.worker.clear();
  queue_.insert({entry.age, id});
  ++stats_.queued;
}

void Broker::FinishLocked(TaskEntry& entry, TaskResult result) {
  if (entry.state == TaskState::kInFlight) --stats_.in_flight;
  if (entry.state == TaskState::kQueued && queue_.erase({entry.age, entry.task.task_id}) > 0) {
    --stats_.queued;
  }
  entry.state = TaskState::kDone;
  if (result.ok) {
    ++stats_.completed;
    assignments_[result.worker_id].push_back(result.task_id);
  } else {
    ++stats_.failed;
  }
  entry.result = std::move(result);
  done_cv_.notify_all();
}

void Broker::RegisterDataset(const std::string& dataset_id) {
  std::lock_guard lock(mu_);
  datasets_.insert(dataset_id);
}

BatchHandle Broker::Submit(std::vector<Task> tasks) {
  std::lock_guard lock(mu_);
  BatchHandle handle;
  handle.batch_id = next_batch_++;
  for (Task& task : tasks) {
    task.task_id = next_task_id_++;
    const uint64_t id = task.task_id;
    handle.task_ids.push_back(id);
    TaskEntry& entry = tasks_[id];
    entry.age = next_age_++;
    entry.task = std::move(task);
    ++stats_.enqueued;
    if (!datasets_.count(entry.task.dataset_id)) {
      entry.state = TaskState::kDone;
      TaskResult r;
      r.task_id = id;
      r.error = "UnknownDataset: " + entry.task.dataset_id;
      entry.result = std::move(r);
      ++stats_.failed;
      continue;
    }
    queue_.insert({entry.age, id});
    ++stats_.queued;
  }
  done_cv_.notify_all();
  return handle;
}

std::optional<std::vector<TaskResult>> Broker::Wait(
    const BatchHandle& handle, std::optional<std::chrono::milliseconds> timeout) {
  std::unique_lock lock(mu_);
  auto all_done = [&] {
    for (uint64_t id : handle.task_ids) {
      if (tasks_.at(id).state != TaskState::kDone) return false;
    }
    return true;
  };
  auto ready = [&] { return closed_ || all_done(); };
  if (timeout) {
    if (!done_cv_.wait_for(lock, *timeout, ready)) return std::nullopt;
  } else {
    done_cv_.wait(lock, ready);
  }
  if (!all_done()) return std::nullopt;
  std::vector<TaskResult> out;
  out.reserve(handle.task_ids.size());
  for (uint64_t id : handle.task_ids) out.push_back(*tasks_.at(id).result);
  return out;
}

std::vector<std::optional<TaskResult>> Broker::Partial(const BatchHandle& handle) const {
  std::lock_guard lock(mu_);
  std::vector<std::optional<TaskResult>> out;
  for (uint64_t id : handle.task_ids) out.push_back(tasks_.at(id).result);
  return out;
}

std::vector<uint64_t> Broker::RequeueExpired(SteadyTime now) {
  std::lock_guard lock(mu_);
  std::vector<uint64_t> requeued;
  for (auto& [id, entry] : tasks_) {
    if (entry.state != TaskState::kInFlight) continue;
    auto wit = workers_.find(entry.worker);
    const bool silent = wit == workers_.end() ||
                        SecondsBetween(wit->second.last_seen, now) > config_.liveness_timeout_s;
    const bool late = entry.task.deadline_s > 0.0 &&
                      SecondsBetween(entry.assigned_at, now) > entry.task.deadline_s;
    if (!silent && !late) continue;
    if (wit != workers_.end() && wit->second.current == id) wit->second.current.reset();
    spdlog::warn("task {} expired on {} ({})", id, entry.worker, silent ? "worker silent" : "deadline");
    if (entry.attempts >= config_.max_attempts) {
      TaskResult r;
      r.task_id = id;
      r.worker_id = entry.worker;
      r.error = "exhausted retries";
      FinishLocked(entry, std::move(r));
    } else {
      EnqueueLocked(id);
      requeued.push_back(id);
    }
  }
  return requeued;
}

QueueStats Broker::Stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

int Broker::live_workers() const {
  std::lock_guard lock(mu_);
  int n = 0;
  for (const auto& [id, w] : workers_) n += w.connected ? 1 : 0;
  return n;
}

std::map<std::string, std::vector<uint64_t>> Broker::Assignments() const {
  std::lock_guard lock(mu_);
  return assignments_;
}

void Broker::Stop() {
  if (stop_called_.exchange(true)) return;
  stopping_ = true;
  // Idle workers pick up SHUTDOWN on their next poll.
  const SteadyTime deadline =
      Now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::duration<double>(config_.shutdown_grace_s));
  while (listen_fd_ >= 0 && live_workers() > 0 && Now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  std::vector<std::thread> sessions;
  {
    std::lock_guard lock(mu_);
    closed_ = true;
    for (int fd : session_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  stop_cv_.notify_all();
  done_cv_.notify_all();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (reap_thread_.joinable()) reap_thread_.join();
  {
    std::lock_guard lock(mu_);
    // Sessions accepted before the listener closed.
    for (int fd : session_fds_) ::shutdown(fd, SHUT_RDWR);
    sessions.swap(sessions_);
  }
  for (auto& t : sessions) t.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

}  // namespace autotm
