#ifndef AUTOTM_PROTOCOL_H_
#define AUTOTM_PROTOCOL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autotm/pipeline.h"

namespace autotm {

// Wire format: every message is one frame, a 4-byte big-endian payload length
// followed by a UTF-8 JSON object with a "type" member. See PROTOCOL.md.
constexpr int kProtocolVersion = 1;
constexpr uint32_t kMaxFrameBytes = 64u << 20;

enum class MessageType { kHello, kTaskRequest, kTask, kResult, kHeartbeat, kShutdown, kAck };

std::string MessageTypeName(MessageType type);
// Throws ProtocolError for unknown names.
MessageType ParseMessageType(const std::string& name);
// Type of a decoded message; throws ProtocolError when absent or unknown.
MessageType TypeOf(const nlohmann::json& message);

std::string EncodeFrame(const nlohmann::json& message);

// Incremental decoder for a byte stream of frames.
class FrameDecoder {
 public:
  void Feed(std::string_view bytes);
  // Next complete message, if any. Throws ProtocolError on oversized frames or
  // payloads that are not JSON objects.
  std::optional<nlohmann::json> Next();
  size_t buffered() const { return buffer_.size(); }

 private:
  std::string buffer_;
};

struct Task {
  uint64_t task_id = 0;
  std::string dataset_id;
  GraphPipeline pipeline;
  int num_topics = 10;
  int num_background = 2;
  uint64_t eval_seed = 0;
  std::string metric = "default";
  double deadline_s = 0.0;  // 0 disables the deadline

  nlohmann::json ToJson() const;
  static Task FromJson(const nlohmann::json& j);
};

struct TaskResult {
  uint64_t task_id = 0;
  bool ok = false;
  double fitness = 0.0;
  std::string error;
  std::string worker_id;
  double elapsed_s = 0.0;

  nlohmann::json ToJson() const;
  static TaskResult FromJson(const nlohmann::json& j);
};

nlohmann::json HelloMessage(const std::string& worker_id, const std::vector<std::string>& datasets);
nlohmann::json TaskRequestMessage(const std::string& worker_id);
nlohmann::json TaskMessage(const Task& task);
nlohmann::json ResultMessage(const TaskResult& result);
nlohmann::json HeartbeatMessage(const std::string& worker_id, uint64_t task_id);
nlohmann::json ShutdownMessage();
nlohmann::json AckMessage(bool accepted, const std::string& detail = {});
nlohmann::json IdleMessage(double retry_after_s);

// Blocking socket helpers. ReadFrame returns nullopt on orderly EOF before a
// frame starts; other failures throw ProtocolError.
void WriteFrame(int fd, const nlohmann::json& message);
std::optional<nlohmann::json> ReadFrame(int fd);

// "host:port" -> (host, port). Throws ConfigError.
std::pair<std::string, int> ParseHostPort(const std::string& address);
// Connected TCP socket or throws ProtocolError.
int ConnectTcp(const std::string& host, int port);
// Listening socket; `port` 0 picks a free port, reported via `bound_port`.
int ListenTcp(const std::string& host, int port, int* bound_port);

}  // namespace autotm

#endif  // AUTOTM_PROTOCOL_H_
