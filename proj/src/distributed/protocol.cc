#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>

#include "autotm/errors.h"
#include "autotm/protocol.h"

namespace autotm {

using nlohmann::json;

namespace {

const std::pair<MessageType, const char*> kTypeNames[] = {
    {MessageType::kHello, "HELLO"},         {MessageType::kTaskRequest, "TASK_REQUEST"},
    {MessageType::kTask, "TASK"},           {MessageType::kResult, "RESULT"},
    {MessageType::kHeartbeat, "HEARTBEAT"}, {MessageType::kShutdown, "SHUTDOWN"},
    {MessageType::kAck, "ACK"},
};

uint32_t ReadBigEndian(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return (uint32_t{u[0]} << 24) | (uint32_t{u[1]} << 16) | (uint32_t{u[2]} << 8) | u[3];
}

template <typename T>
T Field(const json& j, const char* name) {
  if (!j.contains(name)) throw ProtocolError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("bad field '") + name + "': " + e.what());
  }
}

}  // namespace

std::string MessageTypeName(MessageType type) {
  for (const auto& [t, name] : kTypeNames) {
    if (t == type) return name;
  }
  return "?";
}

MessageType ParseMessageType(const std::string& name) {
  for (const auto& [t, n] : kTypeNames) {
    if (name == n) return t;
  }
  throw ProtocolError("unknown message type '" + name + "'");
}

MessageType TypeOf(const json& message) {
  if (!message.is_object() || !message.contains("type") || !message["type"].is_string()) {
    throw ProtocolError("message without a type");
  }
  return ParseMessageType(message["type"].get<std::string>());
}

std::string EncodeFrame(const json& message) {
  const std::string payload = message.dump();
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame too large");
  const auto n = static_cast<uint32_t>(payload.size());
  std::string frame;
  frame.reserve(4 + payload.size());
  frame.push_back(static_cast<char>(n >> 24));
  frame.push_back(static_cast<char>(n >> 16));
  frame.push_back(static_cast<char>(n >> 8));
  frame.push_back(static_cast<char>(n));
  frame += payload;
  return frame;
}

void FrameDecoder::Feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<json> FrameDecoder::Next() {
  if (buffer_.size() < 4) return std::nullopt;
  const uint32_t n = ReadBigEndian(buffer_.data());
  if (n > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(n) + " too large");
  if (buffer_.size() < 4 + static_cast<size_t>(n)) return std::nullopt;
  json message = json::parse(buffer_.begin() + 4, buffer_.begin() + 4 + n, nullptr, false);
  buffer_.erase(0, 4 + static_cast<size_t>(n));
  if (message.is_discarded() || !message.is_object()) {
    throw ProtocolError("frame payload is not a JSON object");
  }
  return message;
}

json Task::ToJson() const {
  return {{"task_id", task_id},
          {"dataset_id", dataset_id},
          {"pipeline", PipelineToJson(pipeline)},
          {"T", num_topics},
          {"B", num_background},
          {"eval_seed", eval_seed},
          {"metric", metric},
          {"deadline_s", deadline_s}};
}

Task Task::FromJson(const json& j) {
  Task t;
  t.task_id = Field<uint64_t>(j, "task_id");
  t.dataset_id = Field<std::string>(j, "dataset_id");
  if (!j.contains("pipeline")) throw ProtocolError("missing field 'pipeline'");
  try {
    t.pipeline = PipelineFromJson(j["pipeline"]);
  } catch (const Error& e) {
    throw ProtocolError(std::string("bad pipeline: ") + e.what());
  }
  t.num_topics = Field<int>(j, "T");
  t.num_background = Field<int>(j, "B");
  t.eval_seed = Field<uint64_t>(j, "eval_seed");
  t.metric = Field<std::string>(j, "metric");
  t.deadline_s = Field<double>(j, "deadline_s");
  return t;
}

json TaskResult::ToJson() const {
  json j = {{"task_id", task_id},
            {"status", ok ? "ok" : "failed"},
            {"worker_id", worker_id},
            {"elapsed_s", elapsed_s}};
  if (ok) {
    // JSON has no infinities; they travel as strings.
    if (std::isfinite(fitness)) {
      j["fitness"] = fitness;
    } else {
      j["fitness"] = std::isnan(fitness) ? "nan" : (fitness > 0 ? "inf" : "-inf");
    }
  } else {
    j["error"] = error;
  }
  return j;
}

TaskResult TaskResult::FromJson(const json& j) {
  TaskResult r;
  r.task_id = Field<uint64_t>(j, "task_id");
  const auto status = Field<std::string>(j, "status");
  if (status != "ok" && status != "failed") throw ProtocolError("bad status '" + status + "'");
  r.ok = status == "ok";
  r.worker_id = Field<std::string>(j, "worker_id");
  r.elapsed_s = Field<double>(j, "elapsed_s");
  if (r.ok) {
    if (!j.contains("fitness")) throw ProtocolError("missing field 'fitness'");
    const json& f = j["fitness"];
    if (f.is_number()) {
      r.fitness = f.get<double>();
    } else if (f == "inf") {
      r.fitness = std::numeric_limits<double>::infinity();
    } else if (f == "-inf") {
      r.fitness = -std::numeric_limits<double>::infinity();
    } else if (f == "nan") {
      r.fitness = std::numeric_limits<double>::quiet_NaN();
    } else {
      throw ProtocolError("bad fitness value");
    }
  } else {
    r.error = Field<std::string>(j, "error");
  }
  return r;
}

json HelloMessage(const std::string& worker_id, const std::vector<std::string>& datasets) {
  return {{"type", "HELLO"},
          {"protocol_version", kProtocolVersion},
          {"worker_id", worker_id},
          {"datasets", datasets}};
}

json TaskRequestMessage(const std::string& worker_id) {
  return {{"type", "TASK_REQUEST"}, {"worker_id", worker_id}};
}

json TaskMessage(const Task& task) { return {{"type", "TASK"}, {"task", task.ToJson()}}; }

json ResultMessage(const TaskResult& result) {
  return {{"type", "RESULT"}, {"result", result.ToJson()}};
}

json HeartbeatMessage(const std::string& worker_id, uint64_t task_id) {
  return {{"type", "HEARTBEAT"}, {"worker_id", worker_id}, {"task_id", task_id}};
}

json ShutdownMessage() { return {{"type", "SHUTDOWN"}}; }

json AckMessage(bool accepted, const std::string& detail) {
  json j = {{"type", "ACK"}, {"accepted", accepted}};
  if (!detail.empty()) j["detail"] = detail;
  return j;
}

json IdleMessage(double retry_after_s) {
  return {{"type", "ACK"}, {"accepted", true}, {"idle", true}, {"retry_after_s", retry_after_s}};
}

void WriteFrame(int fd, const json& message) {
  const std::string frame = EncodeFrame(message);
  size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t n = ::send(fd, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<size_t>(n);
  }
}

namespace {

// False on EOF before any byte was read.
bool ReadExact(int fd, char* out, size_t n, bool eof_ok) {
  size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) {
      if (got == 0 && eof_ok) return false;
      throw ProtocolError("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
    }
    got += static_cast<size_t>(r);
  }
  return true;
}

}  // namespace

std::optional<json> ReadFrame(int fd) {
  char header[4];
  if (!ReadExact(fd, header, 4, true)) return std::nullopt;
  const uint32_t n = ReadBigEndian(header);
  if (n > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(n) + " too large");
  std::string payload(n, '\0');
  ReadExact(fd, payload.data(), n, false);
  json message = json::parse(payload, nullptr, false);
  if (message.is_discarded() || !message.is_object()) {
    throw ProtocolError("frame payload is not a JSON object");
  }
  return message;
}

std::pair<std::string, int> ParseHostPort(const std::string& address) {
  const size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw ConfigError("address", "expected host:port, got '" + address + "'");
  }
  const std::string host = address.substr(0, colon);
  int port = 0;
  try {
    size_t used = 0;
    port = std::stoi(address.substr(colon + 1), &used);
    if (used != address.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("address", "bad port in '" + address + "'");
  }
  if (port < 0 || port > 65535) throw ConfigError("address", "port out of range");
  return {host, port};
}

namespace {

addrinfo* Resolve(const std::string& host, int port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(),
                               std::to_string(port).c_str(), &hints, &res);
  if (rc != 0) throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  return res;
}

}  // namespace

int ConnectTcp(const std::string& host, int port) {
  addrinfo* res = Resolve(host, port, false);
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

int ListenTcp(const std::string& host, int port, int* bound_port) {
  addrinfo* res = Resolve(host, port, true);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw ProtocolError("cannot create socket");
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
    ::freeaddrinfo(res);
    ::close(fd);
    throw ProtocolError("cannot listen on " + host + ":" + std::to_string(port) + ": " +
                        std::strerror(errno));
  }
  ::freeaddrinfo(res);
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (bound_port != nullptr) *bound_port = ntohs(addr.sin_port);
  return fd;
}

}  // namespace autotm
