#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <future>
#include <semaphore>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "autotm/errors.h"
#include "autotm/llm_judge.h"

namespace autotm {
namespace {

std::string JoinWords(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += words[i];
  }
  return out;
}

uint64_t Fnv1a(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl SplitUrl(const std::string& url) {
  const size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint", "endpoint must be an http(s) URL: " + url);
  }
  const size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string CheckJudgeConfig(const LlmJudgeConfig& config) {
  if (config.user_template.find(kWordsPlaceholder) == std::string::npos &&
      config.system_prompt.find(kWordsPlaceholder) == std::string::npos) {
    return "prompt template has no " + std::string(kWordsPlaceholder) + " placeholder";
  }
  if (config.max_retries < 0) return "max_retries must be >= 0";
  if (config.max_in_flight < 1) return "max_in_flight must be >= 1";
  if (config.model.empty()) return "model name is empty";
  return {};
}

std::string BuildJudgeRequest(const std::vector<std::string>& words,
                              const LlmJudgeConfig& config) {
  const std::string joined = JoinWords(words);
  auto fill = [&](std::string text) {
    for (size_t pos = text.find(kWordsPlaceholder); pos != std::string::npos;
         pos = text.find(kWordsPlaceholder, pos + joined.size())) {
      text.replace(pos, kWordsPlaceholder.size(), joined);
    }
    return text;
  };
  nlohmann::json body = {
      {"model", config.model},
      {"messages",
       {{{"role", "system"}, {"content", fill(config.system_prompt)}},
        {{"role", "user"}, {"content", fill(config.user_template)}}}},
  };
  return body.dump();
}

std::optional<int> ParseJudgeScore(std::string_view reply) {
  for (size_t i = 0; i < reply.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(reply[i]))) continue;
    size_t j = i;
    long value = 0;
    while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) {
      value = std::min(value * 10 + (reply[j] - '0'), 1000L);
      ++j;
    }
    if (value >= 1 && value <= 4) return static_cast<int>(value);
    return std::nullopt;
  }
  return std::nullopt;
}

HttpChatClient::HttpChatClient(LlmJudgeConfig config) : config_(std::move(config)) {}

std::string HttpChatClient::Complete(const std::string& request_body) {
  const ParsedUrl url = SplitUrl(config_.endpoint);
  httplib::Client client(url.scheme_host_port);
  const auto timeout = std::chrono::duration<double>(config_.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (const char* token = std::getenv(config_.token_env.c_str()); token != nullptr && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  auto res = client.Post(url.path, headers, request_body, "application/json");
  if (!res) {
    throw JudgeUnavailable("transport error: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw JudgeUnavailable("HTTP status " + std::to_string(res->status));
  }
  return ExtractChatContent(res->body);
}

std::string ExtractChatContent(const std::string& response_body) {
  try {
    const auto j = nlohmann::json::parse(response_body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw UnparseableReply(std::string("malformed chat completion: ") + e.what());
  }
}

JudgeResult LlmScoreTopic(const std::vector<std::string>& top_words,
                          const LlmJudgeConfig& config, ChatClient& client,
                          const Sleeper& sleeper) {
  if (top_words.empty()) throw ConfigError("top_words", "no words to judge");
  if (const std::string problem = CheckJudgeConfig(config); !problem.empty()) {
    throw ConfigError("llm_judge", problem);
  }
  const std::string body = BuildJudgeRequest(top_words, config);
  JudgeResult result;
  double backoff = config.backoff_initial_s;
  bool last_was_transport = false;
  std::string last_detail;
  for (int attempt = 1; attempt <= config.max_retries + 1; ++attempt) {
    JudgeAttempt record;
    record.attempt = attempt;
    try {
      const std::string reply = client.Complete(body);
      if (auto score = ParseJudgeScore(reply)) {
        record.outcome = "ok";
        record.detail = reply;
        result.transcript.push_back(record);
        result.score = *score;
        return result;
      }
      record.outcome = "unparseable";
      record.detail = reply;
      last_was_transport = false;
    } catch (const JudgeUnavailable& e) {
      record.outcome = "transport_error";
      record.detail = e.what();
      last_was_transport = true;
    } catch (const UnparseableReply& e) {
      record.outcome = "unparseable";
      record.detail = e.what();
      last_was_transport = false;
    }
    last_detail = record.detail;
    if (attempt <= config.max_retries) {
      record.backoff_s = backoff;
      spdlog::warn("llm judge attempt {} failed ({}), retrying in {:.3f}s", attempt,
                   record.outcome, backoff);
      result.transcript.push_back(record);
      if (sleeper) {
        sleeper(backoff);
      } else if (backoff > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      }
      backoff *= config.backoff_factor;
    } else {
      result.transcript.push_back(record);
    }
  }
  const std::string message = "no score after " + std::to_string(config.max_retries + 1) +
                              " attempts; last: " + last_detail;
  if (last_was_transport) throw JudgeUnavailable(message);
  throw UnparseableReply(message);
}

std::vector<JudgeResult> LlmScoreTopics(const std::vector<std::vector<std::string>>& topics,
                                        const LlmJudgeConfig& config, ChatClient& client,
                                        const Sleeper& sleeper) {
  std::counting_semaphore<> slots(std::max(1, config.max_in_flight));
  std::vector<std::future<JudgeResult>> futures;
  futures.reserve(topics.size());
  for (const auto& words : topics) {
    slots.acquire();
    futures.push_back(std::async(std::launch::async, [&, words] {
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{slots};
      return LlmScoreTopic(words, config, client, sleeper);
    }));
  }
  std::vector<JudgeResult> results;
  results.reserve(futures.size());
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

JudgeCache::JudgeCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [key, value] : j.items()) entries_[key] = value.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("judge cache " + path_.string() + ": " + e.what());
  }
}

std::string JudgeCache::Key(const LlmJudgeConfig& config, const std::vector<std::string>& words) {
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(
                    Fnv1a(config.system_prompt + '\x1f' + config.user_template)));
  return config.model + "|" + hash + "|" + JoinWords(words);
}

std::optional<int> JudgeCache::Lookup(const LlmJudgeConfig& config,
                                      const std::vector<std::string>& words) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(Key(config, words));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void JudgeCache::Store(const LlmJudgeConfig& config, const std::vector<std::string>& words,
                       int score) {
  std::lock_guard lock(mutex_);
  entries_[Key(config, words)] = score;
  Flush();
}

void JudgeCache::Flush() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, score] : entries_) j[key] = score;
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw FormatError("cannot write judge cache " + path_.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

struct StubJudgeServer::Impl {
  httplib::Server server;
  std::thread thread;
  mutable std::mutex mutex;
  std::deque<std::string> script;
  std::string last_reply = "1";
  std::vector<std::string> bodies;
  std::vector<std::string> auth;
  std::string host;
  int port = 0;
};

StubJudgeServer::StubJudgeServer(std::vector<std::string> script) : impl_(new Impl) {
  impl_->script.assign(script.begin(), script.end());
  Impl* impl = impl_.get();
  impl_->server.Post(".*", [impl](const httplib::Request& req, httplib::Response& res) {
    std::string reply;
    {
      std::lock_guard lock(impl->mutex);
      impl->bodies.push_back(req.body);
      impl->auth.push_back(req.get_header_value("Authorization"));
      if (!impl->script.empty()) {
        reply = impl->script.front();
        if (impl->script.size() > 1) {
          impl->script.pop_front();
        }
      } else {
        reply = impl->last_reply;
      }
    }
    if (reply == "!500") {
      res.status = 500;
      res.set_content("scripted failure", "text/plain");
      return;
    }
    std::string model = "stub";
    try {
      model = nlohmann::json::parse(req.body).value("model", "stub");
    } catch (const nlohmann::json::exception&) {
    }
    nlohmann::json body = {
        {"id", "stub-completion"},
        {"object", "chat.completion"},
        {"model", model},
        {"choices",
         {{{"index", 0},
           {"message", {{"role", "assistant"}, {"content", reply}}},
           {"finish_reason", "stop"}}}},
    };
    res.set_content(body.dump(), "application/json");
  });
}

StubJudgeServer::~StubJudgeServer() { Stop(); }

int StubJudgeServer::Start(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port == 0 ? impl_->server.bind_to_any_port(host) : port;
  if (port != 0 && !impl_->server.bind_to_port(host, port)) {
    throw ConfigError("listen", "cannot bind " + host + ":" + std::to_string(port));
  }
  if (impl_->port < 0) throw ConfigError("listen", "cannot bind " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void StubJudgeServer::Listen(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) {
    throw ConfigError("listen", "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void StubJudgeServer::Stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string StubJudgeServer::endpoint() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port) + "/v1/chat/completions";
}

std::vector<std::string> StubJudgeServer::received_bodies() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->bodies;
}

std::vector<std::string> StubJudgeServer::received_auth() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->auth;
}

}  // namespace autotm
