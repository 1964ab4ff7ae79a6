#ifndef AUTOTM_LLM_JUDGE_H_
#define AUTOTM_LLM_JUDGE_H_

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace autotm {

// Default system prompt for the 1-4 relatedness judgement.
inline constexpr std::string_view kDefaultJudgePrompt =
    "You are a helpful assistant evaluating the top words of a topic model output for a "
    "given topic. \n"
    "Please rate how related the following words are to each other on a scale from 1 to 4 "
    "(\"1\" = poorly related, \"2\" = rather poorly related, \"3\" = rather related, "
    "\"4\" = very related). \n"
    "Reply with a single number, indicating the overall appropriateness of the topic.";

inline constexpr std::string_view kWordsPlaceholder = "{words}";

struct LlmJudgeConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string system_prompt = std::string(kDefaultJudgePrompt);
  // User message; kWordsPlaceholder is replaced by the space-joined words.
  std::string user_template = std::string(kWordsPlaceholder);
  double timeout_s = 30.0;
  int max_retries = 3;
  double backoff_initial_s = 1.0;
  double backoff_factor = 2.0;
  std::string token_env = "AUTOTM_LLM_TOKEN";
  int max_in_flight = 4;
};

// Empty when valid.
std::string CheckJudgeConfig(const LlmJudgeConfig& config);

// Request body: {"model": ..., "messages": [{"role": "system", ...},
// {"role": "user", ...}]}.
std::string BuildJudgeRequest(const std::vector<std::string>& words,
                              const LlmJudgeConfig& config);

// First integer token of the reply if it is within [1, 4].
std::optional<int> ParseJudgeScore(std::string_view reply);

// Transport for chat-completion requests. Complete() returns the assistant
// message content and throws JudgeUnavailable on transport/HTTP errors.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string Complete(const std::string& request_body) = 0;
};

// HTTP(S) POST to the configured endpoint with a bearer token read from the
// configured environment variable (omitted when unset).
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(LlmJudgeConfig config);
  std::string Complete(const std::string& request_body) override;

 private:
  LlmJudgeConfig config_;
};

// Extracts choices[0].message.content; throws UnparseableReply.
std::string ExtractChatContent(const std::string& response_body);

struct JudgeAttempt {
  int attempt = 0;
  std::string outcome;  // "ok", "transport_error", "unparseable"
  std::string detail;
  double backoff_s = 0.0;  // sleep before the next attempt
};

struct JudgeResult {
  int score = 0;
  std::vector<JudgeAttempt> transcript;
};

using Sleeper = std::function<void(double seconds)>;

// Sends the prompt, parses the score, retries with exponential backoff on
// transport errors and unparseable replies. Throws JudgeUnavailable or
// UnparseableReply (by the last failure) once retries are exhausted.
JudgeResult LlmScoreTopic(const std::vector<std::string>& top_words,
                          const LlmJudgeConfig& config, ChatClient& client,
                          const Sleeper& sleeper = {});

// Scores several topics with at most config.max_in_flight concurrent calls.
// `client` must be safe for concurrent use.
std::vector<JudgeResult> LlmScoreTopics(const std::vector<std::vector<std::string>>& topics,
                                        const LlmJudgeConfig& config, ChatClient& client,
                                        const Sleeper& sleeper = {});

// Explicit on-disk score cache keyed by (model, prompt hash, word list).
class JudgeCache {
 public:
  explicit JudgeCache(std::filesystem::path path);
  std::optional<int> Lookup(const LlmJudgeConfig& config,
                            const std::vector<std::string>& words) const;
  void Store(const LlmJudgeConfig& config, const std::vector<std::string>& words, int score);
  static std::string Key(const LlmJudgeConfig& config, const std::vector<std::string>& words);

 private:
  void Flush() const;
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, int> entries_;
};

// Minimal chat-completion server for tests and offline runs. Replies are
// served from a script in order (the last one repeats); a scripted reply of
// "!500" answers with HTTP 500 instead.
class StubJudgeServer {
 public:
  explicit StubJudgeServer(std::vector<std::string> script);
  ~StubJudgeServer();
  StubJudgeServer(const StubJudgeServer&) = delete;
  StubJudgeServer& operator=(const StubJudgeServer&) = delete;

  // Binds to host:port (port 0 picks a free one) and serves in the
  // background. Returns the bound port.
  int Start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks serving on the calling thread.
  void Listen(const std::string& host, int port);
  void Stop();

  std::string endpoint() const;
  std::vector<std::string> received_bodies() const;
  std::vector<std::string> received_auth() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace autotm

#endif  // AUTOTM_LLM_JUDGE_H_
