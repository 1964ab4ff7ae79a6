#include <cmath>
#include <limits>
#include <string>

#include <gtest/gtest.h>

#include "autotm/errors.h"
#include "autotm/protocol.h"

namespace autotm {
namespace {

std::string Hex(const std::string& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned char c : bytes) {
    if (!out.empty()) out += ' ';
    out += digits[c >> 4];
    out += digits[c & 15];
  }
  return out;
}

// The same frames are listed in docs/PROTOCOL.md.
TEST(FrameTest, GoldenShutdown) {
  const std::string frame = EncodeFrame(ShutdownMessage());
  EXPECT_EQ(frame, std::string("\x00\x00\x00\x13", 4) + R"({"type":"SHUTDOWN"})");
  EXPECT_EQ(Hex(frame),
            "00 00 00 13 7b 22 74 79 70 65 22 3a 22 53 48 55 54 44 4f 57 4e 22 7d");
}

TEST(FrameTest, GoldenHeartbeatAndTaskRequest) {
  EXPECT_EQ(EncodeFrame(HeartbeatMessage("w1", 7)),
            std::string("\x00\x00\x00\x31", 4) +
                R"({"task_id":7,"type":"HEARTBEAT","worker_id":"w1"})");
  EXPECT_EQ(Hex(EncodeFrame(TaskRequestMessage("w1"))),
            "00 00 00 28 7b 22 74 79 70 65 22 3a 22 54 41 53 4b 5f 52 45 51 55 45 53 54 22 2c "
            "22 77 6f 72 6b 65 72 5f 69 64 22 3a 22 77 31 22 7d");
}

TEST(FrameDecoderTest, ByteAtATimeAndBackToBack) {
  const std::string stream = EncodeFrame(HelloMessage("w", {"a", "b"})) +
                             EncodeFrame(HeartbeatMessage("w", 3)) + EncodeFrame(ShutdownMessage());
  FrameDecoder decoder;
  std::vector<nlohmann::json> got;
  for (char c : stream) {
    decoder.Feed(std::string_view(&c, 1));
    while (auto m = decoder.Next()) got.push_back(*m);
  }
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(TypeOf(got[0]), MessageType::kHello);
  EXPECT_EQ(got[0]["protocol_version"], kProtocolVersion);
  EXPECT_EQ(got[0]["datasets"], nlohmann::json({"a", "b"}));
  EXPECT_EQ(got[1]["task_id"], 3);
  EXPECT_EQ(TypeOf(got[2]), MessageType::kShutdown);
  EXPECT_EQ(decoder.buffered(), 0u);
}

TEST(FrameDecoderTest, PartialFrameWaits) {
  const std::string frame = EncodeFrame(ShutdownMessage());
  FrameDecoder decoder;
  decoder.Feed(frame.substr(0, 3));
  EXPECT_FALSE(decoder.Next().has_value());
  decoder.Feed(frame.substr(3, 10));
  EXPECT_FALSE(decoder.Next().has_value());
  decoder.Feed(frame.substr(13));
  EXPECT_TRUE(decoder.Next().has_value());
}

TEST(FrameDecoderTest, RejectsOversizeAndNonObjects) {
  FrameDecoder big;
  big.Feed(std::string("\x04\x00\x00\x01", 4));
  EXPECT_THROW(big.Next(), ProtocolError);
  FrameDecoder array;
  array.Feed(std::string("\x00\x00\x00\x02[]", 6));
  EXPECT_THROW(array.Next(), ProtocolError);
  FrameDecoder junk;
  junk.Feed(std::string("\x00\x00\x00\x03{{{", 7));
  EXPECT_THROW(junk.Next(), ProtocolError);
}

TEST(MessageTypeTest, NamesRoundTrip) {
  for (MessageType t : {MessageType::kHello, MessageType::kTaskRequest, MessageType::kTask,
                        MessageType::kResult, MessageType::kHeartbeat, MessageType::kShutdown,
                        MessageType::kAck}) {
    EXPECT_EQ(ParseMessageType(MessageTypeName(t)), t);
  }
  EXPECT_THROW(ParseMessageType("PING"), ProtocolError);
  EXPECT_THROW(TypeOf(nlohmann::json{{"kind", "x"}}), ProtocolError);
}

TEST(TaskTest, RoundTrip) {
  Task t;
  t.task_id = 42;
  t.dataset_id = "news";
  t.pipeline = ExamplePipeline();
  t.num_topics = 12;
  t.num_background = 3;
  t.eval_seed = 0xfedcba9876543210ULL;
  t.metric = "coherence10";
  t.deadline_s = 2.5;
  const Task back = Task::FromJson(TaskMessage(t)["task"]);
  EXPECT_EQ(back.task_id, 42u);
  EXPECT_EQ(back.dataset_id, "news");
  EXPECT_EQ(back.pipeline, t.pipeline);
  EXPECT_EQ(back.num_topics, 12);
  EXPECT_EQ(back.num_background, 3);
  EXPECT_EQ(back.eval_seed, t.eval_seed);
  EXPECT_EQ(back.metric, "coherence10");
  EXPECT_EQ(back.deadline_s, 2.5);
  nlohmann::json missing = t.ToJson();
  missing.erase("metric");
  EXPECT_THROW(Task::FromJson(missing), ProtocolError);
}

TEST(TaskResultTest, RoundTripIncludingNonFinite) {
  for (double f : {0.125, -3.0, std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()}) {
    TaskResult r{9, true, f, "", "w2", 0.5};
    const TaskResult back =
        TaskResult::FromJson(nlohmann::json::parse(ResultMessage(r).dump())["result"]);
    EXPECT_TRUE(back.ok);
    EXPECT_EQ(back.fitness, f);
    EXPECT_EQ(back.worker_id, "w2");
  }
  TaskResult nan{1, true, std::nan(""), "", "w", 0.0};
  EXPECT_TRUE(std::isnan(TaskResult::FromJson(nan.ToJson()).fitness));
  TaskResult failed{2, false, 0.0, "boom", "w", 1.0};
  const TaskResult back = TaskResult::FromJson(failed.ToJson());
  EXPECT_FALSE(back.ok);
  EXPECT_EQ(back.error, "boom");
  nlohmann::json bad = failed.ToJson();
  bad["status"] = "maybe";
  EXPECT_THROW(TaskResult::FromJson(bad), ProtocolError);
}

TEST(HostPortTest, Parsing) {
  EXPECT_EQ(ParseHostPort("127.0.0.1:5555"), (std::pair<std::string, int>{"127.0.0.1", 5555}));
  EXPECT_THROW(ParseHostPort("localhost"), ConfigError);
  EXPECT_THROW(ParseHostPort("h:12x"), ConfigError);
  EXPECT_THROW(ParseHostPort("h:70000"), ConfigError);
}

}  // namespace
}  // namespace autotm
