#include "migra/error.hpp"
#include "migra/http_provider.hpp"

#include "../support/test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace migra;
using namespace migra::testing;

namespace {

// Loopback chat-completions stub. Handler decides per call.
class Stub {
 public:
  using Handler = std::function<void(int call, const httplib::Request&, httplib::Response&)>;

  explicit Stub(Handler h) : handler_(std::move(h)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handler_(++calls_, req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~Stub() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int calls() const { return calls_; }

 private:
  httplib::Server server_;
  Handler handler_;
  std::atomic<int> calls_{0};
  int port_ = 0;
  std::thread thread_;
};

void reply(httplib::Response& res, const std::string& content) {
  nlohmann::json doc = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                        {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}};
  res.set_content(doc.dump(), "application/json");
}

CompletionRequest req() {
  CompletionRequest r;
  r.messages = {{Role::System, "sys"}, {Role::User, "port this"}};
  r.temperature = 0.3;
  r.max_tokens = 64;
  r.tag = "coder.chunk.0.attempt.1.turn.1";
  return r;
}

HttpProviderConfig config(const Stub& stub) {
  HttpProviderConfig c;
  c.endpoint = stub.endpoint();
  c.model = "test-model";
  c.max_attempts = 3;
  c.backoff_initial_secs = 0.5;
  c.timeout_secs = 10;
  return c;
}

}  // namespace

TEST(HttpProvider, SendsWireFormatAndParsesReply) {
  nlohmann::json seen;
  std::string auth;
  Stub stub([&](int, const httplib::Request& rq, httplib::Response& rs) {
    seen = nlohmann::json::parse(rq.body);
    auth = rq.get_header_value("Authorization");
    reply(rs, "```done\n```\n");
  });
  ::setenv("MIGRA_TEST_TOKEN", "sekrit", 1);
  auto c = config(stub);
  c.token_env = "MIGRA_TEST_TOKEN";
  HttpProvider p(c);
  const auto r = p.complete(req());
  EXPECT_EQ(r.content, "```done\n```\n");
  ASSERT_TRUE(r.usage);
  EXPECT_EQ(r.usage->prompt_tokens, 11);
  EXPECT_EQ(seen["model"], "test-model");
  EXPECT_EQ(seen["messages"][0]["role"], "system");
  EXPECT_EQ(seen["messages"][1]["content"], "port this");
  EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 0.3);
  EXPECT_EQ(seen["max_tokens"], 64);
  EXPECT_EQ(auth, "Bearer sekrit");
}

TEST(HttpProvider, RetriesServerErrorsWithDoublingBackoff) {
  Stub stub([](int call, const httplib::Request&, httplib::Response& rs) {
    if (call == 1) rs.status = 503;
    else if (call == 2) rs.status = 429;
    else reply(rs, "ok");
  });
  std::vector<double> sleeps;
  HttpProvider p(config(stub));
  p.set_sleeper([&](double s) { sleeps.push_back(s); });
  EXPECT_EQ(p.complete(req()).content, "ok");
  EXPECT_EQ(stub.calls(), 3);
  EXPECT_EQ(sleeps, (std::vector<double>{0.5, 1.0}));
}

TEST(HttpProvider, GivesUpAfterMaxAttempts) {
  Stub stub([](int, const httplib::Request&, httplib::Response& rs) { rs.status = 500; });
  HttpProvider p(config(stub));
  p.set_sleeper([](double) {});
  try {
    p.complete(req());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RemoteError);
  }
  EXPECT_EQ(stub.calls(), 3);
}

TEST(HttpProvider, ClientErrorIsNotRetried) {
  Stub stub([](int, const httplib::Request&, httplib::Response& rs) { rs.status = 400; });
  HttpProvider p(config(stub));
  p.set_sleeper([](double) {});
  EXPECT_THROW(p.complete(req()), Error);
  EXPECT_EQ(stub.calls(), 1);
}

TEST(HttpProvider, MissingContentIsResponseEmpty) {
  Stub stub([](int, const httplib::Request&, httplib::Response& rs) { rs.set_content("{\"choices\":[]}", "application/json"); });
  HttpProvider p(config(stub));
  try {
    p.complete(req());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResponseEmpty);
  }
}

TEST(HttpProvider, TransportFailure) {
  HttpProviderConfig c;
  c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  c.max_attempts = 2;
  HttpProvider p(c);
  int slept = 0;
  p.set_sleeper([&](double) { ++slept; });
  try {
    p.complete(req());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TransportError);
  }
  EXPECT_EQ(slept, 1);
}

TEST(HttpProvider, BadEndpointRejected) {
  HttpProviderConfig c;
  c.endpoint = "ftp://x/y";
  EXPECT_THROW(HttpProvider{c}, Error);
  c.endpoint = "localhost:8080";
  EXPECT_THROW(HttpProvider{c}, Error);
}

// The same replies through HTTP and through a script give the same contents.
TEST(HttpProvider, EquivalentToScriptedReplay) {
  const std::vector<std::string> answers = {"first ```x```", "second\nline", "üñí"};
  Stub stub([&](int call, const httplib::Request&, httplib::Response& rs) { reply(rs, answers[call - 1]); });
  HttpProvider http(config(stub));
  ScriptedProvider scripted(parse_transcript(sequence_script(answers)));
  for (std::size_t i = 0; i < answers.size(); ++i) EXPECT_EQ(http.complete(req()).content, scripted.complete(req()).content);
}

TEST(HttpProvider, ValidationHappensBeforeNetwork) {
  Stub stub([](int, const httplib::Request&, httplib::Response& rs) { reply(rs, "x"); });
  HttpProvider p(config(stub));
  p.set_context_char_budget(5);
  EXPECT_THROW(p.complete(req()), Error);
  EXPECT_EQ(stub.calls(), 0);
}
