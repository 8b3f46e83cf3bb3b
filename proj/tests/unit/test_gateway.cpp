#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "support/synth.hpp"
#include "tutor/digest.hpp"
#include "tutor/error.hpp"
#include "tutor/gateway.hpp"
#include "tutor/grammar.hpp"

using namespace tutor;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ContractViolation;
}

RetryPolicy quiet_policy(int retries, std::vector<double>* slept = nullptr) {
  RetryPolicy p;
  p.max_retries = retries;
  p.sleeper = [slept](double s) {
    if (slept) slept->push_back(s);
  };
  return p;
}

/// Loopback JSON server for exercising the HTTP clients.
class FakeUpstream {
 public:
  FakeUpstream() {
    server_.Post("/asr", [](const httplib::Request& req, httplib::Response& res) {
      const auto j = json::parse(req.body);
      const AudioClip clip = decode_wav(base64_decode(j.at("audio_b64").get<std::string>()));
      res.set_content(json{{"text", "heard " + std::to_string(clip.samples.size())}}.dump(),
                      "application/json");
    });
    server_.Post("/tts", [](const httplib::Request& req, httplib::Response& res) {
      const auto j = json::parse(req.body);
      const AudioClip clip = make_tone(0.5, 220, 0.2);
      res.set_content(json{{"audio_b64", base64_encode(encode_wav(clip))},
                           {"echo_voice", j.at("voice_id")}}
                          .dump(),
                      "application/json");
    });
    server_.Post("/conversation", [this](const httplib::Request& req, httplib::Response& res) {
      last_conversation_ = json::parse(req.body);
      res.set_content(R"({"text":"Tell me more!"})", "application/json");
    });
    server_.Post("/grammar", [](const httplib::Request& req, httplib::Response& res) {
      const auto j = json::parse(req.body);
      res.set_content(json{{"corrected", j.at("sentence").get<std::string>() + "!"}}.dump(),
                      "application/json");
    });
    server_.Post("/lm", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      const auto j = json::parse(req.body);
      res.set_content(json{{"text", j.at("messages").back().at("text")}}.dump(), "application/json");
    });
    server_.Post("/emotion", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"probabilities":{"angry":0.9,"calm":0,"disgust":0,"fearful":0,
                          "happy":0,"neutral":0.1,"sad":0,"surprised":0}})",
                      "application/json");
    });
    server_.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      if (++flaky_calls_ <= 2) {
        res.status = 503;
        return;
      }
      res.set_content(R"({"text":"finally"})", "application/json");
    });
    server_.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      res.set_content(R"({"text":"late"})", "application/json");
    });
    server_.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "text/plain");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeUpstream() {
    server_.stop();
    thread_.join();
  }

  ServiceEndpoint endpoint(ServiceKind kind, const std::string& path, double timeout = 5.0) const {
    ServiceEndpoint ep;
    ep.kind = kind;
    ep.base_url = "http://127.0.0.1:" + std::to_string(port_) + path;
    ep.timeout = timeout;
    return ep;
  }

  json last_conversation_;
  std::string last_auth_;
  std::atomic<int> flaky_calls_{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Retry, TwoFailuresThenSuccess) {
  int calls = 0;
  std::vector<double> slept;
  auto inner = [&](const json&) -> json {
    if (++calls <= 2) throw Error(ErrorCode::UpstreamUnavailable, "down");
    return {{"ok", true}};
  };
  const auto out = with_retries(inner, quiet_policy(3, &slept))(json::object());
  EXPECT_TRUE(out.at("ok").get<bool>());
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(slept.size(), 2u);
}

TEST(Retry, GivesUpAfterMaxRetries) {
  int calls = 0;
  auto inner = [&](const json&) -> json {
    ++calls;
    throw Error(ErrorCode::Timeout, "slow");
  };
  EXPECT_EQ(code_of([&] { with_retries(inner, quiet_policy(3))(json::object()); }), ErrorCode::Timeout);
  EXPECT_EQ(calls, 4);
}

TEST(Retry, NonTransientErrorsAreNotRetried) {
  int calls = 0;
  auto inner = [&](const json&) -> json {
    ++calls;
    throw Error(ErrorCode::InvalidDistribution, "bad");
  };
  EXPECT_EQ(code_of([&] { with_retries(inner, quiet_policy(3))(json::object()); }),
            ErrorCode::InvalidDistribution);
  EXPECT_EQ(calls, 1);
}

TEST(Retry, ScheduleIsSeededAndBounded) {
  RetryPolicy p;
  p.max_retries = 5;
  p.seed = 17;
  const auto a = p.schedule();
  EXPECT_EQ(a, p.schedule());
  ASSERT_EQ(a.size(), 5u);
  double base = p.initial_backoff;
  for (double d : a) {
    EXPECT_GE(d, base * (1 - p.jitter));
    EXPECT_LE(d, base * (1 + p.jitter));
    base *= p.factor;
  }
  p.seed = 18;
  EXPECT_NE(a, p.schedule());
}

TEST(StubAsr, TableLookupAndUnknownClip) {
  StubSpeechRecognizer asr;
  const AudioClip hello = make_tone(0.5, 300, 0.3);
  asr.script(hello, "hello");
  EXPECT_EQ(asr.transcribe(hello), "hello");
  EXPECT_EQ(asr.transcribe(decode_wav(encode_wav(hello))), "hello");
  EXPECT_EQ(asr.transcribe(make_silence(1.0)), "");
}

TEST(StubTts, ToneLengthFollowsWords) {
  StubSpeechSynthesizer tts;
  const AudioClip clip = tts.synthesize("one two three four five", "slt");
  EXPECT_NEAR(clip.duration(), 1.5, 1e-9);
  EXPECT_EQ(decode_wav(encode_wav(clip)).samples.size(), clip.samples.size());
  EXPECT_EQ(code_of([&] { tts.synthesize("  ", "slt"); }), ErrorCode::ContractViolation);
}

TEST(StubConversation, GreetingCarriesTopicAndPolicesItsInput) {
  StubConversationModel conv;
  ConversationConfig cfg;
  cfg.topic = "your favourite opera";
  const std::string greet = conv.converse({{Speaker::User, "Hi"}}, cfg);
  EXPECT_NE(greet.find("your favourite opera"), std::string::npos);
  EXPECT_EQ(conv.received_topics().back(), "your favourite opera");
  const std::string next = conv.converse({{Speaker::User, "Hi"}, {Speaker::Bot, greet}, {Speaker::User, "Ok"}}, cfg);
  EXPECT_NE(next, greet);
  EXPECT_EQ(code_of([&] {
              conv.converse({{Speaker::User, "Hi"}, {Speaker::Bot, "I think you meant \"hello\"."}}, cfg);
            }),
            ErrorCode::ContractViolation);
  EXPECT_GE(conv.received_views().size(), 2u);
}

TEST(StubConversation, ScriptOverridesTemplates) {
  StubConversationModel conv({"Sure! What's the name of the opera?"});
  EXPECT_EQ(conv.converse({{Speaker::User, "Can I describe opera?"}}, {}), "Sure! What's the name of the opera?");
}

TEST(StubGrammar, RulesAndIdentity) {
  StubGrammarCorrector g;
  EXPECT_EQ(g.correct("I like to read book and study English."), "I like to read books and study English");
  EXPECT_EQ(g.correct("I love films."), "I love films.");
  EXPECT_EQ(g.correct("I didn't really watch Godfather, the third part."),
            "I didn't really watch The Godfather, the third part.");
  EXPECT_EQ(g.correct("I saw The Godfather."), "I saw The Godfather.");
  EXPECT_EQ(g.correct("the man who want to marry"), "the man who wants to marry");
}

TEST(StubGrammar, RuleOutputsAreAcceptedCorrections) {
  StubGrammarCorrector g;
  const auto rules = StubGrammarCorrector::default_rules();
  for (const auto& [in, out] : rules.exact) {
    EXPECT_TRUE(validate_correction(in, g.correct(in)).accepted) << in;
  }
  for (const auto& s : {"I read book and magazines.", "The man who want to leave.", "I watched Godfather."}) {
    EXPECT_TRUE(validate_correction(s, g.correct(s)).accepted) << s;
  }
}

TEST(StubEmotion, ScriptedAndDefault) {
  StubEmotionScorer scorer;
  const AudioClip angry = make_tone(1.0, 500, 0.6);
  scorer.script(angry, EmotionDistribution::split(Emotion::Angry, 0.9));
  EXPECT_NEAR(scorer.score(angry)[Emotion::Angry], 0.9, 1e-12);
  for (double v : scorer.score(make_silence(1.0)).values()) EXPECT_DOUBLE_EQ(v, 0.125);
  EXPECT_EQ(scorer.call_count(), 2u);
}

TEST(StubLanguageModel, DefaultResponsesFollowPromptStage) {
  EXPECT_EQ(StubLanguageModel::default_response({{"user", "Answer yes or no."}}), "Yes.");
  EXPECT_NE(StubLanguageModel::default_response({{"user", "x\nReasoning: Let's think step by step\nFeedback:"}})
                .find("Feedback:"),
            std::string::npos);
  EXPECT_EQ(StubLanguageModel::default_response({{"user", "anything"}}), "Okay.");
}

TEST(Config, DefaultsAreStubs) {
  const auto cfg = GatewayConfig::all_stub();
  for (auto k : kAllServiceKinds) EXPECT_TRUE(cfg.endpoint(k).is_stub());
  EXPECT_EQ(cfg.endpoints.size(), std::size(kAllServiceKinds));
}

TEST(Config, FromJson) {
  const auto cfg = GatewayConfig::from_json(json::parse(R"({"endpoints":{
      "asr":{"base_url":"http://asr.local:9000/v1","timeout":2.5,"max_retries":1,"auth_token":"t"}}})"));
  const auto& asr = cfg.endpoint(ServiceKind::Asr);
  EXPECT_EQ(asr.base_url, "http://asr.local:9000/v1");
  EXPECT_DOUBLE_EQ(asr.timeout, 2.5);
  EXPECT_EQ(asr.max_retries, 1);
  EXPECT_EQ(asr.auth_token, "t");
  EXPECT_TRUE(cfg.endpoint(ServiceKind::Tts).is_stub());

  EXPECT_EQ(code_of([] { GatewayConfig::from_json(json::parse(R"({"endpoints":{"vision":{}}})")); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { GatewayConfig::from_json(json::parse(R"({"endpoints":{"asr":{"base_url":"ftp://x"}}})")); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { GatewayConfig::from_json(json::parse(R"({"endpoints":{"asr":{"timeout":0}}})")); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { GatewayConfig::from_json(json::parse(R"({"endpoints":{"asr":{"timeout":"x"}}})")); }),
            ErrorCode::InvalidConfig);
}

TEST(Config, LoadFromFileAndEnv) {
  synth::TempDir dir;
  synth::write_file(dir / "gw.json", R"({"endpoints":{"judge":{"base_url":"http://judge:1"}}})");
  auto cfg = GatewayConfig::load(dir / "gw.json");
  EXPECT_EQ(cfg.endpoint(ServiceKind::Judge).base_url, "http://judge:1");

  ::setenv("TUTOR_JUDGE_URL", "http://other:2", 1);
  ::setenv("TUTOR_JUDGE_TOKEN", "secret", 1);
  cfg.apply_env();
  ::unsetenv("TUTOR_JUDGE_URL");
  ::unsetenv("TUTOR_JUDGE_TOKEN");
  EXPECT_EQ(cfg.endpoint(ServiceKind::Judge).base_url, "http://other:2");
  EXPECT_EQ(cfg.endpoint(ServiceKind::Judge).auth_token, "secret");

  synth::write_file(dir / "bad.json", "{ nope");
  EXPECT_EQ(code_of([&] { GatewayConfig::load(dir / "bad.json"); }), ErrorCode::InvalidConfig);
}

TEST(Config, ModelStackUsesProvidedStubs) {
  auto asr = std::make_shared<StubSpeechRecognizer>();
  ModelStack provided;
  provided.asr = asr;
  const auto stack = build_model_stack(GatewayConfig::all_stub(), provided);
  EXPECT_EQ(stack.asr.get(), asr.get());
  EXPECT_TRUE(stack.tts && stack.conversation && stack.grammar && stack.empathy && stack.judge && stack.emotion);
}

TEST(Http, ClientsSpeakTheWireSchemas) {
  FakeUpstream up;
  HttpSpeechRecognizer asr(http_json_caller(up.endpoint(ServiceKind::Asr, "/asr")));
  EXPECT_EQ(asr.transcribe(make_silence(0.25)), "heard 4000");

  HttpSpeechSynthesizer tts(http_json_caller(up.endpoint(ServiceKind::Tts, "/tts")));
  EXPECT_NEAR(tts.synthesize("hello", "slt").duration(), 0.5, 1e-9);

  HttpConversationModel conv(http_json_caller(up.endpoint(ServiceKind::Conversation, "/conversation")));
  ConversationConfig cfg;
  EXPECT_EQ(conv.converse({{Speaker::User, "Hi"}, {Speaker::Bot, "Hello"}}, cfg), "Tell me more!");
  EXPECT_EQ(up.last_conversation_["messages"][1]["role"], "assistant");
  EXPECT_EQ(up.last_conversation_["topic"], cfg.topic);
  EXPECT_EQ(up.last_conversation_["vocabulary"].size(), cfg.vocabulary.size());

  HttpGrammarCorrector grammar(http_json_caller(up.endpoint(ServiceKind::Grammar, "/grammar")));
  EXPECT_EQ(grammar.correct("Hi"), "Hi!");

  auto lm_ep = up.endpoint(ServiceKind::Empathy, "/lm");
  lm_ep.auth_token = "tok";
  HttpLanguageModel lm(http_json_caller(lm_ep));
  EXPECT_EQ(lm.complete({{"user", "a"}, {"assistant", "b"}, {"user", "c"}}), "c");
  EXPECT_EQ(up.last_auth_, "Bearer tok");

  HttpEmotionScorer emo(http_json_caller(up.endpoint(ServiceKind::Emotion, "/emotion")));
  EXPECT_NEAR(emo.score(make_silence(0.1))[Emotion::Angry], 0.9, 1e-12);
}

TEST(Http, FailureMapping) {
  FakeUpstream up;
  auto flaky = http_json_caller(up.endpoint(ServiceKind::Empathy, "/flaky"));
  EXPECT_EQ(code_of([&] { flaky(json::object()); }), ErrorCode::UpstreamUnavailable);

  HttpLanguageModel retried(with_retries(flaky, quiet_policy(3)));
  EXPECT_EQ(retried.complete({{"user", "x"}}), "finally");
  EXPECT_EQ(up.flaky_calls_.load(), 3);

  auto slow = http_json_caller(up.endpoint(ServiceKind::Empathy, "/slow", 0.3));
  EXPECT_EQ(code_of([&] { slow(json::object()); }), ErrorCode::Timeout);

  auto garbage = http_json_caller(up.endpoint(ServiceKind::Empathy, "/garbage"));
  EXPECT_EQ(code_of([&] { garbage(json::object()); }), ErrorCode::UpstreamUnavailable);

  HttpGrammarCorrector wrong_shape(http_json_caller(up.endpoint(ServiceKind::Grammar, "/lm")));
  EXPECT_EQ(code_of([&] { wrong_shape.correct("x"); }), ErrorCode::UpstreamUnavailable);

  ServiceEndpoint closed;
  closed.kind = ServiceKind::Asr;
  closed.base_url = "http://127.0.0.1:1";
  closed.timeout = 1.0;
  EXPECT_EQ(code_of([&] { http_json_caller(closed)(json::object()); }), ErrorCode::UpstreamUnavailable);
  EXPECT_EQ(code_of([] { http_json_caller(ServiceEndpoint{}); }), ErrorCode::InvalidConfig);
}

TEST(ServiceKind, NamesRoundTrip) {
  for (auto k : kAllServiceKinds) EXPECT_EQ(parse_service_kind(to_string(k)), k);
  EXPECT_FALSE(parse_service_kind("ocr"));
}
