#include "tutor/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "tutor/assets.hpp"
#include "tutor/digest.hpp"
#include "tutor/error.hpp"
#include "tutor/grammar.hpp"
#include "tutor/prompts.hpp"

namespace tutor {

std::string_view to_string(ServiceKind k) {
  switch (k) {
    case ServiceKind::Asr: return "asr";
    case ServiceKind::Tts: return "tts";
    case ServiceKind::Conversation: return "conversation";
    case ServiceKind::Grammar: return "grammar";
    case ServiceKind::Empathy: return "empathy";
    case ServiceKind::Judge: return "judge";
    case ServiceKind::Emotion: return "emotion";
  }
  return "?";
}

std::optional<ServiceKind> parse_service_kind(std::string_view name) {
  for (auto k : kAllServiceKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void ServiceEndpoint::validate() const {
  const std::string who(to_string(kind));
  if (!(timeout > 0.0)) throw Error(ErrorCode::InvalidConfig, who + ": timeout must be > 0");
  if (max_retries < 0) throw Error(ErrorCode::InvalidConfig, who + ": max_retries must be >= 0");
  if (!is_stub() && !base_url.starts_with("http://") && !base_url.starts_with("https://")) {
    throw Error(ErrorCode::InvalidConfig, who + ": base_url must be \"stub\" or an http(s) URL");
  }
}

// ---- retries ---------------------------------------------------------------

std::vector<double> RetryPolicy::schedule() const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  std::vector<double> delays;
  double base = initial_backoff;
  for (int k = 0; k < max_retries; ++k) {
    delays.push_back(base * (1.0 + u(rng)));
    base *= factor;
  }
  return delays;
}

JsonCaller with_retries(JsonCaller inner, RetryPolicy policy) {
  return [inner = std::move(inner), policy = std::move(policy)](const json& request) {
    const auto delays = policy.schedule();
    for (int attempt = 0;; ++attempt) {
      try {
        return inner(request);
      } catch (const Error& e) {
        const bool transient =
            e.code() == ErrorCode::UpstreamUnavailable || e.code() == ErrorCode::Timeout;
        if (!transient || attempt >= policy.max_retries) throw;
        const double delay = delays[static_cast<std::size_t>(attempt)];
        spdlog::warn("upstream call failed ({}), retry {} in {:.3f}s", e.what(), attempt + 1, delay);
        if (policy.sleeper) {
          policy.sleeper(delay);
        } else {
          std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
      }
    }
  };
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_begin = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

}  // namespace

JsonCaller http_json_caller(const ServiceEndpoint& endpoint) {
  endpoint.validate();
  if (endpoint.is_stub()) throw Error(ErrorCode::InvalidConfig, "stub endpoint has no HTTP caller");
  const ParsedUrl url = split_url(endpoint.base_url);
  return [url, endpoint](const json& request) {
    httplib::Client client(url.origin);
    const auto secs = static_cast<time_t>(endpoint.timeout);
    const auto usecs = static_cast<time_t>((endpoint.timeout - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (endpoint.auth_token) headers.emplace("Authorization", "Bearer " + *endpoint.auth_token);

    const std::string who(to_string(endpoint.kind));
    auto res = client.Post(url.path, headers, request.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write) {
        throw Error(ErrorCode::Timeout, who + ": " + httplib::to_string(err));
      }
      throw Error(ErrorCode::UpstreamUnavailable, who + ": " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::UpstreamUnavailable, who + ": HTTP " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      throw Error(ErrorCode::UpstreamUnavailable, who + ": response is not JSON");
    }
  };
}

// ---- HTTP clients ----------------------------------------------------------

namespace {

json audio_payload(const AudioClip& clip) {
  return {{"audio_b64", base64_encode(encode_wav(clip))}, {"sample_rate", clip.sample_rate}};
}

template <typename T>
T field(const json& response, const char* name) {
  if (!response.is_object() || !response.contains(name)) {
    throw Error(ErrorCode::UpstreamUnavailable, std::string("response lacks '") + name + "'");
  }
  try {
    return response.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::UpstreamUnavailable, std::string("response field '") + name + "' has the wrong type");
  }
}

json messages_json(const std::vector<ChatMessage>& messages) {
  json arr = json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"text", m.text}});
  return arr;
}

}  // namespace

std::string HttpSpeechRecognizer::transcribe(const AudioClip& clip) {
  return field<std::string>(call_(audio_payload(clip)), "text");
}

AudioClip HttpSpeechSynthesizer::synthesize(std::string_view text, std::string_view voice_id) {
  if (trim(text).empty()) throw Error(ErrorCode::ContractViolation, "nothing to synthesize");
  const json response = call_({{"text", text}, {"voice_id", voice_id}});
  return decode_wav(base64_decode(field<std::string>(response, "audio_b64")));
}

std::string HttpConversationModel::converse(const std::vector<Utterance>& view,
                                            const ConversationConfig& config) {
  std::vector<ChatMessage> messages;
  for (const auto& u : view) {
    messages.push_back({u.speaker == Speaker::User ? "user" : "assistant", u.text});
  }
  const json request{{"messages", messages_json(messages)},
                     {"topic", config.topic},
                     {"persona", config.persona},
                     {"vocabulary", config.vocabulary}};
  return field<std::string>(call_(request), "text");
}

std::string HttpGrammarCorrector::correct(std::string_view sentence) {
  return field<std::string>(call_({{"sentence", sentence}}), "corrected");
}

std::string HttpLanguageModel::complete(const std::vector<ChatMessage>& messages) {
  return field<std::string>(call_({{"messages", messages_json(messages)}}), "text");
}

EmotionDistribution HttpEmotionScorer::score(const AudioClip& clip) {
  const auto probs = field<std::map<std::string, double>>(call_(audio_payload(clip)), "probabilities");
  return EmotionDistribution::from_map(probs);
}

// ---- stubs -----------------------------------------------------------------

void StubSpeechRecognizer::script(const AudioClip& clip, std::string transcript) {
  std::lock_guard lock(mu_);
  table_[clip_fingerprint(clip)] = std::move(transcript);
}

std::string StubSpeechRecognizer::transcribe(const AudioClip& clip) {
  std::lock_guard lock(mu_);
  const auto it = table_.find(clip_fingerprint(clip));
  return it == table_.end() ? std::string{} : it->second;
}

AudioClip StubSpeechSynthesizer::synthesize(std::string_view text, std::string_view) {
  const auto words = word_count(text);
  if (words == 0) throw Error(ErrorCode::ContractViolation, "nothing to synthesize");
  return make_tone(kSecondsPerWord * static_cast<double>(words), 220.0, 0.3, 16000);
}

namespace {

const std::vector<std::string>& conversation_templates() {
  static const std::vector<std::string> t{
      "Hi there! Let's chat about this: {topic}. What comes to mind first?",
      "That's interesting! Could you tell me more about it?",
      "I see. What did you like most about it?",
      "Nice! How did it make you feel?",
      "That makes sense. Is there anything else you remember about it?",
  };
  return t;
}

}  // namespace

StubConversationModel::StubConversationModel(std::vector<std::string> script)
    : script_(std::move(script)) {}

std::string StubConversationModel::converse(const std::vector<Utterance>& view,
                                            const ConversationConfig& config) {
  std::lock_guard lock(mu_);
  const auto& templates = conversation_templates();
  auto known = [&](const std::string& text) {
    if (std::find(produced_.begin(), produced_.end(), text) != produced_.end()) return true;
    if (std::find(script_.begin(), script_.end(), text) != script_.end()) return true;
    for (const auto& t : templates) {
      if (render_template(t, {{"topic", config.topic}}) == text) return true;
    }
    return false;
  };
  for (const auto& u : view) {
    if (u.speaker == Speaker::Bot && !known(u.text)) {
      throw Error(ErrorCode::ContractViolation,
                  "conversation view carries text the conversation model never produced: " + u.text);
    }
  }
  views_.push_back(view);
  topics_.push_back(config.topic);

  std::size_t user_turns = 0;
  for (const auto& u : view) user_turns += u.speaker == Speaker::User ? 1 : 0;
  const std::size_t idx = user_turns == 0 ? 0 : user_turns - 1;
  std::string reply;
  if (idx < script_.size()) {
    reply = script_[idx];
  } else if (idx == 0) {
    reply = render_template(templates[0], {{"topic", config.topic}});
  } else {
    reply = templates[1 + (idx - 1) % (templates.size() - 1)];
  }
  produced_.push_back(reply);
  return reply;
}

std::vector<std::vector<Utterance>> StubConversationModel::received_views() const {
  std::lock_guard lock(mu_);
  return views_;
}

std::vector<std::string> StubConversationModel::received_topics() const {
  std::lock_guard lock(mu_);
  return topics_;
}

StubGrammarCorrector::Rules StubGrammarCorrector::default_rules() {
  Rules r;
  r.exact["I like to read book and study English."] = "I like to read books and study English";
  r.exact["Okay, that's Turandot, which describes a love story between a Chinese princess and a "
          "foreign prince."] =
      "Okay, that's Turandot, which is a story about a love between a Chinese princess and a "
      "foreign prince.";
  r.substrings = {{"book and", "books and"}, {"who want to", "who wants to"}};
  r.titles = {"Godfather"};
  return r;
}

std::string StubGrammarCorrector::correct(std::string_view sentence) {
  const std::string input(sentence);
  if (const auto it = rules_.exact.find(input); it != rules_.exact.end()) return it->second;
  std::string out = input;
  for (const auto& [from, to] : rules_.substrings) {
    for (auto pos = out.find(from); pos != std::string::npos; pos = out.find(from, pos + to.size())) {
      out.replace(pos, from.size(), to);
    }
  }
  for (const auto& title : rules_.titles) {
    for (auto pos = out.find(title); pos != std::string::npos; pos = out.find(title, pos + 1)) {
      const bool preceded = pos >= 4 && to_lower(out.substr(pos - 4, 4)) == "the ";
      if (!preceded) {
        out.insert(pos, "The ");
        pos += 4;
      }
    }
  }
  return out;
}

std::string StubLanguageModel::default_response(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) return "";
  const std::string& last = messages.back().text;
  if (last == "Answer yes or no." || last.find("\"yes\" or \"no\"") != std::string::npos) {
    return "Yes.";
  }
  if (last.starts_with("Shorten and rewrite")) {
    return "You explain your ideas clearly, which is great! Try shorter sentences, like \"I rarely "
           "watch movies.\" Keep going!";
  }
  if (last.starts_with("Make your response different")) {
    return "You're doing great and your ideas come across clearly! For example, you could say "
           "\"I rarely watch movies.\" Keep it up!";
  }
  if (last.starts_with("Based on the following conversation history")) {
    return "Good question! For example, you can say \"I didn't really watch The Godfather.\" "
           "Adding \"the\" before a title makes it sound natural.";
  }
  if (last.find("Reasoning: Let's think step by step") != std::string::npos) {
    const char* field = last.find("\nFeedback:") != std::string::npos ? "Feedback:" : "Output:";
    return std::string("produce the feedback. The speaker explains the topic but hesitates.\n") +
           field +
           " You have a good grasp of the topic and explain yourself clearly! You can work on "
           "sentence structure. For example, say \"I rarely watch movies\" instead of \"I hardly "
           "ever watch movies\". Keep practicing!";
  }
  return "Okay.";
}

std::string StubLanguageModel::complete(const std::vector<ChatMessage>& messages) {
  Responder responder;
  {
    std::lock_guard lock(mu_);
    calls_.push_back(messages);
    responder = responder_;
  }
  return responder(messages);
}

std::vector<std::vector<ChatMessage>> StubLanguageModel::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t StubLanguageModel::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

void StubEmotionScorer::script(const AudioClip& clip, EmotionDistribution dist) {
  std::lock_guard lock(mu_);
  table_[clip_fingerprint(clip)] = dist;
}

EmotionDistribution StubEmotionScorer::score(const AudioClip& clip) {
  const std::string fp = clip_fingerprint(clip);
  std::lock_guard lock(mu_);
  ++calls_;
  const auto it = table_.find(fp);
  return it == table_.end() ? EmotionDistribution{} : it->second;
}

std::size_t StubEmotionScorer::call_count() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---- configuration ---------------------------------------------------------

GatewayConfig GatewayConfig::all_stub() {
  GatewayConfig cfg;
  for (auto k : kAllServiceKinds) {
    ServiceEndpoint ep;
    ep.kind = k;
    cfg.endpoints[k] = ep;
  }
  return cfg;
}

GatewayConfig GatewayConfig::from_json(const json& j) {
  GatewayConfig cfg = all_stub();
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "gateway config must be an object");
  const json eps = j.value("endpoints", json::object());
  if (!eps.is_object()) throw Error(ErrorCode::InvalidConfig, "'endpoints' must be an object");
  try {
    for (const auto& [name, entry] : eps.items()) {
      const auto kind = parse_service_kind(name);
      if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown endpoint kind '" + name + "'");
      ServiceEndpoint& ep = cfg.endpoints[*kind];
      ep.base_url = entry.value("base_url", ep.base_url);
      ep.timeout = entry.value("timeout", ep.timeout);
      ep.max_retries = entry.value("max_retries", ep.max_retries);
      if (entry.contains("auth_token")) ep.auth_token = entry.at("auth_token").get<std::string>();
      ep.validate();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("gateway config: ") + e.what());
  }
  return cfg;
}

GatewayConfig GatewayConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

void GatewayConfig::apply_env() {
  for (auto& [kind, ep] : endpoints) {
    std::string key = "TUTOR_" + std::string(to_string(kind)) + "_";
    for (auto& c : key) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* url = std::getenv((key + "URL").c_str())) ep.base_url = url;
    if (const char* token = std::getenv((key + "TOKEN").c_str())) ep.auth_token = token;
    ep.validate();
  }
}

ModelStack build_model_stack(const GatewayConfig& config, const ModelStack& stubs,
                             std::uint64_t retry_seed) {
  auto caller = [&](ServiceKind k) {
    const auto& ep = config.endpoint(k);
    RetryPolicy policy;
    policy.max_retries = ep.max_retries;
    policy.seed = retry_seed + static_cast<std::uint64_t>(k);
    return with_retries(http_json_caller(ep), policy);
  };
  auto stub = [&](ServiceKind k) { return config.endpoint(k).is_stub(); };

  ModelStack s;
  s.asr = stub(ServiceKind::Asr)
              ? (stubs.asr ? stubs.asr : std::make_shared<StubSpeechRecognizer>())
              : std::shared_ptr<SpeechRecognizer>(
                    std::make_shared<HttpSpeechRecognizer>(caller(ServiceKind::Asr)));
  s.tts = stub(ServiceKind::Tts)
              ? (stubs.tts ? stubs.tts : std::make_shared<StubSpeechSynthesizer>())
              : std::shared_ptr<SpeechSynthesizer>(
                    std::make_shared<HttpSpeechSynthesizer>(caller(ServiceKind::Tts)));
  s.conversation =
      stub(ServiceKind::Conversation)
          ? (stubs.conversation ? stubs.conversation : std::make_shared<StubConversationModel>())
          : std::shared_ptr<ConversationModel>(
                std::make_shared<HttpConversationModel>(caller(ServiceKind::Conversation)));
  s.grammar = stub(ServiceKind::Grammar)
                  ? (stubs.grammar ? stubs.grammar : std::make_shared<StubGrammarCorrector>())
                  : std::shared_ptr<GrammarCorrector>(
                        std::make_shared<HttpGrammarCorrector>(caller(ServiceKind::Grammar)));
  s.empathy = stub(ServiceKind::Empathy)
                  ? (stubs.empathy ? stubs.empathy : std::make_shared<StubLanguageModel>())
                  : std::shared_ptr<LanguageModel>(
                        std::make_shared<HttpLanguageModel>(caller(ServiceKind::Empathy)));
  s.judge = stub(ServiceKind::Judge)
                ? (stubs.judge ? stubs.judge : std::make_shared<StubLanguageModel>())
                : std::shared_ptr<LanguageModel>(
                      std::make_shared<HttpLanguageModel>(caller(ServiceKind::Judge)));
  s.emotion = stub(ServiceKind::Emotion)
                  ? (stubs.emotion ? stubs.emotion : std::make_shared<StubEmotionScorer>())
                  : std::shared_ptr<EmotionScorer>(
                        std::make_shared<HttpEmotionScorer>(caller(ServiceKind::Emotion)));
  return s;
}

}  // namespace tutor
