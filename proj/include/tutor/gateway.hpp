#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tutor/models.hpp"

namespace tutor {

using json = nlohmann::json;

enum class ServiceKind { Asr, Tts, Conversation, Grammar, Empathy, Judge, Emotion };
inline constexpr ServiceKind kAllServiceKinds[] = {
    ServiceKind::Asr,     ServiceKind::Tts,   ServiceKind::Conversation, ServiceKind::Grammar,
    ServiceKind::Empathy, ServiceKind::Judge, ServiceKind::Emotion};
std::string_view to_string(ServiceKind k);
std::optional<ServiceKind> parse_service_kind(std::string_view name);

struct ServiceEndpoint {
  ServiceKind kind = ServiceKind::Asr;
  std::string base_url = "stub";  // "stub" or http://host[:port][/path]
  std::optional<std::string> auth_token;
  double timeout = 30.0;  // seconds
  int max_retries = 3;

  bool is_stub() const { return base_url == "stub"; }
  void validate() const;  // Error(InvalidConfig)
};

/// Exponential backoff: delay k = initial * factor^k * (1 + u), u ~ U[-jitter, jitter]
/// drawn from a seeded generator.
struct RetryPolicy {
  int max_retries = 3;
  double initial_backoff = 0.25;
  double factor = 2.0;
  double jitter = 0.2;
  std::uint64_t seed = 0;
  std::function<void(double)> sleeper;  // seconds; real sleep when empty

  std::vector<double> schedule() const;  // one delay per retry
};

using JsonCaller = std::function<json(const json&)>;

/// Retries `inner` on UpstreamUnavailable and Timeout. The error from the last
/// attempt is rethrown once max_retries is spent; other errors pass through.
JsonCaller with_retries(JsonCaller inner, RetryPolicy policy);

/// Single JSON POST to the endpoint. Connection failures map to
/// UpstreamUnavailable, read timeouts to Timeout, non-2xx to UpstreamUnavailable.
JsonCaller http_json_caller(const ServiceEndpoint& endpoint);

// ---- JSON-over-HTTP clients ------------------------------------------------

class HttpSpeechRecognizer final : public SpeechRecognizer {
 public:
  explicit HttpSpeechRecognizer(JsonCaller call) : call_(std::move(call)) {}
  std::string transcribe(const AudioClip& clip) override;

 private:
  JsonCaller call_;
};

class HttpSpeechSynthesizer final : public SpeechSynthesizer {
 public:
  explicit HttpSpeechSynthesizer(JsonCaller call) : call_(std::move(call)) {}
  AudioClip synthesize(std::string_view text, std::string_view voice_id) override;

 private:
  JsonCaller call_;
};

class HttpConversationModel final : public ConversationModel {
 public:
  explicit HttpConversationModel(JsonCaller call) : call_(std::move(call)) {}
  std::string converse(const std::vector<Utterance>& view, const ConversationConfig& config) override;

 private:
  JsonCaller call_;
};

class HttpGrammarCorrector final : public GrammarCorrector {
 public:
  explicit HttpGrammarCorrector(JsonCaller call) : call_(std::move(call)) {}
  std::string correct(std::string_view sentence) override;

 private:
  JsonCaller call_;
};

class HttpLanguageModel final : public LanguageModel {
 public:
  explicit HttpLanguageModel(JsonCaller call) : call_(std::move(call)) {}
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  JsonCaller call_;
};

class HttpEmotionScorer final : public EmotionScorer {
 public:
  explicit HttpEmotionScorer(JsonCaller call) : call_(std::move(call)) {}
  EmotionDistribution score(const AudioClip& clip) override;

 private:
  JsonCaller call_;
};

// ---- deterministic stubs ---------------------------------------------------

class StubSpeechRecognizer final : public SpeechRecognizer {
 public:
  explicit StubSpeechRecognizer(std::map<std::string, std::string> by_fingerprint = {})
      : table_(std::move(by_fingerprint)) {}
  void script(const AudioClip& clip, std::string transcript);
  std::string transcribe(const AudioClip& clip) override;  // "" when unknown

 private:
  std::mutex mu_;
  std::map<std::string, std::string> table_;
};

/// 220 Hz tone, 0.3 s per whitespace-separated word, 16 kHz.
class StubSpeechSynthesizer final : public SpeechSynthesizer {
 public:
  static constexpr double kSecondsPerWord = 0.3;
  AudioClip synthesize(std::string_view text, std::string_view voice_id) override;
};

/// Replies from a fixed template list indexed by the number of user
/// utterances in the view. Every bot utterance it is shown must be one of its
/// own earlier replies, so feedback text leaking into a view is a
/// ContractViolation.
class StubConversationModel final : public ConversationModel {
 public:
  explicit StubConversationModel(std::vector<std::string> script = {});
  std::string converse(const std::vector<Utterance>& view, const ConversationConfig& config) override;

  std::vector<std::vector<Utterance>> received_views() const;
  std::vector<std::string> received_topics() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> script_;
  std::vector<std::string> produced_;
  std::vector<std::vector<Utterance>> views_;
  std::vector<std::string> topics_;
};

/// Exact-sentence table first, then substring rewrites, then "The " before
/// configured titles. Anything else is returned unchanged.
class StubGrammarCorrector final : public GrammarCorrector {
 public:
  struct Rules {
    std::map<std::string, std::string> exact;
    std::vector<std::pair<std::string, std::string>> substrings;
    std::vector<std::string> titles;
  };
  static Rules default_rules();

  explicit StubGrammarCorrector(Rules rules = default_rules()) : rules_(std::move(rules)) {}
  std::string correct(std::string_view sentence) override;

 private:
  Rules rules_;
};

/// Delegates to a responder and keeps a log of every message list it saw.
class StubLanguageModel final : public LanguageModel {
 public:
  using Responder = std::function<std::string(const std::vector<ChatMessage>&)>;
  /// Canned output shaped after the prompt stage recognized in the last message.
  static std::string default_response(const std::vector<ChatMessage>& messages);

  explicit StubLanguageModel(Responder responder = default_response)
      : responder_(std::move(responder)) {}
  std::string complete(const std::vector<ChatMessage>& messages) override;

  std::vector<std::vector<ChatMessage>> calls() const;
  std::size_t call_count() const;

 private:
  mutable std::mutex mu_;
  Responder responder_;
  std::vector<std::vector<ChatMessage>> calls_;
};

class StubEmotionScorer final : public EmotionScorer {
 public:
  explicit StubEmotionScorer(std::map<std::string, EmotionDistribution> by_fingerprint = {})
      : table_(std::move(by_fingerprint)) {}
  void script(const AudioClip& clip, EmotionDistribution dist);
  EmotionDistribution score(const AudioClip& clip) override;  // uniform when unknown
  std::size_t call_count() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, EmotionDistribution> table_;
  std::size_t calls_ = 0;
};

// ---- configuration ---------------------------------------------------------

struct GatewayConfig {
  std::map<ServiceKind, ServiceEndpoint> endpoints;  // every kind present

  static GatewayConfig all_stub();
  /// {"endpoints": {"asr": {"base_url": ..., "timeout": ..., "max_retries": ...,
  /// "auth_token": ...}, ...}}. Missing kinds default to stub.
  static GatewayConfig from_json(const json& j);
  static GatewayConfig load(const std::filesystem::path& path);

  /// TUTOR_<KIND>_URL and TUTOR_<KIND>_TOKEN override the file.
  void apply_env();
  const ServiceEndpoint& endpoint(ServiceKind k) const { return endpoints.at(k); }
};

/// One instance of every client, stub or HTTP per endpoint.
struct ModelStack {
  std::shared_ptr<SpeechRecognizer> asr;
  std::shared_ptr<SpeechSynthesizer> tts;
  std::shared_ptr<ConversationModel> conversation;
  std::shared_ptr<GrammarCorrector> grammar;
  std::shared_ptr<LanguageModel> empathy;
  std::shared_ptr<LanguageModel> judge;
  std::shared_ptr<EmotionScorer> emotion;
};

/// Stub instances are taken from `stubs` when provided, otherwise default stubs.
ModelStack build_model_stack(const GatewayConfig& config, const ModelStack& stubs = {},
                             std::uint64_t retry_seed = 0);

}  // namespace tutor
