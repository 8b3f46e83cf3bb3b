#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tutor/affect.hpp"
#include "tutor/dialogue.hpp"
#include "tutor/gateway.hpp"
#include "tutor/pause.hpp"
#include "tutor/vad.hpp"

namespace tutor {

struct SessionConfig {
  ConversationConfig conversation;
  SpacingPolicy spacing;
  AggregationSetup aggregation = default_aggregation();
  PauseThresholdConfig pauses;
  std::string voice_id = "slt";
  std::uint64_t seed = 0;

  void validate() const;  // Error(InvalidConfig)
  /// Applies overrides on top of `base`. Unknown keys are Error(InvalidConfig).
  static SessionConfig from_overrides(const nlohmann::json& overrides);
  static SessionConfig from_overrides(const nlohmann::json& overrides, const SessionConfig& base);
};
nlohmann::json to_json(const SessionConfig& c);

struct TurnRecord {
  int turn_index = 0;
  std::string user_audio_ref;  // sha256 of the uploaded bytes
  std::string transcript;
  DistressDecision distress;
  PauseProfile pause_profile;
  CorrectionResult correction;
  std::optional<ActionKind> action;  // empty on an error turn
  std::string prefix;
  std::string bot_text;
  std::string bot_audio_ref;
  std::map<std::string, double> timings_ms;
  std::optional<std::string> error;  // "<Code>: message" when an upstream failed
  std::string created_at;            // ISO-8601 UTC
};
nlohmann::json to_json(const TurnRecord& r);
TurnRecord turn_record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TurnState& s);
TurnState turn_state_from_json(const nlohmann::json& j);

inline constexpr const char* kApologyText =
    "Sorry, I ran into a technical problem just now. Could you say that again?";

struct AuditResult {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Replays persisted records against the spacing policy: feedback gaps,
/// strictly increasing turn indices, one transition per feedback sub-dialogue.
AuditResult audit_records(const std::vector<TurnRecord>& records, const SpacingPolicy& policy);

struct ConversationSummary {
  int turns = 0;
  int grammar_feedback = 0;
  int empathy_feedback = 0;
  int query_answers = 0;
  int transitions = 0;
  int errors = 0;
};
ConversationSummary summarize(const std::vector<TurnRecord>& records);
nlohmann::json to_json(const ConversationSummary& s);

/// Turn-processing progress for event subscribers.
class EventBroker {
 public:
  using Callback = std::function<void(const nlohmann::json&)>;
  std::uint64_t subscribe(const std::string& session_id, Callback cb);
  void unsubscribe(std::uint64_t token);
  void publish(const std::string& session_id, std::string_view stage, std::string_view detail = {});

 private:
  std::mutex mu_;
  std::uint64_t next_ = 1;
  std::map<std::uint64_t, std::pair<std::string, Callback>> subs_;
};

struct ServiceOptions {
  std::filesystem::path data_dir = "data";
  SessionConfig defaults;
  VadConfig vad;
};

/// Session lifecycle and the per-turn pipeline. Sessions are independent; turns
/// within a session run one at a time in arrival order of the session lock.
class TutorService {
 public:
  TutorService(ModelStack models, ServiceOptions options);
  ~TutorService();

  std::string create_session(const nlohmann::json& overrides = nlohmann::json::object());
  /// Errors: SessionNotFound, MalformedFile/UnsupportedEncoding (nothing persisted).
  /// Upstream failures become an error-marked apology record.
  TurnRecord process_turn(const std::string& session_id, std::string_view audio_bytes);
  std::vector<TurnRecord> get_history(const std::string& session_id) const;
  TurnState state(const std::string& session_id) const;
  SessionConfig config(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;

  EventBroker& events() { return events_; }
  const ServiceOptions& options() const { return options_; }

  /// Reads records.jsonl back from disk (used by restart tests and audits).
  static std::vector<TurnRecord> read_records(const std::filesystem::path& session_dir);

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  void load_existing();

  ModelStack models_;
  ServiceOptions options_;
  EventBroker events_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

struct RestResponse {
  int status = 200;
  nlohmann::json body;
};

/// Transport-independent routing for the REST surface.
RestResponse handle_rest(TutorService& service, std::string_view method, std::string_view target,
                         std::string_view body);

}  // namespace tutor
