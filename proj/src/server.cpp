#include "tutor/server.hpp"

#include <fstream>
#include <random>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tutor/assets.hpp"
#include "tutor/audio.hpp"
#include "tutor/digest.hpp"
#include "tutor/error.hpp"
#include "tutor/grammar.hpp"

namespace tutor {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config ----------------------------------------------------------------

void SessionConfig::validate() const {
  conversation.validate();
  spacing.validate();
  aggregation.validate();
  pauses.validate();
  if (trim(voice_id).empty()) throw Error(ErrorCode::InvalidConfig, "voice_id is empty");
}

SessionConfig SessionConfig::from_overrides(const json& overrides) {
  return from_overrides(overrides, SessionConfig{});
}

SessionConfig SessionConfig::from_overrides(const json& overrides, const SessionConfig& base) {
  if (!overrides.is_object()) throw Error(ErrorCode::InvalidConfig, "config overrides must be an object");
  SessionConfig c = base;
  try {
    for (const auto& [key, v] : overrides.items()) {
      if (key == "topic") {
        c.conversation.topic = v.get<std::string>();
      } else if (key == "persona") {
        c.conversation.persona = v.get<std::string>();
      } else if (key == "vocabulary") {
        c.conversation.vocabulary = v.get<std::vector<std::string>>();
      } else if (key == "min_gap_grammar") {
        c.spacing.min_gap_grammar = v.get<int>();
      } else if (key == "min_gap_empathy") {
        c.spacing.min_gap_empathy = v.get<int>();
      } else if (key == "aggregation_setup") {
        const auto preset = find_preset(v.get<std::string>());
        if (!preset) throw Error(ErrorCode::InvalidConfig, "unknown aggregation setup " + v.dump());
        const double threshold = c.aggregation.threshold;
        c.aggregation = *preset;
        c.aggregation.threshold = threshold;
      } else if (key == "aggregation_threshold") {
        c.aggregation.threshold = v.get<double>();
      } else if (key == "pause_metric") {
        const auto m = parse_pause_metric(v.get<std::string>());
        if (!m) throw Error(ErrorCode::InvalidConfig, "unknown pause metric " + v.dump());
        c.pauses.metric = *m;
      } else if (key == "pause_threshold") {
        c.pauses.threshold = v.get<double>();
      } else if (key == "pause_direction") {
        const auto d = v.get<std::string>();
        if (d == "at_or_above") {
          c.pauses.direction = ThresholdDirection::AtOrAboveIsPauses;
        } else if (d == "below") {
          c.pauses.direction = ThresholdDirection::BelowIsPauses;
        } else {
          throw Error(ErrorCode::InvalidConfig, "pause_direction must be at_or_above or below");
        }
      } else if (key == "voice_id") {
        c.voice_id = v.get<std::string>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

json to_json(const SessionConfig& c) {
  return {{"topic", c.conversation.topic},
          {"persona", c.conversation.persona},
          {"vocabulary", c.conversation.vocabulary},
          {"min_gap_grammar", c.spacing.min_gap_grammar},
          {"min_gap_empathy", c.spacing.min_gap_empathy},
          {"aggregation_setup", c.aggregation.name},
          {"aggregation_threshold", c.aggregation.threshold},
          {"pause_metric", to_string(c.pauses.metric)},
          {"pause_threshold", c.pauses.threshold},
          {"pause_direction",
           c.pauses.direction == ThresholdDirection::AtOrAboveIsPauses ? "at_or_above" : "below"},
          {"voice_id", c.voice_id},
          {"seed", c.seed}};
}

// ---- records ---------------------------------------------------------------

namespace {

std::string now_iso8601() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

json to_json(const TurnRecord& r) {
  json rejection = nullptr;
  if (r.correction.rejection_reason) {
    rejection = *r.correction.rejection_reason == RejectionReason::NoChange ? "no_change" : "multi_sentence";
  }
  return {{"turn_index", r.turn_index},
          {"user_audio_ref", r.user_audio_ref},
          {"transcript", r.transcript},
          {"distress",
           {{"negative_affect", r.distress.negative_affect},
            {"pauses", r.distress.pauses},
            {"distressed", r.distress.distressed},
            {"negative_score", r.distress.negative_score}}},
          {"pause_profile",
           {{"silence_ratio", r.pause_profile.silence_ratio},
            {"pause_rate", r.pause_profile.pause_rate},
            {"avg_pause_length", r.pause_profile.avg_pause_length},
            {"pause_count", r.pause_profile.pause_count},
            {"clip_duration", r.pause_profile.clip_duration}}},
          {"correction",
           {{"original", r.correction.original},
            {"corrected", r.correction.corrected},
            {"accepted", r.correction.accepted},
            {"rejection_reason", rejection}}},
          {"action", r.action ? json(std::string(to_string(*r.action))) : json(nullptr)},
          {"prefix", r.prefix},
          {"bot_text", r.bot_text},
          {"bot_audio_ref", r.bot_audio_ref},
          {"timings_ms", r.timings_ms},
          {"error", optional_json(r.error)},
          {"created_at", r.created_at}};
}

TurnRecord turn_record_from_json(const json& j) {
  try {
    TurnRecord r;
    r.turn_index = j.at("turn_index").get<int>();
    r.user_audio_ref = j.at("user_audio_ref").get<std::string>();
    r.transcript = j.at("transcript").get<std::string>();
    const auto& d = j.at("distress");
    r.distress = {d.at("negative_affect").get<bool>(), d.at("pauses").get<bool>(),
                  d.at("distressed").get<bool>(), d.at("negative_score").get<double>()};
    const auto& p = j.at("pause_profile");
    r.pause_profile = {p.at("silence_ratio").get<double>(), p.at("pause_rate").get<double>(),
                       p.at("avg_pause_length").get<double>(), p.at("pause_count").get<int>(),
                       p.at("clip_duration").get<double>()};
    const auto& c = j.at("correction");
    r.correction.original = c.at("original").get<std::string>();
    r.correction.corrected = c.at("corrected").get<std::string>();
    r.correction.accepted = c.at("accepted").get<bool>();
    if (auto reason = optional_from<std::string>(c, "rejection_reason")) {
      r.correction.rejection_reason =
          *reason == "no_change" ? RejectionReason::NoChange : RejectionReason::MultiSentence;
    }
    if (auto action = optional_from<std::string>(j, "action")) {
      r.action = parse_action_kind(*action);
      if (!r.action) throw Error(ErrorCode::MalformedFile, "unknown action " + *action);
    }
    r.prefix = j.at("prefix").get<std::string>();
    r.bot_text = j.at("bot_text").get<std::string>();
    r.bot_audio_ref = j.at("bot_audio_ref").get<std::string>();
    r.timings_ms = j.at("timings_ms").get<std::map<std::string, double>>();
    r.error = optional_from<std::string>(j, "error");
    r.created_at = j.at("created_at").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("turn record: ") + e.what());
  }
}

json to_json(const TurnState& s) {
  json history = json::array();
  for (const auto& e : s.conversation_history) {
    history.push_back({{"speaker", to_string(e.speaker)},
                       {"text", e.text},
                       {"flags", e.flags},
                       {"conversational_text", e.conversational_text}});
  }
  return {{"turn_index", s.turn_index},
          {"last_grammar_turn", optional_json(s.last_grammar_turn)},
          {"last_empathy_turn", optional_json(s.last_empathy_turn)},
          {"cached_bot_response", optional_json(s.cached_bot_response)},
          {"awaiting_feedback_reply", s.awaiting_feedback_reply},
          {"conversation_history", history}};
}

TurnState turn_state_from_json(const json& j) {
  try {
    TurnState s;
    s.turn_index = j.at("turn_index").get<int>();
    s.last_grammar_turn = optional_from<int>(j, "last_grammar_turn");
    s.last_empathy_turn = optional_from<int>(j, "last_empathy_turn");
    s.cached_bot_response = optional_from<std::string>(j, "cached_bot_response");
    s.awaiting_feedback_reply = j.at("awaiting_feedback_reply").get<bool>();
    for (const auto& e : j.at("conversation_history")) {
      s.conversation_history.push_back(
          {e.at("speaker").get<std::string>() == "user" ? Speaker::User : Speaker::Bot,
           e.at("text").get<std::string>(), e.at("flags").get<unsigned>(),
           e.at("conversational_text").get<std::string>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("turn state: ") + e.what());
  }
}

// ---- audit -----------------------------------------------------------------

AuditResult audit_records(const std::vector<TurnRecord>& records, const SpacingPolicy& policy) {
  AuditResult out;
  auto fail = [&out](std::string msg) {
    out.ok = false;
    out.violations.push_back(std::move(msg));
  };
  std::optional<int> last_grammar, last_empathy, prev_index;
  bool open = false;  // a feedback sub-dialogue is waiting for its transition
  for (const auto& r : records) {
    if (prev_index && r.turn_index <= *prev_index) {
      fail(fmt::format("turn {} does not follow turn {}", r.turn_index, *prev_index));
    }
    prev_index = r.turn_index;
    if (!r.action) continue;
    switch (*r.action) {
      case ActionKind::GrammarFeedback:
      case ActionKind::EmpathyFeedback: {
        const bool grammar = *r.action == ActionKind::GrammarFeedback;
        auto& last = grammar ? last_grammar : last_empathy;
        const int gap = grammar ? policy.min_gap_grammar : policy.min_gap_empathy;
        if (last && r.turn_index - *last <= gap) {
          fail(fmt::format("{} at turn {} only {} turns after turn {}", to_string(*r.action),
                           r.turn_index, r.turn_index - *last, *last));
        }
        if (open) fail(fmt::format("feedback at turn {} while a sub-dialogue is open", r.turn_index));
        last = r.turn_index;
        open = true;
        break;
      }
      case ActionKind::AnswerQuery:
        if (!open) fail(fmt::format("query answer at turn {} outside feedback", r.turn_index));
        break;
      case ActionKind::Transition:
        if (!open) fail(fmt::format("transition at turn {} without pending feedback", r.turn_index));
        open = false;
        break;
      case ActionKind::Converse:
        if (open) fail(fmt::format("conversation at turn {} skipped the pending transition", r.turn_index));
        break;
    }
  }
  return out;
}

ConversationSummary summarize(const std::vector<TurnRecord>& records) {
  ConversationSummary s;
  for (const auto& r : records) {
    ++s.turns;
    if (r.error) ++s.errors;
    if (!r.action) continue;
    switch (*r.action) {
      case ActionKind::GrammarFeedback: ++s.grammar_feedback; break;
      case ActionKind::EmpathyFeedback: ++s.empathy_feedback; break;
      case ActionKind::AnswerQuery: ++s.query_answers; break;
      case ActionKind::Transition: ++s.transitions; break;
      case ActionKind::Converse: break;
    }
  }
  return s;
}

json to_json(const ConversationSummary& s) {
  return {{"turns", s.turns},
          {"grammar_feedback", s.grammar_feedback},
          {"empathy_feedback", s.empathy_feedback},
          {"query_answers", s.query_answers},
          {"transitions", s.transitions},
          {"errors", s.errors}};
}

// ---- events ----------------------------------------------------------------

std::uint64_t EventBroker::subscribe(const std::string& session_id, Callback cb) {
  std::lock_guard lock(mu_);
  const auto token = next_++;
  subs_.emplace(token, std::make_pair(session_id, std::move(cb)));
  return token;
}

void EventBroker::unsubscribe(std::uint64_t token) {
  std::lock_guard lock(mu_);
  subs_.erase(token);
}

void EventBroker::publish(const std::string& session_id, std::string_view stage, std::string_view detail) {
  const json event{{"stage", stage}, {"detail", detail}};
  std::vector<Callback> targets;
  {
    std::lock_guard lock(mu_);
    for (const auto& [_, sub] : subs_) {
      if (sub.first == session_id) targets.push_back(sub.second);
    }
  }
  for (const auto& cb : targets) cb(event);
}

// ---- service ---------------------------------------------------------------

struct TutorService::Session {
  std::string id;
  SessionConfig config;
  std::string created_at;
  fs::path dir;

  std::mutex turn_mu;  // held for a whole turn
  mutable std::mutex data_mu;
  TurnState state;
  std::vector<TurnRecord> records;
};

namespace {

std::string random_session_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  return fmt::format("{:016x}{:016x}", rng(), rng());
}

void append_line(const fs::path& file, const std::string& line) {
  std::ofstream out(file, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::AssetError, "cannot append to " + file.string());
  out << line << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::AssetError, "write failed on " + file.string());
}

std::string store_blob(const fs::path& dir, const std::string& bytes) {
  const std::string sha = sha256_hex(bytes);
  const fs::path file = dir / "audio" / (sha + ".wav");
  if (!fs::exists(file)) write_file_atomic(file, bytes);
  return sha;
}

bool is_transient(const Error& e) {
  return e.code() == ErrorCode::UpstreamUnavailable || e.code() == ErrorCode::Timeout ||
         e.code() == ErrorCode::EmptyCompletion || e.code() == ErrorCode::InvalidDistribution;
}

}  // namespace

TutorService::TutorService(ModelStack models, ServiceOptions options)
    : models_(std::move(models)), options_(std::move(options)) {
  options_.defaults.validate();
  options_.vad.validate();
  fs::create_directories(options_.data_dir);
  load_existing();
}

TutorService::~TutorService() = default;

void TutorService::load_existing() {
  for (const auto& entry : fs::directory_iterator(options_.data_dir)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "session.json")) continue;
    auto s = std::make_shared<Session>();
    s->dir = entry.path();
    const json meta = json::parse(read_text_file(s->dir / "session.json"));
    s->id = meta.at("session_id").get<std::string>();
    s->created_at = meta.at("created_at").get<std::string>();
    s->config = SessionConfig::from_overrides(meta.at("config"));
    if (fs::exists(s->dir / "state.json")) {
      s->state = turn_state_from_json(json::parse(read_text_file(s->dir / "state.json")));
    }
    s->records = read_records(s->dir);
    if (!s->records.empty() && s->records.back().turn_index >= s->state.turn_index) {
      spdlog::warn("session {}: state snapshot is behind its records", s->id);
    }
    sessions_.emplace(s->id, std::move(s));
  }
  if (!sessions_.empty()) spdlog::info("restored {} sessions", sessions_.size());
}

std::vector<TurnRecord> TutorService::read_records(const fs::path& session_dir) {
  std::vector<TurnRecord> out;
  const fs::path file = session_dir / "records.jsonl";
  if (!fs::exists(file)) return out;
  std::ifstream in(file, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(turn_record_from_json(json::parse(line)));
    } catch (const json::parse_error&) {
      // A torn final line from a crash mid-append is ignored.
      spdlog::warn("{}: skipping unparseable record line", file.string());
    }
  }
  return out;
}

std::string TutorService::create_session(const json& overrides) {
  auto s = std::make_shared<Session>();
  s->config = SessionConfig::from_overrides(overrides, options_.defaults);
  s->created_at = now_iso8601();
  {
    std::lock_guard lock(mu_);
    do {
      s->id = random_session_id();
    } while (sessions_.count(s->id) != 0);
    sessions_.emplace(s->id, s);
  }
  s->dir = options_.data_dir / s->id;
  fs::create_directories(s->dir / "audio");
  write_file_atomic(s->dir / "session.json",
                    json{{"session_id", s->id}, {"created_at", s->created_at}, {"config", to_json(s->config)}}
                        .dump(2));
  write_file_atomic(s->dir / "state.json", to_json(s->state).dump());
  spdlog::info("session {} created", s->id);
  return s->id;
}

std::shared_ptr<TutorService::Session> TutorService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::SessionNotFound, "no session " + id);
  return it->second;
}

std::vector<std::string> TutorService::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

TurnRecord TutorService::process_turn(const std::string& session_id, std::string_view audio_bytes) {
  const auto session = find(session_id);
  std::lock_guard turn_lock(session->turn_mu);
  auto& ev = events_;
  using clock = std::chrono::steady_clock;

  TurnRecord rec;
  auto stage_start = clock::now();
  auto lap = [&](const char* stage) {
    const auto now = clock::now();
    rec.timings_ms[stage] = std::chrono::duration<double, std::milli>(now - stage_start).count();
    stage_start = now;
    ev.publish(session_id, stage);
  };

  const AudioClip clip = decode_wav(audio_bytes);
  if (clip.empty()) throw Error(ErrorCode::MalformedFile, "audio has no samples");
  TurnState state;
  {
    std::lock_guard lock(session->data_mu);
    state = session->state;
  }
  rec.turn_index = state.turn_index;
  rec.user_audio_ref = store_blob(session->dir, std::string(audio_bytes));
  rec.created_at = now_iso8601();
  lap("decoded");

  const SessionConfig& cfg = session->config;
  try {
    rec.transcript = trim(models_.asr->transcribe(clip));
    lap("transcribed");

    rec.pause_profile = compute_pause_profile(clip.duration(), detect_speech(clip, options_.vad));
    const EmotionDistribution emotions = models_.emotion->score(clip);
    rec.distress = decide_distress(emotions, rec.pause_profile, cfg.aggregation, cfg.pauses);
    lap("affect");

    // Only ask the corrector when grammar feedback could win this turn.
    const auto pre = decide_turn(state, rec.transcript, rec.distress, {}, cfg.spacing);
    if (pre.kind == ActionKind::Converse && grammar_gap_ok(state, cfg.spacing) && !rec.transcript.empty()) {
      for (const auto& sentence : sentence_tokenize(rec.transcript)) {
        auto result = validate_correction(sentence, models_.grammar->correct(sentence));
        if (result.accepted || rec.correction.original.empty()) rec.correction = result;
        if (result.accepted) break;
      }
      lap("grammar");
    }

    Orchestrator orchestrator(
        DialogueServices{*models_.conversation, *models_.empathy, *models_.empathy, cfg.conversation},
        cfg.spacing, cfg.seed);
    const TurnAction action = orchestrator.run_turn(state, rec.transcript, rec.distress, rec.correction);
    rec.action = action.kind;
    rec.prefix = action.prefix;
    rec.bot_text = action.payload;
    lap("responded");

    rec.bot_audio_ref =
        store_blob(session->dir, encode_wav(models_.tts->synthesize(rec.bot_text, cfg.voice_id)));
    lap("synthesized");
  } catch (const Error& e) {
    if (!is_transient(e)) throw;
    spdlog::error("session {} turn {}: {}", session_id, rec.turn_index, e.what());
    rec.error = e.what();
    rec.action.reset();
    rec.prefix.clear();
    rec.bot_text = kApologyText;
    rec.bot_audio_ref.clear();
    try {
      rec.bot_audio_ref =
          store_blob(session->dir, encode_wav(models_.tts->synthesize(rec.bot_text, cfg.voice_id)));
    } catch (const Error& tts_error) {
      spdlog::warn("apology synthesis failed: {}", tts_error.what());
    }
    // The failed exchange still counts as a turn; the dialogue state is otherwise untouched.
    {
      std::lock_guard lock(session->data_mu);
      state = session->state;
    }
    ++state.turn_index;
    ev.publish(session_id, "error", rec.error.value_or(""));
  }

  append_line(session->dir / "records.jsonl", to_json(rec).dump());
  write_file_atomic(session->dir / "state.json", to_json(state).dump());
  {
    std::lock_guard lock(session->data_mu);
    session->state = std::move(state);
    session->records.push_back(rec);
  }
  ev.publish(session_id, "done", rec.action ? to_string(*rec.action) : "error");
  return rec;
}

std::vector<TurnRecord> TutorService::get_history(const std::string& session_id) const {
  const auto session = find(session_id);
  std::lock_guard lock(session->data_mu);
  return session->records;
}

TurnState TutorService::state(const std::string& session_id) const {
  const auto session = find(session_id);
  std::lock_guard lock(session->data_mu);
  return session->state;
}

SessionConfig TutorService::config(const std::string& session_id) const {
  return find(session_id)->config;
}

// ---- REST routing ----------------------------------------------------------

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SessionNotFound: return 404;
    case ErrorCode::UnsupportedEncoding: return 415;
    case ErrorCode::MalformedFile:
    case ErrorCode::ZeroDuration:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument: return 400;
    case ErrorCode::UpstreamUnavailable:
    case ErrorCode::Timeout: return 502;
    default: return 500;
  }
}

std::vector<std::string_view> path_parts(std::string_view target) {
  if (const auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (pos < target.size()) {
    const auto slash = target.find('/', pos);
    const auto end = slash == std::string_view::npos ? target.size() : slash;
    if (end > pos) parts.push_back(target.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

}  // namespace

RestResponse handle_rest(TutorService& service, std::string_view method, std::string_view target,
                         std::string_view body) {
  try {
    const auto parts = path_parts(target);
    if (method == "GET" && parts.size() == 1 && parts[0] == "healthz") {
      return {200, {{"status", "ok"}}};
    }
    if (!parts.empty() && parts[0] == "sessions") {
      if (method == "POST" && parts.size() == 1) {
        json overrides = json::object();
        if (!trim(body).empty()) {
          try {
            overrides = json::parse(body);
          } catch (const json::parse_error& e) {
            throw Error(ErrorCode::InvalidConfig, e.what());
          }
        }
        return {201, {{"session_id", service.create_session(overrides)}}};
      }
      if (parts.size() == 3) {
        const std::string id(parts[1]);
        if (method == "POST" && parts[2] == "turns") {
          return {200, to_json(service.process_turn(id, body))};
        }
        if (method == "GET" && parts[2] == "history") {
          json records = json::array();
          for (const auto& r : service.get_history(id)) records.push_back(to_json(r));
          return {200, {{"session_id", id}, {"records", records}}};
        }
        if (method == "GET" && parts[2] == "summary") {
          return {200, to_json(summarize(service.get_history(id)))};
        }
      }
    }
    return {404, {{"error", "NotFound"}, {"message", std::string(target)}}};
  } catch (const Error& e) {
    return {status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}}};
  } catch (const std::exception& e) {
    spdlog::error("unhandled error on {} {}: {}", method, target, e.what());
    return {500, {{"error", "Internal"}, {"message", e.what()}}};
  }
}

}  // namespace tutor
