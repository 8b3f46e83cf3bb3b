#include "tutor/dialogue.hpp"

#include <random>

#include "tutor/empathy.hpp"
#include "tutor/error.hpp"

namespace tutor {

std::string_view to_string(Speaker s) { return s == Speaker::User ? "user" : "bot"; }

void ConversationConfig::validate() const {
  if (trim(topic).empty()) throw Error(ErrorCode::InvalidConfig, "conversation topic is empty");
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Converse: return "Converse";
    case ActionKind::EmpathyFeedback: return "EmpathyFeedback";
    case ActionKind::GrammarFeedback: return "GrammarFeedback";
    case ActionKind::AnswerQuery: return "AnswerQuery";
    case ActionKind::Transition: return "Transition";
  }
  return "?";
}

std::optional<ActionKind> parse_action_kind(std::string_view name) {
  for (auto k : {ActionKind::Converse, ActionKind::EmpathyFeedback, ActionKind::GrammarFeedback,
                 ActionKind::AnswerQuery, ActionKind::Transition}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void SpacingPolicy::validate() const {
  if (min_gap_grammar < 0 || min_gap_empathy < 0) {
    throw Error(ErrorCode::InvalidConfig, "spacing gaps must be >= 0");
  }
}

bool grammar_gap_ok(const TurnState& state, const SpacingPolicy& policy) {
  return !state.last_grammar_turn || state.turn_index - *state.last_grammar_turn > policy.min_gap_grammar;
}

bool empathy_gap_ok(const TurnState& state, const SpacingPolicy& policy) {
  return !state.last_empathy_turn || state.turn_index - *state.last_empathy_turn > policy.min_gap_empathy;
}

namespace {

bool has_user_material(const TurnState& state, std::string_view transcript) {
  if (!trim(transcript).empty()) return true;
  for (const auto& e : state.conversation_history) {
    if (e.speaker == Speaker::User && !e.has(EntryFlag::FeedbackReply) && !trim(e.text).empty()) {
      return true;
    }
  }
  return false;
}

template <typename T>
const T& pick(const std::vector<T>& options, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, options.size() - 1);
  return options[dist(rng)];
}

}  // namespace

TurnAction decide_turn(const TurnState& state, std::string_view transcript,
                       const DistressDecision& distress, const CorrectionResult& correction,
                       const SpacingPolicy& policy) {
  TurnAction a;
  a.distress = distress;
  a.correction = correction;
  if (state.awaiting_feedback_reply) {
    a.kind = is_feedback_query(transcript) ? ActionKind::AnswerQuery : ActionKind::Transition;
  } else if (distress.distressed && empathy_gap_ok(state, policy) &&
             has_user_material(state, transcript)) {
    a.kind = ActionKind::EmpathyFeedback;
  } else if (correction.accepted && !trim(transcript).empty() && grammar_gap_ok(state, policy)) {
    a.kind = ActionKind::GrammarFeedback;
  } else {
    a.kind = ActionKind::Converse;
  }
  return a;
}

bool is_feedback_query(std::string_view transcript) {
  if (transcript.find('?') == std::string_view::npos) return false;
  const std::string lower = to_lower(transcript);
  for (std::string_view kw : {"grammar", "grammatical", "vocab", "english", "mistake", "example",
                              "sentence"}) {
    if (lower.find(kw) != std::string::npos) return true;
  }
  return false;
}

const std::vector<std::string>& transition_thanks_openers() {
  static const std::vector<std::string> v{"Of course!", "No problem at all.", "Yeah, no problem!",
                                          "No problem!"};
  return v;
}

const std::vector<std::string>& transition_thanks_closers() {
  static const std::vector<std::string> v{"Back to the conversation.", "Back to our convo.",
                                          "Let's go back to chatting.", "Now we circle back."};
  return v;
}

const std::vector<std::string>& transition_plain_prefixes() {
  static const std::vector<std::string> v{"Sounds great.",
                                          "Alright, let's continue our conversation.",
                                          "Great, let's get back to it!",
                                          "Okay let's go back to our conversation.",
                                          "Now back to our conversation.",
                                          "Okay!",
                                          "Lets' go back to our chat.",
                                          "Let's keep chatting."};
  return v;
}

std::string build_transition(std::string_view user_reply, std::string_view cached,
                             std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::string prefix;
  if (to_lower(user_reply).find("thank") != std::string::npos) {
    prefix = pick(transition_thanks_openers(), rng);
    prefix += ' ';
    prefix += pick(transition_thanks_closers(), rng);
  } else {
    prefix = pick(transition_plain_prefixes(), rng);
  }
  return prefix + " " + std::string(cached);
}

std::string answer_query(std::string_view history_window, std::string_view user_query,
                         LanguageModel& lm, const PromptAssets& prompts) {
  if (!is_feedback_query(user_query)) {
    throw Error(ErrorCode::ContractViolation, "not a feedback query");
  }
  const std::string prompt = render_template(
      prompts.text("query"),
      {{"convo", std::string(history_window)}, {"user_query", std::string(user_query)}});
  return trim(lm.complete({{"user", prompt}}));
}

std::string feedback_window(const TurnState& state) {
  const auto& h = state.conversation_history;
  // Walk back to the most recent feedback that opened a sub-dialogue, then one
  // more entry for the user utterance that triggered it.
  std::size_t begin = h.size();
  for (std::size_t i = h.size(); i > 0; --i) {
    const auto& e = h[i - 1];
    if (e.speaker == Speaker::Bot && e.has(EntryFlag::FeedbackTurn)) {
      begin = i - 1;
      if (i >= 2 && !h[i - 2].feedback_related()) {
        begin = i - 2;
        break;
      }
    } else if (!e.feedback_related()) {
      break;
    }
  }
  std::string out;
  for (std::size_t i = begin; i < h.size(); ++i) {
    if (!out.empty()) out += '\n';
    out += h[i].speaker == Speaker::User ? "User: " : "Bot: ";
    out += h[i].text;
  }
  return out;
}

std::vector<Utterance> conversation_view(const TurnState& state) {
  std::vector<Utterance> view;
  for (const auto& e : state.conversation_history) {
    if (e.has(EntryFlag::Transition)) {
      view.push_back({Speaker::Bot, e.conversational_text});
    } else if (!e.feedback_related()) {
      view.push_back({e.speaker, e.text});
    }
  }
  return view;
}

std::uint64_t turn_seed(std::uint64_t session_seed, int turn_index) {
  // splitmix64 finalizer
  std::uint64_t z = session_seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(turn_index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Orchestrator::Orchestrator(DialogueServices services, SpacingPolicy policy, std::uint64_t seed)
    : services_(std::move(services)), policy_(policy), seed_(seed) {
  policy_.validate();
  services_.config.validate();
}

std::string Orchestrator::converse_with(const TurnState& state, std::string_view transcript) {
  auto view = conversation_view(state);
  view.push_back({Speaker::User, std::string(transcript)});
  return trim(services_.conversation.converse(view, services_.config));
}

TurnAction Orchestrator::run_turn(TurnState& state, std::string_view transcript,
                                  const DistressDecision& distress,
                                  const CorrectionResult& correction) {
  TurnAction action = decide_turn(state, transcript, distress, correction, policy_);
  const std::uint64_t seed = turn_seed(seed_, state.turn_index);
  const std::string user_text(transcript);
  constexpr auto kFeedback = static_cast<unsigned>(EntryFlag::FeedbackTurn);
  constexpr auto kReply = static_cast<unsigned>(EntryFlag::FeedbackReply);

  switch (action.kind) {
    case ActionKind::AnswerQuery: {
      action.payload = answer_query(feedback_window(state), transcript, services_.query,
                                    services_.prompts);
      state.conversation_history.push_back({Speaker::User, user_text, kReply, {}});
      state.conversation_history.push_back({Speaker::Bot, action.payload, kFeedback, {}});
      break;
    }
    case ActionKind::Transition: {
      const std::string cached = state.cached_bot_response.value_or(std::string{});
      action.payload = build_transition(transcript, cached, seed);
      action.prefix = action.payload.substr(0, action.payload.size() - cached.size() - 1);
      state.conversation_history.push_back({Speaker::User, user_text, kReply, {}});
      state.conversation_history.push_back(
          {Speaker::Bot, action.payload, static_cast<unsigned>(EntryFlag::Transition), cached});
      state.cached_bot_response.reset();
      state.awaiting_feedback_reply = false;
      break;
    }
    case ActionKind::EmpathyFeedback: {
      auto with_user = state.conversation_history;
      with_user.push_back({Speaker::User, user_text, 0, {}});
      EmpathyGenerator generator(services_.empathy, services_.prompts);
      action.payload = generator.respond(build_segment(with_user));
      std::string cached = converse_with(state, transcript);
      state.conversation_history = std::move(with_user);
      state.conversation_history.push_back({Speaker::Bot, action.payload, kFeedback, {}});
      state.cached_bot_response = std::move(cached);
      state.awaiting_feedback_reply = true;
      state.last_empathy_turn = state.turn_index;
      break;
    }
    case ActionKind::GrammarFeedback: {
      const auto edits = align_edits(correction.original, correction.corrected);
      const auto fb = render_recast(correction, edits, seed, services_.templates);
      std::string cached = converse_with(state, transcript);
      action.payload = fb.full_text;
      action.prefix = fb.confirmation_prefix;
      action.constituent_used = fb.constituent_used;
      state.conversation_history.push_back({Speaker::User, user_text, 0, {}});
      state.conversation_history.push_back({Speaker::Bot, action.payload, kFeedback, {}});
      state.cached_bot_response = std::move(cached);
      state.awaiting_feedback_reply = true;
      state.last_grammar_turn = state.turn_index;
      break;
    }
    case ActionKind::Converse: {
      action.payload = converse_with(state, transcript);
      state.conversation_history.push_back({Speaker::User, user_text, 0, {}});
      state.conversation_history.push_back({Speaker::Bot, action.payload, 0, {}});
      break;
    }
  }
  ++state.turn_index;
  return action;
}

}  // namespace tutor
