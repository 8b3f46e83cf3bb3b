#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tutor/affect.hpp"
#include "tutor/grammar.hpp"
#include "tutor/history.hpp"
#include "tutor/models.hpp"
#include "tutor/prompts.hpp"

namespace tutor {

enum class ActionKind { Converse, EmpathyFeedback, GrammarFeedback, AnswerQuery, Transition };
std::string_view to_string(ActionKind k);
std::optional<ActionKind> parse_action_kind(std::string_view name);

/// Minimum number of turns that must separate two feedbacks of the same kind:
/// feedback is allowed when (turn_index - last) > min_gap.
struct SpacingPolicy {
  int min_gap_grammar = 2;
  int min_gap_empathy = 4;

  void validate() const;  // Error(InvalidConfig) for negative gaps
};

/// Orchestrator memory for one session. A turn is one user/bot exchange.
struct TurnState {
  int turn_index = 0;
  std::optional<int> last_grammar_turn;
  std::optional<int> last_empathy_turn;
  std::optional<std::string> cached_bot_response;  // set while a feedback sub-dialogue is open
  bool awaiting_feedback_reply = false;
  std::vector<HistoryEntry> conversation_history;
};

struct TurnAction {
  ActionKind kind = ActionKind::Converse;
  std::string payload;
  DistressDecision distress;
  CorrectionResult correction;
  std::string prefix;  // confirmation phrase or transition prefix, when one was used
  bool constituent_used = false;
};

bool grammar_gap_ok(const TurnState& state, const SpacingPolicy& policy);
bool empathy_gap_ok(const TurnState& state, const SpacingPolicy& policy);

/// Chooses the action for this turn. Priority: an open feedback sub-dialogue
/// (query answer or transition), then empathy, then grammar, then conversation.
/// Pure: the payload is left empty.
TurnAction decide_turn(const TurnState& state, std::string_view transcript,
                       const DistressDecision& distress, const CorrectionResult& correction,
                       const SpacingPolicy& policy);

/// "?" present and one of grammar/grammatical/vocab/English/mistake/example/sentence
/// (case-insensitive substring).
bool is_feedback_query(std::string_view transcript);

/// Phrase sets used to prefix the cached reply when returning from feedback.
const std::vector<std::string>& transition_thanks_openers();
const std::vector<std::string>& transition_thanks_closers();
const std::vector<std::string>& transition_plain_prefixes();

/// Prefix + " " + cached. Replies containing "thank" get an acknowledgement pair.
std::string build_transition(std::string_view user_reply, std::string_view cached,
                             std::uint64_t rng_seed);

/// One completion over the query prompt. Error(ContractViolation) if the
/// query does not pass is_feedback_query.
std::string answer_query(std::string_view history_window, std::string_view user_query,
                         LanguageModel& lm, const PromptAssets& prompts = PromptAssets::bundled());

/// The transcript of the open feedback sub-dialogue: the user utterance that
/// triggered it, the feedback, and any query/answer rounds since.
std::string feedback_window(const TurnState& state);

/// History with feedback, feedback replies and query answers removed;
/// transitions contribute only the cached reply they delivered.
std::vector<Utterance> conversation_view(const TurnState& state);

struct DialogueServices {
  ConversationModel& conversation;
  LanguageModel& empathy;
  LanguageModel& query;
  ConversationConfig config;
  const PromptAssets& prompts = PromptAssets::bundled();
  const GrammarTemplates& templates = GrammarTemplates::bundled();
};

/// Drives TurnState through one exchange: decides, renders the payload, and
/// records the turn. If a model call throws, the state is left untouched.
class Orchestrator {
 public:
  Orchestrator(DialogueServices services, SpacingPolicy policy, std::uint64_t seed);

  TurnAction run_turn(TurnState& state, std::string_view transcript,
                      const DistressDecision& distress, const CorrectionResult& correction);

  const SpacingPolicy& policy() const { return policy_; }

 private:
  std::string converse_with(const TurnState& state, std::string_view transcript);

  DialogueServices services_;
  SpacingPolicy policy_;
  std::uint64_t seed_;
};

/// Deterministic per-turn seed.
std::uint64_t turn_seed(std::uint64_t session_seed, int turn_index);

}  // namespace tutor
