#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tutor/history.hpp"
#include "tutor/models.hpp"
#include "tutor/prompts.hpp"

namespace tutor {

/// Up to three most recent user utterances, oldest first.
struct ContextSegment {
  std::vector<std::string> utterances;
  std::string joined_text;  // "- u1 - u2 - u3"

  static ContextSegment from_utterances(std::vector<std::string> utterances);
};

inline constexpr std::size_t kSegmentUtterances = 3;

/// Builds the segment from the last (up to) three user utterances, skipping
/// bot turns, replies to feedback, and blank transcripts.
/// Throws Error(NoUserUtterances) when nothing qualifies.
ContextSegment build_segment(std::span<const HistoryEntry> history);

enum class EmpathyStage { Zeroshot, Optimized, Rewrite };
std::string_view to_string(EmpathyStage s);

/// Staged empathetic-feedback generation over a chat-completion model.
class EmpathyGenerator {
 public:
  explicit EmpathyGenerator(LanguageModel& lm, const PromptAssets& prompts = PromptAssets::bundled())
      : lm_(lm), prompts_(prompts) {}

  /// Zeroshot or Optimized: one completion over the stage prompt. Rewrite
  /// takes Optimized output instead of a segment, so it is Error(ContractViolation) here.
  /// Throws Error(EmptyCompletion) for an empty segment (before any call) or blank output.
  std::string generate(const ContextSegment& segment, EmpathyStage stage);

  /// Rewrite stage: the rewrite prompt over `optimized_output`, then the casual
  /// follow-up in the same session. Returns the second completion.
  std::string rewrite(std::string_view optimized_output);

  /// Production path: Optimized, then Rewrite.
  std::string respond(const ContextSegment& segment);

 private:
  std::string call(const std::vector<ChatMessage>& messages);

  LanguageModel& lm_;
  const PromptAssets& prompts_;
};

/// Pulls the field after the last `marker` ("Feedback:", "Output:") out of a
/// DSPy-style completion; returns the trimmed text unchanged if absent.
std::string extract_field(std::string_view completion, std::string_view marker);

struct DesiderataScore {
  bool tailored = false;
  bool empathetic_encouraging = false;
  bool actionable_examples = false;

  int satisfied() const { return int{tailored} + int{empathetic_encouraging} + int{actionable_examples}; }
  double aggregate() const { return 100.0 * satisfied() / 3.0; }
};

/// Question wording for the three desiderata, in score-field order.
const std::vector<std::string>& desiderata_questions();

enum class Verdict { Yes, No, Unparseable };
/// Case-insensitive leading yes/no after trimming.
Verdict parse_verdict(std::string_view reply);

/// Three independent yes/no judgments. An unparseable reply is re-asked once,
/// then Error(UnparseableVerdict).
DesiderataScore judge_desiderata(std::string_view response, const ContextSegment& segment,
                                 LanguageModel& judge,
                                 const PromptAssets& prompts = PromptAssets::bundled());

/// Mean aggregate over items. Throws Error(Empty) for no items.
double corpus_aggregate(std::span<const DesiderataScore> scores);

}  // namespace tutor
