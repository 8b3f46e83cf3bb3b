#include "tutor/empathy.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "tutor/error.hpp"
#include "tutor/grammar.hpp"

namespace tutor {

ContextSegment ContextSegment::from_utterances(std::vector<std::string> utterances) {
  ContextSegment seg;
  seg.utterances = std::move(utterances);
  for (const auto& u : seg.utterances) {
    if (!seg.joined_text.empty()) seg.joined_text += ' ';
    seg.joined_text += "- " + u;
  }
  return seg;
}

ContextSegment build_segment(std::span<const HistoryEntry> history) {
  std::vector<std::string> picked;
  for (auto it = history.rbegin(); it != history.rend() && picked.size() < kSegmentUtterances; ++it) {
    if (it->speaker != Speaker::User || it->has(EntryFlag::FeedbackReply)) continue;
    auto text = trim(it->text);
    if (!text.empty()) picked.push_back(std::move(text));
  }
  if (picked.empty()) throw Error(ErrorCode::NoUserUtterances, "no user utterances to summarize");
  std::reverse(picked.begin(), picked.end());
  return ContextSegment::from_utterances(std::move(picked));
}

std::string_view to_string(EmpathyStage s) {
  switch (s) {
    case EmpathyStage::Zeroshot: return "zeroshot";
    case EmpathyStage::Optimized: return "optimized";
    case EmpathyStage::Rewrite: return "rewrite";
  }
  return "?";
}

std::string extract_field(std::string_view completion, std::string_view marker) {
  const auto pos = completion.rfind(marker);
  if (pos == std::string_view::npos) return trim(completion);
  return trim(completion.substr(pos + marker.size()));
}

std::string EmpathyGenerator::call(const std::vector<ChatMessage>& messages) {
  std::string out = trim(lm_.complete(messages));
  if (out.empty()) throw Error(ErrorCode::EmptyCompletion, "language model returned nothing");
  return out;
}

std::string EmpathyGenerator::generate(const ContextSegment& segment, EmpathyStage stage) {
  if (stage == EmpathyStage::Rewrite) {
    throw Error(ErrorCode::ContractViolation, "the rewrite stage consumes optimized output");
  }
  if (trim(segment.joined_text).empty()) {
    throw Error(ErrorCode::EmptyCompletion, "empty context segment");
  }
  const std::string prompt =
      render_template(prompts_.text(to_string(stage)), {{"convo", segment.joined_text}});
  const std::string raw = call({{"user", prompt}});
  const std::string field =
      extract_field(raw, stage == EmpathyStage::Optimized ? "Feedback:" : "Output:");
  if (field.empty()) throw Error(ErrorCode::EmptyCompletion, "completion has an empty answer field");
  return field;
}

std::string EmpathyGenerator::rewrite(std::string_view optimized_output) {
  if (trim(optimized_output).empty()) {
    throw Error(ErrorCode::EmptyCompletion, "nothing to rewrite");
  }
  std::vector<ChatMessage> session{
      {"user", render_template(prompts_.text("rewrite"),
                               {{"empathetic_output", std::string(optimized_output)}})}};
  const std::string first = call(session);
  session.push_back({"assistant", first});
  session.push_back({"user", prompts_.text("rewrite_followup")});
  return call(session);
}

std::string EmpathyGenerator::respond(const ContextSegment& segment) {
  return rewrite(generate(segment, EmpathyStage::Optimized));
}

const std::vector<std::string>& desiderata_questions() {
  static const std::vector<std::string> q{
      "Is the feedback tailored to the user, referring to what they actually said?",
      "Is the feedback empathetic and encouraging?",
      "Does the feedback include actionable feedback or specific examples the user can learn "
      "from?",
  };
  return q;
}

Verdict parse_verdict(std::string_view reply) {
  const std::string t = to_lower(trim(reply));
  auto word_at_start = [&t](std::string_view w) {
    return t.starts_with(w) &&
           (t.size() == w.size() || std::isalpha(static_cast<unsigned char>(t[w.size()])) == 0);
  };
  if (word_at_start("yes")) return Verdict::Yes;
  if (word_at_start("no")) return Verdict::No;
  return Verdict::Unparseable;
}

DesiderataScore judge_desiderata(std::string_view response, const ContextSegment& segment,
                                 LanguageModel& judge, const PromptAssets& prompts) {
  std::array<bool, 3> verdicts{};
  const auto& questions = desiderata_questions();
  for (std::size_t k = 0; k < questions.size(); ++k) {
    std::vector<ChatMessage> session{
        {"user", render_template(prompts.text("judge"), {{"convo", segment.joined_text},
                                                          {"response", std::string(response)},
                                                          {"criterion", questions[k]}})}};
    std::string reply = judge.complete(session);
    Verdict v = parse_verdict(reply);
    if (v == Verdict::Unparseable) {
      session.push_back({"assistant", reply});
      session.push_back({"user", "Answer yes or no."});
      reply = judge.complete(session);
      v = parse_verdict(reply);
    }
    if (v == Verdict::Unparseable) {
      throw Error(ErrorCode::UnparseableVerdict, "judge replied '" + trim(reply) + "'");
    }
    verdicts[k] = v == Verdict::Yes;
  }
  return {verdicts[0], verdicts[1], verdicts[2]};
}

double corpus_aggregate(std::span<const DesiderataScore> scores) {
  if (scores.empty()) throw Error(ErrorCode::Empty, "no scored items");
  double sum = 0.0;
  for (const auto& s : scores) sum += s.aggregate();
  return sum / static_cast<double>(scores.size());
}

}  // namespace tutor
