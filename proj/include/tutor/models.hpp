#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tutor/affect.hpp"
#include "tutor/audio.hpp"

namespace tutor {

// Client interfaces for every external model the tutor depends on. Each has a
// deterministic stub and a JSON-over-HTTP implementation in gateway.hpp.

enum class Speaker { User, Bot };
std::string_view to_string(Speaker s);

struct Utterance {
  Speaker speaker = Speaker::User;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

/// One chat-completion message. `role` is "system", "user" or "assistant".
struct ChatMessage {
  std::string role;
  std::string text;

  bool operator==(const ChatMessage&) const = default;
};

struct ConversationConfig {
  std::string topic = "Name a movie that has had an enduring impact on you";
  std::string persona =
      "Emma, a warm and curious woman who loves talking about films with new friends";
  std::vector<std::string> vocabulary{"memorable", "inspire", "plot", "character", "scene"};

  void validate() const;  // Error(InvalidConfig) on an empty topic
};

class SpeechRecognizer {
 public:
  virtual ~SpeechRecognizer() = default;
  virtual std::string transcribe(const AudioClip& clip) = 0;
};

class SpeechSynthesizer {
 public:
  virtual ~SpeechSynthesizer() = default;
  /// Throws Error(ContractViolation) for empty text.
  virtual AudioClip synthesize(std::string_view text, std::string_view voice_id) = 0;
};

class ConversationModel {
 public:
  virtual ~ConversationModel() = default;
  /// `view` must come from conversation_view(): feedback turns are never included.
  virtual std::string converse(const std::vector<Utterance>& view,
                               const ConversationConfig& config) = 0;
};

class GrammarCorrector {
 public:
  virtual ~GrammarCorrector() = default;
  virtual std::string correct(std::string_view sentence) = 0;
};

/// Chat-style completion used for empathetic feedback, judging, and query answers.
/// The message list is the whole session, so chained calls resend history.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

class EmotionScorer {
 public:
  virtual ~EmotionScorer() = default;
  virtual EmotionDistribution score(const AudioClip& clip) = 0;
};

}  // namespace tutor
