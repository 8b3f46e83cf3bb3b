#pragma once

#include <string>

#include "tutor/models.hpp"

namespace tutor {

enum class EntryFlag : unsigned {
  FeedbackTurn = 1u << 0,   // bot grammar/empathy feedback or a query answer
  FeedbackReply = 1u << 1,  // user turn answering feedback
  Transition = 1u << 2,     // bot turn returning to the cached conversation
};

/// One line of the dialogue transcript as the orchestrator keeps it.
struct HistoryEntry {
  Speaker speaker = Speaker::User;
  std::string text;
  unsigned flags = 0;
  // For Transition entries: the cached conversational reply, without the prefix.
  std::string conversational_text;

  bool has(EntryFlag f) const { return (flags & static_cast<unsigned>(f)) != 0; }
  bool feedback_related() const {
    return has(EntryFlag::FeedbackTurn) || has(EntryFlag::FeedbackReply);
  }
};

}  // namespace tutor
