#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tutor {

// ---------------------------------------------------------------------------
// Text utilities

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::size_t word_count(std::string_view s);

/// Splits on . ! ? followed by whitespace. Mr. Mrs. Dr. e.g. i.e. etc. do not
/// end a sentence. Unterminated text is a single sentence.
std::vector<std::string> sentence_tokenize(std::string_view text);

/// A word or punctuation token with its byte range in the source sentence.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Words (letters, digits, inner apostrophes and hyphens) and single
/// punctuation characters.
std::vector<Token> tokenize_words(std::string_view sentence);

// ---------------------------------------------------------------------------
// Correction validation

enum class RejectionReason { NoChange, MultiSentence };

struct CorrectionResult {
  std::string original;
  std::string corrected;
  bool accepted = false;
  std::optional<RejectionReason> rejection_reason;
};

/// Rejects corrections that only differ by whitespace or a terminal period
/// (NoChange) and corrections spanning more than one sentence (MultiSentence).
CorrectionResult validate_correction(std::string_view original, std::string_view corrected);

// ---------------------------------------------------------------------------
// Edit alignment

enum class EditOp { Insert, Delete, Replace };
enum class GrammarErrorType { Determiner, VerbForm, NounNumber, Preposition, WordChoice, Other };

std::string_view to_string(EditOp op);
std::string_view to_string(GrammarErrorType t);

/// One span of the token-level edit script. Token ranges are half-open.
struct EditSpan {
  EditOp op = EditOp::Replace;
  std::size_t original_begin = 0;
  std::size_t original_end = 0;
  std::size_t corrected_begin = 0;
  std::size_t corrected_end = 0;
  GrammarErrorType error_type = GrammarErrorType::Other;
  std::vector<std::string> original_tokens;
  std::vector<std::string> corrected_tokens;

  std::string bad() const;   // original tokens joined by spaces
  std::string good() const;  // corrected tokens joined by spaces
};

/// Minimal token edit script (Levenshtein over lowercased tokens; replace is
/// preferred over insert+delete, and edits are placed leftmost). Consecutive
/// operations of the same kind form one span. Matches that differ only in case
/// become Replace spans of type Other so the script reproduces `corrected`
/// exactly.
std::vector<EditSpan> align_edits(std::string_view original, std::string_view corrected);

/// Applies an edit script to the original token texts.
std::vector<std::string> apply_edits(const std::vector<std::string>& original_tokens,
                                     const std::vector<EditSpan>& edits);

/// The span that drives the explanation: the first one that is not
/// punctuation- or case-only, falling back to the first span.
const EditSpan* primary_edit(const std::vector<EditSpan>& edits);

// ---------------------------------------------------------------------------
// Recast rendering

/// Phrase lists and per-error explanation templates loaded from a keyed text
/// file (`key = value` lines; `#` comments; repeated keys append).
///
///   prefix = I think you meant
///   suffix = Does that sound good?
///   template.verb_form = ... "{bad}" ... "{good}" ...
///   template.determiner.delete = ...     (optional op-specific override)
class GrammarTemplates {
 public:
  static GrammarTemplates load(const std::filesystem::path& path);
  static GrammarTemplates parse(std::string_view text);
  static const GrammarTemplates& bundled();  // assets/grammar_templates.txt

  const std::vector<std::string>& prefixes() const { return prefixes_; }
  const std::vector<std::string>& suffixes() const { return suffixes_; }

  /// Explanation for a span with {bad}/{good} substituted.
  std::string explain(const EditSpan& edit) const;

 private:
  std::vector<std::string> prefixes_;
  std::vector<std::string> suffixes_;
  std::map<std::string, std::string, std::less<>> templates_;
};

struct GrammarFeedback {
  std::string recast_text;
  std::string explanation_text;
  std::string full_text;
  std::string confirmation_prefix;
  std::string confirmation_suffix;
  std::string quoted;  // always a contiguous substring of the corrected sentence
  bool constituent_used = false;
};

inline constexpr std::size_t kFullRecastMaxWords = 20;

/// Clause-like window of `corrected` around `edit`, as a byte range. Grows from
/// the edit to the nearest comma/semicolon, coordinating conjunction or
/// subordinator (a leading conjunction is kept), then trims to at most
/// kFullRecastMaxWords words.
std::pair<std::size_t, std::size_t> clause_window(std::string_view corrected, const EditSpan& edit);

/// Throws Error(NotAccepted) for a rejected result.
GrammarFeedback render_recast(const CorrectionResult& result, const std::vector<EditSpan>& edits,
                              std::uint64_t rng_seed,
                              const GrammarTemplates& templates = GrammarTemplates::bundled());

// ---------------------------------------------------------------------------
// Correction-model scoring

bool exact_match(std::string_view pred, std::string_view gold);
bool substring_match(std::string_view pred, std::string_view gold);

}  // namespace tutor
