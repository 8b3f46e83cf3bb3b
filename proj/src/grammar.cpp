#include "tutor/grammar.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <random>
#include <set>

#include "tutor/assets.hpp"
#include "tutor/error.hpp"

namespace tutor {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80;
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool in_list(std::string_view word, std::initializer_list<std::string_view> list) {
  return std::find(list.begin(), list.end(), word) != list.end();
}

const std::set<std::string, std::less<>>& determiners() {
  static const std::set<std::string, std::less<>> s{"a", "an", "the"};
  return s;
}

const std::set<std::string, std::less<>>& prepositions() {
  static const std::set<std::string, std::less<>> s{
      "about",  "above",  "across", "after",   "against", "along",  "among",   "around",
      "at",     "before", "behind", "below",   "beneath", "beside", "between", "by",
      "down",   "during", "for",    "from",    "in",      "inside", "into",    "near",
      "of",     "off",    "on",     "onto",    "out",     "outside", "over",   "through",
      "to",     "toward", "towards", "under",  "until",   "up",     "upon",    "with",
      "within", "without"};
  return s;
}

// Tokens that usually sit right before a finite verb.
const std::set<std::string, std::less<>>& subject_words() {
  static const std::set<std::string, std::less<>> s{
      "i",      "you",     "he",     "she",    "it",       "we",       "they",      "who",
      "which",  "that",    "this",   "these",  "those",    "there",    "people",    "everyone",
      "everybody", "someone", "somebody", "nobody", "anyone", "man",   "woman",     "men",
      "women",  "boy",     "girl",   "child",  "children", "friend",   "friends",   "student",
      "students", "teacher", "teachers", "mother", "father", "parents", "family",  "story",
      "movie",  "film",    "book",   "he's",   "she's"};
  return s;
}

const std::array<std::string_view, 5> kInflections{"", "s", "es", "ed", "ing"};

bool is_inflection(std::string_view rest) {
  return std::find(kInflections.begin(), kInflections.end(), rest) != kInflections.end();
}

// Both words share a stem of at least four characters and differ only by an
// inflectional ending.
bool inflectional_pair(std::string_view a, std::string_view b) {
  if (a == b) return false;
  std::size_t p = 0;
  while (p < a.size() && p < b.size() && a[p] == b[p]) ++p;
  if (p < 4) return false;
  return is_inflection(a.substr(p)) && is_inflection(b.substr(p));
}

bool is_punct_token(std::string_view t) { return !t.empty() && !is_word_char(t.front()); }

bool all_punct(const std::vector<std::string>& tokens) {
  return std::all_of(tokens.begin(), tokens.end(), [](const auto& t) { return is_punct_token(t); });
}

GrammarErrorType classify(const EditSpan& e, const std::vector<std::string>& original_lower) {
  const auto& bad = e.original_tokens;
  const auto& good = e.corrected_tokens;
  if (all_punct(bad) && all_punct(good)) return GrammarErrorType::Other;

  if (e.op != EditOp::Replace) {
    const auto& toks = e.op == EditOp::Insert ? good : bad;
    if (toks.size() == 1) {
      const auto w = to_lower(toks.front());
      if (determiners().contains(w)) return GrammarErrorType::Determiner;
      if (prepositions().contains(w)) return GrammarErrorType::Preposition;
    }
    return GrammarErrorType::Other;
  }

  if (bad.size() == 1 && good.size() == 1) {
    const auto b = to_lower(bad.front());
    const auto g = to_lower(good.front());
    if (b == g) return GrammarErrorType::Other;  // capitalization only
    if (inflectional_pair(b, g)) {
      const bool after_subject =
          e.original_begin > 0 && subject_words().contains(original_lower[e.original_begin - 1]);
      return after_subject ? GrammarErrorType::VerbForm : GrammarErrorType::NounNumber;
    }
    if (prepositions().contains(b) || prepositions().contains(g)) {
      return GrammarErrorType::Preposition;
    }
  }
  return GrammarErrorType::WordChoice;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::string normalize_for_comparison(std::string_view s) {
  std::string collapsed = join(split_whitespace(s));
  if (!collapsed.empty() && collapsed.back() == '.') collapsed.pop_back();
  return trim(collapsed);
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

bool is_clause_stop(std::string_view lower) { return in_list(lower, {",", ";", ":"}); }

bool is_clause_opener(std::string_view lower) {
  return in_list(lower, {"and", "but", "or", "so", "that", "which", "who", "because", "when"});
}

}  // namespace

// ---------------------------------------------------------------------------

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

std::size_t word_count(std::string_view s) { return split_whitespace(s).size(); }

std::vector<std::string> sentence_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminal(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_terminal(text[j])) ++j;
    if (j < text.size() && !is_space(text[j])) {
      i = j;
      continue;
    }
    std::size_t w = i;
    while (w > start && !is_space(text[w - 1])) --w;
    if (text[i] == '.' && in_list(to_lower(text.substr(w, j - w)), {"mr.", "mrs.", "dr.", "e.g.", "i.e.", "etc."})) {
      i = j;
      continue;
    }
    if (auto s = trim(text.substr(start, j - start)); !s.empty()) out.push_back(std::move(s));
    start = j;
    i = j;
  }
  if (auto s = trim(text.substr(start)); !s.empty()) out.push_back(std::move(s));
  return out;
}

std::vector<Token> tokenize_words(std::string_view sentence) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = sentence.size();
  while (i < n) {
    if (is_space(sentence[i])) {
      ++i;
      continue;
    }
    const std::size_t b = i;
    if (is_word_char(sentence[i])) {
      while (i < n) {
        if (is_word_char(sentence[i])) {
          ++i;
        } else if ((sentence[i] == '\'' || sentence[i] == '-') && i + 1 < n &&
                   is_word_char(sentence[i + 1])) {
          i += 2;
        } else {
          break;
        }
      }
    } else {
      ++i;
    }
    out.push_back({std::string(sentence.substr(b, i - b)), b, i});
  }
  return out;
}

// ---------------------------------------------------------------------------

CorrectionResult validate_correction(std::string_view original, std::string_view corrected) {
  CorrectionResult r;
  r.original = trim(original);
  r.corrected = trim(corrected);
  if (normalize_for_comparison(original) == normalize_for_comparison(corrected)) {
    r.rejection_reason = RejectionReason::NoChange;
  } else if (sentence_tokenize(corrected).size() > 1) {
    r.rejection_reason = RejectionReason::MultiSentence;
  } else {
    r.accepted = true;
  }
  return r;
}

// ---------------------------------------------------------------------------

std::string_view to_string(EditOp op) {
  switch (op) {
    case EditOp::Insert: return "insert";
    case EditOp::Delete: return "delete";
    case EditOp::Replace: return "replace";
  }
  return "?";
}

std::string_view to_string(GrammarErrorType t) {
  switch (t) {
    case GrammarErrorType::Determiner: return "determiner";
    case GrammarErrorType::VerbForm: return "verb_form";
    case GrammarErrorType::NounNumber: return "noun_number";
    case GrammarErrorType::Preposition: return "preposition";
    case GrammarErrorType::WordChoice: return "word_choice";
    case GrammarErrorType::Other: return "other";
  }
  return "?";
}

std::string EditSpan::bad() const { return join(original_tokens); }
std::string EditSpan::good() const { return join(corrected_tokens); }

std::vector<EditSpan> align_edits(std::string_view original, std::string_view corrected) {
  const auto a_tok = tokenize_words(original);
  const auto b_tok = tokenize_words(corrected);
  const std::size_t n = a_tok.size();
  const std::size_t m = b_tok.size();
  std::vector<std::string> a(n), b(m);
  for (std::size_t i = 0; i < n; ++i) a[i] = to_lower(a_tok[i].text);
  for (std::size_t j = 0; j < m; ++j) b[j] = to_lower(b_tok[j].text);

  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }

  // Backtrace from the end: diagonal first keeps matches to the right and
  // pushes edits leftward.
  enum class Step { Match, Replace, Insert, Delete };
  struct Move {
    Step step;
    std::size_t i, j;  // positions before the move
  };
  std::vector<Move> moves;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = a[i - 1] == b[j - 1];
      if (d[i][j] == d[i - 1][j - 1] + (same ? 0 : 1)) {
        const bool exact = a_tok[i - 1].text == b_tok[j - 1].text;
        moves.push_back({same && exact ? Step::Match : Step::Replace, i - 1, j - 1});
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && d[i][j] == d[i][j - 1] + 1) {
      moves.push_back({Step::Insert, i, j - 1});
      --j;
    } else {
      moves.push_back({Step::Delete, i - 1, j});
      --i;
    }
  }
  std::reverse(moves.begin(), moves.end());

  std::vector<EditSpan> spans;
  auto op_of = [](Step s) {
    return s == Step::Insert ? EditOp::Insert : s == Step::Delete ? EditOp::Delete : EditOp::Replace;
  };
  Step open = Step::Match;  // Match: no span is being extended
  for (const auto& mv : moves) {
    if (mv.step == Step::Match) {
      open = Step::Match;
      continue;
    }
    if (open != mv.step) {
      EditSpan s;
      s.op = op_of(mv.step);
      s.original_begin = s.original_end = mv.i;
      s.corrected_begin = s.corrected_end = mv.j;
      spans.push_back(std::move(s));
      open = mv.step;
    }
    auto& s = spans.back();
    if (mv.step != Step::Insert) {
      s.original_tokens.push_back(a_tok[mv.i].text);
      s.original_end = mv.i + 1;
    }
    if (mv.step != Step::Delete) {
      s.corrected_tokens.push_back(b_tok[mv.j].text);
      s.corrected_end = mv.j + 1;
    }
  }
  for (auto& s : spans) s.error_type = classify(s, a);
  return spans;
}

std::vector<std::string> apply_edits(const std::vector<std::string>& original_tokens,
                                     const std::vector<EditSpan>& edits) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (const auto& e : edits) {
    if (e.original_begin < pos || e.original_end > original_tokens.size()) {
      throw Error(ErrorCode::InvalidArgument, "edit script out of order or out of range");
    }
    out.insert(out.end(), original_tokens.begin() + static_cast<std::ptrdiff_t>(pos),
               original_tokens.begin() + static_cast<std::ptrdiff_t>(e.original_begin));
    out.insert(out.end(), e.corrected_tokens.begin(), e.corrected_tokens.end());
    pos = e.original_end;
  }
  out.insert(out.end(), original_tokens.begin() + static_cast<std::ptrdiff_t>(pos),
             original_tokens.end());
  return out;
}

const EditSpan* primary_edit(const std::vector<EditSpan>& edits) {
  if (edits.empty()) return nullptr;
  for (const auto& e : edits) {
    const bool punct_only = all_punct(e.original_tokens) && all_punct(e.corrected_tokens);
    const bool case_only = e.op == EditOp::Replace && to_lower(e.bad()) == to_lower(e.good());
    if (!punct_only && !case_only) return &e;
  }
  return &edits.front();
}

// ---------------------------------------------------------------------------

GrammarTemplates GrammarTemplates::parse(std::string_view text) {
  GrammarTemplates t;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::AssetError, "template line " + std::to_string(line_no) + " has no '='");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "prefix") {
      t.prefixes_.push_back(value);
    } else if (key == "suffix") {
      t.suffixes_.push_back(value);
    } else if (key.starts_with("template.")) {
      t.templates_[key.substr(9)] = value;
    } else {
      throw Error(ErrorCode::AssetError, "unknown template key '" + key + "'");
    }
  }
  if (t.prefixes_.empty() || t.suffixes_.empty()) {
    throw Error(ErrorCode::AssetError, "template file needs at least one prefix and one suffix");
  }
  for (auto type : {GrammarErrorType::Determiner, GrammarErrorType::VerbForm,
                    GrammarErrorType::NounNumber, GrammarErrorType::Preposition,
                    GrammarErrorType::WordChoice, GrammarErrorType::Other}) {
    if (!t.templates_.contains(to_string(type))) {
      throw Error(ErrorCode::AssetError, "missing template for " + std::string(to_string(type)));
    }
  }
  return t;
}

GrammarTemplates GrammarTemplates::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

const GrammarTemplates& GrammarTemplates::bundled() {
  static const GrammarTemplates t = load(asset_dir() / "grammar_templates.txt");
  return t;
}

std::string GrammarTemplates::explain(const EditSpan& edit) const {
  const std::string type(to_string(edit.error_type));
  auto it = templates_.find(type + "." + std::string(to_string(edit.op)));
  if (it == templates_.end()) it = templates_.find(type);
  std::string text = it->second;
  text = replace_all(std::move(text), "{bad}", edit.bad());
  return replace_all(std::move(text), "{good}", edit.good());
}

std::pair<std::size_t, std::size_t> clause_window(std::string_view corrected, const EditSpan& edit) {
  const auto toks = tokenize_words(corrected);
  const std::size_t n = toks.size();
  if (n == 0) return {0, corrected.size()};
  std::vector<std::string> lower(n);
  for (std::size_t i = 0; i < n; ++i) lower[i] = to_lower(toks[i].text);

  std::size_t left = std::min(edit.corrected_begin, n);
  std::size_t right = std::min(std::max(edit.corrected_end, left), n);
  while (left > 0) {
    const auto& t = lower[left - 1];
    if (is_clause_stop(t) || (t.size() == 1 && is_terminal(t[0]))) break;
    --left;
    if (is_clause_opener(t)) break;
  }
  while (right < n) {
    const auto& t = lower[right];
    if (is_clause_stop(t) || is_clause_opener(t) || (t.size() == 1 && is_terminal(t[0]))) break;
    ++right;
  }
  if (left == right) {
    // Deletion squeezed between two boundaries: take the neighbouring tokens.
    if (left > 0) --left;
    if (right < n) ++right;
  }

  auto words_in = [&](std::size_t l, std::size_t r) {
    return word_count(corrected.substr(toks[l].begin, toks[r - 1].end - toks[l].begin));
  };
  const std::size_t anchor_l = std::clamp(edit.corrected_begin, left, right);
  const std::size_t anchor_r = std::clamp(edit.corrected_end, anchor_l, right);
  while (right - left > 1 && words_in(left, right) > kFullRecastMaxWords) {
    // Trim from whichever side has more context beyond the edit.
    if (anchor_l - left >= right - anchor_r && left < anchor_l) {
      ++left;
    } else if (right > anchor_r) {
      --right;
    } else if (left < anchor_l) {
      ++left;
    } else {
      break;
    }
  }
  return {toks[left].begin, toks[right - 1].end};
}

GrammarFeedback render_recast(const CorrectionResult& result, const std::vector<EditSpan>& edits,
                              std::uint64_t rng_seed, const GrammarTemplates& templates) {
  if (!result.accepted) throw Error(ErrorCode::NotAccepted, "correction was rejected");

  std::mt19937_64 rng(rng_seed);
  auto pick = [&rng](const std::vector<std::string>& options) -> const std::string& {
    std::uniform_int_distribution<std::size_t> dist(0, options.size() - 1);
    return options[dist(rng)];
  };

  GrammarFeedback fb;
  fb.confirmation_prefix = pick(templates.prefixes());
  fb.confirmation_suffix = pick(templates.suffixes());

  const std::string& corrected = result.corrected;
  const EditSpan* edit = primary_edit(edits);
  if (word_count(corrected) <= kFullRecastMaxWords || edit == nullptr) {
    fb.quoted = corrected;
    fb.recast_text = fb.confirmation_prefix + " \"" + fb.quoted + "\". ";
  } else {
    const auto [b, e] = clause_window(corrected, *edit);
    fb.quoted = corrected.substr(b, e - b);
    fb.constituent_used = true;
    fb.recast_text = fb.confirmation_prefix + " \"" + fb.quoted + "\"";
    if (!edit->original_tokens.empty()) fb.recast_text += " and not \"" + edit->bad() + "\"";
    fb.recast_text += ". ";
  }
  fb.explanation_text = edit != nullptr ? templates.explain(*edit) : std::string{};
  fb.full_text = fb.recast_text + fb.explanation_text;
  if (!fb.explanation_text.empty()) fb.full_text += ' ';
  fb.full_text += fb.confirmation_suffix;
  return fb;
}

// ---------------------------------------------------------------------------

bool exact_match(std::string_view pred, std::string_view gold) { return trim(pred) == trim(gold); }

bool substring_match(std::string_view pred, std::string_view gold) {
  return pred.find(trim(gold)) != std::string_view::npos;
}

}  // namespace tutor
