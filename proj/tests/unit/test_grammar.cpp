#include <gtest/gtest.h>

#include <random>

#include "tutor/error.hpp"
#include "tutor/grammar.hpp"

using namespace tutor;

namespace {

std::vector<std::string> texts(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& t : tokenize_words(s)) out.push_back(t.text);
  return out;
}

std::string words(int n, std::string_view stem = "word") {
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += std::string(stem) + std::to_string(i);
  }
  return s;
}

}  // namespace

TEST(SentenceTokenize, Examples) {
  EXPECT_EQ(sentence_tokenize("I like movies. Do you?"),
            (std::vector<std::string>{"I like movies.", "Do you?"}));
  EXPECT_EQ(sentence_tokenize("Love story"), (std::vector<std::string>{"Love story"}));
  EXPECT_EQ(sentence_tokenize("I met Dr. Smith today.").size(), 1u);
  EXPECT_EQ(sentence_tokenize("Apples, pears, etc. are fruit. Yes!").size(), 2u);
  EXPECT_EQ(sentence_tokenize("Wow! Really? Yes.").size(), 3u);
  EXPECT_TRUE(sentence_tokenize("   ").empty());
}

TEST(SentenceTokenize, PeriodWithoutFollowingSpaceDoesNotSplit) {
  EXPECT_EQ(sentence_tokenize("Version 2.5 is out.").size(), 1u);
}

TEST(Tokenize, WordsAndPunctuation) {
  EXPECT_EQ(texts("I didn't watch it, okay?"),
            (std::vector<std::string>{"I", "didn't", "watch", "it", ",", "okay", "?"}));
  const auto toks = tokenize_words("Hi, Bob.");
  ASSERT_EQ(toks.size(), 4u);
  EXPECT_EQ(toks[2].begin, 4u);
  EXPECT_EQ(toks[2].end, 7u);
}

TEST(Validate, Examples) {
  auto r = validate_correction("I like to read book", "I like to read books.");
  EXPECT_TRUE(r.accepted);
  EXPECT_FALSE(r.rejection_reason);

  r = validate_correction("Love story.", "Love story.");
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.rejection_reason, RejectionReason::NoChange);

  r = validate_correction("Love story", "Love story. Maybe I will write a book one of these days.");
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.rejection_reason, RejectionReason::MultiSentence);
}

TEST(Validate, TerminalPeriodAndWhitespaceAreNotChanges) {
  EXPECT_EQ(validate_correction("I like books", "I like books.").rejection_reason,
            RejectionReason::NoChange);
  EXPECT_EQ(validate_correction("I  like books.", " I like books ").rejection_reason,
            RejectionReason::NoChange);
  EXPECT_TRUE(validate_correction("I like books", "I like books!").accepted);
}

TEST(Align, VerbFormReplace) {
  const auto edits = align_edits("who want to marry", "who wants to marry");
  ASSERT_EQ(edits.size(), 1u);
  EXPECT_EQ(edits[0].op, EditOp::Replace);
  EXPECT_EQ(edits[0].bad(), "want");
  EXPECT_EQ(edits[0].good(), "wants");
  EXPECT_EQ(edits[0].error_type, GrammarErrorType::VerbForm);
}

TEST(Align, IdenticalSentencesHaveNoEdits) {
  EXPECT_TRUE(align_edits("Same words here.", "Same words here.").empty());
}

TEST(Align, MissingDeterminerInsert) {
  const auto edits = align_edits("I didn't really watch Godfather", "I didn't really watch The Godfather");
  ASSERT_EQ(edits.size(), 1u);
  EXPECT_EQ(edits[0].op, EditOp::Insert);
  EXPECT_EQ(edits[0].good(), "The");
  EXPECT_EQ(edits[0].original_begin, edits[0].original_end);
  EXPECT_EQ(edits[0].error_type, GrammarErrorType::Determiner);
}

TEST(Align, OtherErrorTypes) {
  auto one = [](std::string_view a, std::string_view b) {
    const auto e = align_edits(a, b);
    EXPECT_FALSE(e.empty());
    return e.empty() ? GrammarErrorType::Other : primary_edit(e)->error_type;
  };
  EXPECT_EQ(one("I like to read book.", "I like to read books."), GrammarErrorType::NounNumber);
  EXPECT_EQ(one("I went in the park.", "I went to the park."), GrammarErrorType::Preposition);
  EXPECT_EQ(one("It was a big movie.", "It was a great movie."), GrammarErrorType::WordChoice);
  EXPECT_EQ(one("I saw the a film.", "I saw a film."), GrammarErrorType::Determiner);
  EXPECT_EQ(one("He walk home.", "He walked home."), GrammarErrorType::VerbForm);
}

TEST(Align, DeleteSpanHasEmptyCorrectedRange) {
  const auto edits = align_edits("I really really like it", "I really like it");
  ASSERT_EQ(edits.size(), 1u);
  EXPECT_EQ(edits[0].op, EditOp::Delete);
  EXPECT_EQ(edits[0].corrected_begin, edits[0].corrected_end);
}

TEST(Align, CaseOnlyChangeIsReplaceOfTypeOther) {
  const auto edits = align_edits("i like it", "I like it");
  ASSERT_EQ(edits.size(), 1u);
  EXPECT_EQ(edits[0].op, EditOp::Replace);
  EXPECT_EQ(edits[0].error_type, GrammarErrorType::Other);
}

TEST(Align, PrimaryEditSkipsPunctuation) {
  const auto edits = align_edits("I like to read book and study English.",
                                 "I like to read books and study English");
  ASSERT_GE(edits.size(), 2u);
  EXPECT_EQ(primary_edit(edits)->good(), "books");
  EXPECT_EQ(primary_edit({}), nullptr);
}

TEST(Align, RoundTripFuzz) {
  const std::vector<std::string> vocab{"I",   "you", "the", "a",    "movie", "movies", "want",
                                       "wants", "to", "go",  "went", "in",    "on",     "at",
                                       "read", "book", "books", ",",  "and",   "but",    "The"};
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> len(1, 14), op(0, 3);
  for (int trial = 0; trial < 1500; ++trial) {
    std::vector<std::string> a;
    for (int i = len(rng); i > 0; --i) a.push_back(vocab[pick(rng)]);
    std::vector<std::string> b = a;
    for (int m = op(rng); m >= 0; --m) {
      std::uniform_int_distribution<std::size_t> at(0, b.size());
      const std::size_t k = at(rng);
      switch (op(rng)) {
        case 0: b.insert(b.begin() + static_cast<long>(k), vocab[pick(rng)]); break;
        case 1: if (k < b.size() && b.size() > 1) b.erase(b.begin() + static_cast<long>(k)); break;
        default: if (k < b.size()) b[k] = vocab[pick(rng)]; break;
      }
    }
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& w : v) s += (s.empty() ? "" : " ") + w;
      return s;
    };
    const std::string sa = join(a), sb = join(b);
    const auto edits = align_edits(sa, sb);
    ASSERT_EQ(apply_edits(texts(sa), edits), texts(sb)) << sa << " -> " << sb;
    std::size_t prev = 0;
    for (const auto& e : edits) {
      ASSERT_GE(e.original_begin, prev);
      ASSERT_LE(e.original_end, texts(sa).size());
      ASSERT_LE(e.corrected_end, texts(sb).size());
      if (e.op == EditOp::Insert) ASSERT_EQ(e.original_begin, e.original_end);
      if (e.op == EditOp::Delete) ASSERT_EQ(e.corrected_begin, e.corrected_end);
      prev = e.original_end;
    }
  }
}

TEST(Templates, BundledHasPhraseSets) {
  const auto& t = GrammarTemplates::bundled();
  EXPECT_EQ(t.prefixes(), (std::vector<std::string>{"I think you meant", "I believe you wanted to say",
                                                    "Perhaps what you meant to say was", "Did you mean"}));
  EXPECT_EQ(t.suffixes(), (std::vector<std::string>{"Does that sound good?", "How does that sound?",
                                                    "Does that sound alright to you?"}));
}

TEST(Templates, ParseErrors) {
  EXPECT_THROW(GrammarTemplates::parse("prefix = a\n"), Error);
  EXPECT_THROW(GrammarTemplates::parse("no equals sign"), Error);
  EXPECT_THROW(GrammarTemplates::parse("bogus = x\n"), Error);
}

TEST(Recast, DeterminerExplanationShape) {
  const std::string original = "I didn't really watch Godfather, the third part.";
  const std::string corrected = "I didn't really watch The Godfather, the third part.";
  const auto result = validate_correction(original, corrected);
  ASSERT_TRUE(result.accepted);
  const auto edits = align_edits(original, corrected);
  bool matched = false;
  for (std::uint64_t seed = 0; seed < 500 && !matched; ++seed) {
    const auto fb = render_recast(result, edits, seed);
    if (fb.confirmation_prefix != "I believe you wanted to say" ||
        fb.confirmation_suffix != "Does that sound alright to you?") {
      continue;
    }
    matched = true;
    EXPECT_EQ(fb.full_text,
              "I believe you wanted to say \"I didn't really watch The Godfather, the third part.\". "
              "You seem to be missing a determiner in this sentence. You should probably add \"The\" "
              "to make the sentence sound more natural. Does that sound alright to you?");
    EXPECT_FALSE(fb.constituent_used);
  }
  EXPECT_TRUE(matched);
}

TEST(Recast, VerbFormExplanation) {
  const auto result = validate_correction("The man who want to marry her came.",
                                          "The man who wants to marry her came.");
  const auto fb = render_recast(result, align_edits(result.original, result.corrected), 1);
  EXPECT_NE(fb.explanation_text.find("The correct verb form here is \"wants\""), std::string::npos);
  EXPECT_NE(fb.explanation_text.find("make your verbs agree with their subjects"), std::string::npos);
  EXPECT_EQ(fb.quoted, result.corrected);
}

TEST(Recast, TwentyWordsQuoteWholeSentence) {
  const std::string orig = words(19) + " want";
  const std::string corr = words(19) + " wants";
  ASSERT_EQ(word_count(corr), 20u);
  const auto r = validate_correction(orig, corr);
  const auto fb = render_recast(r, align_edits(orig, corr), 3);
  EXPECT_FALSE(fb.constituent_used);
  EXPECT_EQ(fb.quoted, corr);
}

TEST(Recast, TwentyOneWordsQuoteAWindow) {
  const std::string orig = words(20) + " want";
  const std::string corr = words(20) + " wants";
  ASSERT_EQ(word_count(corr), 21u);
  const auto r = validate_correction(orig, corr);
  const auto fb = render_recast(r, align_edits(orig, corr), 3);
  EXPECT_TRUE(fb.constituent_used);
  EXPECT_LT(fb.quoted.size(), corr.size());
  EXPECT_NE(corr.find(fb.quoted), std::string::npos);
  EXPECT_NE(fb.quoted.find("wants"), std::string::npos);
}

TEST(Recast, LongSentenceWindowStopsAtClauseBoundary) {
  const std::string orig =
      "So Truong Du set a rule to the man who want to marry him that he must answer three "
      "questions and then he can marry her.";
  const std::string corr =
      "So Truong Du set a rule to the man who wants to marry him that he must answer three "
      "questions and then he can marry her.";
  const auto r = validate_correction(orig, corr);
  ASSERT_TRUE(r.accepted);
  const auto fb = render_recast(r, align_edits(orig, corr), 9);
  EXPECT_TRUE(fb.constituent_used);
  EXPECT_EQ(fb.quoted, "who wants to marry him");
  EXPECT_NE(fb.recast_text.find("and not \"want\""), std::string::npos);
}

TEST(Recast, QuotedIsAlwaysASubstring) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> n(3, 40);
  for (int i = 0; i < 200; ++i) {
    const int len = n(rng);
    std::uniform_int_distribution<int> at(0, len - 1);
    const int k = at(rng);
    std::string orig, corr;
    for (int w = 0; w < len; ++w) {
      const std::string sep = w == 0 ? "" : (w % 7 == 0 ? ", " : " ");
      orig += sep + (w == k ? "walk" : "w" + std::to_string(w));
      corr += sep + (w == k ? "walked" : "w" + std::to_string(w));
    }
    const auto r = validate_correction(orig, corr);
    ASSERT_TRUE(r.accepted);
    const auto fb = render_recast(r, align_edits(orig, corr), static_cast<std::uint64_t>(i));
    ASSERT_NE(corr.find(fb.quoted), std::string::npos);
    ASSERT_LE(word_count(fb.quoted), kFullRecastMaxWords);
    ASSERT_NE(fb.quoted.find("walked"), std::string::npos) << corr;
    ASSERT_EQ(fb.constituent_used, word_count(corr) > kFullRecastMaxWords);
  }
}

TEST(Recast, DeterministicPerSeed) {
  const auto r = validate_correction("He walk home.", "He walked home.");
  const auto edits = align_edits(r.original, r.corrected);
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_EQ(render_recast(r, edits, s).full_text, render_recast(r, edits, s).full_text);
  }
}

TEST(Recast, RejectedResultThrows) {
  const auto r = validate_correction("Love story.", "Love story.");
  try {
    render_recast(r, {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotAccepted);
  }
}

TEST(Match, ExactAndSubstring) {
  EXPECT_FALSE(exact_match("I like books.", "I like books"));
  EXPECT_TRUE(substring_match("I like books.", "I like books"));
  EXPECT_TRUE(exact_match("x", "x"));
  EXPECT_TRUE(substring_match("x", "x"));
  EXPECT_FALSE(exact_match("I like books. I also hike.", "I like books."));
  EXPECT_TRUE(substring_match("I like books. I also hike.", "I like books."));
  EXPECT_TRUE(exact_match("  padded ", "padded"));
}
