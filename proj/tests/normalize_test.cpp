#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cmcvar/normalize.hpp"
#include "cmcvar/utf8.hpp"
#include "test_util.hpp"

using namespace cmcvar;
using Words = std::vector<std::string>;

namespace {

// Longest run of identical code points, computed independently of flood_reduce.
std::size_t longest_run(const std::string& s) {
  const auto cps = utf8::decode(s);
  std::size_t best = 0;
  for (std::size_t i = 0; i < cps.size();) {
    std::size_t j = i;
    while (j < cps.size() && cps[j] == cps[i]) ++j;
    best = std::max(best, j - i);
    i = j;
  }
  return best;
}

Post post(const std::string& id, const std::string& author, const std::string& text) {
  return Post{id, AuthorMeta{author, 16, Gender::Female, Region::Brabant}, text};
}

}  // namespace

TEST(NormalizePost, FloodingCollapsesToThree) { EXPECT_EQ(normalize_post("niiiiice"), Words{"niiice"}); }

TEST(NormalizePost, RunOfThreeUntouched) { EXPECT_EQ(normalize_post("zooo slecht"), (Words{"zooo", "slecht"})); }

TEST(NormalizePost, StripRulesRemoveTheirClass) {
  EXPECT_EQ(normalize_post("Hallo!!! :-) mail me op a@b.be http://x.y"), (Words{"hallo", "mail", "me", "op"}));
}

TEST(NormalizePost, PhoneNumbersAndWwwLinksStripped) {
  EXPECT_EQ(normalize_post("bel 0470 12 34 56 of www.site.be nu"), (Words{"bel", "of", "nu"}));
  EXPECT_EQ(normalize_post("+32 (9) 123-45-67 ok"), Words{"ok"});
}

TEST(NormalizePost, EmoticonsAndPunctuationOnlyTokensDropped) {
  EXPECT_EQ(normalize_post("ja :p ... !!! <3 ;) xD goed"), (Words{"ja", "goed"}));
}

TEST(NormalizePost, WordInternalApostrophesAndHyphensKept) {
  EXPECT_EQ(normalize_post("'t is e-mail da's 'k"), (Words{"t", "is", "e-mail", "da's", "k"}));
}

TEST(NormalizePost, EmptyAndBlankInputGiveNoWords) {
  EXPECT_TRUE(normalize_post("").empty());
  EXPECT_TRUE(normalize_post(" \t\n ").empty());
  EXPECT_TRUE(normalize_post("?!.. :-)").empty());
}

TEST(NormalizePost, ConcatenationSplitIsFlagged) {
  const Normalizer n;
  const auto words = n.tokenize("echt ZieJeMorgen");
  ASSERT_EQ(words.size(), 4u);
  EXPECT_EQ(words[0].surface, "echt");
  EXPECT_FALSE(words[0].from_concatenation);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_TRUE(words[i].from_concatenation);
  EXPECT_EQ(words[1].surface, "zie");
  EXPECT_EQ(words[3].surface, "morgen");
}

TEST(NormalizePost, ConcatenationSplitCanBeDisabled) {
  NormalizerConfig c;
  c.split_concatenations = false;
  EXPECT_EQ(normalize_post("ZieJeMorgen", c), Words{"ziejemorgen"});
}

TEST(NormalizePost, CustomCapApplies) {
  NormalizerConfig c;
  c.flooding_cap = 2;
  EXPECT_EQ(normalize_post("zooo", c), Words{"zoo"});
}

TEST(NormalizerConfig, RejectsBadCaps) {
  NormalizerConfig c;
  c.flooding_cap = 1;
  EXPECT_THROW(Normalizer{c}, ConfigError);
  c.flooding_cap = 3;
  c.min_words = 0;
  EXPECT_THROW(Normalizer{c}, ConfigError);
}

TEST(NormalizePost, OutputLowercaseAndFreeOfStripClasses) {
  testutil::Gen g(11);
  const Normalizer n;
  for (int rep = 0; rep < 500; ++rep) {
    std::string text = g.text(40);
    if (g.coin(0.3)) text += " iemand@test.be";
    if (g.coin(0.3)) text += " http://voorbeeld.be/x";
    if (g.coin(0.3)) text += " :-)";
    for (const std::string& w : n.normalize(text)) {
      ASSERT_FALSE(w.empty());
      EXPECT_EQ(w, utf8::to_lower(w)) << text;
      EXPECT_EQ(w.find('@'), std::string::npos) << text;
      EXPECT_EQ(w.find("://"), std::string::npos) << text;
      EXPECT_EQ(w.find(":-)"), std::string::npos) << text;
      EXPECT_LE(longest_run(w), 3u) << text;
      const auto cps = utf8::decode(w);
      EXPECT_TRUE(std::any_of(cps.begin(), cps.end(), utf8::is_alnum)) << text;
    }
  }
}

TEST(FloodReduce, Examples) {
  EXPECT_EQ(flood_reduce("waaaaarom", 3), "waaarom");
  EXPECT_EQ(flood_reduce("waarom", 3), "waarom");
  EXPECT_EQ(flood_reduce("", 3), "");
  EXPECT_EQ(flood_reduce("ëëëëë", 2), "ëë");
}

TEST(FloodReduce, IdempotentAndBounded) {
  testutil::Gen g(5);
  for (int rep = 0; rep < 1000; ++rep) {
    std::string x;
    const int parts = g.integer(0, 6);
    for (int i = 0; i < parts; ++i) {
      const std::string w = g.word(2);
      const int times = g.integer(1, 7);
      for (int k = 0; k < times; ++k) x += w;
    }
    const int cap = g.integer(2, 5);
    const std::string once = flood_reduce(x, cap);
    EXPECT_EQ(flood_reduce(once, cap), once) << x;
    EXPECT_LE(utf8::decode(once).size(), utf8::decode(x).size());
    EXPECT_LE(longest_run(once), static_cast<std::size_t>(cap));
    if (longest_run(x) <= static_cast<std::size_t>(cap)) {
      EXPECT_EQ(once, x);
    }
  }
}

TEST(DetectConcatenation, SplitsAtLowerUpperBoundaries) {
  EXPECT_EQ(detect_concatenation("WeGaanVanavondUit"), (Words{"We", "Gaan", "Vanavond", "Uit"}));
  EXPECT_EQ(detect_concatenation("IkBenZooBlijO"), (Words{"Ik", "Ben", "Zoo", "Blij", "O"}));
}

TEST(DetectConcatenation, OrdinaryCapitalizationIsNotSplit) {
  EXPECT_TRUE(detect_concatenation("Hallo").empty());
  EXPECT_TRUE(detect_concatenation("ABCdef").empty());
  EXPECT_TRUE(detect_concatenation("McDonald").empty());
  EXPECT_TRUE(detect_concatenation("").empty());
}

TEST(SelectEligible, ShortPostExcluded) {
  const std::vector<Post> posts{post("p1", "a", "twee woorden"), post("p2", "a", "dit zijn er wel vijf")};
  const auto out = select_eligible(posts, NormalizerConfig{}, 7);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].post_id, "p2");
}

TEST(SelectEligible, DeterministicUnderSeed) {
  const std::vector<Post> posts{post("p1", "a", "een twee drie vier"), post("p2", "a", "vier drie twee een")};
  const auto first = select_eligible(posts, NormalizerConfig{}, 99);
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(select_eligible(posts, NormalizerConfig{}, 99), first);
}

TEST(SelectEligible, EmptyInput) { EXPECT_TRUE(select_eligible({}, NormalizerConfig{}, 1).empty()); }

TEST(SelectEligible, BothPostsReachableAcrossSeeds) {
  const std::vector<Post> posts{post("p1", "a", "een twee drie vier"), post("p2", "a", "vier drie twee een")};
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 64; ++s) seen.insert(select_eligible(posts, NormalizerConfig{}, s)[0].post_id);
  EXPECT_EQ(seen.size(), 2u);
}

TEST(SelectEligible, UniqueAuthorsSortedAndOrderInvariant) {
  testutil::Gen g(3);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Post> posts;
    const int n = g.integer(0, 30);
    for (int i = 0; i < n; ++i) {
      std::string text;
      const int words = g.integer(0, 6);
      for (int k = 0; k < words; ++k) text += g.word() + " ";
      posts.push_back(post("p" + std::to_string(i), "a" + std::to_string(g.integer(0, 8)), text));
    }
    const std::uint64_t seed = static_cast<std::uint64_t>(g.integer(0, 1000));
    const auto out = select_eligible(posts, NormalizerConfig{}, seed);
    std::set<std::string> authors;
    for (const Post& p : out) {
      EXPECT_TRUE(authors.insert(p.author.author_id).second);
      EXPECT_GE(normalize_post(p.raw_text).size(), 3u);
    }
    EXPECT_TRUE(std::is_sorted(out.begin(), out.end(),
                               [](const Post& a, const Post& b) { return a.author.author_id < b.author.author_id; }));
    auto shuffled = posts;
    std::shuffle(shuffled.begin(), shuffled.end(), g.eng);
    EXPECT_EQ(select_eligible(shuffled, NormalizerConfig{}, seed), out);
  }
}
