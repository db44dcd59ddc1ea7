// Word-level annotation: non-standardness against standard-word lexicons and
// the chat/regional categorization of every non-standard word.
#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cmcvar/common.hpp"
#include "cmcvar/corpus.hpp"
#include "cmcvar/normalize.hpp"
#include "cmcvar/utf8.hpp"

namespace cmcvar {

struct LexiconSet {
  std::unordered_set<std::string> standard_words;
  std::unordered_set<std::string> names_and_foreign;
  /// Variant -> regions it is attested for (may be empty: region unknown).
  std::unordered_map<std::string, std::vector<Region>> regional_variants;
  std::unordered_set<std::string> chat_forms;
  /// Forced category for a word; always Chat or Regional.
  std::unordered_map<std::string, Category> overrides;

  /// Case-folds every entry and removes override keys from the other sets,
  /// so that an override always supersedes them.
  void finalize() {
    auto fold_set = [](std::unordered_set<std::string>& s) {
      std::unordered_set<std::string> folded;
      for (const std::string& w : s) folded.insert(utf8::to_lower(w));
      s = std::move(folded);
    };
    fold_set(standard_words);
    fold_set(names_and_foreign);
    fold_set(chat_forms);

    std::unordered_map<std::string, std::vector<Region>> regional;
    for (auto& [w, regions] : regional_variants) {
      auto& merged = regional[utf8::to_lower(w)];
      merged.insert(merged.end(), regions.begin(), regions.end());
    }
    for (auto& [w, regions] : regional) {
      std::sort(regions.begin(), regions.end());
      regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
    }
    regional_variants = std::move(regional);

    std::unordered_map<std::string, Category> folded_overrides;
    for (auto& [w, c] : overrides) folded_overrides[utf8::to_lower(w)] = c;
    overrides = std::move(folded_overrides);

    for (const auto& [w, c] : overrides) {
      standard_words.erase(w);
      names_and_foreign.erase(w);
      chat_forms.erase(w);
      regional_variants.erase(w);
    }
  }
};

/// Files making up a LexiconSet. Every list may name several files.
struct LexiconPaths {
  std::vector<std::filesystem::path> standard;
  std::vector<std::filesystem::path> names_and_foreign;
  std::vector<std::filesystem::path> regional;
  std::vector<std::filesystem::path> chat;
  std::vector<std::filesystem::path> overrides;

  std::vector<std::filesystem::path> all() const {
    std::vector<std::filesystem::path> out;
    for (const auto* list : {&standard, &names_and_foreign, &regional, &chat, &overrides})
      out.insert(out.end(), list->begin(), list->end());
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Calls fn(line_no, key, value) for each non-comment line; value is the text
// after the first tab (empty when absent).
template <typename Fn>
void for_each_lexicon_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open lexicon file '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto tab = view.find('\t');
    std::string_view key = trim(view.substr(0, tab));
    std::string_view value = tab == std::string_view::npos ? std::string_view{} : trim(view.substr(tab + 1));
    if (key.empty()) continue;
    fn(line_no, key, value);
  }
}

}  // namespace detail

inline LexiconSet load_lexicons(const LexiconPaths& paths) {
  LexiconSet lex;
  auto load_words = [](const std::vector<std::filesystem::path>& files,
                       std::unordered_set<std::string>& into) {
    for (const auto& f : files)
      detail::for_each_lexicon_line(f, [&](std::size_t, std::string_view key, std::string_view) {
        into.insert(std::string(key));
      });
  };
  load_words(paths.standard, lex.standard_words);
  load_words(paths.names_and_foreign, lex.names_and_foreign);
  load_words(paths.chat, lex.chat_forms);

  for (const auto& f : paths.regional) {
    detail::for_each_lexicon_line(f, [&](std::size_t line_no, std::string_view key,
                                         std::string_view value) {
      auto& regions = lex.regional_variants[std::string(key)];
      std::size_t start = 0;
      while (start < value.size()) {
        auto comma = value.find(',', start);
        std::string_view item = detail::trim(value.substr(start, comma - start));
        if (!item.empty()) {
          auto r = parse_region(item);
          if (!r)
            throw ConfigError(f.string() + ":" + std::to_string(line_no) + ": unknown region '" +
                              std::string(item) + "'");
          regions.push_back(*r);
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
    });
  }

  for (const auto& f : paths.overrides) {
    detail::for_each_lexicon_line(f, [&](std::size_t line_no, std::string_view key,
                                         std::string_view value) {
      Category c;
      if (value == "chat") c = Category::Chat;
      else if (value == "reg") c = Category::Regional;
      else
        throw ConfigError(f.string() + ":" + std::to_string(line_no) +
                          ": override category must be 'chat' or 'reg'");
      lex.overrides[std::string(key)] = c;
    });
  }
  lex.finalize();
  return lex;
}

/// Detector switches for the chat rules; each rule can be tested on its own.
struct ChatRules {
  int flooding_cap = 3;
  bool flooding = true;
  bool digit_substitution = true;
  bool chat_forms = true;
  bool concatenation = true;
};

/// Why a non-standard token received its category.
enum class CategoryReason {
  Override,
  RegionalVariant,
  ChatForm,
  Flooding,
  DigitSubstitution,
  Concatenation,
  DefaultChat,
};

inline std::string_view to_string(CategoryReason r) {
  switch (r) {
    case CategoryReason::Override: return "override";
    case CategoryReason::RegionalVariant: return "regional-variant";
    case CategoryReason::ChatForm: return "chat-form";
    case CategoryReason::Flooding: return "flooding";
    case CategoryReason::DigitSubstitution: return "digit-substitution";
    case CategoryReason::Concatenation: return "concatenation";
    case CategoryReason::DefaultChat: return "default";
  }
  return "?";
}

struct Categorization {
  Category category;
  CategoryReason reason;
};

/// True unless the token is a listed standard word, name or foreign word.
inline bool classify_nonstandard(std::string_view token, const LexiconSet& lex) {
  if (token.empty()) throw DataError("classify_nonstandard: empty token");
  const std::string key(token);
  return !lex.standard_words.contains(key) && !lex.names_and_foreign.contains(key);
}

/// A run of exactly `cap` identical characters: what flood reduction leaves behind.
inline bool has_flooding_run(std::string_view token, int cap) {
  const std::u32string cps = utf8::decode(token);
  int run = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    run = (i > 0 && cps[i] == cps[i - 1]) ? run + 1 : 1;
    const bool run_ends = i + 1 == cps.size() || cps[i + 1] != cps[i];
    if (run_ends && run == cap) return true;
  }
  return false;
}

/// Digits used for their sound inside a word ("w8", "2day").
inline bool has_digit_substitution(std::string_view token) {
  const std::u32string cps = utf8::decode(token);
  bool digit = false, letter = false;
  for (char32_t c : cps) {
    digit = digit || utf8::is_digit(c);
    letter = letter || utf8::is_letter(c);
  }
  return digit && letter;
}

/// Categorizes a non-standard token. Precedence: override, regional
/// variant, chat form or chat rule, then the chat default.
inline Categorization categorize_with_reason(std::string_view token, const LexiconSet& lex,
                                             const ChatRules& rules = {},
                                             bool from_concatenation = false) {
  const std::string key(token);
  if (auto it = lex.overrides.find(key); it != lex.overrides.end())
    return {it->second, CategoryReason::Override};
  if (lex.regional_variants.contains(key)) return {Category::Regional, CategoryReason::RegionalVariant};
  if (rules.chat_forms && lex.chat_forms.contains(key)) return {Category::Chat, CategoryReason::ChatForm};
  if (rules.flooding && has_flooding_run(token, rules.flooding_cap))
    return {Category::Chat, CategoryReason::Flooding};
  if (rules.digit_substitution && has_digit_substitution(token))
    return {Category::Chat, CategoryReason::DigitSubstitution};
  if (rules.concatenation && from_concatenation) return {Category::Chat, CategoryReason::Concatenation};
  return {Category::Chat, CategoryReason::DefaultChat};
}

inline Category categorize(std::string_view token, const LexiconSet& lex, const ChatRules& rules = {},
                           bool from_concatenation = false) {
  return categorize_with_reason(token, lex, rules, from_concatenation).category;
}

struct CategoryCounts {
  std::size_t standard = 0;
  std::size_t chat = 0;
  std::size_t regional = 0;

  std::size_t total() const { return standard + chat + regional; }
  double standard_share() const {
    return total() == 0 ? 0.0 : static_cast<double>(standard) / static_cast<double>(total());
  }
  bool operator==(const CategoryCounts&) const = default;
};

inline CategoryCounts count_categories(const std::vector<TokenRecord>& records) {
  CategoryCounts c;
  for (const TokenRecord& r : records) {
    switch (r.category) {
      case Category::Standard: ++c.standard; break;
      case Category::Chat: ++c.chat; break;
      case Category::Regional: ++c.regional; break;
    }
  }
  return c;
}

struct AnnotateConfig {
  NormalizerConfig normalizer;
  ChatRules rules;
};

inline TokenRecord annotate_token(const WordToken& word, const Post& post, const LexiconSet& lex,
                                  const ChatRules& rules) {
  TokenRecord r;
  r.surface = word.surface;
  r.nonstandard = classify_nonstandard(word.surface, lex);
  r.category = r.nonstandard ? categorize(word.surface, lex, rules, word.from_concatenation)
                             : Category::Standard;
  r.post_id = post.post_id;
  r.author_id = post.author.author_id;
  r.age = post.author.age;
  r.gender = post.author.gender;
  r.region = post.author.region;
  return r;
}

/// One record per normalized word of every post, in post order.
inline std::vector<TokenRecord> annotate_corpus(const std::vector<Post>& posts, const LexiconSet& lex,
                                                const Normalizer& normalizer, const ChatRules& rules) {
  std::vector<TokenRecord> records;
  for (const Post& post : posts)
    for (const WordToken& w : normalizer.tokenize(post.raw_text))
      records.push_back(annotate_token(w, post, lex, rules));
  return records;
}

inline std::vector<TokenRecord> annotate_corpus(const std::vector<Post>& posts, const LexiconSet& lex,
                                                const AnnotateConfig& config = {}) {
  ChatRules rules = config.rules;
  rules.flooding_cap = config.normalizer.flooding_cap;
  return annotate_corpus(posts, lex, Normalizer(config.normalizer), rules);
}

struct AgeProfileRow {
  int age = 0;
  double mean_proportion = 0.0;
  std::size_t authors = 0;
};

/// Per-age mean of per-author non-standard proportions; the aid for placing
/// interior spline knots by inspection.
inline std::vector<AgeProfileRow> age_profile(const std::vector<TokenRecord>& records) {
  if (records.empty()) throw DataError("age_profile: no token records");
  struct Tally {
    int age = 0;
    std::size_t tokens = 0;
    std::size_t nonstandard = 0;
  };
  std::map<std::string, Tally> by_author;
  for (const TokenRecord& r : records) {
    Tally& t = by_author[r.author_id];
    t.age = r.age;
    ++t.tokens;
    if (r.nonstandard) ++t.nonstandard;
  }
  std::map<int, std::pair<double, std::size_t>> by_age;
  for (const auto& [id, t] : by_author) {
    auto& [sum, n] = by_age[t.age];
    sum += static_cast<double>(t.nonstandard) / static_cast<double>(t.tokens);
    ++n;
  }
  std::vector<AgeProfileRow> out;
  for (const auto& [age, acc] : by_age)
    out.push_back({age, acc.first / static_cast<double>(acc.second), acc.second});
  return out;
}

}  // namespace cmcvar
