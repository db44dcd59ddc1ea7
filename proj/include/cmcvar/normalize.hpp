// Post normalization: stripping of links, e-mail addresses, phone numbers and
// emoticons, punctuation removal, concatenation splitting, lowercasing and
// flood reduction, plus the eligibility filters applied before balancing.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "cmcvar/common.hpp"
#include "cmcvar/corpus.hpp"
#include "cmcvar/rng.hpp"
#include "cmcvar/utf8.hpp"

namespace cmcvar {

inline const std::vector<std::string>& default_strip_patterns() {
  static const std::vector<std::string> patterns{
      // hyperlinks: tokens starting with http or www., or containing ://
      R"((^|\s)(http|www\.)\S*|\S*://\S*)",
      // e-mail addresses
      R"([^\s@]+@[^\s@]+\.[^\s@]+)",
      // phone numbers: at least seven digits, separators + - . ( ) and space
      R"(\+?\(?\d([\-.() ]*\d){6,}\)?)",
  };
  return patterns;
}

inline const std::vector<std::string>& default_emoticons() {
  static const std::vector<std::string> emoticons{
      ":-)", ":)", ":-(", ":(", ";-)", ";)", ":-p", ":p", ";p", ":-d", ":d", "xd", "=d", "=)",
      "=(", ":o", ":-o", ":'(", ":s", ":-s", ":x", ":/", ":-/", ":|", "<3", "^^", "^_^", "-_-",
      "o_o", ":$", ":@"};
  return emoticons;
}

struct NormalizerConfig {
  int flooding_cap = 3;
  int min_words = 3;
  /// ECMAScript regular expressions, applied case-insensitively to the whole
  /// post in order; each match is replaced by a space.
  std::vector<std::string> strip_patterns = default_strip_patterns();
  /// Eyes-mouth sequences, matched case-insensitively inside tokens.
  std::vector<std::string> emoticons = default_emoticons();
  bool split_concatenations = true;

  void validate() const {
    if (flooding_cap < 2) throw ConfigError("flooding_cap must be >= 2");
    if (min_words < 1) throw ConfigError("min_words must be >= 1");
  }
};

/// Caps every run of identical characters at `cap` repetitions.
inline std::u32string flood_reduce(std::u32string_view token, int cap) {
  if (cap < 2) throw ConfigError("flood_reduce: cap must be >= 2");
  std::u32string out;
  out.reserve(token.size());
  int run = 0;
  for (std::size_t i = 0; i < token.size(); ++i) {
    run = (i > 0 && token[i] == token[i - 1]) ? run + 1 : 1;
    if (run <= cap) out.push_back(token[i]);
  }
  return out;
}

inline std::string flood_reduce(std::string_view token, int cap = 3) {
  return utf8::encode(flood_reduce(utf8::decode(token), cap));
}

/// Splits a CamelCase run-together token ("ZieJeMorgen") at every
/// lowercase-to-uppercase boundary. Returns an empty vector when the token
/// has fewer than two interior capitals or fewer than two parts result.
inline std::vector<std::string> detect_concatenation(std::string_view raw_token) {
  const std::u32string cps = utf8::decode(raw_token);
  std::size_t interior_upper = 0;
  for (std::size_t i = 1; i < cps.size(); ++i)
    if (utf8::is_upper(cps[i])) ++interior_upper;
  if (interior_upper < 2) return {};

  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 1; i < cps.size(); ++i) {
    if (utf8::is_lower(cps[i - 1]) && utf8::is_upper(cps[i])) {
      parts.push_back(utf8::encode(cps.substr(start, i - start)));
      start = i;
    }
  }
  parts.push_back(utf8::encode(cps.substr(start)));
  if (parts.size() < 2) return {};
  return parts;
}

/// A normalized word plus the provenance flags annotation needs.
struct WordToken {
  std::string surface;
  bool from_concatenation = false;

  bool operator==(const WordToken&) const = default;
};

class Normalizer {
 public:
  explicit Normalizer(NormalizerConfig config = {}) : config_(std::move(config)) {
    config_.validate();
    for (const std::string& p : config_.strip_patterns) {
      try {
        patterns_.emplace_back(p, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
      } catch (const std::regex_error& e) {
        throw ConfigError("invalid strip pattern '" + p + "': " + e.what());
      }
    }
    for (const std::string& e : config_.emoticons) {
      if (!e.empty()) emoticons_.push_back(utf8::to_lower(utf8::decode(e)));
    }
  }

  const NormalizerConfig& config() const { return config_; }

  std::vector<WordToken> tokenize(std::string_view raw_text) const {
    std::string text(raw_text);
    for (const std::regex& re : patterns_) text = std::regex_replace(text, re, " ");

    std::vector<WordToken> out;
    const std::u32string cps = utf8::decode(text);
    std::size_t i = 0;
    while (i < cps.size()) {
      while (i < cps.size() && utf8::is_space(cps[i])) ++i;
      std::size_t j = i;
      while (j < cps.size() && !utf8::is_space(cps[j])) ++j;
      if (j > i) process_chunk(cps.substr(i, j - i), out);
      i = j;
    }
    return out;
  }

  std::vector<std::string> normalize(std::string_view raw_text) const {
    std::vector<std::string> words;
    for (WordToken& t : tokenize(raw_text)) words.push_back(std::move(t.surface));
    return words;
  }

  std::size_t word_count(std::string_view raw_text) const { return tokenize(raw_text).size(); }

 private:
  static bool is_apostrophe(char32_t c) { return c == '\'' || c == 0x2019 || c == 0x2018; }

  static bool is_joiner(char32_t c) { return is_apostrophe(c) || c == '-'; }

  void blank_emoticons(std::u32string& chunk) const {
    const std::u32string lowered = utf8::to_lower(chunk);
    for (const std::u32string& e : emoticons_) {
      std::size_t pos = 0;
      while ((pos = lowered.find(e, pos)) != std::u32string::npos) {
        const std::size_t end = pos + e.size();
        bool ok = true;
        if (utf8::is_alnum(e.front()) && pos > 0 && utf8::is_alnum(lowered[pos - 1])) ok = false;
        if (utf8::is_alnum(e.back()) && end < lowered.size() && utf8::is_alnum(lowered[end]))
          ok = false;
        if (ok)
          for (std::size_t k = pos; k < end; ++k) chunk[k] = ' ';
        pos += 1;
      }
    }
  }

  // One whitespace-delimited chunk of the stripped text.
  void process_chunk(std::u32string chunk, std::vector<WordToken>& out) const {
    blank_emoticons(chunk);
    std::size_t i = 0;
    while (i < chunk.size()) {
      while (i < chunk.size() && chunk[i] == ' ') ++i;
      std::size_t j = i;
      while (j < chunk.size() && chunk[j] != ' ') ++j;
      if (j > i) process_token(chunk.substr(i, j - i), out);
      i = j;
    }
  }

  void process_token(const std::u32string& token, std::vector<WordToken>& out) const {
    // Tokens made only of punctuation and symbols are emoticons or noise.
    if (std::none_of(token.begin(), token.end(), utf8::is_alnum)) return;

    std::size_t first = 0, last = token.size();
    while (first < last && !utf8::is_alnum(token[first])) ++first;
    while (last > first && !utf8::is_alnum(token[last - 1])) --last;
    const std::u32string trimmed = token.substr(first, last - first);

    std::vector<std::string> parts;
    if (config_.split_concatenations) parts = detect_concatenation(utf8::encode(trimmed));
    const bool concatenated = !parts.empty();
    if (!concatenated) parts.push_back(utf8::encode(trimmed));

    for (const std::string& part : parts) emit_words(utf8::decode(part), concatenated, out);
  }

  // Removes punctuation (keeping word-internal apostrophes and hyphens),
  // lowercases and flood-reduces.
  void emit_words(const std::u32string& part, bool concatenated, std::vector<WordToken>& out) const {
    std::u32string cleaned;
    cleaned.reserve(part.size());
    for (std::size_t k = 0; k < part.size(); ++k) {
      char32_t c = part[k];
      if (utf8::is_alnum(c)) {
        cleaned.push_back(utf8::to_lower(c));
      } else if (is_joiner(c) && k > 0 && k + 1 < part.size() && utf8::is_alnum(part[k - 1]) &&
                 utf8::is_alnum(part[k + 1])) {
        cleaned.push_back(is_apostrophe(c) ? U'\'' : c);
      } else {
        cleaned.push_back(' ');
      }
    }
    std::size_t i = 0;
    while (i < cleaned.size()) {
      while (i < cleaned.size() && cleaned[i] == ' ') ++i;
      std::size_t j = i;
      while (j < cleaned.size() && cleaned[j] != ' ') ++j;
      if (j > i) {
        out.push_back(WordToken{
            utf8::encode(flood_reduce(std::u32string_view(cleaned).substr(i, j - i),
                                      config_.flooding_cap)),
            concatenated});
      }
      i = j;
    }
  }

  NormalizerConfig config_;
  std::vector<std::regex> patterns_;
  std::vector<std::u32string> emoticons_;
};

inline std::vector<std::string> normalize_post(std::string_view raw_text,
                                               const NormalizerConfig& config = {}) {
  return Normalizer(config).normalize(raw_text);
}

/// Keeps posts with at least `min_words` normalized words and then exactly
/// one post per author, chosen uniformly among that author's eligible posts.
/// The choice for an author depends only on (seed, author_id, that author's
/// post ids), so it does not change with input order. Output is sorted by
/// author_id.
inline std::vector<Post> select_eligible(const std::vector<Post>& posts, const Normalizer& normalizer,
                                         std::uint64_t seed) {
  std::map<std::string, std::vector<const Post*>> by_author;
  const auto min_words = static_cast<std::size_t>(normalizer.config().min_words);
  for (const Post& p : posts)
    if (normalizer.word_count(p.raw_text) >= min_words) by_author[p.author.author_id].push_back(&p);

  std::vector<Post> selected;
  selected.reserve(by_author.size());
  for (auto& [author_id, candidates] : by_author) {
    std::sort(candidates.begin(), candidates.end(),
              [](const Post* a, const Post* b) { return a->post_id < b->post_id; });
    Rng rng(derive_seed(seed, "select:" + author_id));
    selected.push_back(*candidates[rng.below(candidates.size())]);
  }
  return selected;
}

inline std::vector<Post> select_eligible(const std::vector<Post>& posts,
                                         const NormalizerConfig& config, std::uint64_t seed) {
  return select_eligible(posts, Normalizer(config), seed);
}

}  // namespace cmcvar
