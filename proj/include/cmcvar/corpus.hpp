// Corpus data model and the two on-disk formats: JSON-lines post corpora and
// tab-separated token tables.
#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "cmcvar/common.hpp"

namespace cmcvar {

inline constexpr int kMinimumPlatformAge = 13;

struct AuthorMeta {
  std::string author_id;
  int age = 0;
  Gender gender = Gender::Female;
  Region region = Region::Brabant;

  bool operator==(const AuthorMeta&) const = default;
};

struct Post {
  std::string post_id;
  AuthorMeta author;
  std::string raw_text;

  bool operator==(const Post&) const = default;
};

/// One normalized word occurrence; the unit of observation of both analyses.
struct TokenRecord {
  std::string surface;
  bool nonstandard = false;
  Category category = Category::Standard;
  std::string post_id;
  std::string author_id;
  int age = 0;
  Gender gender = Gender::Female;
  Region region = Region::Brabant;

  bool operator==(const TokenRecord&) const = default;
};

inline constexpr std::string_view kTokenTableHeader =
    "surface\tnonstandard\tcategory\tpost_id\tauthor_id\tage\tgender\tregion";

namespace detail {

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view s, std::size_t line_no) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 1 >= s.size())
      throw DataError("token table line " + std::to_string(line_no) + ": dangling escape");
    switch (s[++i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default:
        throw DataError("token table line " + std::to_string(line_no) + ": unknown escape");
    }
  }
  return out;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

inline bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace detail

/// Parses a JSON-lines corpus. Blank lines are skipped; every other line must
/// be one post record. Errors name the 1-based line number and the field.
inline std::vector<Post> parse_corpus(std::istream& in) {
  std::vector<Post> posts;
  std::unordered_set<std::string> post_ids;
  std::unordered_map<std::string, AuthorMeta> authors;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    const std::string where = "corpus line " + std::to_string(line_no);

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(where + ": record is not a JSON object");

    auto string_field = [&](const char* name) -> std::string {
      auto it = j.find(name);
      if (it == j.end()) throw DataError(where + ": missing field '" + name + "'");
      if (!it->is_string()) throw DataError(where + ": field '" + name + "' is not a string");
      return it->get<std::string>();
    };

    Post post;
    post.post_id = string_field("post_id");
    post.author.author_id = string_field("author_id");
    if (post.post_id.empty()) throw DataError(where + ": field 'post_id' is empty");
    if (post.author.author_id.empty()) throw DataError(where + ": field 'author_id' is empty");

    auto age_it = j.find("age");
    if (age_it == j.end()) throw DataError(where + ": missing field 'age'");
    if (!age_it->is_number_integer())
      throw DataError(where + ": field 'age' is not an integer");
    post.author.age = age_it->get<int>();
    if (post.author.age < kMinimumPlatformAge)
      throw DataError(where + ": field 'age' is below " + std::to_string(kMinimumPlatformAge));

    const std::string gender = string_field("gender");
    auto g = parse_gender(gender);
    if (!g) throw DataError(where + ": field 'gender' has unknown value '" + gender + "'");
    post.author.gender = *g;

    const std::string region = string_field("region");
    auto r = parse_region(region);
    if (!r) throw DataError(where + ": field 'region' has unknown value '" + region + "'");
    post.author.region = *r;

    post.raw_text = string_field("text");

    if (!post_ids.insert(post.post_id).second)
      throw DataError(where + ": duplicate post_id '" + post.post_id + "'");
    auto [it, inserted] = authors.emplace(post.author.author_id, post.author);
    if (!inserted && !(it->second == post.author))
      throw DataError(where + ": author '" + post.author.author_id +
                      "' has metadata conflicting with an earlier line");

    posts.push_back(std::move(post));
  }
  return posts;
}

inline std::vector<Post> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path.string() + "'");
  return parse_corpus(in);
}

/// Writes posts back in the corpus format, one compact JSON object per line
/// with a fixed key order.
inline void write_corpus(const std::vector<Post>& posts, std::ostream& out) {
  for (const Post& p : posts) {
    nlohmann::ordered_json j;
    j["post_id"] = p.post_id;
    j["author_id"] = p.author.author_id;
    j["age"] = p.author.age;
    j["gender"] = std::string(to_string(p.author.gender));
    j["region"] = std::string(to_string(p.author.region));
    j["text"] = p.raw_text;
    out << j.dump() << '\n';
  }
}

inline void save_corpus(const std::vector<Post>& posts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_corpus(posts, out);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline void write_tokens(const std::vector<TokenRecord>& records, std::ostream& out) {
  out << kTokenTableHeader << '\n';
  for (const TokenRecord& r : records) {
    out << detail::escape_field(r.surface) << '\t' << (r.nonstandard ? '1' : '0') << '\t'
        << to_string(r.category) << '\t' << detail::escape_field(r.post_id) << '\t'
        << detail::escape_field(r.author_id) << '\t' << r.age << '\t' << to_string(r.gender)
        << '\t' << to_string(r.region) << '\n';
  }
}

/// Writes a token table; returns the number of data rows.
inline std::size_t save_tokens(const std::vector<TokenRecord>& records,
                               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write token table '" + path.string() + "'");
  write_tokens(records, out);
  out.flush();
  if (!out) throw DataError("write failed for token table '" + path.string() + "'");
  return records.size();
}

inline std::vector<TokenRecord> read_tokens(std::istream& in) {
  std::vector<TokenRecord> records;
  std::string line;
  if (!std::getline(in, line)) throw DataError("token table is empty (missing header)");
  if (detail::trim_cr(line) != kTokenTableHeader)
    throw DataError("token table line 1: unexpected header");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim_cr(line);
    if (view.empty()) continue;
    auto fields = detail::split_tabs(view);
    const std::string where = "token table line " + std::to_string(line_no);
    if (fields.size() != 8)
      throw DataError(where + ": expected 8 fields, got " + std::to_string(fields.size()));

    TokenRecord r;
    r.surface = detail::unescape_field(fields[0], line_no);
    if (fields[1] == "0") r.nonstandard = false;
    else if (fields[1] == "1") r.nonstandard = true;
    else throw DataError(where + ": field 'nonstandard' must be 0 or 1");
    auto cat = parse_category(fields[2]);
    if (!cat) throw DataError(where + ": field 'category' has unknown value");
    r.category = *cat;
    if (r.nonstandard != (r.category != Category::Standard))
      throw DataError(where + ": 'nonstandard' disagrees with 'category'");
    r.post_id = detail::unescape_field(fields[3], line_no);
    r.author_id = detail::unescape_field(fields[4], line_no);
    try {
      std::size_t used = 0;
      r.age = std::stoi(std::string(fields[5]), &used);
      if (used != fields[5].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(where + ": field 'age' is not an integer");
    }
    auto g = parse_gender(fields[6]);
    if (!g) throw DataError(where + ": field 'gender' has unknown value");
    r.gender = *g;
    auto reg = parse_region(fields[7]);
    if (!reg) throw DataError(where + ": field 'region' has unknown value");
    r.region = *reg;
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<TokenRecord> load_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open token table '" + path.string() + "'");
  return read_tokens(in);
}

}  // namespace cmcvar
