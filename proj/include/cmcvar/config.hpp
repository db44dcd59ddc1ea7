// The toolkit config file: flat `key = value` lines, `#` comments, a key
// given several times forms a list. Relative paths resolve against the
// directory of the config file.
#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmcvar/annotate.hpp"
#include "cmcvar/balance.hpp"
#include "cmcvar/glmm.hpp"
#include "cmcvar/normalize.hpp"
#include "cmcvar/selection.hpp"
#include "cmcvar/simulate.hpp"

namespace cmcvar {

class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse(std::istream& in, std::filesystem::path base_dir = {}, std::string origin = "config") {
    ConfigFile cfg;
    cfg.base_ = std::move(base_dir);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view v = detail::trim(line);
      if (v.empty() || v.front() == '#') continue;
      const auto eq = v.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(origin + " line " + std::to_string(line_no) + ": expected 'key = value'");
      std::string key(detail::trim(v.substr(0, eq)));
      std::string value(detail::trim(v.substr(eq + 1)));
      if (key.empty()) throw ConfigError(origin + " line " + std::to_string(line_no) + ": empty key");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      cfg.values_[key].push_back(value);
    }
    return cfg;
  }

  static ConfigFile load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse(in, path.parent_path(), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, std::string value) { values_[key] = {std::move(value)}; }

  std::optional<std::string> get(const std::string& key) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (it->second.size() > 1) throw ConfigError("config key '" + key + "' given more than once");
    return it->second.front();
  }

  std::vector<std::string> list(const std::string& key) const {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? std::vector<std::string>{} : it->second;
  }

  std::string get_or(const std::string& key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }

  double number(const std::string& key, double fallback) const {
    auto v = get(key);
    return v ? to_number(key, *v) : fallback;
  }

  long integer(const std::string& key, long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    long out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
      throw ConfigError("config key '" + key + "': '" + *v + "' is not an integer");
    return out;
  }

  bool boolean(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + *v + "'");
  }

  std::filesystem::path path(const std::string& raw) const {
    std::filesystem::path p(raw);
    return p.is_absolute() || base_.empty() ? p : base_ / p;
  }

  std::vector<std::filesystem::path> paths(const std::string& key) const {
    std::vector<std::filesystem::path> out;
    for (const auto& v : list(key)) out.push_back(path(v));
    return out;
  }

  /// Keys present in the file but never read; typos show up here.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  static double to_number(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
  }

 private:
  std::filesystem::path base_;
  std::map<std::string, std::vector<std::string>> values_;
  mutable std::set<std::string> used_;
};

/// Knot list; the words `min` and `max` stand for the observed age range.
struct KnotSpec {
  std::vector<std::string> items;

  static KnotSpec parse(const std::string& text) {
    KnotSpec k;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::string t(detail::trim(item));
      if (t.empty()) throw ConfigError("empty entry in knot list '" + text + "'");
      if (t != "min" && t != "max") ConfigFile::to_number("knots", t);
      k.items.push_back(t);
    }
    return k;
  }

  std::vector<double> resolve(double observed_min, double observed_max) const {
    std::vector<double> out;
    for (const auto& t : items)
      out.push_back(t == "min" ? observed_min : t == "max" ? observed_max : std::stod(t));
    SplineBasis check(out);
    return out;
  }

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
    return s;
  }
};

struct ContrastConfig {
  Category positive = Category::Chat;
  KnotSpec knots;
  std::optional<double> extra_knot;
};

struct PipelineConfig {
  std::filesystem::path corpus;
  LexiconPaths lexicons;
  std::filesystem::path out;
  std::uint64_t seed = 1;
  int threads = 1;
  NormalizerConfig normalizer;
  ChatRules rules;
  BalanceGrid grid;
  std::optional<std::size_t> n_per_cell;  // empty: smallest cell size
  std::vector<ContrastConfig> contrasts;
  double alpha = 0.05;
  CodingSpec coding;
  Integration integration;
  double curve_step = 0.5;

  /// Every referenced input must exist; checked before anything is written.
  void check_paths() const {
    auto must_exist = [](const std::filesystem::path& p, const std::string& what) {
      std::error_code ec;
      if (!std::filesystem::is_regular_file(p, ec))
        throw ConfigError(what + " '" + p.string() + "' does not exist or is not a file");
    };
    must_exist(corpus, "corpus");
    for (const auto& p : lexicons.all()) must_exist(p, "lexicon");
    if (out.empty()) throw ConfigError("no output directory configured (key 'out' or --out)");
  }

  AnalysisSpec analysis(const ContrastConfig& c, double age_min, double age_max) const {
    AnalysisSpec a;
    a.contrast.positive = c.positive;
    a.knots = c.knots.resolve(age_min, age_max);
    a.alpha = alpha;
    a.coding = coding;
    a.extra_knot = c.extra_knot;
    a.fit.integration = integration;
    a.fit.threads = threads;
    return a;
  }
};

inline const char* kDefaultChatKnots = "min,15,17,27,33,39,max";
inline const char* kDefaultRegionalKnots = "min,15,17,33,max";

namespace detail {

inline std::uint64_t parse_seed(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("seed '" + v + "' is not an unsigned integer");
  return out;
}

inline NormalizerConfig normalizer_from(const ConfigFile& f) {
  NormalizerConfig n;
  n.flooding_cap = static_cast<int>(f.integer("flooding_cap", n.flooding_cap));
  n.min_words = static_cast<int>(f.integer("min_words", n.min_words));
  if (f.has("strip_pattern")) n.strip_patterns = f.list("strip_pattern");
  if (f.has("emoticon")) n.emoticons = f.list("emoticon");
  n.split_concatenations = f.boolean("split_concatenations", n.split_concatenations);
  n.validate();
  return n;
}

inline BalanceGrid grid_from(const ConfigFile& f) {
  BalanceGrid g;
  g.age_min = static_cast<int>(f.integer("age_min", g.age_min));
  g.age_max = static_cast<int>(f.integer("age_max", g.age_max));
  g.validate();
  return g;
}

}  // namespace detail

inline PipelineConfig pipeline_config(const ConfigFile& f) {
  PipelineConfig c;
  if (auto v = f.get("corpus")) c.corpus = f.path(*v);
  c.lexicons.standard = f.paths("lexicon.standard");
  c.lexicons.names_and_foreign = f.paths("lexicon.names");
  c.lexicons.regional = f.paths("lexicon.regional");
  c.lexicons.chat = f.paths("lexicon.chat");
  c.lexicons.overrides = f.paths("lexicon.overrides");
  if (auto v = f.get("out")) c.out = f.path(*v);
  if (auto v = f.get("seed")) c.seed = detail::parse_seed(*v);
  c.threads = static_cast<int>(f.integer("threads", 1));
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  c.normalizer = detail::normalizer_from(f);
  c.rules.flooding_cap = c.normalizer.flooding_cap;
  c.rules.flooding = f.boolean("chat_rule.flooding", true);
  c.rules.digit_substitution = f.boolean("chat_rule.digits", true);
  c.rules.concatenation = f.boolean("chat_rule.concatenation", true);
  c.grid = detail::grid_from(f);
  const std::string npc = f.get_or("n_per_cell", "auto");
  if (npc != "auto") {
    const long n = f.integer("n_per_cell", 0);
    if (n < 1) throw ConfigError("n_per_cell must be 'auto' or a positive integer");
    c.n_per_cell = static_cast<std::size_t>(n);
  }
  std::vector<std::string> names;
  for (const auto& v : f.list("contrast")) {
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) names.emplace_back(detail::trim(item));
  }
  if (names.empty()) names = {"chat", "regional"};
  for (const auto& n : names) {
    auto positive = parse_contrast(n);
    if (!positive) throw ConfigError("unknown contrast '" + n + "' (expected chat or regional)");
    ContrastConfig cc;
    cc.positive = *positive;
    const std::string prefix(contrast_name(*positive));
    cc.knots = KnotSpec::parse(
        f.get_or(prefix + ".knots", *positive == Category::Chat ? kDefaultChatKnots : kDefaultRegionalKnots));
    if (auto ek = f.get(prefix + ".extra_knot")) cc.extra_knot = ConfigFile::to_number(prefix + ".extra_knot", *ek);
    c.contrasts.push_back(std::move(cc));
  }
  c.alpha = f.number("alpha", c.alpha);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (auto v = f.get("region_reference")) {
    auto r = parse_region(*v);
    if (!r) throw ConfigError("unknown region_reference '" + *v + "'");
    c.coding.region_reference = *r;
  }
  if (auto v = f.get("gender_reference")) {
    auto g = parse_gender(*v);
    if (!g) throw ConfigError("unknown gender_reference '" + *v + "'");
    c.coding.gender_reference = *g;
  }
  c.integration = Integration::parse(f.get_or("quadrature", "laplace"));
  c.curve_step = f.number("curve_step", c.curve_step);
  if (!(c.curve_step > 0.0)) throw ConfigError("curve_step must be positive");
  return c;
}

/// SimSpec from `sim.*` keys.
inline SimSpec sim_config(const ConfigFile& f) {
  SimSpec s;
  s.grid = detail::grid_from(f);
  s.n_per_cell = static_cast<std::size_t>(f.integer("sim.n_per_cell", 1));
  s.n_authors = static_cast<std::size_t>(f.integer("sim.n_authors", 0));
  s.tokens_per_author = f.number("sim.tokens_per_author", s.tokens_per_author);
  const std::string dist = f.get_or("sim.token_distribution", "poisson");
  if (dist == "fixed") s.token_distribution = TokenCountDistribution::Fixed;
  else if (dist == "poisson") s.token_distribution = TokenCountDistribution::PoissonTruncated;
  else throw ConfigError("sim.token_distribution must be 'fixed' or 'poisson'");
  s.min_tokens = static_cast<int>(f.integer("sim.min_tokens", s.min_tokens));
  const auto curve = f.list("sim.curve");
  if (curve.empty() || (curve.size() == 1 && curve[0] == "chat-peak")) {
    s.curve = peak_chat_curve();
  } else {
    std::vector<std::pair<double, double>> pts;
    for (const auto& entry : curve) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos) throw ConfigError("sim.curve entries look like 'age:probability'");
      pts.emplace_back(ConfigFile::to_number("sim.curve", std::string(detail::trim(entry.substr(0, colon)))),
                       ConfigFile::to_number("sim.curve", std::string(detail::trim(entry.substr(colon + 1)))));
    }
    s.curve = AgeCurve(std::move(pts));
  }
  for (Region r : kAllRegions) {
    const std::string key = "sim.region_offset." + std::string(to_string(r));
    if (f.has(key)) s.region_offsets[r] = f.number(key, 0.0);
  }
  s.gender_offset = f.number("sim.gender_offset", 0.0);
  s.sigma = f.number("sim.sigma", 0.0);
  const std::string positive = f.get_or("sim.contrast", "chat");
  auto pc = parse_contrast(positive);
  if (!pc) throw ConfigError("sim.contrast must be chat or regional");
  s.positive = *pc;
  if (auto v = f.get("seed")) s.seed = detail::parse_seed(*v);
  s.validate();
  return s;
}

}  // namespace cmcvar
