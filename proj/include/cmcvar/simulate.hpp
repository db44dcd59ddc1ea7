// Synthetic annotated corpora from a known generating model, and the
// comparison of fitted models against that truth.
//
// The age effect is a tabulated probability curve for the reference cell,
// interpolated linearly, so recovery checks do not share the fitted model's
// spline basis.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cmcvar/balance.hpp"
#include "cmcvar/common.hpp"
#include "cmcvar/corpus.hpp"
#include "cmcvar/glmm.hpp"
#include "cmcvar/rng.hpp"
#include "cmcvar/stats.hpp"

namespace cmcvar {

/// Probability waypoints (age, p), interpolated linearly and held constant
/// beyond the first and last waypoint.
class AgeCurve {
 public:
  AgeCurve() = default;
  explicit AgeCurve(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
    if (points_.empty()) throw ConfigError("age curve needs at least one waypoint");
    std::sort(points_.begin(), points_.end());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double p = points_[i].second;
      if (!(p > 0.0 && p < 1.0)) throw ConfigError("age curve probabilities must lie in (0, 1)");
      if (i > 0 && points_[i].first == points_[i - 1].first)
        throw ConfigError("age curve has duplicate ages");
    }
  }

  static AgeCurve flat(double p) { return AgeCurve({{0.0, p}}); }

  double operator()(double age) const {
    if (age <= points_.front().first) return points_.front().second;
    if (age >= points_.back().first) return points_.back().second;
    auto hi = std::upper_bound(points_.begin(), points_.end(), std::make_pair(age, 2.0));
    auto lo = hi - 1;
    const double f = (age - lo->first) / (hi->first - lo->first);
    return lo->second + f * (hi->second - lo->second);
  }

  const std::vector<std::pair<double, double>>& points() const { return points_; }

 private:
  std::vector<std::pair<double, double>> points_;
};

/// Chat-word curve for the reference region through fixed waypoints:
/// 0.15 at 13, a peak of 0.19 at 15, 0.05 at 28, 0.03 at 41 and constant after.
inline AgeCurve peak_chat_curve() { return AgeCurve({{13, 0.15}, {15, 0.19}, {28, 0.05}, {41, 0.03}}); }

enum class TokenCountDistribution { Fixed, PoissonTruncated };

struct SimSpec {
  BalanceGrid grid;
  std::size_t n_per_cell = 1;
  /// When non-zero, this many authors are spread over the cells round-robin
  /// instead of n_per_cell per cell.
  std::size_t n_authors = 0;
  double tokens_per_author = 12.0;
  TokenCountDistribution token_distribution = TokenCountDistribution::PoissonTruncated;
  int min_tokens = 3;
  AgeCurve curve = AgeCurve::flat(0.1);
  /// Log-odds shift per region; the generator uses them as given.
  std::map<Region, double> region_offsets;
  /// Log-odds shift applied to male authors.
  double gender_offset = 0.0;
  double sigma = 0.0;
  Category positive = Category::Chat;
  std::uint64_t seed = 1;

  void validate() const {
    grid.validate();
    if (sigma < 0.0) throw ConfigError("sim: sigma must be >= 0");
    if (tokens_per_author <= 0.0) throw ConfigError("sim: tokens_per_author must be positive");
    if (positive == Category::Standard) throw ConfigError("sim: positive category must be chat or regional");
    if (n_per_cell == 0 && n_authors == 0) throw ConfigError("sim: no authors requested");
  }

  double region_offset(Region r) const {
    auto it = region_offsets.find(r);
    return it == region_offsets.end() ? 0.0 : it->second;
  }

  double gender_shift(Gender g) const { return g == Gender::Male ? gender_offset : 0.0; }
};

/// Generating parameters plus the per-author random intercepts actually drawn.
struct SimTruth {
  SimSpec spec;
  std::map<std::string, double> author_effects;
};

struct SimulatedCorpus {
  std::vector<TokenRecord> records;
  SimTruth truth;
};

namespace detail {

inline const std::vector<std::string>& sim_words(Category c) {
  static const std::vector<std::string> standard{"ik", "de", "het", "een", "en", "van", "niet", "wat",
                                                 "is", "dat", "met", "waarom", "wacht", "mooi", "schoon"};
  static const std::vector<std::string> chat{"wrm", "w8", "hjjg", "bff", "vr", "kheb", "zjg", "mooiii",
                                             "keiii", "vandaga"};
  static const std::vector<std::string> regional{"skone", "veu", "kozn", "mokkes", "oltid", "woroem",
                                                 "vinne", "dieje", "eje", "kzin"};
  switch (c) {
    case Category::Standard: return standard;
    case Category::Chat: return chat;
    case Category::Regional: return regional;
  }
  return standard;
}

inline std::string pad_index(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

}  // namespace detail

/// Author metadata in generation order.
inline std::vector<AuthorMeta> sim_authors(const SimSpec& spec) {
  const auto cells = spec.grid.cells();
  const std::size_t total = spec.n_authors > 0 ? spec.n_authors : spec.n_per_cell * cells.size();
  std::vector<AuthorMeta> out;
  out.reserve(total);
  for (std::size_t a = 0; a < total; ++a) {
    const CellKey& k = cells[a % cells.size()];
    out.push_back({"a" + detail::pad_index(a), k.age, k.gender, k.region});
  }
  return out;
}

/// Each author gets b ~ N(0, sigma^2); each token is non-standard with
/// probability logistic(logit(curve(age)) + region offset + gender offset + b).
/// Every author draws from its own substream of `spec.seed`.
inline SimulatedCorpus generate_corpus(const SimSpec& spec) {
  spec.validate();
  SimulatedCorpus out;
  out.truth.spec = spec;
  const auto& std_words = detail::sim_words(Category::Standard);
  const auto& pos_words = detail::sim_words(spec.positive);

  const auto authors = sim_authors(spec);
  for (std::size_t a = 0; a < authors.size(); ++a) {
    const AuthorMeta& m = authors[a];
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(a)));
    const double b = spec.sigma * rng.normal();
    out.truth.author_effects[m.author_id] = b;

    int n_tokens = static_cast<int>(std::lround(spec.tokens_per_author));
    if (spec.token_distribution == TokenCountDistribution::PoissonTruncated) {
      do {
        n_tokens = rng.poisson(spec.tokens_per_author);
      } while (n_tokens < spec.min_tokens);
    }
    const double eta = logit(spec.curve(m.age)) + spec.region_offset(m.region) + spec.gender_shift(m.gender) + b;
    const double prob = logistic(eta);
    const std::string post_id = "p" + detail::pad_index(a);
    for (int t = 0; t < n_tokens; ++t) {
      TokenRecord r;
      r.nonstandard = rng.bernoulli(prob);
      r.category = r.nonstandard ? spec.positive : Category::Standard;
      const auto& words = r.nonstandard ? pos_words : std_words;
      r.surface = words[rng.below(words.size())];
      r.post_id = post_id;
      r.author_id = m.author_id;
      r.age = m.age;
      r.gender = m.gender;
      r.region = m.region;
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

/// Joins each author's surfaces back into one post per author.
inline std::vector<Post> render_posts(const std::vector<TokenRecord>& records) {
  std::vector<Post> posts;
  std::map<std::string, std::size_t> index;
  for (const TokenRecord& r : records) {
    auto [it, inserted] = index.emplace(r.post_id, posts.size());
    if (inserted) posts.push_back({r.post_id, {r.author_id, r.age, r.gender, r.region}, r.surface});
    else posts[it->second].raw_text += " " + r.surface;
  }
  return posts;
}

inline void write_truth(const SimTruth& truth, std::ostream& out) {
  const SimSpec& s = truth.spec;
  out << "parameter\tvalue\n";
  out << "seed\t" << s.seed << '\n';
  out << "sigma\t" << s.sigma << '\n';
  out << "gender_offset[m]\t" << s.gender_offset << '\n';
  for (Region r : kAllRegions) out << "region_offset[" << to_string(r) << "]\t" << s.region_offset(r) << '\n';
  for (const auto& [age, p] : s.curve.points()) out << "curve[" << age << "]\t" << p << '\n';
  out << "positive\t" << to_string(s.positive) << '\n';
  out << "authors\t" << truth.author_effects.size() << '\n';
}

struct RecoveryRow {
  std::string parameter;
  double estimate = 0.0;
  double truth = 0.0;
  double se = 0.0;
  double abs_z = 0.0;
  bool flagged = false;
};

namespace detail {

inline RecoveryRow recovery_row(std::string name, double est, double truth, double se) {
  RecoveryRow r{std::move(name), est, truth, se, 0.0, false};
  r.abs_z = se > 0.0 ? std::abs(est - truth) / se : (est == truth ? 0.0 : std::numeric_limits<double>::infinity());
  r.flagged = r.abs_z > 4.0;
  return r;
}

}  // namespace detail

/// Standardized estimation errors of a fitted model against the generating
/// truth: region and gender contrasts on the log-odds scale, sigma, and the
/// reference-cell log-odds at every curve waypoint inside the knot range.
/// A truth parameter that is non-zero but absent from the model is an error.
inline std::vector<RecoveryRow> recovery_report(const FittedGlmm& fit, const SimTruth& truth) {
  const SimSpec& s = truth.spec;
  const CodingSpec& coding = fit.spec.coding;
  std::vector<RecoveryRow> rows;

  for (Region r : coding.region_levels()) {
    const double t = s.region_offset(r) - s.region_offset(coding.region_reference);
    const std::string name = detail::region_name(r);
    auto idx = fit.index_of(name);
    if (!idx) {
      if (t != 0.0) throw DataError("recovery_report: model lacks '" + name + "' present in the truth");
      continue;
    }
    const auto i = static_cast<Eigen::Index>(*idx);
    rows.push_back(detail::recovery_row(name, fit.beta(i), t, fit.se(i)));
  }

  {
    const Gender g = coding.gender_level();
    const double t = s.gender_shift(g) - s.gender_shift(coding.gender_reference);
    const std::string name = detail::gender_name(g);
    auto idx = fit.index_of(name);
    if (!idx) {
      if (t != 0.0) throw DataError("recovery_report: model lacks '" + name + "' present in the truth");
    } else {
      const auto i = static_cast<Eigen::Index>(*idx);
      rows.push_back(detail::recovery_row(name, fit.beta(i), t, fit.se(i)));
    }
  }

  rows.push_back(detail::recovery_row("sigma", fit.sigma, s.sigma, fit.sigma_se));

  if (fit.spec.has(Term::AgeSpline)) {
    for (const auto& [age, p] : s.curve.points()) {
      if (age < fit.spec.spline.first() || age > fit.spec.spline.last()) continue;
      const auto x = covariate_row(fit.spec, age, coding.gender_reference, coding.region_reference);
      Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
      const double est = xv.dot(fit.beta);
      const double se = std::sqrt(std::max(0.0, xv.dot(fit.cov * xv)));
      char name[64];
      std::snprintf(name, sizeof name, "logit_p[age=%g]", age);
      rows.push_back(detail::recovery_row(name, est, logit(p), se));
    }
  } else {
    bool varies = false;
    for (const auto& [age, p] : s.curve.points()) varies = varies || p != s.curve.points().front().second;
    if (varies) throw DataError("recovery_report: truth has an age curve but the model has no age term");
  }
  return rows;
}

inline void write_recovery(const std::vector<RecoveryRow>& rows, std::ostream& out) {
  out << "parameter\testimate\ttruth\tse\tabs_z\tflagged\n";
  for (const auto& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s\t%.6g\t%.6g\t%.6g\t%.3f\t%d\n", r.parameter.c_str(), r.estimate, r.truth,
                  r.se, r.abs_z, r.flagged ? 1 : 0);
    out << buf;
  }
}

}  // namespace cmcvar
