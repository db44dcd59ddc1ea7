// Fixed-effect terms and design-matrix construction for the GLMM.
//
// Columns: intercept, then each included term in canonical order. Age enters
// through the spline basis, region and gender through treatment indicators
// against configurable reference levels, interactions as elementwise
// products of their parents' columns.
#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cmcvar/balance.hpp"
#include "cmcvar/common.hpp"
#include "cmcvar/corpus.hpp"
#include "cmcvar/rcs.hpp"

namespace cmcvar {

enum class Term { AgeSpline, Region, Gender, AgeRegion, AgeGender, GenderRegion };

inline constexpr std::array<Term, 6> kAllTerms{Term::AgeSpline, Term::Region,    Term::Gender,
                                               Term::AgeRegion, Term::AgeGender, Term::GenderRegion};
inline constexpr std::array<Term, 3> kMainTerms{Term::AgeSpline, Term::Region, Term::Gender};

inline std::string_view to_string(Term t) {
  switch (t) {
    case Term::AgeSpline: return "age_spline";
    case Term::Region: return "region";
    case Term::Gender: return "gender";
    case Term::AgeRegion: return "age:region";
    case Term::AgeGender: return "age:gender";
    case Term::GenderRegion: return "gender:region";
  }
  return "?";
}

inline std::optional<Term> parse_term(std::string_view s) {
  for (Term t : kAllTerms)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

inline bool is_interaction(Term t) {
  return t == Term::AgeRegion || t == Term::AgeGender || t == Term::GenderRegion;
}

/// The two main effects an interaction is built from.
inline std::array<Term, 2> parents(Term t) {
  switch (t) {
    case Term::AgeRegion: return {Term::AgeSpline, Term::Region};
    case Term::AgeGender: return {Term::AgeSpline, Term::Gender};
    case Term::GenderRegion: return {Term::Gender, Term::Region};
    default: return {t, t};
  }
}

inline std::vector<Term> canonical_terms(std::vector<Term> terms) {
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

struct CodingSpec {
  Region region_reference = Region::Brabant;
  Gender gender_reference = Gender::Female;

  bool operator==(const CodingSpec&) const = default;

  std::vector<Region> region_levels() const {
    std::vector<Region> out;
    for (Region r : kAllRegions)
      if (r != region_reference) out.push_back(r);
    return out;
  }
  Gender gender_level() const {
    return gender_reference == Gender::Female ? Gender::Male : Gender::Female;
  }
};

struct ModelSpec {
  SplineBasis spline;
  CodingSpec coding;
  std::vector<Term> terms;  // canonical order, intercept implicit

  bool has(Term t) const { return std::find(terms.begin(), terms.end(), t) != terms.end(); }

  ModelSpec with(Term t) const {
    ModelSpec m = *this;
    m.terms.push_back(t);
    m.terms = canonical_terms(std::move(m.terms));
    return m;
  }

  bool uses_spline() const {
    return has(Term::AgeSpline) || has(Term::AgeRegion) || has(Term::AgeGender);
  }
};

/// Column names and the term -> column mapping for a model spec.
struct DesignLayout {
  std::vector<std::string> names;
  std::map<std::string, std::vector<std::size_t>> term_map;
};

namespace detail {

inline std::vector<std::string> spline_names(const SplineBasis& s) {
  std::vector<std::string> n{"age"};
  for (std::size_t j = 1; j < s.dimension(); ++j) n.push_back("age'" + std::to_string(j));
  return n;
}

inline std::string region_name(Region r) { return "region[" + std::string(to_string(r)) + "]"; }
inline std::string gender_name(Gender g) { return "gender[" + std::string(to_string(g)) + "]"; }

}  // namespace detail

inline DesignLayout design_layout(const ModelSpec& spec) {
  DesignLayout layout;
  auto add = [&](const std::string& term, std::string name) {
    layout.term_map[term].push_back(layout.names.size());
    layout.names.push_back(std::move(name));
  };
  add("(Intercept)", "(Intercept)");
  const auto sn = detail::spline_names(spec.spline);
  const auto regions = spec.coding.region_levels();
  const Gender g = spec.coding.gender_level();
  for (Term t : spec.terms) {
    const std::string tn(to_string(t));
    switch (t) {
      case Term::AgeSpline:
        for (const auto& s : sn) add(tn, s);
        break;
      case Term::Region:
        for (Region r : regions) add(tn, detail::region_name(r));
        break;
      case Term::Gender: add(tn, detail::gender_name(g)); break;
      case Term::AgeRegion:
        for (const auto& s : sn)
          for (Region r : regions) add(tn, s + ":" + detail::region_name(r));
        break;
      case Term::AgeGender:
        for (const auto& s : sn) add(tn, s + ":" + detail::gender_name(g));
        break;
      case Term::GenderRegion:
        for (Region r : regions) add(tn, detail::gender_name(g) + ":" + detail::region_name(r));
        break;
    }
  }
  return layout;
}

/// Covariate vector (intercept first) for one author profile.
inline std::vector<double> covariate_row(const ModelSpec& spec, double age, Gender gender, Region region) {
  std::vector<double> row{1.0};
  std::vector<double> s;
  if (spec.uses_spline()) s = spec.spline.evaluate(age);
  const auto regions = spec.coding.region_levels();
  const double gi = gender == spec.coding.gender_level() ? 1.0 : 0.0;
  auto ri = [&](Region r) { return region == r ? 1.0 : 0.0; };
  for (Term t : spec.terms) {
    switch (t) {
      case Term::AgeSpline: row.insert(row.end(), s.begin(), s.end()); break;
      case Term::Region:
        for (Region r : regions) row.push_back(ri(r));
        break;
      case Term::Gender: row.push_back(gi); break;
      case Term::AgeRegion:
        for (double v : s)
          for (Region r : regions) row.push_back(v * ri(r));
        break;
      case Term::AgeGender:
        for (double v : s) row.push_back(v * gi);
        break;
      case Term::GenderRegion:
        for (Region r : regions) row.push_back(gi * ri(r));
        break;
    }
  }
  return row;
}

/// Binary-response data grouped by cluster: rows of one cluster are
/// contiguous, clusters sorted by id so that every reduction over clusters
/// has a fixed order.
struct GlmmData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::size_t> cluster_offsets;  // n_clusters + 1 entries
  std::vector<std::string> cluster_ids;
  DesignLayout layout;
  ModelSpec spec;

  std::size_t n_obs() const { return static_cast<std::size_t>(y.size()); }
  std::size_t n_clusters() const { return cluster_ids.size(); }
  std::size_t n_coefficients() const { return static_cast<std::size_t>(X.cols()); }
};

/// Builds grouped data from an explicit covariate matrix. Column names default to x0, x1, ...
inline GlmmData make_glmm_data(const Eigen::MatrixXd& X, const std::vector<int>& response,
                               const std::vector<std::string>& clusters,
                               std::vector<std::string> column_names = {}) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (response.size() != n || clusters.size() != n)
    throw DataError("make_glmm_data: row counts of X, response and clusters differ");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return clusters[a] < clusters[b]; });
  GlmmData d;
  d.X.resize(X.rows(), X.cols());
  d.y.resize(X.rows());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    d.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(src));
    if (response[src] != 0 && response[src] != 1) throw DataError("response values must be 0 or 1");
    d.y(static_cast<Eigen::Index>(i)) = response[src];
    if (i == 0 || clusters[src] != clusters[order[i - 1]]) {
      d.cluster_offsets.push_back(i);
      d.cluster_ids.push_back(clusters[src]);
    }
  }
  d.cluster_offsets.push_back(n);
  if (column_names.empty())
    for (Eigen::Index j = 0; j < X.cols(); ++j) column_names.push_back("x" + std::to_string(j));
  for (std::size_t j = 0; j < column_names.size(); ++j) {
    d.layout.term_map[column_names[j]].push_back(j);
  }
  d.layout.names = std::move(column_names);
  return d;
}

/// Design matrix for token records under `spec`; `response` parallels `records`.
inline GlmmData design_matrix(const std::vector<TokenRecord>& records, const std::vector<int>& response,
                              const ModelSpec& spec) {
  if (records.size() != response.size())
    throw DataError("design_matrix: records and response differ in length");
  if (spec.uses_spline() && spec.spline.dimension() == 0)
    throw ConfigError("design_matrix: age terms requested without spline knots");
  ModelSpec canonical = spec;
  canonical.terms = canonical_terms(spec.terms);
  DesignLayout layout = design_layout(canonical);

  Eigen::MatrixXd X(static_cast<Eigen::Index>(records.size()),
                    static_cast<Eigen::Index>(layout.names.size()));
  std::vector<std::string> clusters;
  clusters.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const TokenRecord& r = records[i];
    const auto row = covariate_row(canonical, r.age, r.gender, r.region);
    for (std::size_t j = 0; j < row.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    clusters.push_back(r.author_id);
  }
  GlmmData d = make_glmm_data(X, response, clusters, layout.names);
  d.layout = std::move(layout);
  d.spec = std::move(canonical);
  return d;
}

inline GlmmData design_matrix(const ContrastDataset& contrast, const ModelSpec& spec) {
  return design_matrix(contrast.records, contrast.response, spec);
}

}  // namespace cmcvar
