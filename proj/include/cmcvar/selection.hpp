// Forward stepwise selection of fixed-effect terms with likelihood-ratio gating.
//
// Stage 1 adds main effects, stage 2 two-way interactions whose parents are
// both in the model. At each round every remaining candidate is added to the
// current model and tested against it; the smallest p below alpha is
// accepted (ties: fewer df, then term name). Candidates that are never
// accepted are reported with their test against the final model of their
// stage. Interactions whose parents were not both selected are reported
// against the final model extended by the missing parents; they can never be
// accepted.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "cmcvar/balance.hpp"
#include "cmcvar/design.hpp"
#include "cmcvar/glmm.hpp"

namespace cmcvar {

struct AnalysisSpec {
  ContrastSpec contrast;
  std::vector<double> knots;
  std::vector<Term> candidate_mains{kMainTerms.begin(), kMainTerms.end()};
  double alpha = 0.05;
  CodingSpec coding;
  std::optional<double> extra_knot;
  FitOptions fit;

  void validate() const {
    contrast.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    for (Term t : candidate_mains)
      if (is_interaction(t)) throw ConfigError("candidate mains may not contain interactions");
    const bool wants_age =
        std::find(candidate_mains.begin(), candidate_mains.end(), Term::AgeSpline) != candidate_mains.end();
    if (wants_age) SplineBasis check(knots);
  }

  /// Two-way interactions among the candidate mains.
  std::vector<Term> candidate_interactions() const {
    std::vector<Term> out;
    for (Term t : kAllTerms) {
      if (!is_interaction(t)) continue;
      auto [a, b] = parents(t);
      auto has = [&](Term m) {
        return std::find(candidate_mains.begin(), candidate_mains.end(), m) != candidate_mains.end();
      };
      if (has(a) && has(b)) out.push_back(t);
    }
    return out;
  }

  ModelSpec base_model() const {
    ModelSpec m;
    if (!knots.empty()) m.spline = SplineBasis(knots);
    m.coding = coding;
    return m;
  }
};

enum class TraceStatus { Accepted, Rejected, ReportOnly, Untestable };

inline std::string_view to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::Accepted: return "accepted";
    case TraceStatus::Rejected: return "rejected";
    case TraceStatus::ReportOnly: return "parents-not-selected";
    case TraceStatus::Untestable: return "untestable";
  }
  return "?";
}

struct TraceRow {
  std::string term;
  int stage = 1;
  double chi2 = std::numeric_limits<double>::quiet_NaN();
  int df = 0;
  double p = std::numeric_limits<double>::quiet_NaN();
  bool accepted = false;
  double loglik = std::numeric_limits<double>::quiet_NaN();  // of the model including the term
  TraceStatus status = TraceStatus::Rejected;
  std::string note;
};

using StepTrace = std::vector<TraceRow>;

struct StepwiseResult {
  FittedGlmm model;
  StepTrace trace;
  std::vector<Term> selected;
};

/// Fits each distinct model once per stepwise run.
class ModelCache {
 public:
  ModelCache(const ContrastDataset& data, const FitOptions& options) : data_(data), options_(options) {}

  const FittedGlmm& fit(const ModelSpec& spec) {
    const std::string key = key_of(spec);
    auto it = fits_.find(key);
    if (it != fits_.end()) return it->second;
    GlmmData d = design_matrix(data_, spec);
    FitOptions opts = options_;
    return fits_.emplace(key, fit_glmm(d, opts)).first->second;
  }

 private:
  static std::string key_of(const ModelSpec& spec) {
    std::string k;
    for (double v : spec.spline.knots()) k += std::to_string(v) + ",";
    k += "|";
    for (Term t : spec.terms) k += std::string(to_string(t)) + ",";
    return k;
  }

  const ContrastDataset& data_;
  FitOptions options_;
  std::map<std::string, FittedGlmm> fits_;
};

namespace detail {

struct CandidateTest {
  Term term;
  std::optional<LrTestResult> test;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

inline CandidateTest test_candidate(ModelCache& cache, const ModelSpec& base, Term t) {
  CandidateTest ct{t, std::nullopt, std::numeric_limits<double>::quiet_NaN(), {}};
  try {
    const FittedGlmm& reduced = cache.fit(base);
    const FittedGlmm& full = cache.fit(base.with(t));
    ct.test = lr_test(full, reduced);
    ct.loglik = full.loglik;
  } catch (const ConvergenceError& e) {
    ct.error = e.what();
  }
  return ct;
}

inline TraceRow row_from(const CandidateTest& ct, int stage, TraceStatus status) {
  TraceRow row;
  row.term = std::string(to_string(ct.term));
  row.stage = stage;
  row.status = ct.test ? status : TraceStatus::Untestable;
  row.accepted = row.status == TraceStatus::Accepted;
  row.note = ct.error;
  if (ct.test) {
    row.chi2 = ct.test->chi2;
    row.df = ct.test->df;
    row.p = ct.test->p;
    row.loglik = ct.loglik;
  }
  return row;
}

// Greedy forward rounds over `candidates`, starting from `model`.
inline void forward_rounds(ModelCache& cache, ModelSpec& model, std::vector<Term> candidates, int stage,
                           double alpha, StepTrace& trace, std::vector<Term>& selected) {
  while (!candidates.empty()) {
    std::vector<CandidateTest> tests;
    for (Term t : candidates) tests.push_back(test_candidate(cache, model, t));
    const CandidateTest* best = nullptr;
    for (const auto& ct : tests) {
      if (!ct.test || !(ct.test->p < alpha)) continue;
      if (!best) {
        best = &ct;
        continue;
      }
      const auto& a = *ct.test;
      const auto& b = *best->test;
      if (a.p < b.p || (a.p == b.p && (a.df < b.df || (a.df == b.df && to_string(ct.term) < to_string(best->term)))))
        best = &ct;
    }
    if (!best) {
      for (const auto& ct : tests) trace.push_back(row_from(ct, stage, TraceStatus::Rejected));
      return;
    }
    trace.push_back(row_from(*best, stage, TraceStatus::Accepted));
    selected.push_back(best->term);
    model = model.with(best->term);
    candidates.erase(std::find(candidates.begin(), candidates.end(), best->term));
  }
}

}  // namespace detail

inline StepwiseResult forward_stepwise(const ContrastDataset& data, const AnalysisSpec& spec) {
  spec.validate();
  ModelCache cache(data, spec.fit);
  ModelSpec model = spec.base_model();
  StepwiseResult result;

  // The intercept-only model must be estimable; its failure aborts the analysis.
  cache.fit(model);

  detail::forward_rounds(cache, model, spec.candidate_mains, 1, spec.alpha, result.trace, result.selected);

  std::vector<Term> eligible, report_only;
  for (Term t : spec.candidate_interactions()) {
    auto [a, b] = parents(t);
    (model.has(a) && model.has(b) ? eligible : report_only).push_back(t);
  }
  detail::forward_rounds(cache, model, eligible, 2, spec.alpha, result.trace, result.selected);

  for (Term t : report_only) {
    ModelSpec base = model;
    auto [a, b] = parents(t);
    if (!base.has(a)) base = base.with(a);
    if (!base.has(b)) base = base.with(b);
    auto ct = detail::test_candidate(cache, base, t);
    TraceRow row = detail::row_from(ct, 2, TraceStatus::ReportOnly);
    if (row.status == TraceStatus::ReportOnly) row.note = "tested with missing parents added; not eligible";
    result.trace.push_back(row);
  }

  result.model = cache.fit(model);
  return result;
}

/// Refits the final model with one extra interior knot and tests it against the final model.
inline LrTestResult nonlinearity_check(const ContrastDataset& data, const FittedGlmm& final_model,
                                       double extra_knot, const FitOptions& options = {}) {
  if (!final_model.spec.uses_spline())
    throw ConfigError("nonlinearity check needs a model with an age term");
  ModelSpec extended = final_model.spec;
  extended.spline = final_model.spec.spline.with_knot(extra_knot);
  const FittedGlmm refit = fit_glmm(design_matrix(data, extended), options);
  return lr_test(refit, final_model);
}

inline void write_trace(const StepTrace& trace, std::ostream& out) {
  out << "term\tchi2\tdf\tp\taccepted\tstage\tloglik\tstatus\n";
  auto num = [&](double v) {
    if (std::isnan(v)) {
      out << "NA";
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.10g", v);
      out << buf;
    }
  };
  for (const TraceRow& r : trace) {
    out << r.term << '\t';
    num(r.chi2);
    out << '\t' << r.df << '\t';
    num(r.p);
    out << '\t' << (r.accepted ? 1 : 0) << '\t' << r.stage << '\t';
    num(r.loglik);
    out << '\t' << to_string(r.status) << '\n';
  }
}

}  // namespace cmcvar
