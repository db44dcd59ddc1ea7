// End-to-end run: ingest, normalize and select, annotate, balance, contrast,
// stepwise fit per contrast, report. Outputs are staged in a scratch
// directory next to the target and moved into place only when every stage
// has succeeded.
#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmcvar/annotate.hpp"
#include "cmcvar/balance.hpp"
#include "cmcvar/config.hpp"
#include "cmcvar/corpus.hpp"
#include "cmcvar/normalize.hpp"
#include "cmcvar/report.hpp"
#include "cmcvar/selection.hpp"

namespace cmcvar {

/// Runs `fn`, prefixing any toolkit error with the stage name.
template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "stage '" + stage + "': " + e.what());
  }
}

namespace detail {

inline std::size_t count_authors(const std::vector<Post>& posts) {
  std::set<std::string> ids;
  for (const auto& p : posts) ids.insert(p.author.author_id);
  return ids.size();
}

inline void write_age_profile(const std::vector<AgeProfileRow>& rows, std::ostream& out) {
  out << "age\tmean_proportion\tauthors\n";
  for (const auto& r : rows) out << r.age << '\t' << fmt("%.10g", r.mean_proportion) << '\t' << r.authors << '\n';
}

inline void write_lr(const LrTestResult& r, double extra_knot, std::ostream& out) {
  out << "extra_knot\tchi2\tdf\tp\n"
      << fmt("%g", extra_knot) << '\t' << fmt("%.10g", r.chi2) << '\t' << r.df << '\t' << fmt("%.10g", r.p) << '\n';
}

template <typename Writer>
void write_output(const std::filesystem::path& path, Writer&& writer) {
  std::ostringstream buf;
  writer(buf);
  write_file(path, buf.str());
}

// Where the finished tree ends up. An existing target is only replaced when
// it looks like an earlier run (has a stage ledger) or is empty.
inline void check_target(const std::filesystem::path& out) {
  std::error_code ec;
  if (!std::filesystem::exists(out, ec)) return;
  if (!std::filesystem::is_directory(out, ec)) throw ConfigError("output path '" + out.string() + "' is not a directory");
  if (std::filesystem::exists(out / "stage_counts.tsv", ec)) return;
  if (!std::filesystem::is_empty(out, ec))
    throw ConfigError("output directory '" + out.string() + "' is not empty and holds no earlier run");
}

}  // namespace detail

struct PipelineResult {
  std::vector<StageCount> stages;
  std::vector<std::filesystem::path> files;  // relative to the output directory, sorted
};

inline PipelineResult run_pipeline(const PipelineConfig& config) {
  config.check_paths();
  detail::check_target(config.out);
  const auto lex = run_stage("lexicons", [&] { return load_lexicons(config.lexicons); });

  const std::filesystem::path target = config.out.lexically_normal();
  const std::filesystem::path scratch =
      target.parent_path() / ("." + target.filename().string() + ".partial");
  std::filesystem::remove_all(scratch);
  std::filesystem::create_directories(scratch);

  PipelineResult result;
  try {
    const Normalizer normalizer(config.normalizer);
    auto annotate = [&](const std::vector<Post>& posts) {
      return annotate_corpus(posts, lex, normalizer, config.rules);
    };

    const auto posts = run_stage("ingest", [&] { return load_corpus(config.corpus); });
    result.stages.push_back(stage_count("ingested", annotate(posts), posts.size(), detail::count_authors(posts)));

    std::vector<Post> long_enough;
    for (const Post& p : posts)
      if (normalizer.word_count(p.raw_text) >= static_cast<std::size_t>(config.normalizer.min_words))
        long_enough.push_back(p);
    result.stages.push_back(stage_count("min_words", annotate(long_enough), long_enough.size(),
                                        detail::count_authors(long_enough)));

    const auto selected = run_stage("select", [&] { return select_eligible(posts, normalizer, config.seed); });
    result.stages.push_back(
        stage_count("one_per_author", annotate(selected), selected.size(), detail::count_authors(selected)));

    std::vector<Post> in_grid;
    for (const Post& p : selected)
      if (config.grid.contains(p.author)) in_grid.push_back(p);
    result.stages.push_back(stage_count("age_range", annotate(in_grid), in_grid.size(), detail::count_authors(in_grid)));

    const auto balanced = run_stage("balance", [&] {
      const std::size_t n = config.n_per_cell ? *config.n_per_cell : min_cell_size(in_grid, config.grid).size;
      return balanced_sample(in_grid, n, config.seed, config.grid);
    });
    const auto tokens = run_stage("annotate", [&] { return annotate(balanced); });
    result.stages.push_back(stage_count("balanced", tokens, balanced.size(), detail::count_authors(balanced)));

    detail::write_output(scratch / "balance_report.tsv",
                         [&](std::ostream& o) { write_balance_report(balance_report(in_grid, balanced, config.grid), o); });
    detail::write_output(scratch / "tokens.tsv", [&](std::ostream& o) { write_tokens(tokens, o); });
    run_stage("age_profile", [&] {
      detail::write_output(scratch / "age_profile.tsv",
                           [&](std::ostream& o) { detail::write_age_profile(age_profile(tokens), o); });
      return 0;
    });

    int age_lo = 0, age_hi = 0;
    if (!tokens.empty()) {
      age_lo = age_hi = tokens.front().age;
      for (const auto& t : tokens) {
        age_lo = std::min(age_lo, t.age);
        age_hi = std::max(age_hi, t.age);
      }
    }

    std::vector<CurveSet> curve_sets;
    for (const ContrastConfig& cc : config.contrasts) {
      const std::string name(contrast_name(cc.positive));
      const auto data = run_stage("contrast " + name, [&] { return build_contrast(tokens, {cc.positive}); });
      result.stages.push_back(stage_count("contrast_" + name, data.records));

      run_stage("fit " + name, [&] {
        const AnalysisSpec spec = config.analysis(cc, age_lo, age_hi);
        const StepwiseResult sw = forward_stepwise(data, spec);
        detail::write_output(scratch / ("trace_" + name + ".tsv"), [&](std::ostream& o) { write_trace(sw.trace, o); });
        detail::write_output(scratch / ("model_" + name + ".txt"),
                             [&](std::ostream& o) { write_model(sw.model, o, name); });
        if (spec.extra_knot && sw.model.spec.uses_spline()) {
          const auto lr = nonlinearity_check(data, sw.model, *spec.extra_knot, spec.fit);
          detail::write_output(scratch / ("nonlinearity_" + name + ".tsv"),
                               [&](std::ostream& o) { detail::write_lr(lr, *spec.extra_knot, o); });
        }
        CurveSet set = region_curves(sw.model, name, config.curve_step);
        if (set.knots.empty()) set.knots = spec.knots;
        curve_sets.push_back(std::move(set));
        return 0;
      });
    }
    if (!curve_sets.empty()) run_stage("report", [&] { return emit_plots(curve_sets, scratch); });

    detail::write_output(scratch / "stage_counts.tsv",
                         [&](std::ostream& o) { write_stage_counts(result.stages, o); });

    std::filesystem::remove_all(target);
    if (!target.parent_path().empty()) std::filesystem::create_directories(target.parent_path());
    std::filesystem::rename(scratch, target);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(scratch, ec);
    throw;
  }

  for (const auto& entry : std::filesystem::recursive_directory_iterator(target))
    if (entry.is_regular_file()) result.files.push_back(std::filesystem::relative(entry.path(), target));
  std::sort(result.files.begin(), result.files.end());
  return result;
}

}  // namespace cmcvar
