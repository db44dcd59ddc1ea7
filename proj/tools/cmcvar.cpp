// cmcvar command-line front end.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cmcvar/annotate.hpp"
#include "cmcvar/balance.hpp"
#include "cmcvar/config.hpp"
#include "cmcvar/corpus.hpp"
#include "cmcvar/normalize.hpp"
#include "cmcvar/pipeline.hpp"
#include "cmcvar/report.hpp"
#include "cmcvar/selection.hpp"
#include "cmcvar/simulate.hpp"

namespace fs = std::filesystem;
using namespace cmcvar;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
};

struct FitFlags {
  std::string contrast = "chat";
  std::string knots;
  std::optional<double> alpha;
  std::string quadrature;
};

ConfigFile load_config(const Common& c, bool required) {
  if (c.config.empty()) {
    if (required) throw ConfigError("--config is required");
    return {};
  }
  return ConfigFile::load(c.config);
}

void apply_overrides(ConfigFile& f, const Common& c) {
  if (c.seed) f.set("seed", std::to_string(*c.seed));
  if (c.threads) f.set("threads", std::to_string(*c.threads));
}

fs::path out_dir(const Common& c, const ConfigFile& f) {
  if (!c.out.empty()) return c.out;
  if (auto v = f.get("out")) return f.path(*v);
  throw ConfigError("no output directory (use --out)");
}

void prepare(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
}

template <typename Writer>
void write_to(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  writer(out);
}

fs::path input_path(const std::string& flag, const ConfigFile& f, const char* key) {
  if (!flag.empty()) return flag;
  if (auto v = f.get(key)) return f.path(*v);
  throw ConfigError(std::string("no input given (flag --input or config key '") + key + "')");
}

LexiconSet lexicons_from(const ConfigFile& f) {
  LexiconPaths p;
  p.standard = f.paths("lexicon.standard");
  p.names_and_foreign = f.paths("lexicon.names");
  p.regional = f.paths("lexicon.regional");
  p.chat = f.paths("lexicon.chat");
  p.overrides = f.paths("lexicon.overrides");
  for (const auto& path : p.all())
    if (!fs::is_regular_file(path)) throw ConfigError("lexicon '" + path.string() + "' does not exist");
  return load_lexicons(p);
}

void apply_fit_flags(ConfigFile& f, const FitFlags& fl, bool set_contrast = true) {
  auto positive = parse_contrast(fl.contrast);
  if (!positive) throw ConfigError("--contrast must be chat or regional");
  if (set_contrast) f.set("contrast", fl.contrast);
  if (!fl.knots.empty()) f.set(std::string(contrast_name(*positive)) + ".knots", fl.knots);
  if (fl.alpha) f.set("alpha", std::to_string(*fl.alpha));
  if (!fl.quadrature.empty()) f.set("quadrature", fl.quadrature);
}

void warn_unused(const ConfigFile& f) {
  for (const auto& k : f.unused_keys()) std::cerr << "warning: config key '" << k << "' is not used by this command\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus toolkit for age, gender and region effects on non-standard word use"};
  app.require_subcommand(1);
  Common common;
  FitFlags fit_flags;
  std::string input, model_path, curves_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Config file");
    sub->add_option("--seed", common.seed, "Master seed (overrides the config)");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--threads", common.threads, "Worker threads for likelihood evaluation")->check(CLI::PositiveNumber);
  };
  auto add_fit = [&](CLI::App* sub) {
    sub->add_option("--contrast", fit_flags.contrast, "chat or regional")->check(CLI::IsMember({"chat", "regional"}));
    sub->add_option("--knots", fit_flags.knots, "Comma-separated knot ages (min/max allowed)");
    sub->add_option("--alpha", fit_flags.alpha, "Significance level for stepwise selection");
    sub->add_option("--quadrature", fit_flags.quadrature, "laplace or agq:N");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus file and write it back in canonical form");
  add_common(ingest);
  ingest->add_option("--input", input, "Corpus file (JSON lines)");

  auto* normalize = app.add_subcommand("normalize", "Keep posts with enough words, one per author");
  add_common(normalize);
  normalize->add_option("--input", input, "Corpus file");

  auto* annotate = app.add_subcommand("annotate", "Tokenize and categorize every word");
  add_common(annotate);
  annotate->add_option("--input", input, "Corpus file");

  auto* balance = app.add_subcommand("balance", "Sample the same number of authors per age/gender/region cell");
  add_common(balance);
  balance->add_option("--input", input, "Corpus file (one post per author)");

  auto* fit = app.add_subcommand("fit", "Forward stepwise mixed-effects fit on a token table");
  add_common(fit);
  add_fit(fit);
  fit->add_option("--input", input, "Token table");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic annotated corpus");
  add_common(simulate);

  auto* report = app.add_subcommand("report", "Effect curves and plots from a model file or a curve table");
  add_common(report);
  report->add_option("--model", model_path, "Model file written by fit or pipeline");
  report->add_option("--curves", curves_path, "Curve table to re-plot");

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from corpus to plots");
  add_common(pipeline);
  add_fit(pipeline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ingest->parsed()) {
      ConfigFile f = load_config(common, false);
      const auto posts = load_corpus(input_path(input, f, "corpus"));
      const fs::path dir = out_dir(common, f);
      prepare(dir);
      write_to(dir / "corpus.jsonl", [&](std::ostream& o) { write_corpus(posts, o); });
      std::cout << posts.size() << " posts, " << detail::count_authors(posts) << " authors\n";
    } else if (normalize->parsed()) {
      ConfigFile f = load_config(common, false);
      apply_overrides(f, common);
      const PipelineConfig pc = pipeline_config(f);
      const auto posts = load_corpus(input_path(input, f, "corpus"));
      const auto selected = select_eligible(posts, pc.normalizer, pc.seed);
      const fs::path dir = out_dir(common, f);
      prepare(dir);
      write_to(dir / "selected.jsonl", [&](std::ostream& o) { write_corpus(selected, o); });
      std::cout << selected.size() << " of " << posts.size() << " posts kept\n";
    } else if (annotate->parsed()) {
      ConfigFile f = load_config(common, true);
      apply_overrides(f, common);
      const PipelineConfig pc = pipeline_config(f);
      const auto lex = lexicons_from(f);
      const auto posts = load_corpus(input_path(input, f, "corpus"));
      const auto tokens = annotate_corpus(posts, lex, Normalizer(pc.normalizer), pc.rules);
      const fs::path dir = out_dir(common, f);
      prepare(dir);
      write_to(dir / "tokens.tsv", [&](std::ostream& o) { write_tokens(tokens, o); });
      const auto c = count_categories(tokens);
      std::cout << c.total() << " words: " << c.standard << " std, " << c.chat << " chat, " << c.regional << " reg\n";
    } else if (balance->parsed()) {
      ConfigFile f = load_config(common, false);
      apply_overrides(f, common);
      const PipelineConfig pc = pipeline_config(f);
      auto posts = load_corpus(input_path(input, f, "corpus"));
      std::vector<Post> in_grid;
      for (auto& p : posts)
        if (pc.grid.contains(p.author)) in_grid.push_back(std::move(p));
      const std::size_t n = pc.n_per_cell ? *pc.n_per_cell : min_cell_size(in_grid, pc.grid).size;
      const auto sampled = balanced_sample(in_grid, n, pc.seed, pc.grid);
      const fs::path dir = out_dir(common, f);
      prepare(dir);
      write_to(dir / "balanced.jsonl", [&](std::ostream& o) { write_corpus(sampled, o); });
      write_to(dir / "balance_report.tsv",
               [&](std::ostream& o) { write_balance_report(balance_report(in_grid, sampled, pc.grid), o); });
      std::cout << sampled.size() << " authors, " << n << " per cell\n";
    } else if (fit->parsed()) {
      ConfigFile f = load_config(common, false);
      apply_overrides(f, common);
      apply_fit_flags(f, fit_flags);
      const PipelineConfig pc = pipeline_config(f);
      const auto tokens = load_tokens(input_path(input, f, "tokens"));
      if (tokens.empty()) throw DataError("token table is empty");
      int lo = tokens.front().age, hi = lo;
      for (const auto& t : tokens) {
        lo = std::min(lo, t.age);
        hi = std::max(hi, t.age);
      }
      const ContrastConfig& cc = pc.contrasts.front();
      const std::string name(contrast_name(cc.positive));
      const AnalysisSpec spec = pc.analysis(cc, lo, hi);
      const auto data = build_contrast(tokens, spec.contrast);
      const auto sw = forward_stepwise(data, spec);
      const fs::path dir = out_dir(common, f);
      prepare(dir);
      write_to(dir / ("trace_" + name + ".tsv"), [&](std::ostream& o) { write_trace(sw.trace, o); });
      write_to(dir / ("model_" + name + ".txt"), [&](std::ostream& o) { write_model(sw.model, o, name); });
      emit_plots({region_curves(sw.model, name, pc.curve_step)}, dir);
      write_trace(sw.trace, std::cout);
    } else if (simulate->parsed()) {
      ConfigFile f = load_config(common, false);
      apply_overrides(f, common);
      const SimSpec spec = sim_config(f);
      const auto sim = generate_corpus(spec);
      const fs::path dir = out_dir(common, f);
      prepare(dir);
      save_tokens(sim.records, dir / "tokens.tsv");
      save_corpus(render_posts(sim.records), dir / "corpus.jsonl");
      write_to(dir / "truth.tsv", [&](std::ostream& o) { write_truth(sim.truth, o); });
      std::cout << sim.records.size() << " tokens from " << sim.truth.author_effects.size() << " authors\n";
    } else if (report->parsed()) {
      ConfigFile f = load_config(common, false);
      const fs::path dir = out_dir(common, f);
      if (model_path.empty() == curves_path.empty()) throw ConfigError("report needs exactly one of --model, --curves");
      CurveSet set;
      if (!model_path.empty()) {
        std::ifstream in(model_path, std::ios::binary);
        if (!in) throw ConfigError("cannot open model file '" + model_path + "'");
        const ModelFile mf = read_model(in);
        set = region_curves(mf.model, mf.contrast.empty() ? "model" : mf.contrast, f.number("curve_step", 0.5));
      } else {
        std::ifstream in(curves_path, std::ios::binary);
        if (!in) throw ConfigError("cannot open curve table '" + curves_path + "'");
        set = read_curves(in);
      }
      for (const auto& p : emit_plots({set}, dir)) std::cout << p.string() << '\n';
    } else if (pipeline->parsed()) {
      ConfigFile f = load_config(common, true);
      apply_overrides(f, common);
      if (!common.out.empty()) f.set("out", fs::absolute(common.out).string());
      const bool contrast_given = pipeline->count("--contrast") > 0;
      if (!fit_flags.knots.empty() && !contrast_given) throw ConfigError("--knots needs --contrast in pipeline mode");
      apply_fit_flags(f, fit_flags, contrast_given);
      const PipelineConfig pc = pipeline_config(f);
      warn_unused(f);
      const auto result = run_pipeline(pc);
      write_stage_counts(result.stages, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
