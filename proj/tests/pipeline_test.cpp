#include <gtest/gtest.h>

#include <cstdlib>
#include <map>
#include <sstream>

#include "cmcvar/pipeline.hpp"
#include "test_util.hpp"

using namespace cmcvar;
namespace fs = std::filesystem;

namespace {

PipelineConfig fixture_config(const fs::path& out) {
  PipelineConfig c = pipeline_config(ConfigFile::load(testutil::fixtures() / "pipeline.conf"));
  c.out = out;
  return c;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testutil::read_file(e.path());
  return out;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CMCVAR_CLI) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST(ConfigFile, ParsesListsQuotesAndComments) {
  std::istringstream in("# comment\n  a = 1 \nb = \"x y\"\nlist = p\nlist = q\n\nempty =\n");
  const auto f = ConfigFile::parse(in, "/base");
  EXPECT_EQ(f.get("a"), "1");
  EXPECT_EQ(f.get("b"), "x y");
  EXPECT_EQ(f.list("list"), (std::vector<std::string>{"p", "q"}));
  EXPECT_THROW(f.get("list"), ConfigError);
  EXPECT_EQ(f.get("empty"), "");
  EXPECT_FALSE(f.get("missing"));
  EXPECT_EQ(f.path("rel/x"), fs::path("/base/rel/x"));
  EXPECT_EQ(f.path("/abs"), fs::path("/abs"));
}

TEST(ConfigFile, TypedAccessorsAndErrors) {
  std::istringstream in("n = 2.5\ni = 7\nb = yes\nbad = 2x\n");
  const auto f = ConfigFile::parse(in);
  EXPECT_EQ(f.number("n", 0), 2.5);
  EXPECT_EQ(f.integer("i", 0), 7);
  EXPECT_TRUE(f.boolean("b", false));
  EXPECT_EQ(f.number("absent", 4.0), 4.0);
  EXPECT_THROW(f.number("bad", 0), ConfigError);
  EXPECT_THROW(f.integer("n", 0), ConfigError);
  EXPECT_THROW(f.boolean("bad", false), ConfigError);
  std::istringstream no_eq("just words\n");
  EXPECT_THROW(ConfigFile::parse(no_eq), ConfigError);
  EXPECT_THROW(ConfigFile::load("/nonexistent/x.conf"), ConfigError);
}

TEST(ConfigFile, UnusedKeysReported) {
  std::istringstream in("seed = 3\ncorpsu = typo.jsonl\n");
  const auto f = ConfigFile::parse(in);
  pipeline_config(f);
  EXPECT_EQ(f.unused_keys(), std::vector<std::string>{"corpsu"});
}

TEST(KnotSpec, ResolvesEndpoints) {
  const auto k = KnotSpec::parse("min, 15,17 ,max");
  EXPECT_EQ(k.resolve(13, 49), (std::vector<double>{13, 15, 17, 49}));
  EXPECT_EQ(k.str(), "min,15,17,max");
  EXPECT_THROW(KnotSpec::parse("13,,15"), ConfigError);
  EXPECT_THROW(KnotSpec::parse("13,abc"), ConfigError);
  EXPECT_THROW(KnotSpec::parse("min,15,max").resolve(16, 30), ConfigError);
}

TEST(PipelineConfig, DefaultsAndOverrides) {
  std::istringstream empty("");
  const auto d = pipeline_config(ConfigFile::parse(empty));
  ASSERT_EQ(d.contrasts.size(), 2u);
  EXPECT_EQ(d.contrasts[0].knots.str(), "min,15,17,27,33,39,max");
  EXPECT_EQ(d.contrasts[1].knots.str(), "min,15,17,33,max");
  EXPECT_EQ(d.grid.age_min, 13);
  EXPECT_EQ(d.grid.age_max, 49);
  EXPECT_EQ(d.alpha, 0.05);
  EXPECT_FALSE(d.n_per_cell);
  EXPECT_EQ(d.coding.region_reference, Region::Brabant);

  std::istringstream in(
      "contrast = regional\nregional.knots = 13,20,30\nregional.extra_knot = 25\nn_per_cell = 4\n"
      "region_reference = limburg\nquadrature = agq:7\nalpha = 0.01\n");
  const auto c = pipeline_config(ConfigFile::parse(in));
  ASSERT_EQ(c.contrasts.size(), 1u);
  EXPECT_EQ(c.contrasts[0].positive, Category::Regional);
  EXPECT_EQ(c.contrasts[0].extra_knot, 25.0);
  EXPECT_EQ(c.n_per_cell, 4u);
  EXPECT_EQ(c.coding.region_reference, Region::Limburg);
  EXPECT_EQ(c.integration, Integration::agq(7));

  for (const char* bad : {"contrast = standard\n", "alpha = 2\n", "n_per_cell = 0\n", "seed = -1\n",
                          "region_reference = holland\n", "quadrature = exact\n", "flooding_cap = 1\n"}) {
    std::istringstream b(bad);
    EXPECT_THROW(pipeline_config(ConfigFile::parse(b)), ConfigError) << bad;
  }
}

TEST(SimConfig, ReadsKeys) {
  std::istringstream in(
      "seed = 9\nsim.n_authors = 100\nsim.curve = 13:0.1\nsim.curve = 30:0.2\nsim.sigma = 0.5\n"
      "sim.region_offset.limburg = -0.3\nsim.token_distribution = fixed\nsim.contrast = regional\n");
  const auto s = sim_config(ConfigFile::parse(in));
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.n_authors, 100u);
  EXPECT_DOUBLE_EQ(s.curve(21.5), 0.15);
  EXPECT_EQ(s.region_offset(Region::Limburg), -0.3);
  EXPECT_EQ(s.token_distribution, TokenCountDistribution::Fixed);
  EXPECT_EQ(s.positive, Category::Regional);
  std::istringstream bad("sim.curve = 13-0.1\n");
  EXPECT_THROW(sim_config(ConfigFile::parse(bad)), ConfigError);
}

TEST(Pipeline, FixtureMatchesGoldenFiles) {
  testutil::TempDir tmp("golden");
  const auto result = run_pipeline(fixture_config(tmp / "out"));
  const auto golden = testutil::fixtures() / "golden";
  EXPECT_EQ(testutil::read_file(tmp / "out/stage_counts.tsv"), testutil::read_file(golden / "stage_counts.tsv"));
  EXPECT_EQ(testutil::read_file(tmp / "out/tokens.tsv"), testutil::read_file(golden / "tokens.tsv"));
  for (const char* f : {"balance_report.tsv", "age_profile.tsv", "trace_chat.tsv", "model_chat.txt",
                        "trace_regional.tsv", "model_regional.txt", "curves_chat.tsv", "effect_chat.svg",
                        "curves_regional.tsv", "effect_regional.svg"})
    EXPECT_TRUE(fs::exists(tmp / "out" / f)) << f;
  EXPECT_FALSE(fs::exists(tmp / ".out.partial"));
  EXPECT_EQ(result.stages.size(), 7u);
}

TEST(Pipeline, GoldenTokensShowFloodingAndCategories) {
  std::ifstream in(testutil::fixtures() / "golden/tokens.tsv");
  std::map<std::string, Category> cat;
  for (const auto& r : read_tokens(in)) cat[r.surface] = r.category;
  EXPECT_EQ(cat.at("niiice"), Category::Chat);
  EXPECT_FALSE(cat.count("niiiiice"));
  EXPECT_EQ(cat.at("wrm"), Category::Chat);
  EXPECT_EQ(cat.at("vr"), Category::Chat);
  EXPECT_EQ(cat.at("skone"), Category::Regional);
  EXPECT_EQ(cat.at("veu"), Category::Regional);
}

TEST(Pipeline, StageLedgerConsistent) {
  testutil::TempDir tmp("ledger");
  const auto result = run_pipeline(fixture_config(tmp / "out"));
  std::map<std::string, StageCount> by;
  for (const auto& s : result.stages) by[s.stage] = s;
  const auto& bal = by.at("balanced");
  EXPECT_EQ(by.at("contrast_chat").words.standard, bal.words.standard);
  EXPECT_EQ(by.at("contrast_chat").words.total(), bal.words.standard + bal.words.chat);
  EXPECT_EQ(by.at("contrast_regional").words.total(), bal.words.standard + bal.words.regional);
  std::ifstream tokens(tmp / "out/tokens.tsv");
  EXPECT_EQ(read_tokens(tokens).size(), bal.words.total());
}

TEST(Pipeline, MissingLexiconNamesPathAndWritesNothing) {
  testutil::TempDir tmp("missing");
  auto c = fixture_config(tmp / "out");
  c.lexicons.chat = {tmp / "no_such_chat.txt"};
  try {
    run_pipeline(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no_such_chat.txt"), std::string::npos);
  }
  EXPECT_TRUE(fs::is_empty(tmp.path()));
}

TEST(Pipeline, FailedStageLeavesEarlierRunUntouched) {
  testutil::TempDir tmp("fail");
  auto c = fixture_config(tmp / "out");
  run_pipeline(c);
  const auto before = tree(tmp / "out");
  c.n_per_cell = 5;
  try {
    run_pipeline(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
    EXPECT_NE(std::string(e.what()).find("stage 'balance'"), std::string::npos) << e.what();
  }
  EXPECT_EQ(tree(tmp / "out"), before);
  EXPECT_FALSE(fs::exists(tmp / ".out.partial"));
}

TEST(Pipeline, RefusesForeignNonEmptyDirectory) {
  testutil::TempDir tmp("foreign");
  fs::create_directories(tmp / "out");
  testutil::write_file(tmp / "out/keep.txt", "mine");
  EXPECT_THROW(run_pipeline(fixture_config(tmp / "out")), ConfigError);
  EXPECT_EQ(testutil::read_file(tmp / "out/keep.txt"), "mine");
}

TEST(Pipeline, DeterministicAcrossRunsAndThreads) {
  testutil::TempDir tmp("det");
  auto a = fixture_config(tmp / "a");
  auto b = fixture_config(tmp / "b");
  b.threads = 4;
  run_pipeline(a);
  run_pipeline(b);
  EXPECT_EQ(tree(tmp / "a"), tree(tmp / "b"));
  run_pipeline(a);
  EXPECT_EQ(tree(tmp / "a"), tree(tmp / "b"));
}

TEST(Pipeline, SeedChangesBalancedSelection) {
  testutil::TempDir tmp("seed");
  auto a = fixture_config(tmp / "a");
  auto b = fixture_config(tmp / "b");
  b.seed = 1;
  run_pipeline(a);
  run_pipeline(b);
  EXPECT_NE(testutil::read_file(tmp / "a/tokens.tsv"), testutil::read_file(tmp / "b/tokens.tsv"));
}

TEST(Cli, PipelineMatchesGoldenAndExitsZero) {
  testutil::TempDir tmp("cli");
  const auto conf = testutil::fixtures() / "pipeline.conf";
  EXPECT_EQ(run_cli("pipeline --config " + q(conf) + " --out " + q(tmp / "out"), tmp / "log"), 0)
      << testutil::read_file(tmp / "log");
  EXPECT_EQ(testutil::read_file(tmp / "out/stage_counts.tsv"),
            testutil::read_file(testutil::fixtures() / "golden/stage_counts.tsv"));
  EXPECT_EQ(testutil::read_file(tmp / "log"), testutil::read_file(tmp / "out/stage_counts.tsv"));
}

TEST(Cli, ExitCodes) {
  testutil::TempDir tmp("codes");
  const auto conf = testutil::fixtures() / "pipeline.conf";
  EXPECT_EQ(run_cli("pipeline", tmp / "log"), 2);
  EXPECT_EQ(run_cli("pipeline --config " + q(tmp / "nope.conf") + " --out " + q(tmp / "o"), tmp / "log"), 2);
  EXPECT_EQ(run_cli("pipeline --config " + q(conf) + " --bogus", tmp / "log"), 2);
  EXPECT_EQ(run_cli("fit --quadrature agq:zero --input " + q(tmp / "x.tsv") + " --out " + q(tmp / "o"), tmp / "log"), 2);

  testutil::write_file(tmp / "bad.jsonl", "{\"post_id\": \"p1\", \"author_id\": \"a\", \"age\": 20, \"gender\": \"f\", "
                                          "\"region\": \"holland\", \"text\": \"x\"}\n");
  EXPECT_EQ(run_cli("ingest --input " + q(tmp / "bad.jsonl") + " --out " + q(tmp / "o"), tmp / "log"), 3);
  EXPECT_NE(testutil::read_file(tmp / "log").find("region"), std::string::npos);

  testutil::write_file(tmp / "c.conf", "corpus = " + (testutil::fixtures() / "corpus_50.jsonl").string() +
                                           "\nlexicon.standard = " + (tmp / "gone.txt").string() + "\n");
  EXPECT_EQ(run_cli("pipeline --config " + q(tmp / "c.conf") + " --out " + q(tmp / "o2"), tmp / "log"), 2);
  EXPECT_NE(testutil::read_file(tmp / "log").find("gone.txt"), std::string::npos);
  EXPECT_FALSE(fs::exists(tmp / "o2"));

  EXPECT_EQ(Error(ErrorKind::Convergence, "x").exit_code(), 4);
  EXPECT_EQ(SeparationError("x").exit_code(), 4);
}

TEST(Cli, SubcommandsChain) {
  testutil::TempDir tmp("chain");
  const auto fx = testutil::fixtures();
  const auto conf = q(fx / "pipeline.conf");
  ASSERT_EQ(run_cli("ingest --input " + q(fx / "corpus_50.jsonl") + " --out " + q(tmp / "s1"), tmp / "log"), 0);
  ASSERT_EQ(run_cli("normalize --config " + conf + " --input " + q(tmp / "s1/corpus.jsonl") + " --out " + q(tmp / "s2"),
                    tmp / "log"),
            0)
      << testutil::read_file(tmp / "log");
  ASSERT_EQ(run_cli("balance --config " + conf + " --input " + q(tmp / "s2/selected.jsonl") + " --out " + q(tmp / "s3"),
                    tmp / "log"),
            0)
      << testutil::read_file(tmp / "log");
  ASSERT_EQ(run_cli("annotate --config " + conf + " --input " + q(tmp / "s3/balanced.jsonl") + " --out " + q(tmp / "s4"),
                    tmp / "log"),
            0)
      << testutil::read_file(tmp / "log");
  EXPECT_EQ(testutil::read_file(tmp / "s4/tokens.tsv"), testutil::read_file(fx / "golden/tokens.tsv"));

  ASSERT_EQ(run_cli("fit --contrast chat --knots 14,16,18 --input " + q(tmp / "s4/tokens.tsv") + " --out " +
                        q(tmp / "s5"),
                    tmp / "log"),
            0)
      << testutil::read_file(tmp / "log");
  ASSERT_EQ(run_cli("report --curves " + q(tmp / "s5/curves_chat.tsv") + " --out " + q(tmp / "s6"), tmp / "log"), 0);
  EXPECT_EQ(testutil::read_file(tmp / "s6/effect_chat.svg"), testutil::read_file(tmp / "s5/effect_chat.svg"));
  ASSERT_EQ(run_cli("report --model " + q(tmp / "s5/model_chat.txt") + " --out " + q(tmp / "s7"), tmp / "log"), 0);
  EXPECT_EQ(testutil::read_file(tmp / "s7/effect_chat.svg"), testutil::read_file(tmp / "s5/effect_chat.svg"));
  EXPECT_EQ(run_cli("report --out " + q(tmp / "s8"), tmp / "log"), 2);
}

TEST(Cli, SimulateWritesCorpusAndTruth) {
  testutil::TempDir tmp("sim");
  testutil::write_file(tmp / "sim.conf", "seed = 4\nage_min = 13\nage_max = 14\nsim.n_per_cell = 2\nsim.sigma = 0.5\n");
  ASSERT_EQ(run_cli("simulate --config " + q(tmp / "sim.conf") + " --out " + q(tmp / "o"), tmp / "log"), 0)
      << testutil::read_file(tmp / "log");
  std::ifstream tokens(tmp / "o/tokens.tsv");
  const auto recs = read_tokens(tokens);
  EXPECT_FALSE(recs.empty());
  EXPECT_EQ(load_corpus(tmp / "o/corpus.jsonl").size(), 32u);
  EXPECT_NE(testutil::read_file(tmp / "o/truth.tsv").find("seed\t4\n"), std::string::npos);
  ASSERT_EQ(run_cli("simulate --config " + q(tmp / "sim.conf") + " --out " + q(tmp / "p"), tmp / "log"), 0);
  EXPECT_EQ(testutil::read_file(tmp / "o/tokens.tsv"), testutil::read_file(tmp / "p/tokens.tsv"));
}
