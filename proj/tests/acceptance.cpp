// Acceptance suite. `acceptance` runs every criterion, `acceptance N ...`
// runs the listed ones; `--smoke` shortens criterion 7 to 10 replications.
// One PASS/FAIL line per criterion; the exit status is non-zero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "cmcvar/pipeline.hpp"
#include "cmcvar/simulate.hpp"

using namespace cmcvar;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, const char* f = "%.6g") { return detail::fmt(f, v); }

bool smoke = false;

// Truncated-power form of the restricted cubic spline, written out term by term.
std::vector<double> spline_oracle(double x, const std::vector<double>& t) {
  auto c = [](double u) { return u > 0 ? u * u * u : 0.0; };
  const std::size_t k = t.size();
  const double a = t[k - 1], b = t[k - 2], scale = (a - t[0]) * (a - t[0]);
  std::vector<double> out{x};
  for (std::size_t j = 0; j + 2 < k; ++j)
    out.push_back((c(x - t[j]) - c(x - b) * (a - t[j]) / (a - b) + c(x - a) * (b - t[j]) / (a - b)) / scale);
  return out;
}

Outcome criterion1() {
  const std::vector<double> knots{13, 15, 17, 33, 49};
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> u(10, 55);
  double max_err = 0;
  for (int i = 0; i < 100; ++i) {
    const double x = u(eng);
    const auto got = rcs_basis(x, knots), want = spline_oracle(x, knots);
    if (got.size() != want.size()) return {false, "basis dimension " + std::to_string(got.size())};
    for (std::size_t j = 0; j < got.size(); ++j) max_err = std::max(max_err, std::abs(got[j] - want[j]));
  }

  double max_second = 0;
  for (double x : {0.0, 5.0, 11.0, 50.5, 60.0, 80.0}) {
    const double h = 1.0;
    const auto a = rcs_basis(x - h, knots), b = rcs_basis(x, knots), c = rcs_basis(x + h, knots);
    for (std::size_t j = 0; j < a.size(); ++j)
      max_second = std::max(max_second, std::abs(a[j] - 2 * b[j] + c[j]) / std::max(1.0, std::abs(b[j])));
  }

  // One-sided second-order stencils are exact on each cubic piece.
  double max_jump = 0;
  const double h = 1e-3;
  for (double t : knots) {
    const auto l2 = rcs_basis(t - 2 * h, knots), l1 = rcs_basis(t - h, knots), m = rcs_basis(t, knots),
               r1 = rcs_basis(t + h, knots), r2 = rcs_basis(t + 2 * h, knots);
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double left = (3 * m[j] - 4 * l1[j] + l2[j]) / (2 * h), right = (-3 * m[j] + 4 * r1[j] - r2[j]) / (2 * h);
      max_jump = std::max(max_jump, std::abs(left - right));
    }
  }
  const bool pass = max_err <= 1e-10 && max_second <= 1e-9 && max_jump <= 1e-6;
  return {pass, "oracle error " + num(max_err) + ", outside second difference " + num(max_second) +
                    ", derivative jump " + num(max_jump)};
}

Outcome criterion2() {
  const std::vector<double> chat{13, 15, 17, 27, 33, 39, 49}, regional{13, 15, 17, 33, 49};
  ModelSpec spec;
  spec.spline = SplineBasis(chat);
  spec.terms = {Term::AgeSpline, Term::Region, Term::Gender, Term::AgeRegion, Term::AgeGender, Term::GenderRegion};
  const auto layout = design_layout(spec);
  auto width = [&](const char* term) {
    auto it = layout.term_map.find(term);
    return it == layout.term_map.end() ? -1 : static_cast<int>(it->second.size());
  };
  const int a7 = age_term_df(chat), a5 = age_term_df(regional);
  const int ar = width("age:region"), ag = width("age:gender"), gr = width("gender:region");
  const bool pass = a7 == 6 && a5 == 4 && ar == 18 && ag == 6 && gr == 3 && width("age_spline") == 6 &&
                    width("region") == 3 && width("gender") == 1;
  return {pass, "age df " + std::to_string(a7) + "/" + std::to_string(a5) + ", interactions " + std::to_string(ar) +
                    "/" + std::to_string(ag) + "/" + std::to_string(gr)};
}

struct SmallData {
  GlmmData data;
  Eigen::VectorXd beta;
};

// 10 clusters of 5 observations with an intercept and one covariate.
SmallData fixture() {
  std::mt19937_64 eng(10);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd X(50, 2);
  std::vector<int> y;
  std::vector<std::string> ids;
  for (int c = 0; c < 10; ++c) {
    const double b = 0.8 * normal(eng);
    for (int j = 0; j < 5; ++j) {
      const int r = c * 5 + j;
      X(r, 0) = 1;
      X(r, 1) = normal(eng);
      y.push_back(unif(eng) < logistic(-0.4 + 0.7 * X(r, 1) + b) ? 1 : 0);
      ids.push_back("k" + std::to_string(c));
    }
  }
  Eigen::VectorXd beta(2);
  beta << -0.3, 0.6;
  return {make_glmm_data(X, y, ids), beta};
}

double trapezoid(const GlmmData& d, const Eigen::VectorXd& beta, double sigma) {
  const Eigen::VectorXd eta = d.X * beta;
  double total = 0;
  for (std::size_t c = 0; c + 1 < d.cluster_offsets.size(); ++c) {
    const int n = 2001;
    const double lo = -12 * sigma - 5, hi = 12 * sigma + 5, h = (hi - lo) / (n - 1);
    double s = 0;
    for (int i = 0; i < n; ++i) {
      const double b = lo + i * h;
      double lik = std::exp(-0.5 * b * b / (sigma * sigma)) / (sigma * std::sqrt(2 * std::numbers::pi));
      for (std::size_t r = d.cluster_offsets[c]; r < d.cluster_offsets[c + 1]; ++r) {
        const double p = 1 / (1 + std::exp(-(eta(static_cast<Eigen::Index>(r)) + b)));
        lik *= d.y(static_cast<Eigen::Index>(r)) > 0.5 ? p : 1 - p;
      }
      s += (i == 0 || i == n - 1 ? 0.5 : 1.0) * lik;
    }
    total += std::log(s * h);
  }
  return total;
}

Outcome criterion3() {
  const auto f = fixture();
  double worst_agq = 0, worst_laplace = 0;
  for (double sigma : {0.25, 0.5, 1.0}) {
    const double brute = trapezoid(f.data, f.beta, sigma);
    const double agq = marginal_loglik(f.data, f.beta, sigma, Integration::agq(25));
    const double lap = marginal_loglik(f.data, f.beta, sigma, Integration::laplace());
    worst_agq = std::max(worst_agq, std::abs(agq - brute));
    worst_laplace = std::max(worst_laplace, std::abs(lap - brute) / std::abs(brute));
  }
  return {worst_agq <= 1e-6 && worst_laplace <= 0.02,
          "agq(25) max abs error " + num(worst_agq) + ", laplace max rel error " + num(worst_laplace)};
}

Outcome criterion4() {
  std::mt19937_64 eng(20130601);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd X(2000, 2);
  std::vector<int> y;
  std::vector<std::string> ids;
  for (int r = 0; r < 2000; ++r) {
    X(r, 0) = 1;
    X(r, 1) = normal(eng);
    y.push_back(unif(eng) < logistic(0.2 + 0.5 * X(r, 1)) ? 1 : 0);
    ids.push_back("c" + std::to_string(100 + r / 100));
  }
  // Newton iterations on the plain logistic likelihood, 2x2 solve by hand.
  double b0 = 0, b1 = 0;
  for (int it = 0; it < 100; ++it) {
    double a = 0, b = 0, d = 0, g0 = 0, g1 = 0;
    for (int r = 0; r < 2000; ++r) {
      const double p = 1 / (1 + std::exp(-(b0 + b1 * X(r, 1))));
      const double w = p * (1 - p);
      a += w;
      b += w * X(r, 1);
      d += w * X(r, 1) * X(r, 1);
      g0 += y[static_cast<std::size_t>(r)] - p;
      g1 += (y[static_cast<std::size_t>(r)] - p) * X(r, 1);
    }
    const double det = a * d - b * b;
    const double s0 = (d * g0 - b * g1) / det, s1 = (a * g1 - b * g0) / det;
    b0 += s0;
    b1 += s1;
    if (std::abs(s0) + std::abs(s1) < 1e-13) break;
  }
  const auto fit = fit_glmm(make_glmm_data(X, y, ids));
  const double err = std::max(std::abs(fit.beta(0) - b0), std::abs(fit.beta(1) - b1));
  return {fit.sigma < 0.15 && err <= 1e-3,
          "sigma " + num(fit.sigma) + ", max |beta - irls| " + num(err)};
}

Outcome criterion5() {
  const auto f = fixture();
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5), th(-1.5, 0.7);
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd beta(2);
    beta << u(eng), u(eng);
    const double theta = th(eng);
    const auto ev = evaluate_marginal(f.data, beta, theta, Integration::laplace(), true, 1);
    Eigen::VectorXd fd(3);
    const double h = 1e-5;
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd bp = beta, bm = beta;
      double tp = theta, tm = theta;
      if (j < 2) {
        bp(j) += h;
        bm(j) -= h;
      } else {
        tp += h;
        tm -= h;
      }
      fd(j) = (evaluate_marginal(f.data, bp, tp, Integration::laplace(), false, 1).value -
               evaluate_marginal(f.data, bm, tm, Integration::laplace(), false, 1).value) /
              (2 * h);
    }
    worst = std::max(worst, (ev.gradient - fd).norm() / std::max(1.0, fd.norm()));
  }
  return {worst < 1e-5, "max relative gradient error " + num(worst)};
}

SimSpec desk_spec(std::uint64_t seed) {
  SimSpec s;
  s.n_per_cell = 0;
  s.n_authors = 2000;
  s.curve = peak_chat_curve();
  s.sigma = 0.86;
  s.seed = seed;
  return s;
}

const std::vector<double> kChatKnots{13, 15, 17, 27, 33, 39, 49};

Outcome criterion6() {
  const auto sim = generate_corpus(desk_spec(1));
  const auto data = build_contrast(sim.records, {Category::Chat});
  ModelSpec spec;
  spec.spline = SplineBasis(kChatKnots);
  spec.terms = {Term::AgeSpline, Term::Region};
  const auto fit = fit_glmm(design_matrix(data, spec));
  const auto curve = effect_curve(fit, age_grid(13, 49, 0.1), Region::Brabant, Gender::Female);
  CurvePoint peak = curve.points.front();
  for (const auto& p : curve.points)
    if (p.probability > peak.probability) peak = p;
  const auto at = effect_curve(fit, {13, 15, 28, 41}, Region::Brabant, Gender::Female);
  const auto& truth = sim.truth.spec.curve;
  double worst = 0;
  std::string probs;
  for (const auto& p : at.points) {
    worst = std::max(worst, std::abs(p.probability - truth(p.age)));
    probs += (probs.empty() ? "" : " ") + num(p.age, "%g") + ":" + num(p.probability, "%.3f");
  }
  const bool pass = fit.converged && peak.age >= 14 && peak.age <= 16 && worst <= 0.03 && fit.sigma >= 0.71 &&
                    fit.sigma <= 1.01;
  return {pass, "peak age " + num(peak.age, "%.1f") + ", probabilities " + probs + " (max error " +
                    num(worst, "%.3f") + "), sigma " + num(fit.sigma, "%.3f")};
}

Outcome criterion7() {
  const int reps = smoke ? 10 : 100;
  const int need = smoke ? 9 : 90;
  int exact = 0;
  std::map<std::string, int> outcomes;
  for (int rep = 1; rep <= reps; ++rep) {
    auto s = desk_spec(static_cast<std::uint64_t>(rep));
    s.region_offsets = {{Region::WestFlanders, 0.5}, {Region::Limburg, -0.5}};
    const auto data = build_contrast(generate_corpus(s).records, {Category::Chat});
    AnalysisSpec a;
    a.knots = kChatKnots;
    const auto result = forward_stepwise(data, a);
    std::string key;
    for (Term t : result.model.spec.terms) key += (key.empty() ? "" : "+") + std::string(to_string(t));
    ++outcomes[key.empty() ? "intercept" : key];
    if (result.model.spec.terms == std::vector<Term>{Term::AgeSpline, Term::Region}) ++exact;
  }
  std::string detail = std::to_string(exact) + "/" + std::to_string(reps) + " select exactly age_spline+region;";
  for (const auto& [k, n] : outcomes) detail += " " + k + "=" + std::to_string(n);
  return {exact >= need, detail + (smoke ? " (smoke)" : "")};
}

Outcome criterion8() {
  int rejected = 0;
  const int reps = 500;
  for (int rep = 1; rep <= reps; ++rep) {
    SimSpec s;
    s.grid.age_min = 13;
    s.grid.age_max = 17;
    s.n_per_cell = 2;
    s.tokens_per_author = 10;
    s.token_distribution = TokenCountDistribution::Fixed;
    s.curve = AgeCurve::flat(0.2);
    s.sigma = 0.5;
    s.seed = static_cast<std::uint64_t>(rep);
    const auto data = build_contrast(generate_corpus(s).records, {Category::Chat});
    ModelSpec null_spec, region_spec;
    region_spec.terms = {Term::Region};
    const auto reduced = fit_glmm(design_matrix(data, null_spec));
    const auto full = fit_glmm(design_matrix(data, region_spec));
    const auto lr = lr_test(full, reduced);
    if (lr.df != 3) return {false, "region test has df " + std::to_string(lr.df)};
    rejected += lr.p < 0.05;
  }
  const double rate = static_cast<double>(rejected) / reps;
  return {rate >= 0.02 && rate <= 0.09, "rejection rate " + num(rate, "%.3f") + " over " + std::to_string(reps)};
}

class Scratch {
 public:
  Scratch() : path_(fs::temp_directory_path() / ("cmcvar_acceptance_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_pipeline_cli(const fs::path& out, int threads) {
  const std::string cmd = std::string(CMCVAR_CLI) + " pipeline --config \"" + CMCVAR_FIXTURES +
                          "/pipeline.conf\" --out \"" + out.string() + "\" --threads " + std::to_string(threads) +
                          " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome criterion9() {
  Scratch tmp;
  if (run_pipeline_cli(tmp.path() / "out", 1) != 0) return {false, "pipeline command failed"};
  const fs::path golden = fs::path(CMCVAR_FIXTURES) / "golden";
  const bool counts = slurp(tmp.path() / "out/stage_counts.tsv") == slurp(golden / "stage_counts.tsv");
  const bool tokens = slurp(tmp.path() / "out/tokens.tsv") == slurp(golden / "tokens.tsv");

  std::ifstream in(tmp.path() / "out/tokens.tsv");
  std::map<std::string, Category> cat;
  for (const auto& r : read_tokens(in)) cat[r.surface] = r.category;
  auto is = [&](const char* w, Category c) { return cat.count(w) && cat.at(w) == c; };
  const bool examples = is("niiice", Category::Chat) && !cat.count("niiiiice") && is("wrm", Category::Chat) &&
                        is("skone", Category::Regional) && is("veu", Category::Regional) && is("vr", Category::Chat);
  return {counts && tokens && examples, std::string("stage counts ") + (counts ? "match" : "differ") + ", tokens " +
                                            (tokens ? "match" : "differ") + ", examples " +
                                            (examples ? "as expected" : "wrong")};
}

std::uint64_t tree_hash(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    h = (h ^ 0xff) * 1099511628211ULL;
  };
  for (const auto& f : files) {
    mix(f.string());
    mix(slurp(root / f));
  }
  return h;
}

Outcome criterion10() {
  Scratch tmp;
  if (run_pipeline_cli(tmp.path() / "a", 1) != 0 || run_pipeline_cli(tmp.path() / "b", 1) != 0 ||
      run_pipeline_cli(tmp.path() / "c", 4) != 0)
    return {false, "pipeline command failed"};
  const auto a = tree_hash(tmp.path() / "a"), b = tree_hash(tmp.path() / "b"), c = tree_hash(tmp.path() / "c");
  return {a == b && b == c, "tree hashes " + std::to_string(a) + " " +
                                std::to_string(b) + " " + std::to_string(c) + " (threads 1, 1, 4)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--smoke") {
      smoke = true;
      continue;
    }
    const int n = std::atoi(arg.c_str());
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cerr << "usage: acceptance [--smoke] [1-10 ...]\n";
      return 2;
    }
    chosen.push_back(n);
  }
  if (chosen.empty())
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) chosen.push_back(n);

  int failed = 0;
  for (int n : chosen) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " ["
              << detail::fmt("%.1f", secs) << " s]" << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
