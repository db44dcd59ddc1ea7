// Effect curves, their TSV form, SVG plots, model files and the stage-count ledger.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmcvar/annotate.hpp"
#include "cmcvar/common.hpp"
#include "cmcvar/design.hpp"
#include "cmcvar/glmm.hpp"

namespace cmcvar {

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string exact(double v) { return fmt("%.17g", v); }

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(what + ": '" + s + "' is not a number");
  }
}

inline std::string join_numbers(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt("%.17g", v[i]);
  return out;
}

inline std::vector<double> parse_numbers(const std::string& s, const std::string& what) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(parse_double(part, what));
  return out;
}

}  // namespace detail

struct CurvePoint {
  double age = 0.0;
  double probability = 0.0;
  bool extrapolated = false;
};

struct EffectCurve {
  Region region = Region::Brabant;
  Gender gender = Gender::Female;
  std::vector<CurvePoint> points;
};

/// Predicted probability over `ages` for one region/gender profile, random intercept at 0.
inline EffectCurve effect_curve(const FittedGlmm& model, const std::vector<double>& ages, Region region,
                                Gender gender) {
  EffectCurve c{region, gender, {}};
  const bool spline = model.spec.uses_spline();
  for (double age : ages) {
    const auto x = covariate_row(model.spec, age, gender, region);
    const bool outside = spline && (age < model.spec.spline.first() || age > model.spec.spline.last());
    c.points.push_back({age, predict_probability(model, x), outside});
  }
  return c;
}

inline EffectCurve effect_curve(const FittedGlmm& model, const std::vector<double>& ages,
                                std::string_view region, std::string_view gender) {
  auto r = parse_region(region);
  if (!r) throw ConfigError("unknown region level '" + std::string(region) + "'");
  auto g = parse_gender(gender);
  if (!g) throw ConfigError("unknown gender level '" + std::string(gender) + "'");
  return effect_curve(model, ages, *r, *g);
}

/// Ages from `lo` to `hi` inclusive in steps of `step`.
inline std::vector<double> age_grid(double lo, double hi, double step = 0.5) {
  if (!(step > 0.0) || hi < lo) throw ConfigError("age grid needs lo <= hi and a positive step");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

/// The curves drawn in one plot: one per region for a contrast.
struct CurveSet {
  std::string contrast;
  std::vector<double> knots;
  std::vector<EffectCurve> curves;
};

/// One curve per region at the reference gender, over the knot range.
inline CurveSet region_curves(const FittedGlmm& model, std::string contrast, double step = 0.5) {
  CurveSet set;
  set.contrast = std::move(contrast);
  set.knots = model.spec.spline.knots();
  const double lo = set.knots.empty() ? 13.0 : set.knots.front();
  const double hi = set.knots.empty() ? 49.0 : set.knots.back();
  const auto ages = age_grid(lo, hi, step);
  for (Region r : kAllRegions) set.curves.push_back(effect_curve(model, ages, r, model.spec.coding.gender_reference));
  return set;
}

inline void write_curves(const CurveSet& set, std::ostream& out) {
  out << "# contrast: " << set.contrast << '\n';
  out << "# knots: " << detail::join_numbers(set.knots) << '\n';
  out << "region\tgender\tage\tprobability\textrapolated\n";
  for (const auto& c : set.curves)
    for (const auto& p : c.points)
      out << to_string(c.region) << '\t' << to_string(c.gender) << '\t' << detail::exact(p.age) << '\t'
          << detail::exact(p.probability) << '\t' << (p.extrapolated ? 1 : 0) << '\n';
}

inline CurveSet read_curves(std::istream& in) {
  CurveSet set;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  auto where = [&] { return "curve table line " + std::to_string(line_no); };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# contrast: ", 0) == 0) {
      set.contrast = line.substr(12);
      continue;
    }
    if (line.rfind("# knots: ", 0) == 0) {
      set.knots = detail::parse_numbers(line.substr(9), where());
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "region\tgender\tage\tprobability\textrapolated") throw DataError(where() + ": bad header");
      header = true;
      continue;
    }
    const auto f = detail::split(line, '\t');
    if (f.size() != 5) throw DataError(where() + ": expected 5 fields");
    auto r = parse_region(f[0]);
    auto g = parse_gender(f[1]);
    if (!r || !g) throw DataError(where() + ": unknown region or gender");
    if (set.curves.empty() || set.curves.back().region != *r || set.curves.back().gender != *g)
      set.curves.push_back({*r, *g, {}});
    set.curves.back().points.push_back(
        {detail::parse_double(f[2], where()), detail::parse_double(f[3], where()), f[4] == "1"});
  }
  if (!header) throw DataError("curve table has no header");
  return set;
}

namespace detail {

inline const char* region_colour(Region r) {
  switch (r) {
    case Region::WestFlanders: return "#1b9e77";
    case Region::EastFlanders: return "#d95f02";
    case Region::Brabant: return "#7570b3";
    case Region::Limburg: return "#e7298a";
  }
  return "#000000";
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Static SVG of a curve set: one polyline per curve, knots marked by arrows under the age axis.
inline std::string render_svg(const CurveSet& set) {
  if (set.curves.empty()) throw DataError("cannot plot an empty curve set");
  constexpr double W = 720, H = 440, left = 70, right = 170, top = 40, bottom = 60;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, ymax = 0.0;
  for (const auto& c : set.curves)
    for (const auto& p : c.points) {
      x0 = std::min(x0, p.age);
      x1 = std::max(x1, p.age);
      ymax = std::max(ymax, p.probability);
    }
  for (double k : set.knots) {
    x0 = std::min(x0, k);
    x1 = std::max(x1, k);
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  ymax = std::min(1.0, std::max(0.05, std::ceil(ymax * 20.0) / 20.0));
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double a) { return left + (a - x0) / (x1 - x0) * pw; };
  auto sy = [&](double p) { return top + (1.0 - p / ymax) * ph; };
  auto f2 = [](double v) { return detail::fmt("%.2f", v); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
    << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << f2(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::xml_escape(set.contrast) << " vs standard</text>\n";
  o << "<g stroke=\"black\" fill=\"none\">\n";
  o << "<line x1=\"" << f2(left) << "\" y1=\"" << f2(top + ph) << "\" x2=\"" << f2(left + pw) << "\" y2=\""
    << f2(top + ph) << "\"/>\n";
  o << "<line x1=\"" << f2(left) << "\" y1=\"" << f2(top) << "\" x2=\"" << f2(left) << "\" y2=\"" << f2(top + ph)
    << "\"/>\n</g>\n";

  const double span = x1 - x0;
  const double xstep = span > 30 ? 5.0 : span > 10 ? 2.0 : 1.0;
  o << "<g text-anchor=\"middle\">\n";
  for (double a = std::ceil(x0 / xstep) * xstep; a <= x1 + 1e-9; a += xstep)
    o << "<text x=\"" << f2(sx(a)) << "\" y=\"" << f2(top + ph + 16) << "\">" << detail::fmt("%g", a)
      << "</text>\n";
  o << "</g>\n<g text-anchor=\"end\">\n";
  const double ystep = ymax > 0.5 ? 0.1 : ymax > 0.2 ? 0.05 : 0.02;
  for (int i = 0; i * ystep <= ymax + 1e-9; ++i) {
    const double v = i * ystep;
    o << "<text x=\"" << f2(left - 6) << "\" y=\"" << f2(sy(v) + 4) << "\">" << detail::fmt("%.2f", v)
      << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << f2(left + pw / 2) << "\" y=\"" << f2(H - 12) << "\" text-anchor=\"middle\">age</text>\n";
  o << "<text x=\"16\" y=\"" << f2(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << f2(top + ph / 2) << ")\">probability</text>\n";

  o << "<g class=\"knots\" fill=\"black\">\n";
  for (double k : set.knots) {
    const double x = sx(k), y = top + ph + 22;
    o << "<path d=\"M" << f2(x) << ' ' << f2(y) << " l-4 8 l8 0 z\"><title>knot " << detail::fmt("%g", k)
      << "</title></path>\n";
  }
  o << "</g>\n";

  double ly = top + 10;
  for (const auto& c : set.curves) {
    const std::string label = std::string(to_string(c.region)) +
                              (set.curves.size() > kAllRegions.size() ? " " + std::string(to_string(c.gender)) : "");
    o << "<polyline class=\"curve\" data-region=\"" << to_string(c.region) << "\" fill=\"none\" stroke=\""
      << detail::region_colour(c.region) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.points.size(); ++i)
      o << (i ? " " : "") << f2(sx(c.points[i].age)) << ',' << f2(sy(c.points[i].probability));
    o << "\"/>\n";
    o << "<line x1=\"" << f2(left + pw + 12) << "\" y1=\"" << f2(ly) << "\" x2=\"" << f2(left + pw + 36)
      << "\" y2=\"" << f2(ly) << "\" stroke=\"" << detail::region_colour(c.region) << "\" stroke-width=\"2\"/>\n";
    o << "<text class=\"label\" x=\"" << f2(left + pw + 42) << "\" y=\"" << f2(ly + 4) << "\">"
      << detail::xml_escape(label) << "</text>\n";
    ly += 18;
  }
  o << "</svg>\n";
  return o.str();
}

inline std::string curves_file_name(std::string_view contrast) { return "curves_" + std::string(contrast) + ".tsv"; }
inline std::string plot_file_name(std::string_view contrast) { return "effect_" + std::string(contrast) + ".svg"; }

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Data, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorKind::Data, "failed writing '" + path.string() + "'");
}

}  // namespace detail

/// Writes effect_<contrast>.svg plus curves_<contrast>.tsv for every set into `dir`.
inline std::vector<std::filesystem::path> emit_plots(const std::vector<CurveSet>& sets,
                                                     const std::filesystem::path& dir) {
  if (sets.empty()) throw DataError("emit_plots: no curve sets");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& set : sets) {
    std::ostringstream tsv;
    write_curves(set, tsv);
    const auto svg = render_svg(set);
    detail::write_file(dir / curves_file_name(set.contrast), tsv.str());
    detail::write_file(dir / plot_file_name(set.contrast), svg);
    written.push_back(dir / plot_file_name(set.contrast));
  }
  return written;
}

// ---------------------------------------------------------------------------
// Model files

inline void write_model(const FittedGlmm& m, std::ostream& out, std::string_view contrast = {}) {
  out << "cmcvar-model 1\n";
  if (!contrast.empty()) out << "contrast\t" << contrast << '\n';
  out << "knots\t" << detail::join_numbers(m.spec.spline.knots()) << '\n';
  out << "terms\t";
  for (std::size_t i = 0; i < m.spec.terms.size(); ++i) out << (i ? "," : "") << to_string(m.spec.terms[i]);
  out << '\n';
  out << "region_reference\t" << to_string(m.spec.coding.region_reference) << '\n';
  out << "gender_reference\t" << to_string(m.spec.coding.gender_reference) << '\n';
  out << "integration\t" << m.integration.to_string() << '\n';
  out << "loglik\t" << detail::exact(m.loglik) << '\n';
  out << "sigma\t" << detail::exact(m.sigma) << '\n';
  out << "sigma_se\t" << detail::exact(m.sigma_se) << '\n';
  out << "converged\t" << (m.converged ? 1 : 0) << '\n';
  out << "iterations\t" << m.iterations << '\n';
  out << "gradient_norm\t" << detail::exact(m.gradient_norm) << '\n';
  out << "n_obs\t" << m.n_obs << '\n';
  out << "n_clusters\t" << m.n_clusters << '\n';
  out << "coefficients\t" << m.n_coefficients() << '\n';
  out << "name\testimate\tse\tz\tp\n";
  for (std::size_t i = 0; i < m.n_coefficients(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const WaldResult w = wald_test(m.beta(k), m.se(k));
    out << m.coef_names[i] << '\t' << detail::exact(m.beta(k)) << '\t' << detail::exact(m.se(k)) << '\t'
        << detail::fmt("%.6g", w.z) << '\t' << detail::fmt("%.6g", w.p) << '\n';
  }
  out << "covariance\n";
  for (Eigen::Index i = 0; i < m.cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cov.cols(); ++j) out << (j ? "\t" : "") << detail::exact(m.cov(i, j));
    out << '\n';
  }
}

struct ModelFile {
  std::string contrast;
  FittedGlmm model;
};

inline ModelFile read_model(std::istream& in) {
  ModelFile mf;
  FittedGlmm& m = mf.model;
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return "model file line " + std::to_string(line_no); };
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || line != "cmcvar-model 1") throw DataError("not a model file");
  std::map<std::string, std::string> kv;
  std::size_t n_coef = 0;
  while (next()) {
    const auto f = detail::split(line, '\t');
    if (f.size() != 2) throw DataError(where() + ": expected key and value");
    kv[f[0]] = f[1];
    if (f[0] == "coefficients") {
      n_coef = static_cast<std::size_t>(detail::parse_double(f[1], where()));
      break;
    }
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw DataError("model file lacks '" + k + "'");
    return it->second;
  };
  mf.contrast = kv.count("contrast") ? kv["contrast"] : "";
  const auto knots = detail::parse_numbers(need("knots"), "knots");
  if (!knots.empty()) m.spec.spline = SplineBasis(knots);
  if (!need("terms").empty())
    for (const auto& t : detail::split(need("terms"), ',')) {
      auto term = parse_term(t);
      if (!term) throw DataError("model file: unknown term '" + t + "'");
      m.spec.terms.push_back(*term);
    }
  auto rr = parse_region(need("region_reference"));
  auto gr = parse_gender(need("gender_reference"));
  if (!rr || !gr) throw DataError("model file: bad reference level");
  m.spec.coding = {*rr, *gr};
  m.integration = Integration::parse(need("integration"));
  m.loglik = detail::parse_double(need("loglik"), "loglik");
  m.sigma = detail::parse_double(need("sigma"), "sigma");
  m.sigma_se = need("sigma_se") == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                         : detail::parse_double(need("sigma_se"), "sigma_se");
  m.converged = need("converged") == "1";
  m.iterations = static_cast<int>(detail::parse_double(need("iterations"), "iterations"));
  m.gradient_norm = detail::parse_double(need("gradient_norm"), "gradient_norm");
  m.n_obs = static_cast<std::size_t>(detail::parse_double(need("n_obs"), "n_obs"));
  m.n_clusters = static_cast<std::size_t>(detail::parse_double(need("n_clusters"), "n_clusters"));

  const DesignLayout layout = design_layout(m.spec);
  if (layout.names.size() != n_coef) throw DataError("model file: coefficient count does not match its terms");
  m.coef_names = layout.names;
  m.term_map = layout.term_map;
  m.beta.resize(static_cast<Eigen::Index>(n_coef));
  m.se.resize(static_cast<Eigen::Index>(n_coef));
  if (!next() || line != "name\testimate\tse\tz\tp") throw DataError(where() + ": bad coefficient header");
  for (std::size_t i = 0; i < n_coef; ++i) {
    if (!next()) throw DataError("model file truncated in coefficients");
    const auto f = detail::split(line, '\t');
    if (f.size() != 5 || f[0] != m.coef_names[i]) throw DataError(where() + ": unexpected coefficient row");
    m.beta(static_cast<Eigen::Index>(i)) = detail::parse_double(f[1], where());
    m.se(static_cast<Eigen::Index>(i)) = detail::parse_double(f[2], where());
  }
  if (!next() || line != "covariance") throw DataError(where() + ": expected covariance block");
  m.cov.resize(static_cast<Eigen::Index>(n_coef), static_cast<Eigen::Index>(n_coef));
  for (std::size_t i = 0; i < n_coef; ++i) {
    if (!next()) throw DataError("model file truncated in covariance");
    const auto f = detail::split(line, '\t');
    if (f.size() != n_coef) throw DataError(where() + ": covariance row has wrong width");
    for (std::size_t j = 0; j < n_coef; ++j)
      m.cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = detail::parse_double(f[j], where());
  }
  return mf;
}

// ---------------------------------------------------------------------------
// Stage-count ledger

struct StageCount {
  std::string stage;
  std::size_t posts = 0;
  std::size_t authors = 0;
  CategoryCounts words;
};

inline StageCount stage_count(std::string stage, const std::vector<TokenRecord>& records,
                              std::size_t posts, std::size_t authors) {
  return {std::move(stage), posts, authors, count_categories(records)};
}

/// Counts over the records themselves; posts and authors are those contributing a token.
inline StageCount stage_count(std::string stage, const std::vector<TokenRecord>& records) {
  std::set<std::string> posts, authors;
  for (const auto& r : records) {
    posts.insert(r.post_id);
    authors.insert(r.author_id);
  }
  return stage_count(std::move(stage), records, posts.size(), authors.size());
}

inline void write_stage_counts(const std::vector<StageCount>& rows, std::ostream& out) {
  out << "stage\tposts\tauthors\tstandard\tchat\tregional\ttotal\n";
  for (const auto& r : rows)
    out << r.stage << '\t' << r.posts << '\t' << r.authors << '\t' << r.words.standard << '\t' << r.words.chat
        << '\t' << r.words.regional << '\t' << r.words.total() << '\n';
}

inline std::vector<StageCount> read_stage_counts(std::istream& in) {
  std::vector<StageCount> rows;
  std::string line;
  if (!std::getline(in, line) || line != "stage\tposts\tauthors\tstandard\tchat\tregional\ttotal")
    throw DataError("stage counts: bad header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split(line, '\t');
    const std::string where = "stage counts line " + std::to_string(line_no);
    if (f.size() != 7) throw DataError(where + ": expected 7 fields");
    auto n = [&](const std::string& s) { return static_cast<std::size_t>(detail::parse_double(s, where)); };
    StageCount r{f[0], n(f[1]), n(f[2]), {n(f[3]), n(f[4]), n(f[5])}};
    if (r.words.total() != n(f[6])) throw DataError(where + ": total does not equal the category sum");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace cmcvar
