// Logistic mixed model with one normal random intercept per cluster.
//
// The marginal likelihood of cluster i is
//   L_i = int prod_j Bernoulli(y_ij | logistic(x_ij'beta + b)) N(b | 0, sigma^2) db
// and is approximated per cluster by adaptive Gauss-Hermite quadrature
// centered and scaled at the conditional mode. One node is the Laplace
// approximation. Gradients are exact for the approximation (they include the
// dependence of the mode and curvature on the parameters), parameterized by
// (beta, theta = log sigma).
#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "cmcvar/common.hpp"
#include "cmcvar/design.hpp"
#include "cmcvar/stats.hpp"

namespace cmcvar {

struct Integration {
  enum class Kind { Laplace, Adaptive };
  Kind kind = Kind::Laplace;
  int nodes = 1;

  static Integration laplace() { return {}; }
  static Integration agq(int n) {
    if (n < 1) throw ConfigError("quadrature needs at least one node");
    return {n == 1 ? Kind::Laplace : Kind::Adaptive, n};
  }

  /// "laplace" or "agq:N".
  static Integration parse(std::string_view s) {
    if (s == "laplace") return laplace();
    if (s.starts_with("agq:")) {
      try {
        std::size_t used = 0;
        const std::string num(s.substr(4));
        int n = std::stoi(num, &used);
        if (used == num.size()) return agq(n);
      } catch (const std::exception&) {
      }
    }
    throw ConfigError("unknown quadrature '" + std::string(s) + "' (expected laplace or agq:N)");
  }

  std::string to_string() const {
    return kind == Kind::Laplace ? "laplace" : "agq:" + std::to_string(nodes);
  }

  bool operator==(const Integration&) const = default;
};

namespace detail {

/// Runs fn(begin, end) over [0, n) split into contiguous chunks.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t t = std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1, n == 0 ? 1 : n);
  if (t == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + t - 1) / t;
  for (std::size_t k = 0; k < t; ++k) {
    const std::size_t b = k * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

inline constexpr int kModeMaxIterations = 50;
inline constexpr double kModeTolerance = 1e-10;

// Conditional log-density h(b) up to the b-independent normal constant,
// plus its first derivative.
struct ClusterView {
  const double* eta;
  const double* y;
  std::size_t n;
};

inline double cluster_h(const ClusterView& c, double b, double inv_var) {
  double s = 0.0;
  for (std::size_t j = 0; j < c.n; ++j) s += bernoulli_loglik(static_cast<int>(c.y[j]), c.eta[j] + b);
  return s - 0.5 * b * b * inv_var;
}

inline double find_mode(const ClusterView& c, double inv_var, const std::string& cluster_id) {
  double b = 0.0;
  double h = cluster_h(c, b, inv_var);
  for (int it = 0; it < kModeMaxIterations; ++it) {
    double g = -b * inv_var, H = inv_var;
    for (std::size_t j = 0; j < c.n; ++j) {
      const double mu = logistic(c.eta[j] + b);
      g += c.y[j] - mu;
      H += mu * (1.0 - mu);
    }
    if (std::abs(g) < kModeTolerance) return b;
    double step = g / H;
    // h is strictly concave; halve until the step does not decrease it
    // (beyond rounding in h itself).
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(h));
    for (int half = 0; half < 60; ++half) {
      const double h_new = cluster_h(c, b + step, inv_var);
      if (h_new >= h - slack) {
        b += step;
        h = h_new;
        break;
      }
      step *= 0.5;
      if (half == 59) return b;  // at the floating-point floor
    }
  }
  throw ConvergenceError("random-effect mode search did not converge for cluster '" + cluster_id + "'");
}

}  // namespace detail

/// Per-evaluation output of the marginal likelihood.
struct LoglikEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;  // d/d(beta, theta), length p + 1; empty if not requested
};

/// Approximate marginal log-likelihood at (beta, theta = log sigma), with
/// its exact gradient when `want_gradient`. The per-cluster terms are summed
/// in cluster order, so the result does not depend on `threads`.
inline LoglikEvaluation evaluate_marginal(const GlmmData& data, const Eigen::VectorXd& beta, double theta,
                                          const Integration& integration, bool want_gradient,
                                          int threads = 1) {
  const auto p = static_cast<Eigen::Index>(data.n_coefficients());
  if (beta.size() != p) throw DataError("coefficient vector length does not match the design");
  const std::size_t C = data.n_clusters();
  const Eigen::VectorXd eta = data.X * beta;
  const double sigma = std::exp(theta);
  const double inv_var = 1.0 / (sigma * sigma);
  const GaussHermiteRule rule = integration.kind == Integration::Kind::Laplace
                                    ? GaussHermiteRule{{0.0}, {std::sqrt(std::numbers::pi)}}
                                    : gauss_hermite(integration.nodes);
  const std::size_t K = rule.nodes.size();
  std::vector<double> log_w(K);
  for (std::size_t k = 0; k < K; ++k) log_w[k] = std::log(rule.weights[k]) + rule.nodes[k] * rule.nodes[k];

  std::vector<double> ll(C, 0.0), dtheta(C, 0.0);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(eta.size());
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi) - theta;

  detail::parallel_chunks(C, threads, [&](std::size_t cb, std::size_t ce) {
    std::vector<double> a(K), hp(K), bk(K), pk(K);
    std::vector<double> mu0, mubar;
    for (std::size_t c = cb; c < ce; ++c) {
      const std::size_t off = data.cluster_offsets[c];
      const std::size_t n = data.cluster_offsets[c + 1] - off;
      detail::ClusterView view{eta.data() + off, data.y.data() + off, n};
      const double bhat = detail::find_mode(view, inv_var, data.cluster_ids[c]);

      mu0.assign(n, 0.0);
      double H = inv_var, D = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double mu = logistic(view.eta[j] + bhat);
        const double w = mu * (1.0 - mu);
        mu0[j] = mu;
        H += w;
        D += w * (1.0 - 2.0 * mu);
      }
      const double s = 1.0 / std::sqrt(H);

      double amax = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        bk[k] = bhat + std::numbers::sqrt2 * s * rule.nodes[k];
        double h = -0.5 * bk[k] * bk[k] * inv_var + log_norm;
        double g = -bk[k] * inv_var;
        for (std::size_t j = 0; j < n; ++j) {
          const double e = view.eta[j] + bk[k];
          h += bernoulli_loglik(static_cast<int>(view.y[j]), e);
          g += view.y[j] - logistic(e);
        }
        hp[k] = g;
        a[k] = log_w[k] + h;
        amax = std::max(amax, a[k]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) sum += std::exp(a[k] - amax);
      const double lse = amax + std::log(sum);
      ll[c] = 0.5 * std::log(2.0) + std::log(s) + lse;

      if (!want_gradient) continue;

      double S1 = 0.0, S2 = 0.0, bsq = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        pk[k] = std::exp(a[k] - lse);
        S1 += pk[k] * hp[k];
        S2 += pk[k] * hp[k] * std::numbers::sqrt2 * rule.nodes[k];
        bsq += pk[k] * (bk[k] * bk[k] * inv_var - 1.0);
      }
      mubar.assign(n, 0.0);
      if (K == 1) {
        mubar = mu0;
      } else {
        for (std::size_t k = 0; k < K; ++k)
          for (std::size_t j = 0; j < n; ++j) mubar[j] += pk[k] * logistic(view.eta[j] + bk[k]);
      }
      const double s3 = s * s * s;
      const double alpha_d = -0.5 / H - 0.5 * S2 * s3;
      const double alpha_c = -S1 / H - D * alpha_d / H;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = mu0[j] * (1.0 - mu0[j]);
        r(static_cast<Eigen::Index>(off + j)) =
            (view.y[j] - mubar[j]) + alpha_c * w + alpha_d * w * (1.0 - 2.0 * mu0[j]);
      }
      const double dmode = 2.0 * bhat * inv_var / H;
      const double dH = -2.0 * inv_var + D * dmode;
      dtheta[c] = -0.5 * dH / H + bsq + S1 * dmode - 0.5 * S2 * s3 * dH;
    }
  });

  LoglikEvaluation out;
  for (double v : ll) out.value += v;
  if (want_gradient) {
    out.gradient.resize(p + 1);
    out.gradient.head(p) = data.X.transpose() * r;
    double gt = 0.0;
    for (double v : dtheta) gt += v;
    out.gradient(p) = gt;
  }
  return out;
}

/// Plain logistic log-likelihood (the sigma = 0 limit).
inline double logistic_loglik(const GlmmData& data, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = data.X * beta;
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += bernoulli_loglik(static_cast<int>(data.y(i)), eta(i));
  return s;
}

inline double marginal_loglik(const GlmmData& data, const Eigen::VectorXd& beta, double sigma,
                              const Integration& integration = {}, int threads = 1) {
  if (sigma < 0.0) throw ConfigError("random-intercept SD must be non-negative");
  if (sigma == 0.0) return logistic_loglik(data, beta);
  return evaluate_marginal(data, beta, std::log(sigma), integration, false, threads).value;
}

struct FitOptions {
  Integration integration;
  int threads = 1;
  int max_iterations = 500;
  double gradient_tolerance = 1e-5;
  double improvement_tolerance = 1e-8;
  /// Also stop once the quasi-Newton predicted gain drops below this
  /// fraction of |loglik|; at large n the absolute gradient test sits below
  /// the rounding floor of the likelihood sum.
  double relative_gain_tolerance = 1e-11;
  double separation_bound = 30.0;
  /// log sigma is kept above this; sigma estimates at the bound mean "zero".
  double min_log_sigma = -12.0;
  std::optional<Eigen::VectorXd> start_beta;
  std::optional<double> start_sigma;
};

struct FittedGlmm {
  ModelSpec spec;
  std::vector<std::string> coef_names;
  std::map<std::string, std::vector<std::size_t>> term_map;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd cov;
  double sigma = 0.0;
  double sigma_se = std::numeric_limits<double>::quiet_NaN();
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  Integration integration;

  std::size_t n_coefficients() const { return static_cast<std::size_t>(beta.size()); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < coef_names.size(); ++i)
      if (coef_names[i] == name) return i;
    return std::nullopt;
  }
};

/// Plain logistic regression by damped Newton-Raphson. Used for starting
/// values; throws SeparationError when the coefficients diverge.
inline Eigen::VectorXd fit_logistic(const GlmmData& data, double separation_bound = 30.0,
                                    Eigen::MatrixXd* information = nullptr) {
  const Eigen::Index p = data.X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = logistic_loglik(data, beta);
  Eigen::MatrixXd info(p, p);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd eta = data.X * beta;
    Eigen::VectorXd resid(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = logistic(eta(i));
      resid(i) = data.y(i) - mu;
      w(i) = mu * (1.0 - mu);
    }
    const Eigen::VectorXd grad = data.X.transpose() * resid;
    info = data.X.transpose() * w.asDiagonal() * data.X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw ConvergenceError("logistic start: information matrix is singular");
    Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    double ll_new = ll;
    for (int half = 0; half < 50; ++half, t *= 0.5) {
      ll_new = logistic_loglik(data, beta + t * step);
      if (ll_new >= ll) break;
    }
    beta += t * step;
    if ((data.X * beta).cwiseAbs().maxCoeff() > separation_bound)
      throw SeparationError("coefficients diverge in logistic fit (separation)");
    const double change = (t * step).cwiseAbs().maxCoeff();
    ll = ll_new;
    if (change < 1e-10) break;
  }
  if (information) *information = info;
  return beta;
}

namespace detail {

inline Eigen::MatrixXd numeric_hessian(const GlmmData& data, const Eigen::VectorXd& x,
                                       const Integration& integration, int threads) {
  const Eigen::Index n = x.size();
  const Eigen::Index p = n - 1;
  Eigen::MatrixXd Hm(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = 1e-4 * std::max(1.0, std::abs(x(j)));
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const auto gp = evaluate_marginal(data, xp.head(p), xp(p), integration, true, threads).gradient;
    const auto gm = evaluate_marginal(data, xm.head(p), xm(p), integration, true, threads).gradient;
    Hm.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (Hm + Hm.transpose());
}

}  // namespace detail

/// Maximizes the approximate marginal likelihood over (beta, log sigma) by
/// BFGS with a monotone backtracking line search. Standard errors come from
/// the inverse negative Hessian (central differences of the exact gradient).
inline FittedGlmm fit_glmm(const GlmmData& data, const FitOptions& options = {}) {
  if (data.n_clusters() < 2) throw DataError("fit_glmm needs at least two clusters");
  const double ysum = data.y.sum();
  if (ysum == 0.0 || ysum == static_cast<double>(data.n_obs()))
    throw SeparationError("response takes a single value; the model is not estimable");

  const Eigen::Index p = static_cast<Eigen::Index>(data.n_coefficients());
  const Eigen::Index n = static_cast<Eigen::Index>(data.n_obs());

  // The likelihood sees beta only through X*beta, so the search runs on
  // gamma = R*beta with orthonormal columns Q = X*R^-1 (scaled by sqrt(n)).
  // The raw age and spline columns are far too ill-conditioned otherwise.
  if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(data.X).rank() < p)
    throw ConvergenceError("design matrix is rank deficient (a level or term has no support in the data)");
  const double root_n = std::sqrt(static_cast<double>(n));
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(data.X);
  const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>().toDenseMatrix() / root_n;
  const Eigen::MatrixXd R_inv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  GlmmData work = data;
  work.X = (qr.householderQ() * Eigen::MatrixXd::Identity(n, p)) * root_n;

  Eigen::MatrixXd info;
  Eigen::VectorXd beta0;
  if (options.start_beta) {
    if (options.start_beta->size() != p) throw ConfigError("start_beta has the wrong length");
    beta0 = R * *options.start_beta;
    info = work.X.transpose() * work.X * 0.25;
  } else {
    beta0 = fit_logistic(work, options.separation_bound, &info);
  }
  const double theta0 = std::log(options.start_sigma.value_or(1.0));

  Eigen::VectorXd x(p + 1);
  x.head(p) = beta0;
  x(p) = std::max(theta0, options.min_log_sigma);

  Eigen::MatrixXd Hinv0 = Eigen::MatrixXd::Zero(p + 1, p + 1);
  {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Hinv0.topLeftCorner(p, p) = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    Hinv0(p, p) = 1.0 / static_cast<double>(data.n_clusters());
  }
  Eigen::MatrixXd Hinv = Hinv0;

  auto eval = [&](const Eigen::VectorXd& v) {
    return evaluate_marginal(work, v.head(p), v(p), options.integration, true, options.threads);
  };
  auto at_bound = [&](const Eigen::VectorXd& v) { return v(p) <= options.min_log_sigma + 1e-12; };
  auto free_grad_norm = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& g) {
    double m = g.head(p).cwiseAbs().maxCoeff();
    if (!(at_bound(v) && g(p) < 0.0)) m = std::max(m, std::abs(g(p)));
    return m;
  };

  LoglikEvaluation cur = eval(x);
  bool converged = false;
  int iter = 0;
  bool fresh = true;
  for (; iter < options.max_iterations; ++iter) {
    Eigen::VectorXd d = Hinv * cur.gradient;
    if (at_bound(x) && d(p) < 0.0) d(p) = 0.0;
    double slope = cur.gradient.dot(d);
    if (!(slope > 0.0)) {
      Hinv = Hinv0;
      fresh = true;
      d = Hinv * cur.gradient;
      if (at_bound(x) && d(p) < 0.0) d(p) = 0.0;
      slope = cur.gradient.dot(d);
    }
    if (0.5 * slope < options.relative_gain_tolerance * std::max(1.0, std::abs(cur.value))) {
      converged = true;
      break;
    }
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > 5.0) {
      d *= 5.0 / dmax;
      slope = cur.gradient.dot(d);
    }

    bool accepted = false;
    Eigen::VectorXd x_new;
    LoglikEvaluation next;
    double t = 1.0;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      x_new = x + t * d;
      x_new(p) = std::max(x_new(p), options.min_log_sigma);
      next = eval(x_new);
      if (std::isfinite(next.value) && next.value >= cur.value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh) {
        Hinv = Hinv0;
        fresh = true;
        continue;
      }
      // No ascent direction left at working precision.
      converged = free_grad_norm(x, cur.gradient) < options.gradient_tolerance * 100.0;
      break;
    }
    if ((work.X * x_new.head(p)).cwiseAbs().maxCoeff() > options.separation_bound)
      throw SeparationError("a linear predictor exceeded " + std::to_string(options.separation_bound) +
                            " in absolute value (separation)");

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = cur.gradient - next.gradient;  // curvature of the negated objective
    const double improvement = next.value - cur.value;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p + 1, p + 1);
      Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
      fresh = false;
    }
    x = x_new;
    cur = std::move(next);
    if (improvement < options.improvement_tolerance &&
        free_grad_norm(x, cur.gradient) < options.gradient_tolerance) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("marginal likelihood maximization did not converge (iterations " +
                           std::to_string(iter) + ", gradient norm " +
                           std::to_string(free_grad_norm(x, cur.gradient)) + ")");

  FittedGlmm fit;
  fit.spec = data.spec;
  fit.coef_names = data.layout.names;
  fit.term_map = data.layout.term_map;
  fit.beta = R_inv * x.head(p);
  fit.sigma = at_bound(x) ? 0.0 : std::exp(x(p));
  fit.loglik = cur.value;
  fit.converged = converged;
  fit.iterations = iter;
  fit.gradient_norm = free_grad_norm(x, cur.gradient);
  fit.n_obs = data.n_obs();
  fit.n_clusters = data.n_clusters();
  fit.integration = options.integration;

  const Eigen::MatrixXd hess = detail::numeric_hessian(work, x, options.integration, options.threads);
  const Eigen::MatrixXd neg = -hess;
  Eigen::LLT<Eigen::MatrixXd> full(neg);
  if (!at_bound(x) && full.info() == Eigen::Success) {
    const Eigen::MatrixXd inv = full.solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
    fit.cov = inv.topLeftCorner(p, p);
    fit.sigma_se = std::sqrt(std::max(0.0, inv(p, p))) * fit.sigma;
  } else {
    // sigma at (or numerically indistinguishable from) zero: condition on it.
    Eigen::LLT<Eigen::MatrixXd> block(neg.topLeftCorner(p, p));
    if (block.info() != Eigen::Success)
      throw ConvergenceError("negative Hessian of the fixed effects is not positive definite");
    fit.cov = block.solve(Eigen::MatrixXd::Identity(p, p));
  }
  fit.cov = R_inv * fit.cov * R_inv.transpose();
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose());
  fit.se = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

/// Population-median probability: logistic(x'beta) with random intercept 0.
inline double predict_probability(const FittedGlmm& model, std::span<const double> covariates) {
  if (covariates.size() != model.n_coefficients())
    throw DataError("predict_probability: expected " + std::to_string(model.n_coefficients()) +
                    " covariates, got " + std::to_string(covariates.size()));
  double eta = 0.0;
  for (std::size_t j = 0; j < covariates.size(); ++j) eta += covariates[j] * model.beta(static_cast<Eigen::Index>(j));
  return logistic(eta);
}

struct WaldResult {
  double z = 0.0;
  double p = 1.0;
};

inline WaldResult wald_test(double estimate, double se) {
  if (estimate == 0.0) return {0.0, 1.0};
  const double z = estimate / se;
  return {z, normal_two_sided_p(z)};
}

inline WaldResult wald_test(const FittedGlmm& model, std::string_view coefficient) {
  auto idx = model.index_of(coefficient);
  if (!idx) throw DataError("unknown coefficient '" + std::string(coefficient) + "'");
  const auto i = static_cast<Eigen::Index>(*idx);
  return wald_test(model.beta(i), model.se(i));
}

struct LrTestResult {
  double chi2 = 0.0;
  int df = 0;
  double p = 1.0;
  bool clamped = false;  // optimizer noise produced a negative statistic
};

inline LrTestResult lr_test_from_logliks(double loglik_full, double loglik_reduced, int df) {
  LrTestResult r;
  r.df = df;
  r.chi2 = 2.0 * (loglik_full - loglik_reduced);
  if (r.chi2 < 0.0) {
    r.clamped = r.chi2 < -1e-6;
    r.chi2 = 0.0;
  }
  r.p = chi_square_upper_tail(r.chi2, df);
  return r;
}

inline LrTestResult lr_test(const FittedGlmm& full, const FittedGlmm& reduced) {
  if (full.n_obs != reduced.n_obs || full.n_clusters != reduced.n_clusters)
    throw DataError("lr_test: models were fitted to different datasets");
  if (!(full.spec.coding == reduced.spec.coding)) throw DataError("lr_test: models use different coding");
  for (Term t : reduced.spec.terms)
    if (!full.spec.has(t)) throw DataError("lr_test: models are not nested (term " + std::string(to_string(t)) + ")");
  if (reduced.spec.uses_spline()) {
    const auto& fk = full.spec.spline.knots();
    for (double k : reduced.spec.spline.knots())
      if (std::find(fk.begin(), fk.end(), k) == fk.end())
        throw DataError("lr_test: models are not nested (knot sets)");
  }
  const int df = static_cast<int>(full.n_coefficients()) - static_cast<int>(reduced.n_coefficients());
  if (df < 0) throw DataError("lr_test: full model has fewer parameters than the reduced one");
  LrTestResult r = lr_test_from_logliks(full.loglik, reduced.loglik, df);
  if (r.clamped)
    std::clog << "warning: negative likelihood-ratio statistic clamped to 0 (optimizer tolerance)\n";
  return r;
}

}  // namespace cmcvar
