// Restricted (natural) cubic spline basis in the truncated-power form,
// normalized by the squared knot span. With k knots the basis has k - 1
// columns: x itself plus k - 2 nonlinear terms. The spanned functions are
// linear below the first and above the last knot and C2 everywhere.
//
// Other tools scale the nonlinear columns differently; fitted curves agree,
// coefficients do not.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cmcvar/common.hpp"

namespace cmcvar {

class SplineBasis {
 public:
  SplineBasis() = default;

  explicit SplineBasis(std::vector<double> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 3) throw ConfigError("spline basis needs at least 3 knots");
    for (std::size_t i = 1; i < knots_.size(); ++i)
      if (!(knots_[i] > knots_[i - 1])) throw ConfigError("spline knots must be strictly increasing");
  }

  const std::vector<double>& knots() const { return knots_; }
  std::size_t dimension() const { return knots_.empty() ? 0 : knots_.size() - 1; }
  double first() const { return knots_.front(); }
  double last() const { return knots_.back(); }

  void evaluate(double x, std::span<double> out) const {
    const std::size_t k = knots_.size();
    const double tk = knots_[k - 1];
    const double tk1 = knots_[k - 2];
    const double scale = (tk - knots_[0]) * (tk - knots_[0]);
    const double tail_k = cube_plus(x - tk);
    const double tail_k1 = cube_plus(x - tk1);
    out[0] = x;
    for (std::size_t j = 0; j + 2 < k; ++j) {
      const double tj = knots_[j];
      out[j + 1] = (cube_plus(x - tj) - tail_k1 * (tk - tj) / (tk - tk1) +
                    tail_k * (tk1 - tj) / (tk - tk1)) /
                   scale;
    }
  }

  std::vector<double> evaluate(double x) const {
    std::vector<double> out(dimension());
    evaluate(x, out);
    return out;
  }

  /// Returns a copy with one more knot; the old basis spans a subspace of the new one.
  SplineBasis with_knot(double extra) const {
    if (std::find(knots_.begin(), knots_.end(), extra) != knots_.end())
      throw ConfigError("extra knot " + std::to_string(extra) + " coincides with an existing knot");
    std::vector<double> k = knots_;
    k.push_back(extra);
    std::sort(k.begin(), k.end());
    return SplineBasis(std::move(k));
  }

  bool operator==(const SplineBasis&) const = default;

 private:
  static double cube_plus(double u) { return u > 0.0 ? u * u * u : 0.0; }

  std::vector<double> knots_;
};

inline std::vector<double> rcs_basis(double x, const std::vector<double>& knots) {
  return SplineBasis(knots).evaluate(x);
}

/// Degrees of freedom of the age term: one per basis column.
inline int age_term_df(const std::vector<double>& knots) {
  return static_cast<int>(SplineBasis(knots).dimension());
}

}  // namespace cmcvar
