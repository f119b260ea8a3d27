// Copyright 2026 The ffu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FFU_PRIVACY_HPP_
#define FFU_PRIVACY_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ffu/errors.hpp"
#include "ffu/matrix.hpp"
#include "ffu/workload.hpp"

namespace ffu {

// A noise covariance, validated symmetric positive definite on construction.
class Covariance {
 public:
  explicit Covariance(const Matrix& m)
      : sigma_(symmetrized(m)), chol_(cholesky(sigma_)) {}

  const SymMatrix& sigma() const { return sigma_; }
  const CholeskyFactor& chol() const { return chol_; }
  Index k() const { return sigma_.rows(); }

 private:
  SymMatrix sigma_;
  CholeskyFactor chol_;
};

// Per-column sensitivity profile: entry i is b_i^T Sigma^{-1} b_i where b_i
// is column i of the basis.  The mechanism's cost is the max over entries.
using PrivacyProfile = std::vector<double>;

inline PrivacyProfile privacy_profile(const Matrix& basis,
                                      const Covariance& cov) {
  if (basis.rows() != cov.k()) {
    throw DimensionMismatch("basis k does not match covariance order");
  }
  const Matrix u = solve_spd(cov.chol(), basis);  // Sigma^{-1} B, k x d
  PrivacyProfile out(static_cast<size_t>(basis.cols()));
  for (Index i = 0; i < basis.cols(); ++i) {
    out[static_cast<size_t>(i)] = basis.col(i).dot(u.col(i));
  }
  return out;
}

inline PrivacyProfile privacy_profile(const Decomposition& dec,
                                      const Covariance& cov) {
  return privacy_profile(dec.b, cov);
}

inline double squared_privacy_cost(const PrivacyProfile& profile) {
  if (profile.empty()) throw DimensionMismatch("empty privacy profile");
  return *std::max_element(profile.begin(), profile.end());
}

inline double privacy_cost(const Matrix& basis, const Covariance& cov) {
  return std::sqrt(squared_privacy_cost(privacy_profile(basis, cov)));
}

inline double privacy_cost(const Decomposition& dec, const Covariance& cov) {
  return privacy_cost(dec.b, cov);
}

// ---------------------------------------------------------------------------
// (epsilon, delta) accounting for a mechanism with cost Delta
// ---------------------------------------------------------------------------

namespace detail {

// log Phi(-x), accurate for large positive x (Phi = standard normal CDF).
inline double log_phi_neg(double x) {
  if (x < 25.0) {
    return std::log(0.5 * std::erfc(x / std::sqrt(2.0)));
  }
  // Asymptotic series: Phi(-x) = phi(x)/x * (1 - 1/x^2 + 3/x^4 - ...).
  const double x2 = x * x;
  return -0.5 * x2 - std::log(x) - 0.5 * std::log(2.0 * M_PI) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) +
                    105.0 / (x2 * x2 * x2 * x2));
}

inline double phi_neg(double x) {
  return 0.5 * std::erfc(x / std::sqrt(2.0));
}

}  // namespace detail

// Smallest delta for which the mechanism with the given cost is
// (epsilon, delta)-differentially private:
//   delta = Phi(Delta/2 - eps/Delta) - e^eps * Phi(-Delta/2 - eps/Delta).
inline double delta_for_epsilon(double cost, double epsilon) {
  if (epsilon < 0) throw OutOfRange("epsilon must be >= 0");
  if (cost < 0) throw OutOfRange("cost must be >= 0");
  if (cost == 0) return 0.0;
  const double x1 = epsilon / cost - cost / 2.0;  // -(Delta/2 - eps/Delta)
  const double x2 = epsilon / cost + cost / 2.0;
  if (epsilon <= 30.0) {
    const double delta = detail::phi_neg(x1) -
                         std::exp(epsilon) * detail::phi_neg(x2);
    return std::max(delta, 0.0);
  }
  // For large epsilon both terms underflow; factor the dominant one out:
  // delta = exp(l1) * (1 - exp(l2 - l1)) with l1 = log Phi(-x1),
  // l2 = eps + log Phi(-x2).
  const double l1 = detail::log_phi_neg(x1);
  const double l2 = epsilon + detail::log_phi_neg(x2);
  return -std::expm1(l2 - l1) * std::exp(l1);
}

// Smallest epsilon at which the mechanism with the given cost satisfies
// (epsilon, delta)-DP.  delta_for_epsilon is continuous and strictly
// decreasing in epsilon, so this is a bisection on [eps_lo, 100].  Requests
// below delta_for_epsilon(100) are out of supported range; requests at or
// above the eps -> 0+ level return the smallest positive epsilon probed.
inline double epsilon_for_delta(double cost, double delta) {
  if (!(delta > 0) || delta >= 1) throw OutOfRange("need 0 < delta < 1");
  if (cost < 0) throw OutOfRange("cost must be >= 0");
  if (cost == 0) return 0.0;
  constexpr double kEpsLo = 1e-12;
  constexpr double kEpsHi = 100.0;
  if (delta < delta_for_epsilon(cost, kEpsHi)) {
    throw OutOfRange("delta below supported range (epsilon would exceed 100)");
  }
  if (delta >= delta_for_epsilon(cost, kEpsLo)) return kEpsLo;
  double lo = kEpsLo, hi = kEpsHi;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (delta_for_epsilon(cost, mid) > delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct PrivacyCurvePoint {
  double epsilon = 0.0;
  double delta = 0.0;
  double cost = 0.0;
};

inline std::vector<PrivacyCurvePoint> privacy_curve(
    double cost, const std::vector<double>& epsilons) {
  std::vector<PrivacyCurvePoint> out;
  out.reserve(epsilons.size());
  for (double eps : epsilons) {
    out.push_back({eps, delta_for_epsilon(cost, eps), cost});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profile comparison
// ---------------------------------------------------------------------------

enum class Ordering { kLess, kEqual, kGreater };

inline std::string to_string(Ordering o) {
  switch (o) {
    case Ordering::kLess: return "less";
    case Ordering::kEqual: return "equal";
    case Ordering::kGreater: return "greater";
  }
  return "?";
}

// Refined privacy ordering: compares two profiles of equal length by their
// descending-sorted entries, lexicographically; entries within relative 1e-9
// are ties.  Less means a's worst exposures are smaller — a is preferable.
// Unlike elementwise dominance this order is total: the first strict
// difference always decides.
inline Ordering refined_compare(const PrivacyProfile& a,
                                const PrivacyProfile& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("profiles differ in length");
  }
  PrivacyProfile sa = a, sb = b;
  std::sort(sa.rbegin(), sa.rend());
  std::sort(sb.rbegin(), sb.rend());
  for (size_t i = 0; i < sa.size(); ++i) {
    const double scale = std::max({std::abs(sa[i]), std::abs(sb[i]), 1e-300});
    if (std::abs(sa[i] - sb[i]) <= 1e-9 * scale) continue;
    return sa[i] < sb[i] ? Ordering::kLess : Ordering::kGreater;
  }
  return Ordering::kEqual;
}

// ---------------------------------------------------------------------------
// Kronecker composition of two mechanisms
// ---------------------------------------------------------------------------

inline constexpr Index kKronMaxOrder = 4096;

// Composes two mechanisms over a product domain: bases, representations, and
// covariances combine by Kronecker product, so query (j1, j2) flattens to
// j1 * m2 + j2.  The composite privacy profile is the outer product of the
// factors' profiles, composite per-query variances are products of the
// factors' variances, and the composite squared cost is at most the product
// of the factor squared costs.
inline std::pair<Decomposition, Covariance> kron_compose(
    const Decomposition& dec1, const Covariance& cov1,
    const Decomposition& dec2, const Covariance& cov2) {
  const Index k = dec1.k() * dec2.k();
  if (k > kKronMaxOrder) {
    throw SizeLimit("composite basis order " + std::to_string(k) +
                    " exceeds " + std::to_string(kKronMaxOrder));
  }
  Decomposition dec{BasisKind::kExplicit, kron_dense(dec1.b, dec2.b),
                    kron_dense(dec1.l, dec2.l)};
  Covariance cov(kron_dense(cov1.sigma(), cov2.sigma()));
  return {std::move(dec), std::move(cov)};
}

// Outer product of per-query targets (or variances), flattened to match the
// kron_compose query order.
inline Vector kron_targets(const Vector& c1, const Vector& c2) {
  Vector out(c1.size() * c2.size());
  for (Index j1 = 0; j1 < c1.size(); ++j1) {
    for (Index j2 = 0; j2 < c2.size(); ++j2) {
      out(j1 * c2.size() + j2) = c1(j1) * c2(j2);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Basis conversion
// ---------------------------------------------------------------------------

// Re-expresses the mechanism (B1, Sigma1) in a new basis B2 whose row space
// contains B1's rows: Sigma2 = (B2 B1^+) Sigma1 (B2 B1^+)^T, using the
// Moore-Penrose right inverse.  The converted mechanism has the same output
// law and the same privacy profile as the original.
inline SymMatrix convert_covariance(const Matrix& b1, const SymMatrix& sigma1,
                                    const Matrix& b2) {
  if (b1.cols() != b2.cols() || b1.rows() != sigma1.rows()) {
    throw DimensionMismatch("basis conversion shapes do not match");
  }
  const Matrix t = b2 * pseudo_inverse(b1);  // k2 x k1
  return symmetrized(t * sigma1 * t.transpose());
}

// Companion conversion of the representation: L2 = L1 B1 B2^+, so that
// L2 B2 = W whenever W = L1 B1 lies in B2's row space.
inline Matrix convert_representation(const Matrix& l1, const Matrix& b1,
                                     const Matrix& b2) {
  return l1 * b1 * pseudo_inverse(b2);
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

struct PerQueryReport {
  std::string label;
  double target = 0.0;
  double variance = 0.0;
  double ratio = 0.0;  // variance / target
};

struct PrivacyReport {
  double cost = 0.0;          // Delta
  double squared_cost = 0.0;  // Delta^2 (= 2 rho in zCDP terms)
  double max_ratio = 0.0;
  PrivacyProfile profile;
  std::vector<PerQueryReport> per_query;
  std::vector<PrivacyCurvePoint> epsilon_delta_samples;
};

// Released variance of each query: diag(L Sigma L^T) without forming the
// m x m product.
inline Vector released_variances(const Matrix& l, const SymMatrix& sigma) {
  if (l.cols() != sigma.rows()) {
    throw DimensionMismatch("representation k does not match covariance");
  }
  return ((l * sigma).cwiseProduct(l)).rowwise().sum();
}

inline PrivacyReport make_report(const Workload& w, const Decomposition& dec,
                                 const Covariance& cov,
                                 const VarianceTargets& targets,
                                 const std::vector<double>& curve_epsilons) {
  if (targets.c.size() != dec.m()) {
    throw DimensionMismatch("targets length does not match query count");
  }
  PrivacyReport report;
  report.profile = privacy_profile(dec.b, cov);
  report.squared_cost = squared_privacy_cost(report.profile);
  report.cost = std::sqrt(report.squared_cost);
  const Vector vars = released_variances(dec.l, cov.sigma());
  report.max_ratio = 0.0;
  for (Index j = 0; j < dec.m(); ++j) {
    PerQueryReport q;
    q.label = w.labels[static_cast<size_t>(j)];
    q.target = targets.c(j);
    q.variance = vars(j);
    q.ratio = q.variance / q.target;
    report.max_ratio = std::max(report.max_ratio, q.ratio);
    report.per_query.push_back(std::move(q));
  }
  report.epsilon_delta_samples = privacy_curve(report.cost, curve_epsilons);
  return report;
}

inline nlohmann::json to_json(const PrivacyReport& report) {
  nlohmann::json per_query = nlohmann::json::array();
  for (const auto& q : report.per_query) {
    per_query.push_back({{"label", q.label},
                         {"target", q.target},
                         {"variance", q.variance},
                         {"ratio", q.ratio}});
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& p : report.epsilon_delta_samples) {
    samples.push_back({{"epsilon", p.epsilon}, {"delta", p.delta}});
  }
  return {{"cost", report.cost},
          {"squared_cost", report.squared_cost},
          {"max_ratio", report.max_ratio},
          {"profile", report.profile},
          {"per_query", std::move(per_query)},
          {"epsilon_delta_samples", std::move(samples)}};
}

}  // namespace ffu

#endif  // FFU_PRIVACY_HPP_
