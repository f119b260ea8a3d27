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

#ifndef FFU_ORACLES_HPP_
#define FFU_ORACLES_HPP_

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffu/errors.hpp"
#include "ffu/matrix.hpp"
#include "ffu/workload.hpp"

namespace ffu {

// Closed-form optima for two small workload families, used as ground truth
// for the optimizer and as standalone calculators.

enum class OracleMode { kFitnessForUse, kSumSquared };

inline std::string to_string(OracleMode mode) {
  return mode == OracleMode::kFitnessForUse ? "fitness-for-use" : "sum-squared";
}

// ---------------------------------------------------------------------------
// 2-D family: W = [[1,1],[1,0]] with B = W (so L = I)
// ---------------------------------------------------------------------------

inline Workload twod_workload() {
  Matrix w(2, 2);
  w << 1, 1, 1, 0;
  return Workload{std::move(w), {"sum", "first"}};
}

struct TwoDSolution {
  double a = 0.0;        // Sigma = [[a, c], [c, d_entry]] on the B = W side
  double c = 0.0;
  double d_entry = 0.0;
  double objective = 0.0;  // squared cost (fitness) or total variance (ssq)
  OracleMode mode = OracleMode::kFitnessForUse;
  double gamma = 0.0;  // fitness-for-use parameter
  double beta = 0.0;   // sum-squared cost budget

  SymMatrix sigma() const {
    SymMatrix s(2, 2);
    s << a, c, c, d_entry;
    return s;
  }
};

// Minimal-cost covariance meeting both variance targets gamma:
// Sigma = gamma*[[1,1/2],[1/2,1]], squared cost 4/(3 gamma), both privacy
// terms binding.
inline TwoDSolution twod_fitness(double gamma) {
  if (!(gamma > 0)) throw DomainError("twod_fitness: gamma must be > 0");
  TwoDSolution out;
  out.mode = OracleMode::kFitnessForUse;
  out.gamma = gamma;
  out.a = gamma;
  out.d_entry = gamma;
  out.c = gamma / 2.0;
  out.objective = 4.0 / (3.0 * gamma);
  return out;
}

// Minimal total variance a + d at squared privacy cost beta^2:
// a = (1 + 1/sqrt(5))/beta^2, d = (1/2 + 3 sqrt(5)/10)/beta^2, c = a/2;
// total variance (3/2 + sqrt(5)/2)/beta^2.
inline TwoDSolution twod_sum_squared(double beta) {
  if (!(beta > 0)) throw DomainError("twod_sum_squared: beta must be > 0");
  TwoDSolution out;
  out.mode = OracleMode::kSumSquared;
  out.beta = beta;
  const double b2 = beta * beta;
  const double s5 = std::sqrt(5.0);
  out.a = (1.0 + 1.0 / s5) / b2;
  out.c = out.a / 2.0;
  out.d_entry = (0.5 + 0.3 * s5) / b2;
  out.objective = (1.5 + s5 / 2.0) / b2;
  return out;
}

// ---------------------------------------------------------------------------
// Identity+sum family: W = [I; 1^T] with B = I (so L = W)
// ---------------------------------------------------------------------------

struct IdentitySumSolution {
  Index d = 0;
  double a = 0.0;  // Sigma = a*I + b*1*1^T
  double b = 0.0;
  double squared_cost = 0.0;
  OracleMode mode = OracleMode::kFitnessForUse;
  double gamma = 0.0;  // fitness: identity-query target
  double k = 0.0;      // fitness: sum-query target is k*gamma
  double beta = 0.0;   // sum-squared cost budget
  double w = 0.0;      // sum-squared: sum query down-weighted by 1/w^2

  SymMatrix sigma() const {
    return a * SymMatrix::Identity(d, d) +
           b * SymMatrix::Constant(d, d, 1.0);
  }
};

// Minimal-cost covariance with identity-query variances <= gamma and
// sum-query variance <= k*gamma; both constraints bind at the optimum:
// a + b = gamma and d*a + d^2*b = k*gamma exactly.
inline IdentitySumSolution idsum_fitness(Index d, double gamma, double k) {
  if (d < 5) throw DomainError("idsum_fitness: requires d >= 5");
  if (!(gamma > 0)) throw DomainError("idsum_fitness: gamma must be > 0");
  if (!(k > 0 && k < static_cast<double>(d))) {
    throw DomainError("idsum_fitness: requires 0 < k < d");
  }
  const double dd = static_cast<double>(d);
  IdentitySumSolution out;
  out.d = d;
  out.mode = OracleMode::kFitnessForUse;
  out.gamma = gamma;
  out.k = k;
  out.a = (dd * dd - k) / ((dd - 1.0) * dd) * gamma;
  out.b = (k - dd) / ((dd - 1.0) * dd) * gamma;
  out.squared_cost =
      (2.0 * k * dd - dd * dd - k * dd * dd) / (k * (k - dd * dd)) / gamma;
  return out;
}

// Minimal weighted total variance d(a+b) + (1/w^2)(d*a + d^2*b) at squared
// privacy cost beta^2; the cost constraint (a+(d-1)b)/(a^2+d*a*b) = beta^2
// holds exactly at the solution.
inline IdentitySumSolution idsum_sum_squared(Index d, double beta, double w) {
  if (d < 5) throw DomainError("idsum_sum_squared: requires d >= 5");
  if (!(beta > 0)) throw DomainError("idsum_sum_squared: beta must be > 0");
  if (!(w * w >= 1.0)) throw DomainError("idsum_sum_squared: requires w^2 >= 1");
  const double dd = static_cast<double>(d);
  const double b2 = beta * beta;
  const double w2 = w * w;
  const double r = w * std::sqrt(dd + w2);
  IdentitySumSolution out;
  out.d = d;
  out.mode = OracleMode::kSumSquared;
  out.beta = beta;
  out.w = w;
  out.squared_cost = b2;
  out.a = ((dd - 2.0) * w2 - 1.0) / ((dd - 1.0) * w2 - r) / b2;
  out.b = ((1.0 + w2 - r) / ((dd - 1.0) * w2 - r)) *
          (((dd - 2.0) * w2 - 1.0) / (-dd - w2 + (dd - 1.0) * r)) / b2;
  return out;
}

// ---------------------------------------------------------------------------
// Variance-ratio separation between the two objectives
// ---------------------------------------------------------------------------

struct RatioCurvePoint {
  Index d = 0;
  double sum_squared_ratio = 0.0;  // worst variance/target ratio at equal cost
  double fitness_ratio = 0.0;      // always 1 by construction
};

// For each d, matches the two identity+sum mechanisms on privacy cost
// (beta^2 = 2d/((1+d) gamma), the fitness-mode optimum) and reports each
// one's worst variance-to-target ratio.  The sum-squared ratio grows like
// sqrt(d); the fitness ratio is 1 by construction.
inline std::vector<RatioCurvePoint> idsum_ratio_curve(
    const std::vector<Index>& d_list, double gamma) {
  if (!(gamma > 0)) throw DomainError("idsum_ratio_curve: gamma must be > 0");
  std::vector<RatioCurvePoint> out;
  out.reserve(d_list.size());
  for (Index d : d_list) {
    const double dd = static_cast<double>(d);
    const double beta2 = 2.0 * dd / ((1.0 + dd) * gamma);
    const auto ss = idsum_sum_squared(d, std::sqrt(beta2), 1.0);
    const double id_ratio = (ss.a + ss.b) / gamma;
    const double sum_ratio = (dd * ss.a + dd * dd * ss.b) / gamma;
    // The fitness-mode solution binds its worst target exactly, so its
    // ratio is 1 by construction (no rounding residue reported).
    out.push_back({d, std::max(id_ratio, sum_ratio), 1.0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON views
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const TwoDSolution& sol) {
  nlohmann::json j = {{"a", sol.a},
                      {"c", sol.c},
                      {"d_entry", sol.d_entry},
                      {"objective", sol.objective},
                      {"mode", to_string(sol.mode)}};
  if (sol.mode == OracleMode::kFitnessForUse) j["squared_cost"] = sol.objective;
  if (sol.mode == OracleMode::kFitnessForUse) {
    j["gamma"] = sol.gamma;
  } else {
    j["beta"] = sol.beta;
  }
  return j;
}

inline nlohmann::json to_json(const IdentitySumSolution& sol) {
  nlohmann::json j = {{"d", sol.d},
                      {"a", sol.a},
                      {"b", sol.b},
                      {"squared_cost", sol.squared_cost},
                      {"mode", to_string(sol.mode)}};
  if (sol.mode == OracleMode::kFitnessForUse) {
    j["gamma"] = sol.gamma;
    j["k"] = sol.k;
  } else {
    j["beta"] = sol.beta;
    j["w"] = sol.w;
  }
  return j;
}

inline nlohmann::json to_json(const std::vector<RatioCurvePoint>& curve) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& pt : curve) {
    arr.push_back({{"d", pt.d},
                   {"sum_squared_ratio", pt.sum_squared_ratio},
                   {"fitness_ratio", pt.fitness_ratio}});
  }
  return arr;
}

}  // namespace ffu

#endif  // FFU_ORACLES_HPP_
