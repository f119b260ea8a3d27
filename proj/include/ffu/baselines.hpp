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

#ifndef FFU_BASELINES_HPP_
#define FFU_BASELINES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "ffu/errors.hpp"
#include "ffu/matrix.hpp"
#include "ffu/optimizer.hpp"
#include "ffu/privacy.hpp"
#include "ffu/workload.hpp"

namespace ffu {

// One comparison mechanism evaluated at a fixed privacy cost.
struct BaselineReport {
  std::string method;  // IP, GM, HM, SSQ-uniform, SSQ-invvar, SSQ-invsd, SM-II
  double cost = 0.0;
  Vector per_query_variance;
  double max_ratio = 0.0;
  Index branching = 0;  // HM only: winning tree branching factor
};

namespace detail {

inline double max_ratio_of(const Vector& variances, const Vector& targets) {
  return (variances.array() / targets.array()).maxCoeff();
}

}  // namespace detail

// Input perturbation: independent Gaussian noise on the raw histogram
// (B = I, Sigma = I/cost^2), so query j is released with variance
// ||w_j||^2 / cost^2.
inline BaselineReport baseline_ip(const Workload& w,
                                  const VarianceTargets& targets, double cost) {
  if (!(cost > 0)) throw NonPositive("baseline_ip: cost must be > 0");
  validate(w);
  BaselineReport out;
  out.method = "IP";
  out.cost = cost;
  out.per_query_variance = w.rows.rowwise().squaredNorm() / (cost * cost);
  out.max_ratio = detail::max_ratio_of(out.per_query_variance, targets.c);
  return out;
}

// L2 sensitivity of a workload: the largest column norm, i.e. the largest
// change in W x when one individual moves between domain cells... one cell's
// count changes by 1.
inline double l2_sensitivity(const Matrix& w) {
  return std::sqrt(w.colwise().squaredNorm().maxCoeff());
}

// Plain Gaussian mechanism: independent noise of scale sigma = D2(W)/cost on
// every query answer, giving every query the same variance.
inline BaselineReport baseline_gm(const Workload& w,
                                  const VarianceTargets& targets, double cost) {
  if (!(cost > 0)) throw NonPositive("baseline_gm: cost must be > 0");
  validate(w);
  const double sigma = l2_sensitivity(w.rows) / cost;
  BaselineReport out;
  out.method = "GM";
  out.cost = cost;
  out.per_query_variance = Vector::Constant(w.m(), sigma * sigma);
  out.max_ratio = detail::max_ratio_of(out.per_query_variance, targets.c);
  return out;
}

// Tree-aggregation strategy over d leaves with branching factor f: one 0/1
// indicator row per node, levels built bottom-up by grouping f consecutive
// nodes (uneven last group allowed) until a level is a single node; rows are
// emitted root first, leaves last.
inline Matrix hierarchical_strategy(Index d, Index f) {
  if (d < 1 || f < 2) throw DimensionMismatch("hierarchical_strategy: d>=1, f>=2");
  using Range = std::pair<Index, Index>;  // inclusive [lo, hi] of leaves
  std::vector<std::vector<Range>> levels;
  levels.emplace_back();
  for (Index i = 0; i < d; ++i) levels.back().push_back({i, i});
  while (levels.back().size() > 1) {
    const auto& prev = levels.back();
    std::vector<Range> next;
    for (size_t at = 0; at < prev.size(); at += static_cast<size_t>(f)) {
      const size_t hi = std::min(at + static_cast<size_t>(f), prev.size()) - 1;
      next.push_back({prev[at].first, prev[hi].second});
    }
    levels.push_back(std::move(next));
  }
  Index rows = 0;
  for (const auto& level : levels) rows += static_cast<Index>(level.size());
  Matrix h = Matrix::Zero(rows, d);
  Index r = 0;
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
    for (const auto& [lo, hi] : *it) {
      h.row(r++).segment(lo, hi - lo + 1).setOnes();
    }
  }
  return h;
}

// Hierarchical mechanism: noisy tree-node counts H x + N(0, sigma_f^2 I),
// answers reconstructed by least squares (W H^+); searches branching
// factors and keeps the one with the smallest worst variance ratio.
inline BaselineReport baseline_hm(const Workload& w,
                                  const VarianceTargets& targets, double cost,
                                  Index f_lo = 2, Index f_hi = 16) {
  if (!(cost > 0)) throw NonPositive("baseline_hm: cost must be > 0");
  if (f_lo < 2 || f_hi < f_lo) {
    throw DimensionMismatch("baseline_hm: need 2 <= f_lo <= f_hi");
  }
  validate(w);
  BaselineReport best;
  for (Index f = f_lo; f <= f_hi; ++f) {
    const Matrix h = hierarchical_strategy(w.d(), f);
    const double sigma = l2_sensitivity(h) / cost;
    const Matrix recon = w.rows * pseudo_inverse(h);  // m x nodes
    Vector variances = sigma * sigma * recon.rowwise().squaredNorm();
    const double ratio = detail::max_ratio_of(variances, targets.c);
    if (best.method.empty() || ratio < best.max_ratio) {
      best.method = "HM";
      best.cost = cost;
      best.per_query_variance = std::move(variances);
      best.max_ratio = ratio;
      best.branching = f;
    }
    if (h.rows() == w.d()) break;  // d == 1: every f gives the same tree
  }
  return best;
}

// ---------------------------------------------------------------------------
// Head-to-head comparison at matched privacy cost
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> kMethods = {
      "SM-II", "IP", "GM", "HM", "SSQ-uniform", "SSQ-invvar", "SSQ-invsd"};
  return kMethods;
}

struct CompareResult {
  double cost = 0.0;  // the SM-II cost every method is evaluated at
  std::vector<BaselineReport> reports;  // sorted by max_ratio ascending
};

// Runs the target-driven solve once, fixes its privacy cost, and evaluates
// every requested method at that cost.  The SSQ presets weight each query
// uniformly, by inverse target variance, or by inverse target standard
// deviation, and spend the whole cost budget.
inline CompareResult compare(const Workload& w, const VarianceTargets& targets,
                             const std::vector<std::string>& methods,
                             const Decomposition& dec,
                             const OptimizerConfig& config = {}) {
  for (const auto& method : methods) {
    const auto& known = known_methods();
    if (std::find(known.begin(), known.end(), method) == known.end()) {
      std::string valid;
      for (const auto& name : known) {
        valid += (valid.empty() ? "" : ", ") + name;
      }
      throw ParseError("unknown method '" + method + "' (valid: " + valid +
                       ")");
    }
  }
  const SolveResult solved = solve(dec, targets, config);
  CompareResult out;
  out.cost = std::sqrt(solved.alpha);
  auto ssq_report = [&](const std::string& name, const Vector& weights) {
    const SolveResult res =
        solve_sum_squared(dec, weights, solved.alpha, config);
    BaselineReport report;
    report.method = name;
    report.cost = out.cost;
    report.per_query_variance = res.variances;
    report.max_ratio = detail::max_ratio_of(res.variances, targets.c);
    return report;
  };
  for (const auto& method : methods) {
    if (method == "SM-II") {
      BaselineReport report;
      report.method = method;
      report.cost = out.cost;
      report.per_query_variance = solved.variances;
      report.max_ratio = detail::max_ratio_of(solved.variances, targets.c);
      out.reports.push_back(std::move(report));
    } else if (method == "IP") {
      out.reports.push_back(baseline_ip(w, targets, out.cost));
    } else if (method == "GM") {
      out.reports.push_back(baseline_gm(w, targets, out.cost));
    } else if (method == "HM") {
      out.reports.push_back(baseline_hm(w, targets, out.cost));
    } else if (method == "SSQ-uniform") {
      out.reports.push_back(
          ssq_report(method, Vector::Ones(dec.m())));
    } else if (method == "SSQ-invvar") {
      out.reports.push_back(ssq_report(method, targets.c.cwiseInverse()));
    } else if (method == "SSQ-invsd") {
      out.reports.push_back(
          ssq_report(method, targets.c.cwiseSqrt().cwiseInverse()));
    }
  }
  std::stable_sort(out.reports.begin(), out.reports.end(),
                   [](const BaselineReport& a, const BaselineReport& b) {
                     return a.max_ratio < b.max_ratio;
                   });
  return out;
}

// Two-decimal table for human reading: one "method,max_ratio" line per
// method, best ratio first.  Full precision lives in the JSON form.
inline std::string compare_to_csv(const CompareResult& result) {
  std::string out;
  for (const auto& r : result.reports) {
    char cell[64];
    std::snprintf(cell, sizeof(cell), "%.2f", r.max_ratio);
    out += r.method;
    out += ',';
    out += cell;
    out += '\n';
  }
  return out;
}

inline nlohmann::json to_json(const CompareResult& result) {
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : result.reports) {
    nlohmann::json j = {{"method", r.method},
                        {"cost", r.cost},
                        {"max_ratio", r.max_ratio},
                        {"per_query_variance",
                         std::vector<double>(r.per_query_variance.begin(),
                                             r.per_query_variance.end())}};
    if (r.branching > 0) j["branching"] = r.branching;
    reports.push_back(std::move(j));
  }
  return {{"cost", result.cost}, {"reports", std::move(reports)}};
}

}  // namespace ffu

#endif  // FFU_BASELINES_HPP_
