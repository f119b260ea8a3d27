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

#ifndef FFU_WORKLOAD_HPP_
#define FFU_WORKLOAD_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ffu/errors.hpp"
#include "ffu/matrix.hpp"

namespace ffu {

// A workload of m linear queries over a histogram of d bins.  Each row of
// `rows` is one query, answered as row * x.  `provenance` records how the
// workload was made: {"kind": "...", "params": {...}, "seed": n} for
// generators, {"kind": "explicit"} otherwise.
struct Workload {
  Matrix rows;                      // m x d
  std::vector<std::string> labels;  // length m
  nlohmann::json provenance = nlohmann::json{{"kind", "explicit"}};

  Index m() const { return rows.rows(); }
  Index d() const { return rows.cols(); }
};

inline void validate(const Workload& w) {
  if (w.m() < 1 || w.d() < 1) {
    throw DimensionMismatch("workload must have m >= 1, d >= 1");
  }
  if (w.labels.size() != static_cast<size_t>(w.m())) {
    throw DimensionMismatch("workload has " + std::to_string(w.m()) +
                            " rows but " + std::to_string(w.labels.size()) +
                            " labels");
  }
  for (Index i = 0; i < w.m(); ++i) {
    if (w.rows.row(i).cwiseAbs().maxCoeff() == 0.0) {
      throw NonPositive("workload row " + std::to_string(i) +
                        " is all zero (undefined variance ratio)");
    }
  }
}

// Per-query variance upper bounds c_j, all strictly positive.
struct VarianceTargets {
  Vector c;
};

inline VarianceTargets targets_uniform(Index m, double value) {
  if (value <= 0) throw NonPositiveTarget("variance target must be > 0");
  if (m < 1) throw DimensionMismatch("need m >= 1 targets");
  return VarianceTargets{Vector::Constant(m, value)};
}

inline VarianceTargets targets_random(Index m, double lo, double hi,
                                      std::uint64_t seed) {
  if (lo <= 0 || hi <= lo) {
    throw NonPositiveTarget("need 0 < lo < hi for random targets");
  }
  if (m < 1) throw DimensionMismatch("need m >= 1 targets");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector c(m);
  for (Index j = 0; j < m; ++j) c(j) = dist(rng);
  return VarianceTargets{std::move(c)};
}

inline void validate(const VarianceTargets& t) {
  if (t.c.size() < 1) throw DimensionMismatch("empty variance targets");
  if (!(t.c.minCoeff() > 0)) {
    throw NonPositiveTarget("all variance targets must be > 0");
  }
}

// ---------------------------------------------------------------------------
// Decomposition W = L * B
// ---------------------------------------------------------------------------

enum class BasisKind { kIdentity, kPrefix, kExplicit };

inline std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::kIdentity: return "identity";
    case BasisKind::kPrefix: return "prefix";
    case BasisKind::kExplicit: return "explicit";
  }
  return "?";
}

// Factorization W = L * B where the k x d basis B has independent rows;
// noise is added on the B side and mapped to query answers through L.
struct Decomposition {
  BasisKind kind = BasisKind::kIdentity;
  Matrix b;  // k x d
  Matrix l;  // m x k

  Index k() const { return b.rows(); }
  Index d() const { return b.cols(); }
  Index m() const { return l.rows(); }
};

// Upper-triangular all-ones basis U (U[i,j] = 1 iff i <= j); its inverse is
// the bidiagonal differencing matrix, so L columns are adjacent differences
// of W columns.
inline Matrix prefix_basis(Index d) {
  Matrix u = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = i; j < d; ++j) u(i, j) = 1.0;
  }
  return u;
}

inline Decomposition decompose(const Workload& w, BasisKind kind) {
  validate(w);
  const Index d = w.d();
  switch (kind) {
    case BasisKind::kIdentity:
      return Decomposition{kind, Matrix::Identity(d, d), w.rows};
    case BasisKind::kPrefix: {
      Matrix l(w.m(), d);
      l.col(0) = w.rows.col(0);
      for (Index j = 1; j < d; ++j) {
        l.col(j) = w.rows.col(j) - w.rows.col(j - 1);
      }
      return Decomposition{kind, prefix_basis(d), std::move(l)};
    }
    case BasisKind::kExplicit:
      throw DimensionMismatch(
          "explicit basis requires decompose(w, basis_matrix)");
  }
  throw DimensionMismatch("unknown basis kind");
}

// Explicit caller-supplied basis: L is the least-squares representation
// W * B^+, rejected if W is not (numerically) in B's row space.
inline Decomposition decompose(const Workload& w, const Matrix& basis) {
  validate(w);
  if (basis.cols() != w.d()) {
    throw DimensionMismatch("basis has " + std::to_string(basis.cols()) +
                            " columns, workload d = " + std::to_string(w.d()));
  }
  if (svd_rank(basis) != basis.rows()) {
    throw NotInRowSpace("basis rows are linearly dependent");
  }
  Matrix l = w.rows * pseudo_inverse(basis);
  const double residual = (l * basis - w.rows).norm();
  if (residual > 1e-8 * std::max(1.0, w.rows.norm())) {
    throw NotInRowSpace("workload is not in the basis row space (residual " +
                        std::to_string(residual) + ")");
  }
  return Decomposition{BasisKind::kExplicit, basis, std::move(l)};
}

// ---------------------------------------------------------------------------
// Workload generators
// ---------------------------------------------------------------------------

// Prefix sums: d x d lower-triangular ones.
inline Workload gen_prefix(Index d) {
  if (d < 1) throw DimensionMismatch("gen_prefix: d >= 1");
  Matrix w = Matrix::Zero(d, d);
  std::vector<std::string> labels;
  for (Index i = 0; i < d; ++i) {
    w.row(i).head(i + 1).setOnes();
    labels.push_back("prefix[0.." + std::to_string(i) + "]");
  }
  return Workload{std::move(w), std::move(labels),
                  {{"kind", "prefix"}, {"params", {{"d", d}}}}};
}

// Random range queries: both endpoints uniform on [0, d-1], order-normalized,
// inclusive.
inline Workload gen_random_range(Index d, Index count, std::uint64_t seed) {
  if (d < 1 || count < 1) throw DimensionMismatch("gen_random_range: d, count >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> dist(0, d - 1);
  Matrix w = Matrix::Zero(count, d);
  std::vector<std::string> labels;
  for (Index q = 0; q < count; ++q) {
    Index a = dist(rng);
    Index b = dist(rng);
    if (a > b) std::swap(a, b);
    w.row(q).segment(a, b - a + 1).setOnes();
    labels.push_back("range[" + std::to_string(a) + ".." + std::to_string(b) +
                     "]");
  }
  return Workload{
      std::move(w),
      std::move(labels),
      {{"kind", "random-range"},
       {"params", {{"d", d}, {"count", count}}},
       {"seed", seed}}};
}

// Random +1/-1 queries with P(+1) = p.
inline Workload gen_random_pm(Index d, Index count, double p,
                              std::uint64_t seed) {
  if (d < 1 || count < 1) throw DimensionMismatch("gen_random_pm: d, count >= 1");
  if (!(p > 0 && p < 1)) throw NonPositive("gen_random_pm: need 0 < p < 1");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution heads(p);
  Matrix w(count, d);
  std::vector<std::string> labels;
  for (Index q = 0; q < count; ++q) {
    for (Index j = 0; j < d; ++j) w(q, j) = heads(rng) ? 1.0 : -1.0;
    labels.push_back("pm#" + std::to_string(q));
  }
  return Workload{std::move(w),
                  std::move(labels),
                  {{"kind", "random-pm"},
                   {"params", {{"d", d}, {"count", count}, {"p", p}}},
                   {"seed", seed}}};
}

// All one-way and two-way marginals of an r-attribute domain with t values
// per attribute; d = t^r, flattened row-major (attribute 0 slowest).
// One-way rows first, then two-way rows.
inline Workload gen_marginals(Index r, Index t) {
  if (r < 2 || t < 2) throw DimensionMismatch("gen_marginals: r, t >= 2");
  Index d = 1;
  for (Index i = 0; i < r; ++i) {
    d *= t;
    if (d > (Index{1} << 24)) throw SizeLimit("gen_marginals: t^r too large");
  }
  // stride[a] = number of cells between consecutive values of attribute a.
  std::vector<Index> stride(static_cast<size_t>(r), 1);
  for (Index a = r - 2; a >= 0; --a) {
    stride[static_cast<size_t>(a)] = stride[static_cast<size_t>(a + 1)] * t;
  }
  auto value_of = [&](Index cell, Index attr) {
    return (cell / stride[static_cast<size_t>(attr)]) % t;
  };
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  for (Index a = 0; a < r; ++a) {
    for (Index v = 0; v < t; ++v) {
      std::vector<double> row(static_cast<size_t>(d), 0.0);
      for (Index cell = 0; cell < d; ++cell) {
        if (value_of(cell, a) == v) row[static_cast<size_t>(cell)] = 1.0;
      }
      rows.push_back(std::move(row));
      labels.push_back("m1[a" + std::to_string(a) + "=" + std::to_string(v) +
                       "]");
    }
  }
  for (Index a = 0; a < r; ++a) {
    for (Index b = a + 1; b < r; ++b) {
      for (Index va = 0; va < t; ++va) {
        for (Index vb = 0; vb < t; ++vb) {
          std::vector<double> row(static_cast<size_t>(d), 0.0);
          for (Index cell = 0; cell < d; ++cell) {
            if (value_of(cell, a) == va && value_of(cell, b) == vb) {
              row[static_cast<size_t>(cell)] = 1.0;
            }
          }
          rows.push_back(std::move(row));
          labels.push_back("m2[a" + std::to_string(a) + "=" +
                           std::to_string(va) + ",a" + std::to_string(b) +
                           "=" + std::to_string(vb) + "]");
        }
      }
    }
  }
  Matrix w(static_cast<Index>(rows.size()), d);
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < d; ++j) {
      w(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
  }
  return Workload{std::move(w), std::move(labels),
                  {{"kind", "marginals"}, {"params", {{"r", r}, {"t", t}}}}};
}

// PL94-171-style workload over a (2 voting-age, 2 ethnicity, 63 race-combo)
// domain flattened row-major into d = 252 cells.  Race combinations are the
// non-empty subsets of 6 categories enumerated in binary-mask order
// (mask 1..63); "single race" means popcount(mask) == 1.
inline Workload gen_pl94() {
  constexpr Index kVa = 2, kEth = 2, kRace = 63;
  constexpr Index d = kVa * kEth * kRace;  // 252
  auto cell = [&](Index va, Index eth, Index race) {
    return va * (kEth * kRace) + eth * kRace + race;
  };
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  auto add_row = [&](std::string label) -> std::vector<double>& {
    rows.emplace_back(static_cast<size_t>(d), 0.0);
    labels.push_back(std::move(label));
    return rows.back();
  };
  for (Index va = 0; va < kVa; ++va) {
    auto& row = add_row("votingage=" + std::to_string(va));
    for (Index e = 0; e < kEth; ++e) {
      for (Index r = 0; r < kRace; ++r) {
        row[static_cast<size_t>(cell(va, e, r))] = 1.0;
      }
    }
  }
  for (Index e = 0; e < kEth; ++e) {
    auto& row = add_row("ethnicity=" + std::to_string(e));
    for (Index va = 0; va < kVa; ++va) {
      for (Index r = 0; r < kRace; ++r) {
        row[static_cast<size_t>(cell(va, e, r))] = 1.0;
      }
    }
  }
  auto add_race_row = [&](Index mask, const std::string& label) {
    auto& row = add_row(label);
    const Index r = mask - 1;  // race index of this combination
    for (Index va = 0; va < kVa; ++va) {
      for (Index e = 0; e < kEth; ++e) {
        row[static_cast<size_t>(cell(va, e, r))] = 1.0;
      }
    }
  };
  for (Index mask = 1; mask <= 63; ++mask) {  // 6 single-race rows
    if (__builtin_popcountll(static_cast<unsigned long long>(mask)) == 1) {
      add_race_row(mask, "race_single[" + std::to_string(mask) + "]");
    }
  }
  for (Index mask = 1; mask <= 63; ++mask) {  // 57 multi-race rows
    if (__builtin_popcountll(static_cast<unsigned long long>(mask)) >= 2) {
      add_race_row(mask, "race_multi[" + std::to_string(mask) + "]");
    }
  }
  for (Index i = 0; i < d; ++i) {  // identity block
    auto& row = add_row("cell[" + std::to_string(i) + "]");
    row[static_cast<size_t>(i)] = 1.0;
  }
  Matrix w(static_cast<Index>(rows.size()), d);
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < d; ++j) {
      w(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
  }
  return Workload{std::move(w), std::move(labels),
                  {{"kind", "pl94"}, {"params", nlohmann::json::object()}}};
}

// Age-pyramid workload: domain (gender, age) with ages 0..115, flattened as
// index = gender * 116 + age (male = 0, female = 1); per block (male, female,
// all) 116 prefix queries age in [0, x] plus one voting-age query [18, 115].
inline Workload gen_age_pyramid() {
  constexpr Index kAges = 116;
  constexpr Index d = 2 * kAges;  // 232
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  auto add_block = [&](const std::string& name, bool male, bool female) {
    auto fill = [&](std::vector<double>& row, Index lo, Index hi) {
      for (Index age = lo; age <= hi; ++age) {
        if (male) row[static_cast<size_t>(age)] = 1.0;
        if (female) row[static_cast<size_t>(kAges + age)] = 1.0;
      }
    };
    for (Index x = 0; x < kAges; ++x) {
      std::vector<double> row(static_cast<size_t>(d), 0.0);
      fill(row, 0, x);
      rows.push_back(std::move(row));
      labels.push_back(name + "[0.." + std::to_string(x) + "]");
    }
    std::vector<double> row(static_cast<size_t>(d), 0.0);
    fill(row, 18, kAges - 1);
    rows.push_back(std::move(row));
    labels.push_back(name + "[18..115]");
  };
  add_block("male", true, false);
  add_block("female", false, true);
  add_block("all", true, true);
  Matrix w(static_cast<Index>(rows.size()), d);
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < d; ++j) {
      w(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
  }
  return Workload{std::move(w), std::move(labels),
                  {{"kind", "age-pyramid"}, {"params", nlohmann::json::object()}}};
}

// W = C * A with independent standard-normal entries, C: (d/2 x d/2),
// A: (d/2 x d); a low-rank correlated family.
inline Workload gen_wrelated(Index d, std::uint64_t seed) {
  if (d < 2 || d % 2 != 0) {
    throw DimensionMismatch("gen_wrelated: d must be even and >= 2");
  }
  const Index m = d / 2, s = d / 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix c(m, s), a(s, d);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < s; ++j) c(i, j) = gauss(rng);
  }
  for (Index i = 0; i < s; ++i) {
    for (Index j = 0; j < d; ++j) a(i, j) = gauss(rng);
  }
  Matrix w = c * a;
  std::vector<std::string> labels;
  for (Index q = 0; q < m; ++q) labels.push_back("wrel#" + std::to_string(q));
  return Workload{std::move(w),
                  std::move(labels),
                  {{"kind", "wrelated"},
                   {"params", {{"d", d}}},
                   {"seed", seed}}};
}

// Identity queries plus the total sum: (d+1) x d.
inline Workload gen_identity_sum(Index d) {
  if (d < 1) throw DimensionMismatch("gen_identity_sum: d >= 1");
  Matrix w(d + 1, d);
  w.topRows(d) = Matrix::Identity(d, d);
  w.row(d).setOnes();
  std::vector<std::string> labels;
  for (Index i = 0; i < d; ++i) labels.push_back("e[" + std::to_string(i) + "]");
  labels.push_back("sum");
  return Workload{std::move(w), std::move(labels),
                  {{"kind", "identity-sum"}, {"params", {{"d", d}}}}};
}

// Builds a workload from its serialized generator spec.
inline Workload workload_from_spec(const nlohmann::json& spec) {
  if (!spec.contains("kind")) throw ParseError("workload spec: missing kind");
  const std::string kind = spec.at("kind").get<std::string>();
  const nlohmann::json params = spec.value("params", nlohmann::json::object());
  auto seed = [&]() -> std::uint64_t {
    if (!spec.contains("seed")) {
      throw ParseError("workload spec: generator '" + kind +
                       "' requires a seed");
    }
    return spec.at("seed").get<std::uint64_t>();
  };
  if (kind == "prefix") return gen_prefix(params.at("d").get<Index>());
  if (kind == "random-range") {
    return gen_random_range(params.at("d").get<Index>(),
                            params.at("count").get<Index>(), seed());
  }
  if (kind == "random-pm") {
    return gen_random_pm(params.at("d").get<Index>(),
                         params.at("count").get<Index>(),
                         params.at("p").get<double>(), seed());
  }
  if (kind == "marginals") {
    return gen_marginals(params.at("r").get<Index>(),
                         params.at("t").get<Index>());
  }
  if (kind == "pl94") return gen_pl94();
  if (kind == "age-pyramid") return gen_age_pyramid();
  if (kind == "wrelated") return gen_wrelated(params.at("d").get<Index>(), seed());
  if (kind == "identity-sum") {
    return gen_identity_sum(params.at("d").get<Index>());
  }
  throw ParseError("workload spec: unknown kind '" + kind + "'");
}

}  // namespace ffu

#endif  // FFU_WORKLOAD_HPP_
