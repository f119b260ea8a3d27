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

#ifndef FFU_RELEASE_HPP_
#define FFU_RELEASE_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffu/errors.hpp"
#include "ffu/io.hpp"
#include "ffu/matrix.hpp"
#include "ffu/privacy.hpp"
#include "ffu/workload.hpp"

namespace ffu {

// A histogram over the data domain: one (real, non-negative) count per cell.
// Counts are reals rather than integers so pre-weighted histograms work.
struct DatasetVector {
  Vector counts;

  Index d() const { return counts.size(); }
};

// One noisy answer vector together with its exact per-query variances and the
// privacy cost of the mechanism that produced it.
struct Release {
  Vector answers;
  Vector variances;
  double cost = 0.0;
  std::uint64_t seed = 0;
};

// Exact per-query variances of the mechanism: the diagonal of L Sigma L^T.
inline Vector expected_variances(const Decomposition& dec,
                                 const Covariance& cov) {
  if (dec.l.cols() != cov.k()) {
    throw DimensionMismatch("expected_variances: L is " +
                            std::to_string(dec.l.rows()) + "x" +
                            std::to_string(dec.l.cols()) +
                            " but Sigma has order " + std::to_string(cov.k()));
  }
  return released_variances(dec.l, cov.sigma());
}

// Runs the mechanism on a histogram: answers = L (B x + chol(Sigma) z) with
// z standard normal from a seeded generator.  Deterministic per seed; the
// mechanism is unbiased, E[answers] = W x.
//
// Note: this samples with a conventional PRNG and floating-point Gaussian
// transform.  Hardening against floating-point attacks on Gaussian noise is
// a known deployment concern and out of scope here.
inline Release release(const Decomposition& dec, const Covariance& cov,
                       const DatasetVector& x, std::uint64_t seed) {
  if (dec.d() != x.d()) {
    throw DimensionMismatch("release: workload domain is " +
                            std::to_string(dec.d()) + " but histogram has " +
                            std::to_string(x.d()) + " cells");
  }
  if (dec.k() != cov.k()) {
    throw DimensionMismatch("release: basis has " + std::to_string(dec.k()) +
                            " rows but Sigma has order " +
                            std::to_string(cov.k()));
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(cov.k());
  for (Index i = 0; i < z.size(); ++i) z[i] = normal(gen);
  Release out;
  out.answers = dec.l * (dec.b * x.counts + cov.chol().lower() * z);
  out.variances = expected_variances(dec, cov);
  out.cost = privacy_cost(dec, cov);
  out.seed = seed;
  return out;
}

// Parses a histogram file: either one count per line, or (index,count) pairs
// with missing indices treated as zero and repeated indices accumulated.
// The domain size of a two-column file is the largest index plus one unless
// a larger d_hint is given.
inline DatasetVector ingest_histogram(const std::string& path,
                                      Index d_hint = 0) {
  const Matrix table = read_matrix_csv(path);
  DatasetVector out;
  if (table.cols() == 1) {
    out.counts = table.col(0);
  } else if (table.cols() == 2) {
    Index d = d_hint;
    for (Index r = 0; r < table.rows(); ++r) {
      const double raw = table(r, 0);
      const double rounded = std::round(raw);
      if (!(std::abs(raw - rounded) <= 1e-9) || rounded < 0) {
        throw ParseError("ingest_histogram: bad cell index " +
                         format_double(raw) + " at line " +
                         std::to_string(r + 1));
      }
      d = std::max(d, static_cast<Index>(rounded) + 1);
    }
    out.counts = Vector::Zero(d);
    for (Index r = 0; r < table.rows(); ++r) {
      out.counts[static_cast<Index>(std::round(table(r, 0)))] += table(r, 1);
    }
  } else {
    throw ParseError("ingest_histogram: expected 1 or 2 columns, got " +
                     std::to_string(table.cols()));
  }
  for (Index i = 0; i < out.counts.size(); ++i) {
    if (!(out.counts[i] >= 0)) {
      throw NegativeCount("ingest_histogram: negative count " +
                          format_double(out.counts[i]) + " for cell " +
                          std::to_string(i));
    }
  }
  return out;
}

inline nlohmann::json to_json(const Release& release) {
  return {{"answers",
           std::vector<double>(release.answers.begin(), release.answers.end())},
          {"variances", std::vector<double>(release.variances.begin(),
                                            release.variances.end())},
          {"cost", release.cost},
          {"seed", release.seed}};
}

// label, answer, variance — one line per query, full precision.
inline std::string release_to_csv(const Release& release,
                                  const std::vector<std::string>& labels) {
  if (static_cast<Index>(labels.size()) != release.answers.size()) {
    throw DimensionMismatch("release_to_csv: have " +
                            std::to_string(labels.size()) + " labels for " +
                            std::to_string(release.answers.size()) +
                            " answers");
  }
  std::string out;
  for (Index j = 0; j < release.answers.size(); ++j) {
    out += labels[static_cast<size_t>(j)];
    out += ',';
    out += format_double(release.answers[j]);
    out += ',';
    out += format_double(release.variances[j]);
    out += '\n';
  }
  return out;
}

}  // namespace ffu

#endif  // FFU_RELEASE_HPP_
