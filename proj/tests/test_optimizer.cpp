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

#include <cmath>
#include <random>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "ffu/optimizer.hpp"
#include "ffu/oracles.hpp"
#include "ffu/privacy.hpp"
#include "ffu/workload.hpp"

namespace {

using ffu::Covariance;
using ffu::Decomposition;
using ffu::Index;
using ffu::Matrix;
using ffu::SymMatrix;
using ffu::VarianceTargets;
using ffu::Vector;

SymMatrix random_spd(Index n, std::uint64_t seed, double shift = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) a(i, j) = gauss(rng);
  }
  return ffu::symmetrized(a * a.transpose() + shift * Matrix::Identity(n, n));
}

SymMatrix random_sym(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) a(i, j) = gauss(rng);
  }
  return ffu::symmetrized(a);
}

// One random PD evaluation point on one workload instance.
struct Instance {
  Decomposition dec;
  VarianceTargets targets;
  SymMatrix sigma;
};

// A spread of small instances over four workload families and both bases.
std::vector<Instance> random_instances() {
  std::vector<Instance> out;
  std::uint64_t seed = 7000;
  auto push = [&](const ffu::Workload& w, ffu::BasisKind kind) {
    Instance inst;
    inst.dec = ffu::decompose(w, kind);
    inst.targets = ffu::targets_random(w.m(), 0.5, 3.0, seed++);
    inst.sigma = random_spd(inst.dec.k(), seed++);
    out.push_back(std::move(inst));
  };
  push(ffu::gen_prefix(4), ffu::BasisKind::kIdentity);
  push(ffu::gen_prefix(5), ffu::BasisKind::kPrefix);
  push(ffu::gen_identity_sum(4), ffu::BasisKind::kIdentity);
  push(ffu::gen_random_range(6, 9, 11), ffu::BasisKind::kPrefix);
  push(ffu::gen_wrelated(6, 12), ffu::BasisKind::kIdentity);
  push(ffu::gen_random_pm(5, 7, 0.2, 13), ffu::BasisKind::kIdentity);
  return out;
}

const ffu::Workload& twod() {
  static const ffu::Workload w = ffu::twod_workload();
  return w;
}

// k = 1 toy: F(Sigma) = 1/x + x for Sigma = [[x]].
Instance scalar_toy(double x) {
  Instance inst;
  inst.dec.b = Matrix::Identity(1, 1);
  inst.dec.l = Matrix::Identity(1, 1);
  inst.targets.c = Vector::Ones(1);
  inst.sigma = SymMatrix::Constant(1, 1, x);
  return inst;
}

double objective_at(const Instance& inst, const SymMatrix& sigma, double t1,
                    double t2) {
  return ffu::objective(inst.dec, Covariance{sigma}, inst.targets, t1, t2);
}

// Materializes the full k^2 x k^2 Hessian of the double-softmax objective
// (column-major vec convention), as an independent oracle for hess_times_vec.
Matrix materialized_hessian(const Instance& inst, const SymMatrix& sigma,
                            double t1, double t2) {
  const Index k = inst.dec.k();
  const SymMatrix s_inv = ffu::inverse_spd(ffu::cholesky(sigma));
  const Matrix u = s_inv * inst.dec.b;  // columns u_i = Sigma^{-1} b_i

  // Softmax weights on both sides, shifted by the max.
  Vector g(inst.dec.d());
  for (Index i = 0; i < inst.dec.d(); ++i) {
    g[i] = inst.dec.b.col(i).dot(u.col(i));
  }
  Vector p = (t1 * (g.array() - g.maxCoeff())).exp();
  p /= p.sum();
  Vector h(inst.dec.m());
  for (Index j = 0; j < inst.dec.m(); ++j) {
    h[j] = inst.dec.l.row(j) * sigma * inst.dec.l.row(j).transpose();
    h[j] /= inst.targets.c[j];
  }
  Vector q = (t2 * (h.array() - h.maxCoeff())).exp();
  q /= q.sum();

  auto vec_of = [&](const Matrix& m) {
    Vector v(k * k);
    for (Index col = 0; col < k; ++col) v.segment(col * k, k) = m.col(col);
    return v;
  };

  SymMatrix m_mat = SymMatrix::Zero(k, k);
  Matrix hess = Matrix::Zero(k * k, k * k);
  for (Index i = 0; i < inst.dec.d(); ++i) {
    const SymMatrix outer = u.col(i) * u.col(i).transpose();
    m_mat += p[i] * outer;
    // p_i * d^2 g_i = p_i * (u_i u_i^T kron S + S kron u_i u_i^T)
    hess += p[i] * (ffu::kron_dense(outer, s_inv) + ffu::kron_dense(s_inv, outer));
    hess += t1 * p[i] * vec_of(outer) * vec_of(outer).transpose();
  }
  hess -= t1 * vec_of(m_mat) * vec_of(m_mat).transpose();

  SymMatrix hbar = SymMatrix::Zero(k, k);
  for (Index j = 0; j < inst.dec.m(); ++j) {
    const SymMatrix outer = inst.dec.l.row(j).transpose() * inst.dec.l.row(j) /
                            inst.targets.c[j];
    hbar += q[j] * outer;
    hess += t2 * q[j] * vec_of(outer) * vec_of(outer).transpose();
  }
  hess -= t2 * vec_of(hbar) * vec_of(hbar).transpose();
  return hess;
}

}  // namespace

// ---------------------------------------------------------------------------
// objective
// ---------------------------------------------------------------------------

TEST_CASE("objective collapses to 1/x + x on the scalar toy", "[optimizer]") {
  const Instance inst = scalar_toy(1.0);
  REQUIRE(objective_at(inst, inst.sigma, 1.0, 1.0) == Catch::Approx(2.0));
  const Instance at2 = scalar_toy(2.0);
  REQUIRE(objective_at(at2, at2.sigma, 1.0, 1.0) == Catch::Approx(2.5));
}

TEST_CASE("objective respects the softmax sandwich", "[optimizer]") {
  for (const auto& inst : random_instances()) {
    const Covariance cov{inst.sigma};
    const double t1 = 2.0, t2 = 3.0;
    const double value = ffu::objective(inst.dec, cov, inst.targets, t1, t2);
    const auto profile = ffu::privacy_profile(inst.dec, cov);
    const double gmax = ffu::squared_privacy_cost(profile);
    const Vector vars = ffu::released_variances(inst.dec.l, inst.sigma);
    const double hmax = (vars.array() / inst.targets.c.array()).maxCoeff();
    const double upper = gmax + std::log(inst.dec.d()) / t1 + hmax +
                         std::log(inst.dec.m()) / t2;
    REQUIRE(value >= gmax + hmax - 1e-12);
    REQUIRE(value <= upper + 1e-12);
  }
}

TEST_CASE("objective at huge temperatures equals the hard max", "[optimizer]") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    Instance inst;
    inst.dec.b = random_spd(3, seed);  // any full-rank 3x3 works as a basis
    inst.dec.l = random_spd(3, seed + 50);
    inst.targets.c = Vector::Constant(3, 1.5);
    inst.sigma = random_spd(3, seed + 100);
    const Covariance cov{inst.sigma};
    const double value =
        ffu::objective(inst.dec, cov, inst.targets, 1e6, 1e6);
    const double gmax =
        ffu::squared_privacy_cost(ffu::privacy_profile(inst.dec, cov));
    const Vector vars = ffu::released_variances(inst.dec.l, inst.sigma);
    const double hmax = (vars.array() / inst.targets.c.array()).maxCoeff();
    REQUIRE(value == Catch::Approx(gmax + hmax).margin(1e-4));
  }
}

TEST_CASE("objective adds the optional linear total-error term",
          "[optimizer]") {
  const Instance inst = scalar_toy(2.0);
  const double lambda = 0.7;
  // 1/x + x + lambda * x at x = 2.
  REQUIRE(ffu::objective(inst.dec, Covariance{inst.sigma}, inst.targets, 1.0,
                         1.0, lambda) == Catch::Approx(2.5 + lambda * 2.0));
}

// ---------------------------------------------------------------------------
// gradient
// ---------------------------------------------------------------------------

TEST_CASE("gradient vanishes at stationary points", "[optimizer]") {
  // Scalar toy: d(1/x + x)/dx = 0 at x = 1.
  const Instance inst = scalar_toy(1.0);
  REQUIRE(std::abs(ffu::gradient(inst.dec, Covariance{inst.sigma},
                                 inst.targets, 1.0, 1.0)(0, 0)) < 1e-14);

  // B = I, L = I, c = 1, Sigma = I: the two softmax pulls cancel exactly.
  Instance sym;
  sym.dec.b = Matrix::Identity(4, 4);
  sym.dec.l = Matrix::Identity(4, 4);
  sym.targets.c = Vector::Ones(4);
  sym.sigma = SymMatrix::Identity(4, 4);
  const SymMatrix grad =
      ffu::gradient(sym.dec, Covariance{sym.sigma}, sym.targets, 1.0, 1.0);
  REQUIRE(grad.norm() < 1e-14);
}

TEST_CASE("gradient matches central finite differences", "[optimizer]") {
  for (const auto& inst : random_instances()) {
    const double t1 = 2.0, t2 = 3.5;
    const SymMatrix grad =
        ffu::gradient(inst.dec, Covariance{inst.sigma}, inst.targets, t1, t2);
    const Index k = inst.dec.k();
    const double h = 1e-5;
    double worst = 0.0;
    for (Index i = 0; i < k; ++i) {
      for (Index j = i; j < k; ++j) {
        SymMatrix pert = SymMatrix::Zero(k, k);
        pert(i, j) += 1.0;
        pert(j, i) += 1.0;  // diagonal perturbations get weight 2
        if (i == j) pert(i, i) = 1.0;
        const double fd = (objective_at(inst, inst.sigma + h * pert, t1, t2) -
                           objective_at(inst, inst.sigma - h * pert, t1, t2)) /
                          (2.0 * h);
        const double analytic = (grad.array() * pert.array()).sum();
        worst = std::max(worst, std::abs(fd - analytic) /
                                    std::max(1.0, std::abs(analytic)));
      }
    }
    REQUIRE(worst < 1e-5);
  }
}

TEST_CASE("gradient includes the linear total-error term", "[optimizer]") {
  const Instance inst = scalar_toy(2.0);
  const double lambda = 0.7;
  const double with = ffu::gradient(inst.dec, Covariance{inst.sigma},
                                    inst.targets, 1.0, 1.0, lambda)(0, 0);
  const double without = ffu::gradient(inst.dec, Covariance{inst.sigma},
                                       inst.targets, 1.0, 1.0)(0, 0);
  REQUIRE(with - without == Catch::Approx(lambda).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Hessian-vector products
// ---------------------------------------------------------------------------

TEST_CASE("hess_times_vec matches the materialized Hessian", "[optimizer]") {
  std::uint64_t seed = 8800;
  for (const auto& inst : random_instances()) {
    if (inst.dec.k() > 5) continue;
    const double t1 = 2.0, t2 = 3.5;
    const Index k = inst.dec.k();
    const Matrix hess = materialized_hessian(inst, inst.sigma, t1, t2);
    const SymMatrix dir = random_sym(k, seed++);
    const SymMatrix via_op = ffu::hess_times_vec(
        inst.dec, Covariance{inst.sigma}, inst.targets, t1, t2, dir);

    Vector vec_dir(k * k);
    for (Index col = 0; col < k; ++col) {
      vec_dir.segment(col * k, k) = dir.col(col);
    }
    const Vector vec_result = hess * vec_dir;
    Matrix via_dense(k, k);
    for (Index col = 0; col < k; ++col) {
      via_dense.col(col) = vec_result.segment(col * k, k);
    }
    REQUIRE((via_op - via_dense).norm() <=
            1e-8 * std::max(1.0, via_dense.norm()));
  }
}

TEST_CASE("hess_times_vec matches finite differences of the gradient",
          "[optimizer]") {
  std::uint64_t seed = 9900;
  for (const auto& inst : random_instances()) {
    const double t1 = 1.5, t2 = 2.5;
    const Index k = inst.dec.k();
    SymMatrix dir = random_sym(k, seed++);
    dir *= 1.0 / dir.norm();
    const double h = 1e-5;
    const SymMatrix grad_plus =
        ffu::gradient(inst.dec, Covariance{SymMatrix(inst.sigma + h * dir)},
                      inst.targets, t1, t2);
    const SymMatrix grad_minus =
        ffu::gradient(inst.dec, Covariance{SymMatrix(inst.sigma - h * dir)},
                      inst.targets, t1, t2);
    const SymMatrix fd = (grad_plus - grad_minus) / (2.0 * h);
    const SymMatrix analytic = ffu::hess_times_vec(
        inst.dec, Covariance{inst.sigma}, inst.targets, t1, t2, dir);
    REQUIRE((analytic - fd).norm() <= 2e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("hess_times_vec is linear and self-adjoint", "[optimizer]") {
  const auto instances = random_instances();
  const auto& inst = instances[1];
  const Index k = inst.dec.k();
  const Covariance cov{inst.sigma};
  const SymMatrix p = random_sym(k, 501);
  const SymMatrix q = random_sym(k, 502);
  const double t1 = 2.0, t2 = 3.0;
  auto apply = [&](const SymMatrix& x) {
    return ffu::hess_times_vec(inst.dec, cov, inst.targets, t1, t2, x);
  };
  const SymMatrix combo = apply(2.0 * p + 3.0 * q);
  REQUIRE((combo - 2.0 * apply(p) - 3.0 * apply(q)).norm() <=
          1e-10 * std::max(1.0, combo.norm()));
  const double pq = (p.array() * apply(q).array()).sum();
  const double qp = (q.array() * apply(p).array()).sum();
  REQUIRE(pq == Catch::Approx(qp).epsilon(1e-9));
}

TEST_CASE("the Hessian is positive semidefinite along random directions",
          "[optimizer]") {
  // Convexity of F makes every curvature non-negative up to round-off.
  std::uint64_t seed = 650;
  for (const auto& inst : random_instances()) {
    const Covariance cov{inst.sigma};
    for (int trial = 0; trial < 5; ++trial) {
      const SymMatrix dir = random_sym(inst.dec.k(), seed++);
      const SymMatrix hd =
          ffu::hess_times_vec(inst.dec, cov, inst.targets, 4.0, 4.0, dir);
      const double curvature = (dir.array() * hd.array()).sum();
      REQUIRE(curvature >= -1e-9 * dir.squaredNorm());
    }
  }
}

// ---------------------------------------------------------------------------
// conjugate gradient
// ---------------------------------------------------------------------------

TEST_CASE("conjugate_gradient returns zero at a stationary point",
          "[optimizer]") {
  Instance sym;
  sym.dec.b = Matrix::Identity(3, 3);
  sym.dec.l = Matrix::Identity(3, 3);
  sym.targets.c = Vector::Ones(3);
  sym.sigma = SymMatrix::Identity(3, 3);
  ffu::OptimizerConfig cfg;
  const SymMatrix s = ffu::conjugate_gradient(sym.dec, Covariance{sym.sigma},
                                              sym.targets, 1.0, 1.0, cfg);
  REQUIRE(s.norm() == 0.0);
}

TEST_CASE("conjugate_gradient solves the scalar problem in one step",
          "[optimizer]") {
  const Instance inst = scalar_toy(2.0);
  ffu::OptimizerConfig cfg;
  cfg.max_cg = 1;
  const SymMatrix s = ffu::conjugate_gradient(inst.dec, Covariance{inst.sigma},
                                              inst.targets, 1.0, 1.0, cfg);
  // F'(2) = 3/4, F''(2) = 1/4, Newton step = -3.
  REQUIRE(s(0, 0) == Catch::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("conjugate_gradient converges fully when the cap is generous",
          "[optimizer]") {
  const auto instances = random_instances();
  const auto& inst = instances[0];  // k = 4
  const double t1 = 2.0, t2 = 3.0;
  const Covariance cov{inst.sigma};
  ffu::OptimizerConfig cfg;
  cfg.max_cg = 50;
  const SymMatrix s =
      ffu::conjugate_gradient(inst.dec, cov, inst.targets, t1, t2, cfg);
  const SymMatrix grad = ffu::gradient(inst.dec, cov, inst.targets, t1, t2);
  const SymMatrix residual =
      ffu::hess_times_vec(inst.dec, cov, inst.targets, t1, t2, s) + grad;
  REQUIRE(residual.norm() <= 1e-6 * grad.norm());
  // And the result is a descent direction.
  REQUIRE((s.array() * grad.array()).sum() < 0.0);
}

// ---------------------------------------------------------------------------
// line search
// ---------------------------------------------------------------------------

TEST_CASE("line_search backtracks through the scalar toy", "[optimizer]") {
  // F(x) = 1/x + x at x = 2 with the exact Newton direction s = -3:
  // alpha = 1 makes x negative (not PD), alpha = 1/2 fails the Armijo test
  // (F(1/2) = 2.5 > 2.5 - 0.01*2.25/2), alpha = 1/4 is accepted.
  const Instance inst = scalar_toy(2.0);
  ffu::OptimizerConfig cfg;
  const SymMatrix dir = SymMatrix::Constant(1, 1, -3.0);
  const double alpha = ffu::line_search(inst.dec, Covariance{inst.sigma},
                                        inst.targets, 1.0, 1.0, dir, cfg);
  REQUIRE(alpha == Catch::Approx(0.25));
}

TEST_CASE("line_search shrinks steps that leave the PD cone", "[optimizer]") {
  Instance inst;
  inst.dec.b = Matrix::Identity(2, 2);
  inst.dec.l = Matrix::Identity(2, 2);
  inst.targets.c = Vector::Constant(2, 0.01);  // variance side dominates
  inst.sigma = SymMatrix::Identity(2, 2);
  const SymMatrix dir = -2.0 * inst.sigma;  // Sigma + dir is -Sigma: not PD
  ffu::OptimizerConfig cfg;
  const double alpha = ffu::line_search(inst.dec, Covariance{inst.sigma},
                                        inst.targets, 1.0, 1.0, dir, cfg);
  REQUIRE(alpha < 1.0);
  REQUIRE(ffu::try_cholesky(SymMatrix(inst.sigma + alpha * dir)).has_value());
}

TEST_CASE("line_search rejects non-descent directions", "[optimizer]") {
  const Instance inst = scalar_toy(2.0);
  ffu::OptimizerConfig cfg;
  REQUIRE_THROWS_AS(
      ffu::line_search(inst.dec, Covariance{inst.sigma}, inst.targets, 1.0,
                       1.0, SymMatrix::Zero(1, 1), cfg),
      ffu::NotDescentDirection);
  REQUIRE_THROWS_AS(
      ffu::line_search(inst.dec, Covariance{inst.sigma}, inst.targets, 1.0,
                       1.0, SymMatrix::Constant(1, 1, 3.0), cfg),
      ffu::NotDescentDirection);
}

// ---------------------------------------------------------------------------
// initialization
// ---------------------------------------------------------------------------

TEST_CASE("initialize scales the identity to the binding target",
          "[optimizer]") {
  const auto dec = ffu::decompose(twod(), ffu::BasisKind::kIdentity);
  const auto cov = ffu::initialize(dec, ffu::targets_uniform(2, 1.0));
  // diag(L L^T) = [2, 1], so sigma^2 = 0.99 * 1/2.
  REQUIRE(cov.sigma().isApprox(SymMatrix(0.495 * SymMatrix::Identity(2, 2)),
                               1e-12));
}

TEST_CASE("initialize on the pure identity instance gives 0.99 I",
          "[optimizer]") {
  ffu::Workload w;
  w.rows = Matrix::Identity(3, 3);
  w.labels = {"a", "b", "c"};
  const auto dec = ffu::decompose(w, ffu::BasisKind::kIdentity);
  const auto cov = ffu::initialize(dec, ffu::targets_uniform(3, 1.0));
  REQUIRE(cov.sigma().isApprox(SymMatrix(0.99 * SymMatrix::Identity(3, 3)),
                               1e-12));
}

TEST_CASE("initialize leaves one percent slack on every target",
          "[optimizer]") {
  for (const auto& inst : random_instances()) {
    const auto cov = ffu::initialize(inst.dec, inst.targets);
    const Vector vars = ffu::released_variances(inst.dec.l, cov.sigma());
    for (Index j = 0; j < vars.size(); ++j) {
      REQUIRE(vars[j] <= 0.99 * inst.targets.c[j] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("initialize rejects rank-deficient seeds", "[optimizer]") {
  const auto dec = ffu::decompose(twod(), ffu::BasisKind::kIdentity);
  Matrix q(2, 2);
  q << 1, 1, 1, 1;  // singular
  REQUIRE_THROWS_AS(ffu::initialize(dec, ffu::targets_uniform(2, 1.0), q),
                    ffu::SingularInit);
}

// ---------------------------------------------------------------------------
// solve: fitness-for-use
// ---------------------------------------------------------------------------

TEST_CASE("solve recovers the two-dimensional closed form", "[optimizer]") {
  const auto oracle = ffu::twod_fitness(1.0);
  const auto dec = ffu::decompose(twod(), twod().rows);  // B = W, L = I
  const auto res = ffu::solve(dec, ffu::targets_uniform(2, 1.0));
  REQUIRE(res.converged);
  REQUIRE(res.alpha == Catch::Approx(4.0 / 3.0).margin(1e-3));
  // L = I here, so the released covariance is sigma itself.
  REQUIRE((res.sigma.sigma() - oracle.sigma()).cwiseAbs().maxCoeff() < 2e-3);
  REQUIRE(res.variances[0] == Catch::Approx(1.0).margin(1e-3));
  REQUIRE(res.variances[1] == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("solve recovers the identity+sum closed form at d=5", "[optimizer]") {
  const auto oracle = ffu::idsum_fitness(5, 1.0, 1.0);
  const auto dec =
      ffu::decompose(ffu::gen_identity_sum(5), ffu::BasisKind::kIdentity);
  const auto res = ffu::solve(dec, ffu::targets_uniform(6, 1.0));
  REQUIRE(res.converged);
  REQUIRE(res.alpha == Catch::Approx(5.0 / 3.0).margin(1e-3));
  REQUIRE((res.sigma.sigma() - oracle.sigma()).cwiseAbs().maxCoeff() < 2e-3);
  // Sigma = a I + b 11^T with a = (d+1)/d, b = -1/d: diagonal a + b = 1,
  // off-diagonal b = -0.2.
  REQUIRE(res.sigma.sigma()(0, 0) == Catch::Approx(1.0).margin(2e-3));
  REQUIRE(res.sigma.sigma()(0, 1) == Catch::Approx(-0.2).margin(2e-3));
}

TEST_CASE("solve output scales linearly with the targets", "[optimizer]") {
  const auto dec =
      ffu::decompose(ffu::gen_identity_sum(5), ffu::BasisKind::kIdentity);
  const auto base = ffu::solve(dec, ffu::targets_uniform(6, 1.0));
  const auto scaled = ffu::solve(dec, ffu::targets_uniform(6, 4.0));
  REQUIRE((scaled.sigma.sigma() - 4.0 * base.sigma.sigma()).norm() <=
          1e-4 * base.sigma.sigma().norm() * 4.0);
  REQUIRE(std::sqrt(scaled.alpha) ==
          Catch::Approx(0.5 * std::sqrt(base.alpha)).epsilon(1e-4));
}

TEST_CASE("solve result is feasible, binding, and monotone", "[optimizer]") {
  for (Index d : {2, 4, 8}) {
    const auto dec = ffu::decompose(ffu::gen_prefix(d), ffu::BasisKind::kPrefix);
    const auto res = ffu::solve(dec, ffu::targets_uniform(d, 1.0));
    REQUIRE(res.converged);

    // gamma-rescale makes the worst ratio exactly one.
    const double worst = (res.variances.array() /
                          Vector::Ones(d).array()).maxCoeff();
    REQUIRE(worst >= 1.0 - 1e-9);
    REQUIRE(worst <= 1.0 + 1e-6);

    // sigma == sigma_raw / gamma.
    REQUIRE((res.sigma.sigma() * res.gamma - res.sigma_raw.sigma()).norm() <=
            1e-9 * res.sigma_raw.sigma().norm());

    // alpha is the squared cost of the rescaled covariance.
    REQUIRE(res.alpha ==
            Catch::Approx(ffu::squared_privacy_cost(
                              ffu::privacy_profile(dec, res.sigma)))
                .epsilon(1e-12));

    // Objective trace is non-increasing within each smoothing sub-problem.
    for (size_t i = 1; i < res.objective_trace.size(); ++i) {
      const auto& prev = res.objective_trace[i - 1];
      const auto& curr = res.objective_trace[i];
      if (prev.t1 == curr.t1 && prev.t2 == curr.t2) {
        REQUIRE(curr.value <= prev.value + 1e-9 * std::abs(prev.value));
      }
    }

    // Softmax hard-max gap at the final temperature.
    const double t1_final = res.objective_trace.back().t1;
    const double raw_alpha = ffu::squared_privacy_cost(
        ffu::privacy_profile(dec, res.sigma_raw));
    const double soft = ffu::objective(dec, res.sigma_raw,
                                       ffu::targets_uniform(d, 1.0), t1_final,
                                       t1_final) -
                        (res.variances * res.gamma).maxCoeff();
    REQUIRE(soft >= raw_alpha - 1e-9);
  }
}

TEST_CASE("solve is deterministic", "[optimizer]") {
  const auto dec = ffu::decompose(ffu::gen_prefix(4), ffu::BasisKind::kPrefix);
  const auto a = ffu::solve(dec, ffu::targets_uniform(4, 1.0));
  const auto b = ffu::solve(dec, ffu::targets_uniform(4, 1.0));
  REQUIRE(a.sigma.sigma() == b.sigma.sigma());
  REQUIRE(a.iterations == b.iterations);
}

TEST_CASE("solve reports non-convergence at a tiny iteration cap",
          "[optimizer]") {
  const auto dec = ffu::decompose(ffu::gen_prefix(4), ffu::BasisKind::kPrefix);
  ffu::OptimizerConfig cfg;
  cfg.max_iter = 3;
  const auto res = ffu::solve(dec, ffu::targets_uniform(4, 1.0), cfg);
  REQUIRE_FALSE(res.converged);
  // Partial output is still feasible: rescale happens regardless.
  const double worst = res.variances.maxCoeff();
  REQUIRE(worst <= 1.0 + 1e-6);
  REQUIRE(worst >= 1.0 - 1e-9);
}

TEST_CASE("solve falls back to the identity seed when q_init is singular",
          "[optimizer]") {
  const auto dec = ffu::decompose(twod(), twod().rows);
  Matrix q(2, 2);
  q << 1, 1, 1, 1;
  const auto res = ffu::solve(dec, ffu::targets_uniform(2, 1.0),
                              ffu::OptimizerConfig{}, q);
  REQUIRE(res.converged);
  REQUIRE(res.alpha == Catch::Approx(4.0 / 3.0).margin(1e-3));
}

TEST_CASE("solve profile is basis independent on prefix workloads",
          "[optimizer]") {
  for (Index d : {4, 8}) {
    const auto w = ffu::gen_prefix(d);
    const auto res_i =
        ffu::solve(ffu::decompose(w, ffu::BasisKind::kIdentity),
                   ffu::targets_uniform(d, 1.0));
    const auto res_u =
        ffu::solve(ffu::decompose(w, ffu::BasisKind::kPrefix),
                   ffu::targets_uniform(d, 1.0));
    const auto prof_i = ffu::privacy_profile(
        ffu::decompose(w, ffu::BasisKind::kIdentity), res_i.sigma);
    const auto prof_u = ffu::privacy_profile(
        ffu::decompose(w, ffu::BasisKind::kPrefix), res_u.sigma);
    for (Index i = 0; i < d; ++i) {
      REQUIRE(prof_u[i] == Catch::Approx(prof_i[i]).epsilon(1e-4));
    }
    REQUIRE(res_u.alpha == Catch::Approx(res_i.alpha).epsilon(1e-4));
  }
}

TEST_CASE("objective is convex along random chords", "[optimizer]") {
  std::uint64_t seed = 31000;
  for (const auto& inst : random_instances()) {
    const SymMatrix other = random_spd(inst.dec.k(), seed++);
    const SymMatrix mid = 0.5 * (inst.sigma + other);
    const double f_mid = objective_at(inst, mid, 3.0, 5.0);
    const double mean = 0.5 * (objective_at(inst, inst.sigma, 3.0, 5.0) +
                               objective_at(inst, other, 3.0, 5.0));
    REQUIRE(f_mid <= mean + 1e-9 * std::max(1.0, std::abs(mean)));
  }
}

// ---------------------------------------------------------------------------
// solve: sum-squared mode
// ---------------------------------------------------------------------------

TEST_CASE("solve_sum_squared recovers the two-dimensional closed form",
          "[optimizer]") {
  const auto oracle = ffu::twod_sum_squared(1.0);
  const auto dec = ffu::decompose(twod(), twod().rows);  // B = W, L = I
  ffu::OptimizerConfig cfg;
  cfg.tol = 1e-6;
  const auto res = ffu::solve_sum_squared(dec, Vector::Ones(2), 1.0, cfg);
  REQUIRE(res.converged);
  REQUIRE(res.alpha == Catch::Approx(1.0).epsilon(1e-12));  // exact by scaling
  REQUIRE(res.sigma.sigma()(0, 0) == Catch::Approx(oracle.a).epsilon(2e-3));
  REQUIRE(res.sigma.sigma()(0, 1) == Catch::Approx(oracle.c).epsilon(2e-3));
  REQUIRE(res.sigma.sigma()(1, 1) ==
          Catch::Approx(oracle.d_entry).epsilon(2e-3));
  const double total = res.variances.sum();
  REQUIRE(total == Catch::Approx(oracle.objective).epsilon(1e-3));
}

TEST_CASE("solve_sum_squared recovers the identity+sum closed form",
          "[optimizer]") {
  const auto oracle = ffu::idsum_sum_squared(5, 1.0, 1.0);
  const auto dec =
      ffu::decompose(ffu::gen_identity_sum(5), ffu::BasisKind::kIdentity);
  ffu::OptimizerConfig cfg;
  cfg.tol = 1e-6;
  const auto res = ffu::solve_sum_squared(dec, Vector::Ones(6), 1.0, cfg);
  REQUIRE(res.converged);
  // Sigma = a I + b 11^T: diagonal entries are a + b, off-diagonals are b.
  REQUIRE(res.sigma.sigma()(0, 0) ==
          Catch::Approx(oracle.a + oracle.b).epsilon(1e-3));
  REQUIRE(res.sigma.sigma()(0, 1) == Catch::Approx(oracle.b).epsilon(1e-2));
  REQUIRE((res.sigma.sigma() - oracle.sigma()).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("solve_sum_squared is invariant to weight scaling", "[optimizer]") {
  const auto dec =
      ffu::decompose(ffu::gen_identity_sum(5), ffu::BasisKind::kIdentity);
  ffu::OptimizerConfig cfg;
  cfg.tol = 1e-6;
  const auto res1 = ffu::solve_sum_squared(dec, Vector::Ones(6), 1.0, cfg);
  const auto res2 =
      ffu::solve_sum_squared(dec, Vector(2.0 * Vector::Ones(6)), 1.0, cfg);
  REQUIRE((res1.sigma.sigma() - res2.sigma.sigma()).norm() <=
          1e-5 * res1.sigma.sigma().norm());
}

TEST_CASE("solve_sum_squared hits the requested budget exactly",
          "[optimizer]") {
  const auto dec = ffu::decompose(ffu::gen_prefix(4), ffu::BasisKind::kPrefix);
  for (double beta2 : {0.5, 1.0, 2.0}) {
    const auto res = ffu::solve_sum_squared(dec, Vector::Ones(4), beta2);
    REQUIRE(res.alpha == Catch::Approx(beta2).epsilon(1e-9));
    const double check = ffu::squared_privacy_cost(
        ffu::privacy_profile(dec, res.sigma));
    REQUIRE(check == Catch::Approx(beta2).epsilon(1e-9));
  }
}

TEST_CASE("solve_sum_squared rejects bad weights", "[optimizer]") {
  const auto dec = ffu::decompose(ffu::gen_prefix(3), ffu::BasisKind::kPrefix);
  Vector weights = Vector::Ones(3);
  weights[1] = 0.0;
  REQUIRE_THROWS_AS(ffu::solve_sum_squared(dec, weights, 1.0),
                    ffu::NonPositive);
  REQUIRE_THROWS_AS(ffu::solve_sum_squared(dec, Vector::Ones(3), 0.0),
                    ffu::NonPositive);
}

// ---------------------------------------------------------------------------
// config plumbing
// ---------------------------------------------------------------------------

TEST_CASE("optimizer config validates and loads from JSON", "[optimizer]") {
  ffu::OptimizerConfig cfg;
  REQUIRE_NOTHROW(ffu::validate(cfg));
  cfg.mu = 1.0;
  REQUIRE_THROWS_AS(ffu::validate(cfg), ffu::OutOfRange);
  cfg.mu = 10.0;
  cfg.ls_beta = 1.0;
  REQUIRE_THROWS_AS(ffu::validate(cfg), ffu::OutOfRange);

  const nlohmann::json j = {{"mu", 5.0}, {"max_cg", 8}, {"tol", 1e-4}};
  const auto loaded = j.get<ffu::OptimizerConfig>();
  REQUIRE(loaded.mu == 5.0);
  REQUIRE(loaded.max_cg == 8);
  REQUIRE(loaded.tol == 1e-4);
  REQUIRE(loaded.nttol == 1e-6);       // untouched default
  REQUIRE(loaded.ls_sigma == 0.01);    // untouched default
  REQUIRE(loaded.lambda_total == 0.0);

  const nlohmann::json bad = {{"mu", 0.5}};
  REQUIRE_THROWS_AS(bad.get<ffu::OptimizerConfig>(), ffu::OutOfRange);
}
