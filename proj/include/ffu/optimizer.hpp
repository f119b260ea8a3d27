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

#ifndef FFU_OPTIMIZER_HPP_
#define FFU_OPTIMIZER_HPP_

#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ffu/errors.hpp"
#include "ffu/matrix.hpp"
#include "ffu/privacy.hpp"
#include "ffu/workload.hpp"

namespace ffu {

struct OptimizerConfig {
  double t1_init = 1.0;       // initial privacy-side smoothing
  double t2_init = 1.0;       // initial variance-side smoothing
  double mu = 10.0;           // smoothing growth factor per sub-problem
  Index max_iter = 2000;      // outer-loop iteration cap
  double nttol = 1e-6;        // Newton-decrement tolerance |<s, grad>|
  double tol = 1e-3;          // duality-gap tolerance (d+m)/t1
  Index max_cg = 5;           // conjugate-gradient iteration cap
  double tol2 = 1e-10;        // conjugate-gradient residual tolerance
  double ls_sigma = 0.01;     // Armijo sufficient-decrease constant
  double ls_beta = 0.5;       // backtracking factor
  double lambda_total = 0.0;  // weight of the optional total-error term
};

inline void validate(const OptimizerConfig& cfg) {
  if (!(cfg.mu > 1)) throw OutOfRange("config: mu must be > 1");
  if (!(cfg.nttol > 0 && cfg.tol > 0 && cfg.tol2 > 0)) {
    throw OutOfRange("config: tolerances must be > 0");
  }
  if (!(cfg.t1_init > 0 && cfg.t2_init > 0)) {
    throw OutOfRange("config: initial smoothing must be > 0");
  }
  if (cfg.max_iter < 1 || cfg.max_cg < 1) {
    throw OutOfRange("config: iteration caps must be >= 1");
  }
  if (!(cfg.ls_beta > 0 && cfg.ls_beta < 1)) {
    throw OutOfRange("config: need 0 < ls_beta < 1");
  }
  if (!(cfg.ls_sigma > 0 && cfg.ls_sigma < 1)) {
    throw OutOfRange("config: need 0 < ls_sigma < 1");
  }
  if (cfg.lambda_total < 0) throw OutOfRange("config: lambda_total >= 0");
}

inline void from_json(const nlohmann::json& j, OptimizerConfig& cfg) {
  cfg.t1_init = j.value("t1_init", cfg.t1_init);
  cfg.t2_init = j.value("t2_init", cfg.t2_init);
  cfg.mu = j.value("mu", cfg.mu);
  cfg.max_iter = j.value("max_iter", cfg.max_iter);
  cfg.nttol = j.value("nttol", cfg.nttol);
  cfg.tol = j.value("tol", cfg.tol);
  cfg.max_cg = j.value("max_cg", cfg.max_cg);
  cfg.tol2 = j.value("tol2", cfg.tol2);
  cfg.ls_sigma = j.value("ls_sigma", cfg.ls_sigma);
  cfg.ls_beta = j.value("ls_beta", cfg.ls_beta);
  cfg.lambda_total = j.value("lambda_total", cfg.lambda_total);
  validate(cfg);
}

inline void to_json(nlohmann::json& j, const OptimizerConfig& cfg) {
  j = {{"t1_init", cfg.t1_init}, {"t2_init", cfg.t2_init},
       {"mu", cfg.mu},           {"max_iter", cfg.max_iter},
       {"nttol", cfg.nttol},     {"tol", cfg.tol},
       {"max_cg", cfg.max_cg},   {"tol2", cfg.tol2},
       {"ls_sigma", cfg.ls_sigma}, {"ls_beta", cfg.ls_beta},
       {"lambda_total", cfg.lambda_total}};
}

struct TracePoint {
  double t1 = 0.0;
  double t2 = 0.0;
  double value = 0.0;
};

struct SolveResult {
  Covariance sigma;      // rescaled output, meets every target
  Covariance sigma_raw;  // raw optimum of the smoothed objective
  double gamma = 1.0;    // sigma == sigma_raw / gamma entrywise
  double alpha = 0.0;    // squared privacy cost of sigma
  Index iterations = 0;
  bool converged = false;
  std::vector<TracePoint> objective_trace;  // one point per accepted step
  Vector variances;  // released per-query variances of sigma
};

namespace detail {

inline double frob_inner(const SymMatrix& a, const SymMatrix& b) {
  return a.cwiseProduct(b).sum();
}

// The smoothed objective over symmetric positive definite Sigma:
//
//   F(Sigma) = (1/t1) log sum_i exp(t1 * g_i)            (privacy side)
//            + (1/t2) log sum_j exp(t2 * h_j)            (variance side)
//            + sum_j lin_w_j * v_j Sigma v_j^T           (linear side)
//
// with g_i = b_i^T Sigma^{-1} b_i over columns b_i of B and
// h_j = v_j Sigma v_j^T / c_j over rows v_j of L.  The variance softmax is
// dropped in total-error mode (softmax_h = false); the linear side carries
// either the total-error weights or the lambda hybrid term (lin_w = lambda).
struct SmoothProblem {
  const Matrix& b;  // k x d
  const Matrix& l;  // m x k
  Vector c;         // m, softmax variance targets (softmax_h mode)
  Vector lin_w;     // m or empty, linear variance weights
  double t1 = 1.0;
  double t2 = 1.0;
  bool softmax_h = true;
  SymMatrix lin_grad;  // L^T diag(lin_w) L, precomputed (empty if no lin_w)

  SmoothProblem(const Matrix& b_in, const Matrix& l_in, Vector c_in,
                Vector lin_w_in, double t1_in, double t2_in, bool softmax_h_in)
      : b(b_in),
        l(l_in),
        c(std::move(c_in)),
        lin_w(std::move(lin_w_in)),
        t1(t1_in),
        t2(t2_in),
        softmax_h(softmax_h_in) {
    if (lin_w.size() > 0) {
      lin_grad = symmetrized(l.transpose() * lin_w.asDiagonal() * l);
    }
  }
};

// Shifted softmax: given x and temperature t, returns normalized weights
// exp(t*(x - max)) / Z and the log-sum-exp value max + log(Z)/t.
inline std::pair<Vector, double> shifted_softmax(const Vector& x, double t) {
  const double xmax = x.maxCoeff();
  Vector w = (t * (x.array() - xmax)).exp();
  const double z = w.sum();
  w /= z;
  return {std::move(w), xmax + std::log(z) / t};
}

// Everything the optimizer needs at one iterate, computed in one pass.
struct EvalState {
  CholeskyFactor chol;  // of Sigma
  Matrix s_inv;         // Sigma^{-1}
  Matrix u;             // Sigma^{-1} B, columns u_i
  Vector g, p;          // privacy terms and their softmax weights (d)
  Vector h, q;          // variance terms and weights (m; softmax_h only)
  double value = 0.0;
  SymMatrix grad;
  SymMatrix m_mat;  // sum_i p_i u_i u_i^T  ( = -privacy gradient)
  SymMatrix hbar;   // L^T diag(q / c) L    ( = variance-softmax gradient)
};

inline EvalState evaluate(const SmoothProblem& prob, const SymMatrix& sigma) {
  EvalState st{cholesky(sigma)};
  st.s_inv = inverse_spd(st.chol);
  st.u = st.chol.solve(prob.b);
  const Index d = prob.b.cols();
  st.g = Vector(d);
  for (Index i = 0; i < d; ++i) st.g(i) = prob.b.col(i).dot(st.u.col(i));
  auto [p, lse1] = shifted_softmax(st.g, prob.t1);
  st.p = std::move(p);
  st.value = lse1;
  st.m_mat = symmetrized(st.u * st.p.asDiagonal() * st.u.transpose());
  st.grad = -st.m_mat;
  const Matrix ls = prob.l * sigma;  // m x k
  const Vector lvars = ls.cwiseProduct(prob.l).rowwise().sum();
  if (prob.softmax_h) {
    st.h = lvars.cwiseQuotient(prob.c);
    auto [q, lse2] = shifted_softmax(st.h, prob.t2);
    st.q = std::move(q);
    st.value += lse2;
    st.hbar = symmetrized(prob.l.transpose() *
                          st.q.cwiseQuotient(prob.c).asDiagonal() * prob.l);
    st.grad += st.hbar;
  }
  if (prob.lin_w.size() > 0) {
    st.value += lvars.dot(prob.lin_w);
    st.grad += prob.lin_grad;
  }
  return st;
}

// Objective value alone, for line-search trials; nullopt if sigma is not
// positive definite.
inline std::optional<double> value_only(const SmoothProblem& prob,
                                        const SymMatrix& sigma) {
  auto chol = try_cholesky(sigma);
  if (!chol) return std::nullopt;
  const Matrix u = chol->solve(prob.b);
  Vector g(prob.b.cols());
  for (Index i = 0; i < g.size(); ++i) g(i) = prob.b.col(i).dot(u.col(i));
  double value = shifted_softmax(g, prob.t1).second;
  const Vector lvars =
      (prob.l * sigma).cwiseProduct(prob.l).rowwise().sum();
  if (prob.softmax_h) {
    value += shifted_softmax(lvars.cwiseQuotient(prob.c), prob.t2).second;
  }
  if (prob.lin_w.size() > 0) value += lvars.dot(prob.lin_w);
  return value;
}

// Action of the Hessian of F on a symmetric direction P, without ever
// materializing the k^2 x k^2 operator.  Writing S = Sigma^{-1} and
// M = sum_i p_i u_i u_i^T, the pieces are:
//
//   sum_i p_i (d^2 g_i)        = (M kron S + S kron M) vec(P)
//                              = S P M + M P S               (kron_apply)
//   t1 * softmax curvature (g) = t1 [ sum_i p_i s_i u_i u_i^T - (p.s) M ]
//                                with s_i = u_i^T P u_i
//   t2 * softmax curvature (h) = t2 [ L^T diag(q y / c^2) L - tr(hbar P) hbar ]
//                                with y_j = v_j P v_j^T
//
// h_j and the linear side are affine in Sigma, so they add no d^2 term.
inline SymMatrix hvp(const SmoothProblem& prob, const EvalState& st,
                     const SymMatrix& dir) {
  SymMatrix out = kron_apply(st.m_mat, st.s_inv, dir) +
                  kron_apply(st.s_inv, st.m_mat, dir);
  const Matrix pu = dir * st.u;  // k x d
  const Vector s = st.u.cwiseProduct(pu).colwise().sum();
  const Vector w1 = prob.t1 * st.p.cwiseProduct(s);
  out.noalias() += st.u * w1.asDiagonal() * st.u.transpose();
  out.noalias() -= (prob.t1 * st.p.dot(s)) * st.m_mat;
  if (prob.softmax_h) {
    const Matrix lp = prob.l * dir;  // m x k
    const Vector y = lp.cwiseProduct(prob.l).rowwise().sum();
    const Vector qy = st.q.cwiseProduct(y).cwiseQuotient(prob.c);
    const Vector w2 = prob.t2 * qy.cwiseQuotient(prob.c);
    out.noalias() += prob.l.transpose() * w2.asDiagonal() * prob.l;
    out.noalias() -= (prob.t2 * qy.sum()) * st.hbar;
  }
  return symmetrized(out);
}

// Truncated conjugate gradient on (d^2 F) s = -grad F with Frobenius inner
// products.  Non-positive curvature (round-off only; F is convex) aborts the
// loop keeping the accumulated direction; a non-descent result falls back to
// steepest descent.
inline SymMatrix cg_direction(const SmoothProblem& prob, const EvalState& st,
                              Index max_cg, double tol2) {
  SymMatrix s = SymMatrix::Zero(st.grad.rows(), st.grad.cols());
  if (frob_inner(st.grad, st.grad) == 0.0) return s;
  SymMatrix r = -st.grad;
  SymMatrix p = r;
  double rsold = frob_inner(r, r);
  for (Index i = 0; i < max_cg; ++i) {
    const SymMatrix hp = hvp(prob, st, p);
    const double php = frob_inner(p, hp);
    if (!(php > 0)) break;  // curvature breakdown (also catches NaN)
    const double a = rsold / php;
    s += a * p;
    r -= a * hp;
    const double rsnew = frob_inner(r, r);
    if (rsnew <= tol2) break;
    p = r + (rsnew / rsold) * p;
    rsold = rsnew;
  }
  if (frob_inner(s, st.grad) >= 0) s = -st.grad;
  return s;
}

// Backtracking line search over alpha in {1, beta, ..., beta^40}: the step
// must keep Sigma positive definite (Cholesky check) and satisfy the Armijo
// condition F(Sigma + alpha s) <= F(Sigma) + alpha * ls_sigma * <s, grad>.
inline constexpr int kMaxLineSearchTrials = 41;

inline double line_search_impl(const SmoothProblem& prob, const EvalState& st,
                               const SymMatrix& sigma, const SymMatrix& dir,
                               const OptimizerConfig& cfg) {
  const double delta = frob_inner(dir, st.grad);
  if (!(delta < 0)) {
    throw NotDescentDirection("line search: <s, grad> = " +
                              std::to_string(delta) + " is not negative");
  }
  double alpha = 1.0;
  for (int j = 0; j < kMaxLineSearchTrials; ++j) {
    const auto trial = value_only(prob, symmetrized(sigma + alpha * dir));
    if (trial && *trial <= st.value + alpha * cfg.ls_sigma * delta) {
      return alpha;
    }
    alpha *= cfg.ls_beta;
  }
  throw NoStep("line search: no acceptable step in " +
               std::to_string(kMaxLineSearchTrials) + " trials");
}

// Outer smoothing loop shared by the target-driven and total-error modes.
// Runs Newton-CG to (approximate) stationarity of the current sub-problem,
// then sharpens t1, t2 until the smoothing gap (d+m)/t1 falls below tol.
struct RawSolution {
  SymMatrix sigma;
  Index iterations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

inline RawSolution outer_loop(SmoothProblem& prob, SymMatrix sigma,
                              const OptimizerConfig& cfg) {
  const double gap_terms =
      static_cast<double>(prob.b.cols() + prob.l.rows());
  RawSolution out;
  EvalState st = evaluate(prob, sigma);
  out.trace.push_back({prob.t1, prob.t2, st.value});
  Index iter = 0;
  for (; iter < cfg.max_iter; ++iter) {
    const SymMatrix s = cg_direction(prob, st, cfg.max_cg, cfg.tol2);
    const double delta = frob_inner(s, st.grad);
    if (std::abs(delta) < cfg.nttol) {
      if (gap_terms / prob.t1 < cfg.tol) {
        out.converged = true;
        break;
      }
      prob.t1 *= cfg.mu;
      prob.t2 *= cfg.mu;
      st = evaluate(prob, sigma);
      out.trace.push_back({prob.t1, prob.t2, st.value});
      continue;
    }
    double alpha;
    try {
      alpha = line_search_impl(prob, st, sigma, s, cfg);
    } catch (const NoStep&) {
      break;  // stall: return the partial result, converged = false
    }
    sigma = symmetrized(sigma + alpha * s);
    st = evaluate(prob, sigma);
    out.trace.push_back({prob.t1, prob.t2, st.value});
  }
  out.iterations = iter;
  out.sigma = std::move(sigma);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

namespace detail {

inline SmoothProblem fitness_problem(const Decomposition& dec,
                                     const VarianceTargets& targets, double t1,
                                     double t2, double lambda_total) {
  if (targets.c.size() != dec.m()) {
    throw DimensionMismatch("targets length does not match query count");
  }
  validate(targets);
  Vector lin_w;
  if (lambda_total > 0) lin_w = Vector::Constant(dec.m(), lambda_total);
  return SmoothProblem(dec.b, dec.l, targets.c, std::move(lin_w), t1, t2,
                       /*softmax_h=*/true);
}

}  // namespace detail

inline double objective(const Decomposition& dec, const Covariance& cov,
                        const VarianceTargets& targets, double t1, double t2,
                        double lambda_total = 0.0) {
  const auto prob =
      detail::fitness_problem(dec, targets, t1, t2, lambda_total);
  return detail::evaluate(prob, cov.sigma()).value;
}

inline SymMatrix gradient(const Decomposition& dec, const Covariance& cov,
                          const VarianceTargets& targets, double t1, double t2,
                          double lambda_total = 0.0) {
  const auto prob =
      detail::fitness_problem(dec, targets, t1, t2, lambda_total);
  return detail::evaluate(prob, cov.sigma()).grad;
}

inline SymMatrix hess_times_vec(const Decomposition& dec,
                                const Covariance& cov,
                                const VarianceTargets& targets, double t1,
                                double t2, const SymMatrix& direction) {
  const auto prob = detail::fitness_problem(dec, targets, t1, t2, 0.0);
  const auto st = detail::evaluate(prob, cov.sigma());
  return detail::hvp(prob, st, symmetrized(direction));
}

inline SymMatrix conjugate_gradient(const Decomposition& dec,
                                    const Covariance& cov,
                                    const VarianceTargets& targets, double t1,
                                    double t2,
                                    const OptimizerConfig& cfg = {}) {
  const auto prob = detail::fitness_problem(dec, targets, t1, t2, 0.0);
  const auto st = detail::evaluate(prob, cov.sigma());
  return detail::cg_direction(prob, st, cfg.max_cg, cfg.tol2);
}

inline double line_search(const Decomposition& dec, const Covariance& cov,
                          const VarianceTargets& targets, double t1, double t2,
                          const SymMatrix& direction,
                          const OptimizerConfig& cfg = {}) {
  const auto prob = detail::fitness_problem(dec, targets, t1, t2, 0.0);
  const auto st = detail::evaluate(prob, cov.sigma());
  return detail::line_search_impl(prob, st, cov.sigma(), direction, cfg);
}

// Feasible start: Sigma_0 = sigma^2 (B Q^+)(B Q^+)^T with
// sigma^2 = 0.99 * min_j c_j / diag(L (B Q^+)(B Q^+)^T L^T)_j, so every
// variance constraint starts with at least 1% slack.  Q defaults to the
// identity over the domain (Sigma_0 proportional to B B^T).
inline Covariance initialize(const Decomposition& dec,
                             const VarianceTargets& targets, const Matrix& q) {
  validate(targets);
  if (targets.c.size() != dec.m()) {
    throw DimensionMismatch("targets length does not match query count");
  }
  if (q.cols() != dec.d()) {
    throw DimensionMismatch("init matrix q must have d columns");
  }
  const Matrix bq = dec.b * pseudo_inverse(q);
  const SymMatrix base = symmetrized(bq * bq.transpose());
  if (!try_cholesky(base)) {
    throw SingularInit("init matrix q leaves (B Q^+)(B Q^+)^T singular");
  }
  const Vector diag = released_variances(dec.l, base);
  if (!(diag.minCoeff() > 0)) {
    throw SingularInit("a query has zero variance under the init covariance");
  }
  const double sigma2 =
      0.99 * (targets.c.array() / diag.array()).minCoeff();
  return Covariance(sigma2 * base);
}

inline Covariance initialize(const Decomposition& dec,
                             const VarianceTargets& targets) {
  return initialize(dec, targets, Matrix::Identity(dec.d(), dec.d()));
}

namespace detail {

inline SolveResult finish_fitness(const Decomposition& dec,
                                  const VarianceTargets& targets,
                                  RawSolution raw) {
  const Vector vars_raw = released_variances(dec.l, raw.sigma);
  const double gamma = (vars_raw.array() / targets.c.array()).maxCoeff();
  if (!(gamma > 0)) throw NonPositive("non-positive variance ratio at optimum");
  Covariance sigma(raw.sigma / gamma);
  Covariance sigma_raw(raw.sigma);
  const double alpha = squared_privacy_cost(privacy_profile(dec.b, sigma));
  Vector variances = released_variances(dec.l, sigma.sigma());
  return SolveResult{std::move(sigma),    std::move(sigma_raw),
                     gamma,               alpha,
                     raw.iterations,      raw.converged,
                     std::move(raw.trace), std::move(variances)};
}

}  // namespace detail

// Target-driven solve: minimizes the smoothed max privacy exposure subject
// (softly) to the per-query variance targets, then rescales by
// gamma = max_j v_j Sigma v_j^T / c_j so the worst target binds exactly.
inline SolveResult solve(const Decomposition& dec,
                         const VarianceTargets& targets,
                         const OptimizerConfig& cfg, const Matrix& q_init) {
  validate(cfg);
  auto prob = detail::fitness_problem(dec, targets, cfg.t1_init, cfg.t2_init,
                                      cfg.lambda_total);
  Covariance start = [&] {
    try {
      return initialize(dec, targets, q_init);
    } catch (const SingularInit&) {
      return initialize(dec, targets);  // fall back to Q = I
    }
  }();
  return detail::finish_fitness(dec, targets,
                                detail::outer_loop(prob, start.sigma(), cfg));
}

inline SolveResult solve(const Decomposition& dec,
                         const VarianceTargets& targets,
                         const OptimizerConfig& cfg = {}) {
  validate(cfg);
  auto prob = detail::fitness_problem(dec, targets, cfg.t1_init, cfg.t2_init,
                                      cfg.lambda_total);
  const Covariance start = initialize(dec, targets);
  return detail::finish_fitness(dec, targets,
                                detail::outer_loop(prob, start.sigma(), cfg));
}

// Total-error solve: keeps the privacy softmax but replaces the per-query
// variance softmax with the linear term sum_j w_j v_j Sigma v_j^T.  Both
// sides are homogeneous of opposite degree in Sigma, so the unconstrained
// optimum rescaled to the requested squared-cost budget beta_squared is the
// optimum of the budget-constrained problem.
inline SolveResult solve_sum_squared(const Decomposition& dec,
                                     const Vector& weights,
                                     double beta_squared,
                                     const OptimizerConfig& cfg = {}) {
  validate(cfg);
  if (weights.size() != dec.m()) {
    throw DimensionMismatch("weights length does not match query count");
  }
  if (!(weights.minCoeff() > 0)) {
    throw NonPositive("total-error weights must be > 0");
  }
  if (!(beta_squared > 0)) {
    throw NonPositive("squared-cost budget must be > 0");
  }
  detail::SmoothProblem prob(dec.b, dec.l, Vector(), weights, cfg.t1_init,
                             cfg.t2_init, /*softmax_h=*/false);
  // Balanced start: treat 1/w_j as a pro-forma variance target.
  const VarianceTargets init_targets{weights.cwiseInverse()};
  const Covariance start = initialize(dec, init_targets);
  detail::RawSolution raw = detail::outer_loop(prob, start.sigma(), cfg);
  Covariance sigma_raw(raw.sigma);
  const double alpha_raw =
      squared_privacy_cost(privacy_profile(dec.b, sigma_raw));
  const double gamma = beta_squared / alpha_raw;
  Covariance sigma(raw.sigma / gamma);
  const double alpha = squared_privacy_cost(privacy_profile(dec.b, sigma));
  Vector variances = released_variances(dec.l, sigma.sigma());
  return SolveResult{std::move(sigma),    std::move(sigma_raw),
                     gamma,               alpha,
                     raw.iterations,      raw.converged,
                     std::move(raw.trace), std::move(variances)};
}

inline nlohmann::json trace_to_json(const std::vector<TracePoint>& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& pt : trace) {
    arr.push_back({{"t1", pt.t1}, {"t2", pt.t2}, {"value", pt.value}});
  }
  return arr;
}

}  // namespace ffu

#endif  // FFU_OPTIMIZER_HPP_
