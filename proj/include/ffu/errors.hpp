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

#ifndef FFU_ERRORS_HPP_
#define FFU_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ffu {

// Base class for all library errors so callers can catch everything with one
// handler (the CLI maps these to exit code 1).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A matrix expected to be symmetric positive definite has a non-positive
// pivot.  During line search this is ordinary control flow (the step is
// rejected); elsewhere it is a hard error.
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(const std::string& what) : Error(what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

// An explicit basis cannot represent the workload (least-squares residual
// above tolerance).
class NotInRowSpace : public Error {
 public:
  explicit NotInRowSpace(const std::string& what) : Error(what) {}
};

// Requested point lies outside the invertible range of a curve (e.g. a delta
// not attainable below the epsilon search cap).
class OutOfRange : public Error {
 public:
  explicit OutOfRange(const std::string& what) : Error(what) {}
};

// Closed-form oracle called outside its theorem hypotheses.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

// A strictly positive quantity (variance target, smoothing weight, budget)
// was zero or negative.
class NonPositive : public Error {
 public:
  explicit NonPositive(const std::string& what) : Error(what) {}
};

class NonPositiveTarget : public NonPositive {
 public:
  explicit NonPositiveTarget(const std::string& what) : NonPositive(what) {}
};

// The initialization matrix Q+ (Q+)^T is numerically singular; callers should
// fall back to Q = I.
class SingularInit : public Error {
 public:
  explicit SingularInit(const std::string& what) : Error(what) {}
};

// Backtracking line search exhausted its trial steps without finding a
// positive-definite sufficient-decrease point (convergence stall).
class NoStep : public Error {
 public:
  explicit NoStep(const std::string& what) : Error(what) {}
};

// line_search was handed a direction with <s, grad F> >= 0.
class NotDescentDirection : public Error {
 public:
  explicit NotDescentDirection(const std::string& what) : Error(what) {}
};

// Composed problem exceeds the dense-storage cap.
class SizeLimit : public Error {
 public:
  explicit SizeLimit(const std::string& what) : Error(what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

class NegativeCount : public Error {
 public:
  explicit NegativeCount(const std::string& what) : Error(what) {}
};

}  // namespace ffu

#endif  // FFU_ERRORS_HPP_
