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

// Umbrella header: fitness-for-use correlated Gaussian noise calibration.

#ifndef FFU_FFU_HPP_
#define FFU_FFU_HPP_

#include "ffu/baselines.hpp"
#include "ffu/errors.hpp"
#include "ffu/io.hpp"
#include "ffu/matrix.hpp"
#include "ffu/optimizer.hpp"
#include "ffu/oracles.hpp"
#include "ffu/privacy.hpp"
#include "ffu/release.hpp"
#include "ffu/workload.hpp"

namespace ffu {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ffu

#endif  // FFU_FFU_HPP_
