// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <vector>

#include "sbdbp/common.hpp"

namespace sbdbp {

// Solves A x = b for dense square A (row-major), Gaussian elimination with
// partial pivoting. Throws on singular systems.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, int n);

}  // namespace sbdbp
