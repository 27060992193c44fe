// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <vector>

#include "sbdbp/common.hpp"

namespace sbdbp::fft {

// In-place DFT, engineering sign convention (forward kernel e^{-j2πkn/n}).
// Forward is unnormalized; inverse scales by 1/n. Plans are cached per size
// and planning is serialized, so concurrent transforms are safe.
void forward(std::vector<cplx>& x);
void inverse(std::vector<cplx>& x);

// Angular frequency grid in rad/s matching the DFT bin layout
// (bin k -> 2π·k·fs/n for k < n/2, negative branch above).
std::vector<double> omega_grid(std::size_t n, double sample_rate_hz);

}  // namespace sbdbp::fft
